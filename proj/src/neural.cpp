#include "mpsc/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/QR>

namespace mpsc::neural {

namespace {

template <typename S>
using Arr = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return (S(1) / (S(1) + (-z.array()).exp())).matrix();
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t gates(BranchType type) { return type == BranchType::Lstm ? 4 : 3; }

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

template <typename S>
void check_cell(const RecurrentLayer<S>& p, std::size_t gate_count, const Mat<S>& x,
                const Mat<S>& h) {
  const auto H = p.U.cols();
  require(p.U.rows() == static_cast<Eigen::Index>(gate_count) * H, "recurrent matrix rows");
  require(p.W.rows() == p.U.rows() && p.b.rows() == p.U.rows() && p.b.cols() == 1,
          "gate parameter rows");
  require(x.rows() == p.W.cols(), "input size");
  require(h.rows() == H && h.cols() == x.cols(), "state size");
}

// Inverted dropout scale: 0 with probability p, otherwise 1 / (1 - p).
template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Mat<S> m(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform() < p ? S(0) : keep;
  }
  return m;
}

double gaussian(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename S>
Mat<S> glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<S>(rng.uniform(-limit, limit));
  }
  return m;
}

// rows x cols (rows >= cols) with orthonormal columns.
template <typename S>
Mat<S> orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat<double> a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = gaussian(rng);
  }
  Eigen::HouseholderQR<Mat<double>> qr(a);
  Mat<double> q = qr.householderQ() * Mat<double>::Identity(rows, cols);
  const Mat<double> r = qr.matrixQR();
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q.cast<S>();
}

template <typename S>
void zero_masked_columns(Mat<S>& m, const Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask,
                         std::size_t t) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (!mask(static_cast<Eigen::Index>(t), j)) m.col(j).setZero();
  }
}

template <typename S>
void carry_masked_columns(Mat<S>& next, const Mat<S>& prev,
                          const Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask,
                          std::size_t t) {
  for (Eigen::Index j = 0; j < next.cols(); ++j) {
    if (!mask(static_cast<Eigen::Index>(t), j)) next.col(j) = prev.col(j);
  }
}

}  // namespace

std::string_view branch_name(BranchType type) {
  switch (type) {
    case BranchType::Lstm:
      return "lstm";
    case BranchType::Gru:
      return "gru";
    case BranchType::EncoderAdapter:
      return "encoder";
  }
  return "?";
}

BranchType parse_branch_name(std::string_view name) {
  if (name == "lstm") return BranchType::Lstm;
  if (name == "gru") return BranchType::Gru;
  if (name == "encoder") return BranchType::EncoderAdapter;
  throw InputError("unknown model branch '" + std::string(name) + "'");
}

ModelConfig ModelConfig::defaults(BranchType type, std::size_t input_dimension) {
  ModelConfig c;
  c.branch_type = type;
  c.input_dimension = input_dimension;
  c.head_size = type == BranchType::EncoderAdapter ? 128 : 32;
  return c;
}

std::size_t ModelConfig::branch_output() const {
  if (!use_lexical) return 0;
  if (branch_type == BranchType::EncoderAdapter) return input_dimension;
  return layer_sizes.empty() ? 0 : layer_sizes.back();
}

void ModelConfig::validate() const {
  if (!use_lexical && !use_syntactic) throw InputError("model needs lexical or syntactic input");
  if (use_lexical && input_dimension == 0) throw InputError("input_dimension must be positive");
  if (recurrent()) {
    if (layer_sizes.empty()) throw InputError("recurrent branch needs at least one layer");
    for (auto s : layer_sizes) {
      if (s == 0) throw InputError("layer sizes must be positive");
    }
  }
  if (head_size == 0) throw InputError("head_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("dropout must be in [0, 1)");
  if (max_len == 0) throw InputError("max_len must be positive");
}

template <typename S>
Weights<S> Weights<S>::zeros(const ModelConfig& config) {
  Weights<S> w;
  if (config.recurrent()) {
    const auto g = static_cast<Eigen::Index>(gates(config.branch_type));
    auto in = static_cast<Eigen::Index>(config.input_dimension);
    for (auto size : config.layer_sizes) {
      const auto h = static_cast<Eigen::Index>(size);
      w.layers.push_back({Mat<S>::Zero(g * h, in), Mat<S>::Zero(g * h, h), Mat<S>::Zero(g * h, 1)});
      in = h;
    }
  }
  const auto head = static_cast<Eigen::Index>(config.head_size);
  w.head_W = Mat<S>::Zero(head, static_cast<Eigen::Index>(config.head_input()));
  w.head_b = Mat<S>::Zero(head, 1);
  w.out_W = Mat<S>::Zero(1, head);
  w.out_b = Mat<S>::Zero(1, 1);
  return w;
}

template <typename S>
std::size_t Weights<S>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat<S>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename S>
bool Weights<S>::operator==(const Weights& other) const {
  std::vector<const Mat<S>*> a, b;
  visit([&](const std::string&, const Mat<S>& m) { a.push_back(&m); });
  other.visit([&](const std::string&, const Mat<S>& m) { b.push_back(&m); });
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) return false;
    if (!(a[i]->array() == b[i]->array()).all()) return false;
  }
  return true;
}

template <typename S>
Weights<S> initialize_weights(const ModelConfig& config, Rng& rng) {
  config.validate();
  Weights<S> w = Weights<S>::zeros(config);
  for (auto& layer : w.layers) {
    layer.W = glorot<S>(layer.W.rows(), layer.W.cols(), rng);
    layer.U = orthogonal<S>(layer.U.rows(), layer.U.cols(), rng);
    if (config.branch_type == BranchType::Lstm) {
      const auto h = layer.U.cols();
      layer.b.middleRows(h, h).setOnes();
    }
  }
  w.head_W = glorot<S>(w.head_W.rows(), w.head_W.cols(), rng);
  w.out_W = glorot<S>(w.out_W.rows(), w.out_W.cols(), rng);
  return w;
}

// ---- cells ----

template <typename S>
void lstm_forward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                       const Mat<S>& c, LstmStep<S>& out) {
  const auto H = p.U.cols();
  Mat<S> z(p.W.rows(), x.cols());
  z.noalias() = p.W * x;
  z.noalias() += p.U * h;
  z.colwise() += p.b.col(0);
  out.i = sigmoid(z.topRows(H));
  out.f = sigmoid(z.middleRows(H, H));
  out.g = z.middleRows(2 * H, H).array().tanh().matrix();
  out.o = sigmoid(z.bottomRows(H));
  out.c = (out.f.array() * c.array() + out.i.array() * out.g.array()).matrix();
  out.tanh_c = out.c.array().tanh().matrix();
  out.h = (out.o.array() * out.tanh_c.array()).matrix();
}

template <typename S>
void lstm_backward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                        const Mat<S>& c, const LstmStep<S>& st, const Mat<S>& dh_out,
                        const Mat<S>& dc_out, RecurrentLayer<S>& grads, Mat<S>* dx, Mat<S>& dh,
                        Mat<S>& dc) {
  const auto H = p.U.cols();
  const Arr<S> dct = dc_out.array() + dh_out.array() * st.o.array() *
                                          (S(1) - st.tanh_c.array().square());
  Mat<S> dz(4 * H, x.cols());
  dz.topRows(H) = (dct * st.g.array() * st.i.array() * (S(1) - st.i.array())).matrix();
  dz.middleRows(H, H) = (dct * c.array() * st.f.array() * (S(1) - st.f.array())).matrix();
  dz.middleRows(2 * H, H) = (dct * st.i.array() * (S(1) - st.g.array().square())).matrix();
  dz.bottomRows(H) =
      (dh_out.array() * st.tanh_c.array() * st.o.array() * (S(1) - st.o.array())).matrix();
  dc = (dct * st.f.array()).matrix();
  grads.W.noalias() += dz * x.transpose();
  grads.U.noalias() += dz * h.transpose();
  grads.b += dz.rowwise().sum();
  dh.noalias() = p.U.transpose() * dz;
  if (dx != nullptr) dx->noalias() = p.W.transpose() * dz;
}

template <typename S>
void gru_forward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                      GruStep<S>& out) {
  const auto H = p.U.cols();
  Mat<S> a(p.W.rows(), x.cols());
  a.noalias() = p.W * x;
  a.colwise() += p.b.col(0);
  Mat<S> u(2 * H, x.cols());
  u.noalias() = p.U.topRows(2 * H) * h;
  out.z = sigmoid(a.topRows(H) + u.topRows(H));
  out.r = sigmoid(a.middleRows(H, H) + u.bottomRows(H));
  const Mat<S> rh = (out.r.array() * h.array()).matrix();
  Mat<S> n = a.bottomRows(H);
  n.noalias() += p.U.bottomRows(H) * rh;
  out.n = n.array().tanh().matrix();
  out.h = (h.array() + out.z.array() * (out.n.array() - h.array())).matrix();
}

template <typename S>
void gru_backward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                       const GruStep<S>& st, const Mat<S>& dh_out, RecurrentLayer<S>& grads,
                       Mat<S>* dx, Mat<S>& dh) {
  const auto H = p.U.cols();
  Mat<S> dpre(3 * H, x.cols());
  dpre.topRows(H) = (dh_out.array() * (st.n.array() - h.array()) * st.z.array() *
                     (S(1) - st.z.array()))
                        .matrix();
  dpre.bottomRows(H) =
      (dh_out.array() * st.z.array() * (S(1) - st.n.array().square())).matrix();
  Mat<S> drh(H, x.cols());
  drh.noalias() = p.U.bottomRows(H).transpose() * dpre.bottomRows(H);
  dpre.middleRows(H, H) =
      (drh.array() * h.array() * st.r.array() * (S(1) - st.r.array())).matrix();

  const Mat<S> rh = (st.r.array() * h.array()).matrix();
  grads.W.noalias() += dpre * x.transpose();
  grads.b += dpre.rowwise().sum();
  grads.U.topRows(2 * H).noalias() += dpre.topRows(2 * H) * h.transpose();
  grads.U.bottomRows(H).noalias() += dpre.bottomRows(H) * rh.transpose();

  dh = (dh_out.array() * (S(1) - st.z.array()) + drh.array() * st.r.array()).matrix();
  dh.noalias() += p.U.topRows(2 * H).transpose() * dpre.topRows(2 * H);
  if (dx != nullptr) dx->noalias() = p.W.transpose() * dpre;
}

template <typename S>
std::pair<Mat<S>, Mat<S>> lstm_cell_step(const RecurrentLayer<S>& p,
                                         const std::type_identity_t<Mat<S>>& x,
                                         const std::type_identity_t<Mat<S>>& h,
                                         const std::type_identity_t<Mat<S>>& c) {
  check_cell(p, 4, x, h);
  require(c.rows() == h.rows() && c.cols() == h.cols(), "cell size");
  LstmStep<S> st;
  lstm_forward_step(p, x, h, c, st);
  return {st.h, st.c};
}

template <typename S>
Mat<S> gru_cell_step(const RecurrentLayer<S>& p, const std::type_identity_t<Mat<S>>& x,
                     const std::type_identity_t<Mat<S>>& h) {
  check_cell(p, 3, x, h);
  GruStep<S> st;
  gru_forward_step(p, x, h, st);
  return st.h;
}

// ---- network ----

template <typename S>
Network<S>::Network(const ModelConfig& config, const Weights<S>& weights)
    : config_(config), weights_(weights) {}

template <typename S>
const Mat<S>& Network<S>::layer_input(std::size_t layer, std::size_t t) const {
  if (layer == 0) return input_->steps[t];
  const LayerTape& prev = tapes_[layer - 1];
  return prev.dropped.empty() ? prev.h[t + 1] : prev.dropped[t];
}

template <typename S>
void Network<S>::run_layer(std::size_t layer, bool train_mode, Rng* rng) {
  const RecurrentLayer<S>& p = weights_.layers[layer];
  LayerTape& tape = tapes_[layer];
  const auto B = static_cast<Eigen::Index>(input_->batch_size);
  const auto H = p.U.cols();
  const bool lstm = config_.branch_type == BranchType::Lstm;
  tape = LayerTape{};
  tape.h.assign(steps_ + 1, Mat<S>());
  tape.h[0] = Mat<S>::Zero(H, B);
  if (lstm) {
    tape.c.assign(steps_ + 1, Mat<S>());
    tape.c[0] = Mat<S>::Zero(H, B);
    tape.lstm.resize(steps_);
  } else {
    tape.gru.resize(steps_);
  }
  for (std::size_t t = 0; t < steps_; ++t) {
    const Mat<S>& x = layer_input(layer, t);
    if (lstm) {
      LstmStep<S>& st = tape.lstm[t];
      lstm_forward_step(p, x, tape.h[t], tape.c[t], st);
      tape.h[t + 1] = st.h;
      tape.c[t + 1] = st.c;
      carry_masked_columns(tape.c[t + 1], tape.c[t], input_->mask, t);
    } else {
      GruStep<S>& st = tape.gru[t];
      gru_forward_step(p, x, tape.h[t], st);
      tape.h[t + 1] = st.h;
    }
    carry_masked_columns(tape.h[t + 1], tape.h[t], input_->mask, t);
  }
  const bool feeds_layer = layer + 1 < weights_.layers.size();
  if (feeds_layer && train_mode && config_.dropout > 0.0) {
    tape.drop.resize(steps_);
    tape.dropped.resize(steps_);
    for (std::size_t t = 0; t < steps_; ++t) {
      tape.drop[t] = dropout_mask<S>(H, B, config_.dropout, *rng);
      tape.dropped[t] = (tape.h[t + 1].array() * tape.drop[t].array()).matrix();
    }
  }
}

template <typename S>
const Mat<S>& Network<S>::forward(const BatchInput<S>& input, bool train_mode, Rng* rng) {
  if (train_mode && config_.dropout > 0.0 && rng == nullptr) {
    throw Error("train-mode forward needs a random generator");
  }
  const auto B = static_cast<Eigen::Index>(input.batch_size);
  const auto D = static_cast<Eigen::Index>(config_.input_dimension);
  input_ = &input;
  steps_ = 0;
  tapes_.clear();
  require(weights_.head_W.cols() == static_cast<Eigen::Index>(config_.head_input()),
          "head input size");

  Mat<S> branch;
  if (config_.recurrent()) {
    require(weights_.layers.size() == config_.layer_sizes.size(), "layer count");
    steps_ = input.steps.size();
    require(input.mask.rows() == static_cast<Eigen::Index>(steps_) && input.mask.cols() == B,
            "mask shape");
    for (const auto& x : input.steps) require(x.rows() == D && x.cols() == B, "timestep shape");
    tapes_.resize(weights_.layers.size());
    for (std::size_t l = 0; l < weights_.layers.size(); ++l) run_layer(l, train_mode, rng);
    branch = tapes_.back().h[steps_];
  } else if (config_.use_lexical) {
    require(input.pooled.rows() == D && input.pooled.cols() == B, "pooled input shape");
    branch = input.pooled;
  }

  const auto syn_rows = config_.use_syntactic ? static_cast<Eigen::Index>(kSyntacticDims) : 0;
  if (config_.use_syntactic) {
    require(input.syntactic.rows() == syn_rows && input.syntactic.cols() == B,
            "syntactic input shape");
  }
  head_in_.resize(branch.rows() + syn_rows, B);
  if (branch.rows() > 0) head_in_.topRows(branch.rows()) = branch;
  if (syn_rows > 0) head_in_.bottomRows(syn_rows) = input.syntactic;

  if (train_mode && config_.dropout > 0.0) {
    head_drop_ = dropout_mask<S>(head_in_.rows(), B, config_.dropout, *rng);
    head_dropped_ = (head_in_.array() * head_drop_.array()).matrix();
  } else {
    head_drop_.resize(0, 0);
    head_dropped_ = head_in_;
  }
  head_pre_.noalias() = weights_.head_W * head_dropped_;
  head_pre_.colwise() += weights_.head_b.col(0);
  head_act_ = head_pre_.array().max(S(0)).matrix();
  logits_.noalias() = weights_.out_W * head_act_;
  logits_.array() += weights_.out_b(0, 0);
  return logits_;
}

template <typename S>
void Network<S>::backprop_layer(std::size_t layer, const Mat<S>& d_final,
                                std::vector<Mat<S>>* d_seq, RecurrentLayer<S>& grads,
                                std::vector<Mat<S>>* d_inputs) {
  const RecurrentLayer<S>& p = weights_.layers[layer];
  const LayerTape& tape = tapes_[layer];
  const bool lstm = config_.branch_type == BranchType::Lstm;
  const auto H = p.U.cols();
  const auto B = static_cast<Eigen::Index>(input_->batch_size);
  Mat<S> dh = d_final;
  Mat<S> dc = Mat<S>::Zero(H, B);
  Mat<S> dh_out, dc_out, dh_prev, dc_prev;
  if (d_inputs != nullptr) d_inputs->assign(steps_, Mat<S>());
  for (std::size_t t = steps_; t-- > 0;) {
    if (d_seq != nullptr) dh += (*d_seq)[t];
    dh_out = dh;
    zero_masked_columns(dh_out, input_->mask, t);
    Mat<S>* dx = d_inputs != nullptr ? &(*d_inputs)[t] : nullptr;
    if (lstm) {
      dc_out = dc;
      zero_masked_columns(dc_out, input_->mask, t);
      lstm_backward_step(p, layer_input(layer, t), tape.h[t], tape.c[t], tape.lstm[t], dh_out,
                         dc_out, grads, dx, dh_prev, dc_prev);
      carry_masked_columns(dc_prev, dc, input_->mask, t);
      dc.swap(dc_prev);
    } else {
      gru_backward_step(p, layer_input(layer, t), tape.h[t], tape.gru[t], dh_out, grads, dx,
                        dh_prev);
    }
    carry_masked_columns(dh_prev, dh, input_->mask, t);
    dh.swap(dh_prev);
  }
}

template <typename S>
void Network<S>::backward(const Mat<S>& dlogits, Weights<S>& grads) {
  require(dlogits.rows() == 1 && dlogits.cols() == logits_.cols(), "logit gradient shape");
  grads.out_W.noalias() += dlogits * head_act_.transpose();
  grads.out_b(0, 0) += dlogits.sum();
  Mat<S> dpre = weights_.out_W.transpose() * dlogits;
  dpre.array() *= (head_pre_.array() > S(0)).template cast<S>();
  grads.head_W.noalias() += dpre * head_dropped_.transpose();
  grads.head_b += dpre.rowwise().sum();
  if (!config_.recurrent()) return;

  Mat<S> dhead = weights_.head_W.transpose() * dpre;
  if (head_drop_.size() > 0) dhead.array() *= head_drop_.array();
  const auto branch_rows = static_cast<Eigen::Index>(config_.branch_output());
  const Mat<S> d_final = dhead.topRows(branch_rows);

  std::vector<Mat<S>> d_seq, d_inputs;
  for (std::size_t l = weights_.layers.size(); l-- > 0;) {
    const bool top = l + 1 == weights_.layers.size();
    const Mat<S> zero = top ? Mat<S>() : Mat<S>::Zero(weights_.layers[l].U.cols(), logits_.cols());
    backprop_layer(l, top ? d_final : zero, top ? nullptr : &d_seq, grads.layers[l],
                   l > 0 ? &d_inputs : nullptr);
    if (l > 0) {
      const LayerTape& below = tapes_[l - 1];
      if (!below.drop.empty()) {
        for (std::size_t t = 0; t < steps_; ++t) d_inputs[t].array() *= below.drop[t].array();
      }
      d_seq.swap(d_inputs);
    }
  }
}

template <typename S>
double bce_with_logits(const Mat<S>& logits, std::span<const float> targets,
                       std::type_identity_t<Mat<S>>* dlogits) {
  const auto n = logits.cols();
  if (static_cast<std::size_t>(n) != targets.size() || logits.rows() != 1) {
    throw ShapeMismatch("logits and targets differ in size");
  }
  if (n == 0) return 0.0;
  if (dlogits != nullptr) dlogits->resize(1, n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double x = static_cast<double>(logits(0, j));
    const double y = targets[static_cast<std::size_t>(j)];
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    if (dlogits != nullptr) (*dlogits)(0, j) = static_cast<S>((logistic(x) - y) / double(n));
  }
  return total / static_cast<double>(n);
}

// ---- samples ----

std::string MeanPoolEncoder::name() const { return "mean-pool:" + pipeline_.provider->name(); }

std::vector<float> MeanPoolEncoder::encode(std::string_view text) const {
  const auto tokens = textprep::lexical_tokens(text, *pipeline_.stoplist, *pipeline_.lemmatizer);
  const std::size_t d = dimension();
  std::vector<double> sum(d, 0.0);
  std::vector<float> v(d);
  for (const auto& tok : tokens) {
    pipeline_.provider->lookup(tok, v);
    for (std::size_t k = 0; k < d; ++k) sum[k] += v[k];
  }
  for (std::size_t k = 0; k < d; ++k) {
    v[k] = tokens.empty() ? 0.0f : static_cast<float>(sum[k] / double(tokens.size()));
  }
  return v;
}

Sample make_sample(std::string_view statement, std::optional<std::string_view> context,
                   corpus::Label label, const ModelConfig& config, const Featurizers& featurizers) {
  Sample s;
  s.label = label;
  s.counts = synfeat::count_features(statement);
  if (!config.use_lexical) return s;
  std::string text(statement);
  if (context && !context->empty()) {
    text += " | ";
    text += *context;
  }
  if (config.branch_type == BranchType::EncoderAdapter) {
    if (featurizers.encoder == nullptr) throw Error("encoder adapter needs a text encoder");
    s.tokens = featurizers.encoder->encode(text);
    require(s.tokens.size() == config.input_dimension, "encoder output dimension");
    s.length = 1;
    return s;
  }
  const auto& lex = featurizers.lexical;
  if (lex.provider == nullptr || lex.stoplist == nullptr || lex.lemmatizer == nullptr) {
    throw Error("lexical featurizer is incomplete");
  }
  textprep::LexicalPipeline pipeline = lex;
  pipeline.max_len = config.max_len;
  const auto seq = textprep::lexical_features(text, pipeline);
  require(seq.dimension == config.input_dimension, "embedding dimension");
  for (std::size_t t = 0; t < seq.max_len; ++t) {
    if (!seq.mask[t]) continue;
    const auto row = seq.row(t);
    s.tokens.insert(s.tokens.end(), row.begin(), row.end());
    ++s.length;
  }
  return s;
}

std::vector<Sample> make_samples(std::span<const corpus::LabeledStatement> statements,
                                 const ModelConfig& config, const Featurizers& featurizers) {
  std::vector<Sample> out;
  out.reserve(statements.size());
  for (const auto& st : statements) {
    out.push_back(make_sample(st.text, std::nullopt, st.label, config, featurizers));
  }
  return out;
}

template <typename S>
BatchInput<S> make_batch(std::span<const Sample* const> samples, const ModelConfig& config,
                         const synfeat::ScalerParams* scaler) {
  BatchInput<S> in;
  in.batch_size = samples.size();
  const auto B = static_cast<Eigen::Index>(samples.size());
  const std::size_t D = config.input_dimension;
  if (config.use_lexical) {
    for (const Sample* s : samples) {
      require(s->tokens.size() == s->length * D, "sample token buffer");
    }
  }
  if (config.recurrent()) {
    std::size_t T = 0;
    for (const Sample* s : samples) T = std::max(T, s->length);
    in.steps.assign(T, Mat<S>::Zero(static_cast<Eigen::Index>(D), B));
    in.mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
        static_cast<Eigen::Index>(T), B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const Sample& s = *samples[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < s.length; ++t) {
        for (std::size_t k = 0; k < D; ++k) {
          in.steps[t](static_cast<Eigen::Index>(k), j) = static_cast<S>(s.tokens[t * D + k]);
        }
        in.mask(static_cast<Eigen::Index>(t), j) = 1;
      }
    }
  } else if (config.use_lexical) {
    in.pooled.resize(static_cast<Eigen::Index>(D), B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const Sample& s = *samples[static_cast<std::size_t>(j)];
      require(s.length == 1, "pooled sample length");
      for (std::size_t k = 0; k < D; ++k) {
        in.pooled(static_cast<Eigen::Index>(k), j) = static_cast<S>(s.tokens[k]);
      }
    }
  }
  if (config.use_syntactic) {
    if (scaler == nullptr) throw Error("syntactic model needs a fitted scaler");
    in.syntactic.resize(static_cast<Eigen::Index>(kSyntacticDims), B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const auto scaled = scaler->scale(samples[static_cast<std::size_t>(j)]->counts);
      for (std::size_t k = 0; k < kSyntacticDims; ++k) {
        in.syntactic(static_cast<Eigen::Index>(k), j) = static_cast<S>(scaled[k]);
      }
    }
  }
  return in;
}

// ---- training ----

NetworkParams initialize(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  NetworkParams p;
  p.config = config;
  p.weights = initialize_weights<float>(config, rng);
  return p;
}

TrainConfig TrainConfig::defaults(BranchType type) {
  TrainConfig t;
  t.batch_size = type == BranchType::Lstm ? 32 : 64;
  return t;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (batch_size == 0) throw InputError("batch_size must be at least 1");
  if (patience == 0) throw InputError("patience must be at least 1");
  if (max_epochs == 0) throw InputError("max_epochs must be at least 1");
  if (min_delta < 0.0) throw InputError("min_delta must be non-negative");
}

bool EarlyStopping::observe(double loss) {
  ++epoch_;
  if (best_epoch_ == 0 || loss < best_loss_ - min_delta_) {
    best_loss_ = loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

namespace {

std::vector<float> targets_of(std::span<const Sample* const> batch) {
  std::vector<float> y;
  y.reserve(batch.size());
  for (const Sample* s : batch) y.push_back(s->label == corpus::Label::Suspicious ? 1.0f : 0.0f);
  return y;
}

std::size_t correct_count(const Mat<float>& logits, std::span<const float> targets) {
  std::size_t n = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const bool suspicious = logistic(logits(0, j)) >= kDefaultThreshold;
    n += suspicious == (targets[static_cast<std::size_t>(j)] == 1.0f);
  }
  return n;
}

class Adam {
 public:
  Adam(const ModelConfig& config, double lr) : lr_(lr) {
    m_ = Weights<float>::zeros(config);
    v_ = Weights<float>::zeros(config);
  }

  void step(Weights<float>& w, const Weights<float>& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, double(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, double(t_));
    std::vector<Mat<float>*> ws, ms, vs;
    std::vector<const Mat<float>*> gs;
    w.visit([&](const std::string&, Mat<float>& x) { ws.push_back(&x); });
    m_.visit([&](const std::string&, Mat<float>& x) { ms.push_back(&x); });
    v_.visit([&](const std::string&, Mat<float>& x) { vs.push_back(&x); });
    g.visit([&](const std::string&, const Mat<float>& x) { gs.push_back(&x); });
    const auto b1 = static_cast<float>(kBeta1), b2 = static_cast<float>(kBeta2);
    const auto step = static_cast<float>(lr_ / bc1);
    const auto inv_bc2 = static_cast<float>(1.0 / bc2);
    const auto eps = static_cast<float>(kEpsilon);
    for (std::size_t k = 0; k < ws.size(); ++k) {
      auto m = ms[k]->array();
      auto v = vs[k]->array();
      const auto gk = gs[k]->array();
      m = b1 * m + (1.0f - b1) * gk;
      v = b2 * v + (1.0f - b2) * gk.square();
      ws[k]->array() -= step * m / ((v * inv_bc2).sqrt() + eps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  Weights<float> m_, v_;
};

void set_zero(Weights<float>& w) {
  w.visit([](const std::string&, Mat<float>& m) { m.setZero(); });
}

}  // namespace

Evaluation evaluate_samples(const NetworkParams& params, std::span<const Sample> samples,
                            std::size_t batch_size) {
  Evaluation ev;
  if (samples.empty()) return ev;
  const synfeat::ScalerParams* scaler = params.scaler ? &*params.scaler : nullptr;
  Network<float> net(params.config, params.weights);
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<const Sample*> batch;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    const auto input = make_batch<float>(batch, params.config, scaler);
    const Mat<float>& logits = net.forward(input, false, nullptr);
    const auto y = targets_of(batch);
    loss += bce_with_logits(logits, y, nullptr) * double(batch.size());
    correct += correct_count(logits, y);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      ev.probabilities.push_back(logistic(logits(0, j)));
    }
  }
  ev.loss = loss / double(samples.size());
  ev.accuracy = double(correct) / double(samples.size());
  return ev;
}

TrainResult train(std::span<const Sample> training, std::span<const Sample> validation,
                  const ModelConfig& config, const TrainConfig& tconfig,
                  const EpochCallback& on_epoch) {
  if (training.empty()) throw EmptySplit("training split is empty");
  if (validation.empty()) throw EmptySplit("validation split is empty");
  config.validate();
  tconfig.validate();

  std::vector<synfeat::SyntacticVector> counts;
  counts.reserve(training.size());
  for (const auto& s : training) counts.push_back(s.counts);

  Rng rng(tconfig.seed);
  TrainResult result;
  NetworkParams& params = result.params;
  params.config = config;
  params.weights = initialize_weights<float>(config, rng);
  params.scaler = synfeat::ScalerParams::fit(counts);
  const synfeat::ScalerParams* scaler = &*params.scaler;

  Adam adam(config, tconfig.learning_rate);
  Weights<float> grads = Weights<float>::zeros(config);
  Weights<float> best = params.weights;
  EarlyStopping stopper(tconfig.patience, tconfig.min_delta);

  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Sample*> batch;
  Mat<float> dlogits;

  for (std::size_t epoch = 1; epoch <= tconfig.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += tconfig.batch_size) {
      ++batch_index;
      const std::size_t end = std::min(order.size(), start + tconfig.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&training[order[i]]);
      const auto input = make_batch<float>(batch, config, scaler);
      const auto y = targets_of(batch);
      Network<float> net(config, params.weights);
      const Mat<float>& logits = net.forward(input, true, &rng);
      const double loss = bce_with_logits(logits, y, &dlogits);
      if (!std::isfinite(loss)) throw NonFiniteLoss(epoch, batch_index);
      loss_sum += loss * double(batch.size());
      correct += correct_count(logits, y);
      set_zero(grads);
      net.backward(dlogits, grads);
      adam.step(params.weights, grads);
    }

    const Evaluation val = evaluate_samples(params, validation);
    if (!std::isfinite(val.loss)) throw NonFiniteLoss(epoch, 0);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / double(training.size());
    stats.train_accuracy = double(correct) / double(training.size());
    stats.validation_loss = val.loss;
    stats.validation_accuracy = val.accuracy;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (stopper.observe(val.loss)) best = params.weights;
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  params.weights = std::move(best);
  result.best_epoch = stopper.best_epoch();
  return result;
}

TrainResult train(const corpus::DataSplits& splits, const ModelConfig& config,
                  const TrainConfig& tconfig, const Featurizers& featurizers,
                  const EpochCallback& on_epoch) {
  const auto tr = make_samples(splits.train, config, featurizers);
  const auto va = make_samples(splits.validation, config, featurizers);
  return train(tr, va, config, tconfig, on_epoch);
}

Prediction Prediction::from_probability(double p, double threshold) {
  Prediction out;
  out.probability_suspicious = p;
  out.threshold = threshold;
  out.verdict = p >= threshold ? corpus::Label::Suspicious : corpus::Label::Credible;
  return out;
}

Prediction predict(const NetworkParams& params, const Featurizers& featurizers,
                   std::string_view statement, std::optional<std::string_view> context) {
  const Sample s =
      make_sample(statement, context, corpus::Label::Credible, params.config, featurizers);
  const Evaluation ev = evaluate_samples(params, std::span<const Sample>(&s, 1));
  return Prediction::from_probability(ev.probabilities.front());
}

double forward(const NetworkParams& params, const textprep::EmbeddedSequence& seq,
               const std::optional<synfeat::Scaled>& syntactic, bool train_mode,
               std::uint64_t seed) {
  const ModelConfig& config = params.config;
  BatchInput<float> in;
  in.batch_size = 1;
  if (config.use_lexical) {
    require(seq.dimension == config.input_dimension, "embedding dimension");
    require(seq.mask.size() == seq.max_len && seq.vectors.size() == seq.max_len * seq.dimension,
            "sequence buffers");
  }
  const auto D = static_cast<Eigen::Index>(config.input_dimension);
  if (config.recurrent()) {
    std::size_t T = 0;
    for (std::size_t t = 0; t < seq.max_len; ++t) {
      if (seq.mask[t]) T = t + 1;
    }
    in.mask.resize(static_cast<Eigen::Index>(T), 1);
    for (std::size_t t = 0; t < T; ++t) {
      const auto row = seq.row(t);
      in.steps.push_back(Eigen::Map<const Mat<float>>(row.data(), D, 1));
      in.mask(static_cast<Eigen::Index>(t), 0) = seq.mask[t];
    }
  } else if (config.use_lexical) {
    in.pooled = Mat<float>::Zero(D, 1);
    std::size_t n = 0;
    for (std::size_t t = 0; t < seq.max_len; ++t) {
      if (!seq.mask[t]) continue;
      in.pooled += Eigen::Map<const Mat<float>>(seq.row(t).data(), D, 1);
      ++n;
    }
    if (n > 0) in.pooled /= static_cast<float>(n);
  }
  require(syntactic.has_value() == config.use_syntactic, "syntactic input presence");
  if (syntactic) {
    in.syntactic.resize(static_cast<Eigen::Index>(kSyntacticDims), 1);
    for (std::size_t k = 0; k < kSyntacticDims; ++k) {
      in.syntactic(static_cast<Eigen::Index>(k), 0) = static_cast<float>((*syntactic)[k]);
    }
  }
  Rng rng(seed);
  Network<float> net(config, params.weights);
  return logistic(net.forward(in, train_mode, &rng)(0, 0));
}

#define MPSC_INSTANTIATE(S)                                                                     \
  template struct Weights<S>;                                                                   \
  template Weights<S> initialize_weights<S>(const ModelConfig&, Rng&);                          \
  template void lstm_forward_step<S>(const RecurrentLayer<S>&, const Mat<S>&, const Mat<S>&,   \
                                     const Mat<S>&, LstmStep<S>&);                              \
  template void lstm_backward_step<S>(const RecurrentLayer<S>&, const Mat<S>&, const Mat<S>&,  \
                                      const Mat<S>&, const LstmStep<S>&, const Mat<S>&,         \
                                      const Mat<S>&, RecurrentLayer<S>&, Mat<S>*, Mat<S>&,      \
                                      Mat<S>&);                                                 \
  template void gru_forward_step<S>(const RecurrentLayer<S>&, const Mat<S>&, const Mat<S>&,    \
                                    GruStep<S>&);                                               \
  template void gru_backward_step<S>(const RecurrentLayer<S>&, const Mat<S>&, const Mat<S>&,   \
                                     const GruStep<S>&, const Mat<S>&, RecurrentLayer<S>&,      \
                                     Mat<S>*, Mat<S>&);                                         \
  template std::pair<Mat<S>, Mat<S>> lstm_cell_step<S>(const RecurrentLayer<S>&, const Mat<S>&, \
                                                       const Mat<S>&, const Mat<S>&);           \
  template Mat<S> gru_cell_step<S>(const RecurrentLayer<S>&, const Mat<S>&, const Mat<S>&);    \
  template class Network<S>;                                                                    \
  template double bce_with_logits<S>(const Mat<S>&, std::span<const float>, Mat<S>*);           \
  template BatchInput<S> make_batch<S>(std::span<const Sample* const>, const ModelConfig&,      \
                                       const synfeat::ScalerParams*);

MPSC_INSTANTIATE(float)
MPSC_INSTANTIATE(double)

#undef MPSC_INSTANTIATE

}  // namespace mpsc::neural
