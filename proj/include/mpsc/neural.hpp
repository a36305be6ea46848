#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "mpsc/corpus.hpp"
#include "mpsc/error.hpp"
#include "mpsc/random.hpp"
#include "mpsc/synfeat.hpp"
#include "mpsc/textprep.hpp"

namespace mpsc::neural {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

enum class BranchType { Lstm, Gru, EncoderAdapter };

std::string_view branch_name(BranchType type);
BranchType parse_branch_name(std::string_view name);

inline constexpr std::size_t kSyntacticDims = 5;

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class EmptySplit : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t epoch, std::size_t batch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct ModelConfig {
  BranchType branch_type = BranchType::Lstm;
  std::vector<std::size_t> layer_sizes{256, 128};  // ignored by the encoder adapter
  std::size_t head_size = 32;
  double dropout = 0.2;
  bool use_syntactic = true;
  bool use_lexical = true;  // false gives the head-only model on syntactic counts
  std::size_t input_dimension = 0;
  std::size_t max_len = textprep::kDefaultMaxLen;

  // Recurrent branches get head 32, the encoder adapter head 128.
  static ModelConfig defaults(BranchType type, std::size_t input_dimension);

  bool recurrent() const { return use_lexical && branch_type != BranchType::EncoderAdapter; }
  std::size_t branch_output() const;
  std::size_t head_input() const { return branch_output() + (use_syntactic ? kSyntacticDims : 0); }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Gates are stacked row-wise: LSTM i,f,g,o (4h rows), GRU z,r,n (3h rows).
template <typename S>
struct RecurrentLayer {
  Mat<S> W;  // gates*h x input
  Mat<S> U;  // gates*h x h
  Mat<S> b;  // gates*h x 1

  std::size_t hidden() const { return static_cast<std::size_t>(U.cols()); }
};

template <typename S>
struct Weights {
  std::vector<RecurrentLayer<S>> layers;
  Mat<S> head_W;  // head_size x head_input
  Mat<S> head_b;  // head_size x 1
  Mat<S> out_W;   // 1 x head_size
  Mat<S> out_b;   // 1 x 1

  // Zero tensors with the shapes required by config.
  static Weights zeros(const ModelConfig& config);

  // Calls f(name, tensor) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  template <typename T>
  Weights<T> cast() const;

  std::size_t parameter_count() const;
  // Exact comparison of shapes and values.
  bool operator==(const Weights& other) const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      const std::string p = "layer" + std::to_string(i + 1) + ".";
      f(p + "W", self.layers[i].W);
      f(p + "U", self.layers[i].U);
      f(p + "b", self.layers[i].b);
    }
    f(std::string("head.W"), self.head_W);
    f(std::string("head.b"), self.head_b);
    f(std::string("out.W"), self.out_W);
    f(std::string("out.b"), self.out_b);
  }
};

template <typename S>
template <typename T>
Weights<T> Weights<S>::cast() const {
  Weights<T> out;
  for (const auto& l : layers) {
    out.layers.push_back({l.W.template cast<T>(), l.U.template cast<T>(), l.b.template cast<T>()});
  }
  out.head_W = head_W.template cast<T>();
  out.head_b = head_b.template cast<T>();
  out.out_W = out_W.template cast<T>();
  out.out_b = out_b.template cast<T>();
  return out;
}

// Glorot-uniform kernels, orthogonal recurrent matrices, zero biases except an LSTM forget bias of 1.
template <typename S>
Weights<S> initialize_weights(const ModelConfig& config, Rng& rng);

// ---- single-step cells (columns are batch entries) ----

template <typename S>
struct LstmStep {
  Mat<S> i, f, g, o;  // gate activations
  Mat<S> c, tanh_c, h;
};

template <typename S>
void lstm_forward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                       const Mat<S>& c, LstmStep<S>& out);

// Accumulates parameter gradients into grads; dx may be null.
template <typename S>
void lstm_backward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                        const Mat<S>& c, const LstmStep<S>& step, const Mat<S>& dh_out,
                        const Mat<S>& dc_out, RecurrentLayer<S>& grads, Mat<S>* dx, Mat<S>& dh,
                        Mat<S>& dc);

template <typename S>
struct GruStep {
  Mat<S> z, r, n;
  Mat<S> h;
};

template <typename S>
void gru_forward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                      GruStep<S>& out);

template <typename S>
void gru_backward_step(const RecurrentLayer<S>& p, const Mat<S>& x, const Mat<S>& h,
                       const GruStep<S>& step, const Mat<S>& dh_out, RecurrentLayer<S>& grads,
                       Mat<S>* dx, Mat<S>& dh);

// Convenience single-vector forms; throw ShapeMismatch.
template <typename S>
std::pair<Mat<S>, Mat<S>> lstm_cell_step(const RecurrentLayer<S>& p,
                                         const std::type_identity_t<Mat<S>>& x,
                                         const std::type_identity_t<Mat<S>>& h,
                                         const std::type_identity_t<Mat<S>>& c);
template <typename S>
Mat<S> gru_cell_step(const RecurrentLayer<S>& p, const std::type_identity_t<Mat<S>>& x,
                     const std::type_identity_t<Mat<S>>& h);

// ---- batched network ----

template <typename S>
struct BatchInput {
  std::size_t batch_size = 0;
  std::vector<Mat<S>> steps;  // T entries of input_dimension x batch (recurrent branches)
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;  // T x batch
  Mat<S> pooled;     // input_dimension x batch (encoder adapter)
  Mat<S> syntactic;  // 5 x batch, scaled; empty without syntactic input
};

template <typename S>
class Network {
 public:
  Network(const ModelConfig& config, const Weights<S>& weights);

  // Logits (1 x batch). In train mode dropout masks are drawn from rng.
  const Mat<S>& forward(const BatchInput<S>& input, bool train_mode, Rng* rng);

  // Adds d(sum_j dlogits_j * logit_j)/dweights for the last forward call to grads.
  void backward(const Mat<S>& dlogits, Weights<S>& grads);

 private:
  struct LayerTape {
    std::vector<Mat<S>> h;  // T+1 states, h[0] = 0
    std::vector<Mat<S>> c;  // LSTM only
    std::vector<LstmStep<S>> lstm;
    std::vector<GruStep<S>> gru;
    std::vector<Mat<S>> drop;     // dropout scale applied to this layer's outputs
    std::vector<Mat<S>> dropped;  // outputs after dropout, inputs of the next layer
  };

  const Mat<S>& layer_input(std::size_t layer, std::size_t t) const;
  void run_layer(std::size_t layer, bool train_mode, Rng* rng);
  void backprop_layer(std::size_t layer, const Mat<S>& d_final, std::vector<Mat<S>>* d_seq,
                      RecurrentLayer<S>& grads, std::vector<Mat<S>>* d_inputs);

  const ModelConfig& config_;
  const Weights<S>& weights_;
  const BatchInput<S>* input_ = nullptr;
  std::size_t steps_ = 0;
  std::vector<LayerTape> tapes_;
  Mat<S> head_in_, head_drop_, head_dropped_, head_pre_, head_act_, logits_;
};

// Mean binary cross-entropy on logits and its gradient w.r.t. the logits.
template <typename S>
double bce_with_logits(const Mat<S>& logits, std::span<const float> targets,
                       std::type_identity_t<Mat<S>>* dlogits);

// ---- data, training, prediction ----

// Maps a text to one pooled vector, standing in for a pretrained sentence encoder.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<float> encode(std::string_view text) const = 0;
};

// Mean of the lexical token vectors (zero vector for an empty token sequence).
class MeanPoolEncoder final : public TextEncoder {
 public:
  explicit MeanPoolEncoder(textprep::LexicalPipeline pipeline) : pipeline_(pipeline) {}
  std::string name() const override;
  std::size_t dimension() const override { return pipeline_.provider->dimension(); }
  std::vector<float> encode(std::string_view text) const override;

 private:
  textprep::LexicalPipeline pipeline_;
};

struct Featurizers {
  textprep::LexicalPipeline lexical;
  const TextEncoder* encoder = nullptr;  // required by the encoder adapter
};

struct Sample {
  std::vector<float> tokens;  // length x dimension, row-major; only unmasked rows
  std::size_t length = 0;
  synfeat::SyntacticVector counts;
  corpus::Label label = corpus::Label::Credible;
};

// Lexical input is the statement, or "statement | context" when context is given.
// Syntactic counts always come from the statement alone.
Sample make_sample(std::string_view statement, std::optional<std::string_view> context,
                   corpus::Label label, const ModelConfig& config, const Featurizers& featurizers);
std::vector<Sample> make_samples(std::span<const corpus::LabeledStatement> statements,
                                 const ModelConfig& config, const Featurizers& featurizers);

// Packs samples into one batch, padding to the longest sequence.
template <typename S>
BatchInput<S> make_batch(std::span<const Sample* const> samples, const ModelConfig& config,
                         const synfeat::ScalerParams* scaler);

struct NetworkParams {
  ModelConfig config;
  Weights<float> weights;
  std::optional<synfeat::ScalerParams> scaler;
  std::map<std::string, std::string> featurizer;  // how lexical inputs were produced

  bool operator==(const NetworkParams&) const = default;
};

NetworkParams initialize(const ModelConfig& config, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 3;
  double min_delta = 1e-4;
  std::uint64_t seed = 42;

  // Batch 32 for LSTM, 64 for GRU and the encoder adapter.
  static TrainConfig defaults(BranchType type);
  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;  // mean over train-mode batches
  double train_accuracy = 0;
  double validation_loss = 0;  // inference mode
  double validation_accuracy = 0;
};

class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}
  // Records one epoch; returns true when it improved on the best loss by more than min_delta.
  bool observe(double loss);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  double min_delta_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_loss_ = 0;
};

struct TrainResult {
  NetworkParams params;  // weights of the best validation epoch
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// The scaler is fitted on the training samples only.
TrainResult train(std::span<const Sample> training, std::span<const Sample> validation,
                  const ModelConfig& config, const TrainConfig& tconfig,
                  const EpochCallback& on_epoch = {});
TrainResult train(const corpus::DataSplits& splits, const ModelConfig& config,
                  const TrainConfig& tconfig, const Featurizers& featurizers,
                  const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0;
  double accuracy = 0;
  std::vector<double> probabilities;
};

// Inference-mode pass over samples.
Evaluation evaluate_samples(const NetworkParams& params, std::span<const Sample> samples,
                            std::size_t batch_size = 256);

inline constexpr double kDefaultThreshold = 0.5;

struct Prediction {
  double probability_suspicious = 0;
  corpus::Label verdict = corpus::Label::Credible;
  double threshold = kDefaultThreshold;

  // Ties go to SUSPICIOUS.
  static Prediction from_probability(double p, double threshold = kDefaultThreshold);
};

Prediction predict(const NetworkParams& params, const Featurizers& featurizers,
                   std::string_view statement, std::optional<std::string_view> context = {});

// Single-sequence forward pass; the mask may contain gaps and trailing padding.
double forward(const NetworkParams& params, const textprep::EmbeddedSequence& seq,
               const std::optional<synfeat::Scaled>& syntactic, bool train_mode,
               std::uint64_t seed);

}  // namespace mpsc::neural
