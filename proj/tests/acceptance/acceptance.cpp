// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number of failures.
// Usage: acceptance [criterion-name ...]

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mpsc/checkpoint.hpp"
#include "mpsc/corpus.hpp"
#include "mpsc/evaluate.hpp"
#include "mpsc/neural.hpp"
#include "mpsc/newsclient.hpp"
#include "mpsc/querygen.hpp"
#include "mpsc/random.hpp"
#include "mpsc/synfeat.hpp"
#include "mpsc/unicode.hpp"
#include "support/cli_runner.hpp"
#include "support/directional.hpp"
#include "support/gradcheck.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mpsc;

namespace {

// Pinned limits.
constexpr double kSyntacticSeconds = 5;
constexpr double kGradientSeconds = 120;
constexpr double kMemorizationSeconds = 60;
constexpr double kDirectionalSeconds = 600;
constexpr double kEndToEndSeconds = 300;
constexpr std::size_t kOracleMinStrings = 1000;
constexpr double kScalerMeanTol = 1e-9;
constexpr double kScalerVarTol = 1e-6;
constexpr std::size_t kGradientParameterizations = 20;
constexpr std::size_t kMemorizationSamples = 32;
constexpr std::size_t kMemorizationEpochs = 200;
constexpr std::size_t kDirectionalStatements = 2000;
constexpr double kDirectionalMargin = 0.02;  // two accuracy points
constexpr std::size_t kMetricTrials = 500;
constexpr double kMetricTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects failed sub-checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok && failed_.size() < 5) failed_.push_back(what);
    failures_ += ok ? 0 : 1;
  }
  std::size_t failures() const { return failures_; }
  Outcome outcome(std::string detail) const {
    if (failures_ == 0) return {true, std::move(detail)};
    std::string msg = std::to_string(failures_) + "/" + std::to_string(total_) + " checks failed";
    for (const auto& f : failed_) msg += "; " + f;
    return {false, msg + " | " + detail};
  }

 private:
  std::size_t total_ = 0;
  std::size_t failures_ = 0;
  std::vector<std::string> failed_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  ss << v;
  return ss.str();
}

std::string sci(double v) {
  std::ostringstream ss;
  ss.setf(std::ios::scientific);
  ss.precision(2);
  ss << v;
  return ss.str();
}

// ----------------------------------------------------------------------------

Outcome syntactic_oracle() {
  std::ifstream in(MPSC_TEST_DATA_DIR "/syntactic_oracle.jsonl");
  if (!in) return {false, "oracle fixture missing"};
  Checks c;
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    const auto j = json::parse(line);
    const auto expected = j["counts"].get<std::array<std::uint64_t, 5>>();
    const auto got = synfeat::count_features(j["text"].get<std::string>());
    const std::array<std::uint64_t, 5> g = {got.total_chars, got.uppercase, got.digits,
                                            got.punctuation, got.unknown};
    c.expect(g == expected, "string " + std::to_string(n + 1));
    ++n;
  }
  c.expect(n >= kOracleMinStrings, "only " + std::to_string(n) + " oracle strings");
  return c.outcome(std::to_string(n) + " randomized strings match the per-character oracle");
}

Outcome scaler_algebra() {
  Checks c;
  Rng rng(31);
  double worst_mean = 0, worst_var = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<synfeat::SyntacticVector> sample(2 + rng.below(400));
    for (auto& v : sample) {
      v = {rng.below(2000), rng.below(80), rng.below(60), rng.below(90), rng.below(6)};
    }
    // Force every dimension to vary.
    sample[0] = {0, 0, 0, 0, 0};
    sample[1] = {1, 1, 1, 1, 1};
    const auto p = synfeat::fit_scaler(sample);
    synfeat::Scaled mean{}, sq{};
    for (const auto& v : sample) {
      const auto s = p.scale(v);
      for (std::size_t i = 0; i < synfeat::kFeatureCount; ++i) mean[i] += s[i];
    }
    const double n = static_cast<double>(sample.size());
    for (auto& m : mean) m /= n;
    for (const auto& v : sample) {
      const auto s = p.scale(v);
      for (std::size_t i = 0; i < synfeat::kFeatureCount; ++i) {
        sq[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
      }
    }
    for (std::size_t i = 0; i < synfeat::kFeatureCount; ++i) {
      worst_mean = std::max(worst_mean, std::abs(mean[i]));
      worst_var = std::max(worst_var, std::abs(sq[i] / n - 1.0));
    }
  }
  c.expect(worst_mean < kScalerMeanTol, "mean " + sci(worst_mean));
  c.expect(worst_var < kScalerVarTol, "variance " + sci(worst_var));

  // A constant dimension keeps std 1, so it scales to exactly 0 and stays finite.
  std::vector<synfeat::SyntacticVector> constant = {{40, 3, 0, 2, 7}, {55, 1, 0, 4, 7},
                                                    {61, 2, 0, 1, 7}};
  const auto p = synfeat::fit_scaler(constant);
  c.expect(p.std()[2] == 1.0 && p.std()[4] == 1.0, "constant dimensions not clamped to std 1");
  for (const auto& v : constant) {
    const auto s = p.scale(v);
    c.expect(s[2] == 0.0 && s[4] == 0.0, "constant dimension did not scale to 0");
  }
  return c.outcome("200 samples: max |mean| " + sci(worst_mean) + ", max |var-1| " +
                   sci(worst_var) + "; constant dimensions clamped");
}

Outcome label_mapping() {
  Checks c;
  const std::map<std::string, corpus::Label> table = {
      {"true", corpus::Label::Credible},         {"mostly-true", corpus::Label::Credible},
      {"half-true", corpus::Label::Suspicious},  {"barely-true", corpus::Label::Suspicious},
      {"false", corpus::Label::Suspicious},      {"pants-fire", corpus::Label::Suspicious}};
  std::vector<std::string> credible;
  for (const auto& [raw, expected] : table) {
    const auto got = corpus::normalize_label(corpus::SourceId::Liar, raw);
    c.expect(got == expected, raw);
    if (got == corpus::Label::Credible) credible.push_back(raw);
  }
  c.expect(credible == std::vector<std::string>{"mostly-true", "true"}, "credible set");
  bool rejected = false;
  try {
    corpus::normalize_label(corpus::SourceId::Liar, "somewhat-true");
  } catch (const corpus::UnknownLabel&) {
    rejected = true;
  }
  c.expect(rejected, "unknown label accepted");
  return c.outcome("six LIAR classes mapped; CREDIBLE = {true, mostly-true}");
}

Outcome split_fidelity() {
  Checks c;
  // Stratum sizes in the spirit of the four sources; they sum to 93,652.
  const std::vector<std::tuple<corpus::SourceId, corpus::Label, std::size_t>> strata = {
      {corpus::SourceId::Isot, corpus::Label::Credible, 21417},
      {corpus::SourceId::Isot, corpus::Label::Suspicious, 23481},
      {corpus::SourceId::Liar, corpus::Label::Credible, 4507},
      {corpus::SourceId::Liar, corpus::Label::Suspicious, 8284},
      {corpus::SourceId::FakeNewsNet, corpus::Label::Credible, 17441},
      {corpus::SourceId::FakeNewsNet, corpus::Label::Suspicious, 5755},
      {corpus::SourceId::Fnid, corpus::Label::Credible, 6531},
      {corpus::SourceId::Fnid, corpus::Label::Suspicious, 6236}};
  std::vector<corpus::LabeledStatement> data;
  for (const auto& [source, label, n] : strata) {
    for (std::size_t i = 0; i < n; ++i) {
      data.push_back({std::string(corpus::source_name(source)) + "/" +
                          std::string(corpus::label_name(label)) + "/" + std::to_string(i),
                      label, source});
    }
  }
  c.expect(data.size() == 93652, "corpus size");
  const std::array<std::size_t, 3> target = {72669, 10501, 10482};
  const corpus::Ratios ratios = {72669.0 / 93652.0, 10501.0 / 93652.0, 10482.0 / 93652.0};
  const auto s = corpus::stratified_split(data, ratios, 42);
  const std::array<const std::vector<corpus::LabeledStatement>*, 3> parts = {
      &s.train, &s.validation, &s.evaluation};
  for (std::size_t k = 0; k < 3; ++k) {
    const double diff = std::abs(double(parts[k]->size()) - double(target[k]));
    c.expect(diff <= double(strata.size()),
             "split " + std::to_string(k) + " size " + std::to_string(parts[k]->size()));
    std::map<std::pair<corpus::SourceId, corpus::Label>, std::size_t> got;
    for (const auto& st : *parts[k]) ++got[{st.source, st.label}];
    for (const auto& [source, label, n] : strata) {
      c.expect(std::abs(double(got[{source, label}]) - ratios[k] * double(n)) <= 1.0,
               "stratum proportion");
    }
  }
  auto bytes = [](const corpus::DataSplits& d) {
    std::ostringstream out;
    corpus::write_jsonl(out, d.train);
    corpus::write_jsonl(out, d.validation);
    corpus::write_jsonl(out, d.evaluation);
    return out.str() + corpus::split_manifest_json(d);
  };
  const std::string first = bytes(s);
  c.expect(first == bytes(corpus::stratified_split(data, ratios, 42)), "same seed differs");
  c.expect(first != bytes(corpus::stratified_split(data, ratios, 43)), "seed ignored");
  return c.outcome("93652 -> " + std::to_string(s.train.size()) + " / " +
                   std::to_string(s.validation.size()) + " / " +
                   std::to_string(s.evaluation.size()) +
                   " (target 72669 / 10501 / 10482); every stratum within 1 record; "
                   "byte-identical for a fixed seed");
}

Outcome gradient_suite() {
  Checks c;
  testing::GradCheck all;
  for (std::uint64_t seed = 1; seed <= kGradientParameterizations; ++seed) {
    const auto parts = {testing::check_lstm_cell(seed), testing::check_gru_cell(seed),
                        testing::check_network(neural::BranchType::Lstm, seed),
                        testing::check_network(neural::BranchType::Gru, seed)};
    const char* names[] = {"lstm cell", "gru cell", "lstm network", "gru network"};
    std::size_t i = 0;
    for (const auto& g : parts) {
      c.expect(g.ok(), std::string(names[i++]) + " seed " + std::to_string(seed) + " " +
                           g.worst + " " + sci(g.max_rel_error));
      all.merge(g);
    }
  }
  return c.outcome(std::to_string(kGradientParameterizations) +
                   " parameterizations x {LSTM cell, GRU cell, LSTM net, GRU net}; " +
                   std::to_string(all.checked) + " entries, max rel error " +
                   sci(all.max_rel_error) + " (tol " + sci(testing::kRelTolerance) + ", step " +
                   sci(testing::kFdStep) + ", denominator floor " +
                   sci(testing::kDenominatorFloor) + " active on " +
                   std::to_string(all.floored) + " entries), max abs error " +
                   sci(all.max_abs_error));
}

textprep::EmbeddedSequence random_sequence(std::size_t len, std::size_t pad, std::size_t dim,
                                           std::uint64_t seed) {
  Rng rng(seed);
  textprep::EmbeddedSequence seq;
  seq.max_len = len + pad;
  seq.dimension = dim;
  seq.true_length = len;
  seq.vectors.assign(seq.max_len * dim, 0.0f);
  seq.mask.assign(seq.max_len, 0);
  for (std::size_t t = 0; t < len; ++t) {
    seq.mask[t] = 1;
    for (std::size_t k = 0; k < dim; ++k) {
      seq.vectors[t * dim + k] = static_cast<float>(rng.uniform(-1, 1));
    }
  }
  return seq;
}

Outcome masking_invariance() {
  Checks c;
  std::size_t compared = 0;
  for (auto type : {neural::BranchType::Lstm, neural::BranchType::Gru,
                    neural::BranchType::EncoderAdapter}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto config = neural::ModelConfig::defaults(type, 32);
      auto params = neural::initialize(config, seed);
      params.scaler = synfeat::ScalerParams::restore({50, 3, 4, 2, 0}, {10, 2, 3, 1, 1}, 1);
      const synfeat::Scaled syn = {0.3, -1.0, 2.0, 0.1, 0.0};
      const std::size_t len = 1 + seed * 3;
      const double base =
          neural::forward(params, random_sequence(len, 0, 32, seed), syn, false, 0);
      for (std::size_t pad : {1u, 7u, 100u}) {
        const double padded =
            neural::forward(params, random_sequence(len, pad, 32, seed), syn, false, 0);
        c.expect(padded - base == 0.0, std::string(neural::branch_name(type)) + " pad " +
                                           std::to_string(pad) + " changed output by " +
                                           sci(padded - base));
        ++compared;
      }
    }
  }
  return c.outcome(std::to_string(compared) +
                   " padded forwards (LSTM, GRU, encoder; default sizes) differ by exactly 0");
}

Outcome memorization() {
  Checks c;
  Rng rng(7);
  std::vector<neural::Sample> data;
  for (std::size_t i = 0; i < kMemorizationSamples; ++i) {
    neural::Sample s;
    s.length = 4 + rng.below(9);
    for (std::size_t k = 0; k < s.length * 32; ++k) {
      s.tokens.push_back(static_cast<float>(rng.uniform(-1, 1)));
    }
    s.counts = {30 + rng.below(100), rng.below(10), rng.below(10), rng.below(8), 0};
    s.label = i % 2 ? corpus::Label::Suspicious : corpus::Label::Credible;
    data.push_back(std::move(s));
  }
  const auto config = neural::ModelConfig::defaults(neural::BranchType::Lstm, 32);
  neural::TrainConfig tc;
  tc.max_epochs = kMemorizationEpochs;
  tc.patience = kMemorizationEpochs;
  std::size_t first_perfect = 0;
  const auto result = neural::train(data, data, config, tc, [&](const neural::EpochStats& e) {
    if (first_perfect == 0 && e.validation_accuracy == 1.0) first_perfect = e.epoch;
  });
  const auto ev = neural::evaluate_samples(result.params, data);
  c.expect(ev.accuracy == 1.0, "final training accuracy " + fmt(ev.accuracy));
  return c.outcome("32 random samples, default LSTM: 100% first at epoch " +
                   std::to_string(first_perfect) + ", final accuracy " + fmt(ev.accuracy, 3));
}

Outcome directional() {
  Checks c;
  double combined = 0, lexical = 0, syntactic = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = testing::run_directional(kDirectionalStatements, seed);
    combined += r.combined / 3;
    lexical += r.lexical / 3;
    syntactic += r.syntactic / 3;
    per_seed += " s" + std::to_string(seed) + "=" + fmt(r.combined, 3) + "/" +
                fmt(r.lexical, 3) + "/" + fmt(r.syntactic, 3);
  }
  c.expect(combined >= lexical + kDirectionalMargin, "combined not 2 points above lexical");
  c.expect(syntactic < lexical && syntactic < combined, "syntactic-only not lowest");
  return c.outcome("mean accuracy combined " + fmt(100 * combined, 2) + ", lexical " +
                   fmt(100 * lexical, 2) + ", syntactic " + fmt(100 * syntactic, 2) +
                   " (per seed c/l/s:" + per_seed + ")");
}

Outcome metrics_check() {
  Checks c;
  using corpus::Label;
  Rng rng(4242);
  double worst = 0;
  for (std::size_t trial = 0; trial < kMetricTrials; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    const double bias = rng.uniform();
    std::vector<Label> pred(n), actual(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rng.uniform() < bias ? Label::Suspicious : Label::Credible;
      actual[i] = rng.uniform() < 0.5 ? Label::Suspicious : Label::Credible;
    }
    const auto r = evaluate::metrics(evaluate::confusion(pred, actual));
    double correct = 0, ps = 0, as = 0, both = 0;
    for (std::size_t i = 0; i < n; ++i) {
      correct += pred[i] == actual[i];
      ps += pred[i] == Label::Suspicious;
      as += actual[i] == Label::Suspicious;
      both += pred[i] == Label::Suspicious && actual[i] == Label::Suspicious;
    }
    const double acc = correct / double(n);
    const double prec = ps > 0 ? both / ps : 0.0;
    const double rec = as > 0 ? both / as : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    for (double d : {r.accuracy - acc, r.precision - prec, r.recall - rec, r.f1 - f1}) {
      worst = std::max(worst, std::abs(d));
    }
  }
  c.expect(worst <= kMetricTol, "deviation " + sci(worst));
  const auto hand = evaluate::metrics({9, 1, 1, 9});
  for (double v : {hand.accuracy, hand.precision, hand.recall, hand.f1}) {
    c.expect(std::abs(v - 0.9) <= kMetricTol, "hand case " + fmt(v, 15));
  }
  return c.outcome("500 random matrices, max deviation " + sci(worst) +
                   "; tp=9 fp=1 fn=1 tn=9 gives 0.9 for all four");
}

std::string normalized(std::string_view s) {
  std::string out;
  for (const auto& t : textprep::tokenize(unicode::lower(s))) out += t + " ";
  return out;
}

Outcome query_generation() {
  Checks c;
  Rng rng(77);
  const std::vector<std::string> words = {"Senate", "tax",   "Bill", "jobs",   "the",  "of",
                                          "NASA",   "rover", "climate", "and", "2020", "prices",
                                          "Économie", "said", "a",     "in",     "Budget"};
  const std::vector<std::string> seps = {" ", " ", " ", ", ", ". ", "! ", " - "};
  std::size_t keywords = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const auto n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      text += words[rng.below(words.size())] + seps[rng.below(seps.size())];
    }
    const std::string hay = normalized(text);
    for (const auto& kw : querygen::extract_keywords(text, 1 + rng.below(10))) {
      c.expect(hay.find(kw.text()) != std::string::npos, "keyword '" + kw.text() + "'");
      ++keywords;
    }
  }

  std::size_t summaries = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    const std::size_t sentences = 1 + rng.below(12);
    for (std::size_t i = 0; i < sentences; ++i) {
      const std::size_t len = 2 + rng.below(8);
      for (std::size_t w = 0; w < len; ++w) {
        std::string word = words[rng.below(words.size())];
        if (w == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        text += word + (w + 1 < len ? " " : "");
      }
      text += " s" + std::to_string(i) + ". ";
    }
    const auto all = querygen::split_sentences(text);
    for (double ratio : {0.1, 0.25, 0.5, 0.8, 1.0}) {
      const auto got = querygen::summarize(text, ratio);
      const auto want = static_cast<std::size_t>(std::ceil(ratio * double(all.size()) - 1e-9));
      c.expect(got.size() == want, "summary size " + std::to_string(got.size()) + " != " +
                                       std::to_string(want));
      std::size_t cursor = 0;
      bool ordered = true;
      for (const auto& s : got) {
        const auto it = std::find(all.begin() + std::ptrdiff_t(cursor), all.end(), s);
        if (it == all.end()) {
          ordered = false;
          break;
        }
        cursor = std::size_t(it - all.begin()) + 1;
      }
      c.expect(ordered, "summary not in document order");
      ++summaries;
    }
  }

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(12);
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        w[i * n + j] = w[j * n + i] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.1, 3.0);
      }
    }
    std::vector<double> scaled(w);
    const double k = rng.uniform(0.01, 100.0);
    for (auto& x : scaled) x *= k;
    auto argsort = [](const std::vector<double>& v) {
      std::vector<std::size_t> idx(v.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
      return idx;
    };
    c.expect(argsort(querygen::rank_graph(w, n)) == argsort(querygen::rank_graph(scaled, n)),
             "ranking changed under scaling");
  }
  return c.outcome(std::to_string(keywords) + " keywords all substrings; " +
                   std::to_string(summaries) + " summaries of ceil(ratio*n) sentences in order; "
                   "100 graphs rank-invariant under scaling");
}

// Any call is a test failure; the process stops so no request can be half-made.
class AbortingTransport final : public news::Transport {
 public:
  news::HttpResponse get(const news::HttpRequest& request) override {
    std::cout << "FAIL news-and-checkpoint: transport called for " << request.url << std::endl;
    std::abort();
  }
};

Outcome news_and_checkpoint() {
  Checks c;
  testing::ScratchDir dir("acceptance_news");
  {
    std::ofstream(dir / "fixtures.json") << R"({"climate bill": {"status":"ok","articles":[
      {"source":{"name":"Wire"},"title":"Bill stalls","description":"Votes short.",
       "url":"https://wire.example/a","publishedAt":"2024-04-01T08:00:00Z"},
      {"source":{"name":"Daily"},"title":"Climate bill advances","description":"Vote.",
       "url":"https://daily.example/b","publishedAt":"2024-04-02T09:30:00Z"}]}})";
  }
  news::NewsSourceConfig cfg;
  cfg.mode = news::Mode::Fixture;
  cfg.fixture_path = dir / "fixtures.json";
  news::NewsClient::Options opts;
  opts.transport = std::make_shared<AbortingTransport>();
  opts.cache_dir = dir / "cache";
  opts.env = [](const std::string&) { return std::optional<std::string>("not-used"); };
  news::NewsClient client(cfg, opts);

  querygen::SearchQuery q;
  q.terms = {"climate", "bill"};
  q.raw = "climate bill";
  const auto hit = client.search(q);
  c.expect(hit.articles.size() == 2 && hit.articles[0].title == "Climate bill advances",
           "fixture hit");
  querygen::SearchQuery miss = q;
  miss.raw = miss.terms[0] = "weather";
  miss.terms.pop_back();
  c.expect(client.search(miss).articles.empty(), "fixture miss");
  const auto first = client.cached(q, std::chrono::seconds(3600));
  const auto second = client.cached(q, std::chrono::seconds(3600));
  c.expect(!first.from_cache && second.from_cache && second.articles == hit.articles,
           "fixture cache");
  c.expect(client.upstream_requests() == 0, "upstream requests counted");
  const auto built = querygen::build_query("The Climate Bill passed the Senate on Tuesday.");
  c.expect(!built.raw.empty(), "query build");
  client.search(built);

  // Checkpoints.
  std::size_t roundtrips = 0, corruptions = 0;
  for (auto type : {neural::BranchType::Lstm, neural::BranchType::Gru,
                    neural::BranchType::EncoderAdapter}) {
    for (bool syntactic : {true, false}) {
      auto config = neural::ModelConfig::defaults(type, 16);
      config.use_syntactic = syntactic;
      auto p = neural::initialize(config, 3);
      p.scaler = synfeat::ScalerParams::restore({51.25, 3.5, 4, 2, 0.1}, {10.5, 2, 1.0 / 3, 1, 1},
                                                977);
      p.featurizer = {{"embeddings", "hash-stub-16"}};
      const std::string bytes = neural::serialize_checkpoint(p);
      const auto q2 = neural::deserialize_checkpoint(bytes);
      c.expect(q2 == p, "round trip not equal");
      c.expect(neural::serialize_checkpoint(q2) == bytes, "re-serialization differs");
      ++roundtrips;
      Rng rng(static_cast<std::uint64_t>(type) * 2 + syntactic);
      for (int k = 0; k < 20; ++k) {
        std::string bad = bytes;
        const std::size_t at = 10 + rng.below(bad.size() - 10);
        bad[at] = static_cast<char>(bad[at] ^ (1 << rng.below(8)));
        bool detected = false;
        try {
          neural::deserialize_checkpoint(bad);
        } catch (const neural::CorruptChecksum&) {
          detected = true;
        } catch (const neural::CheckpointError&) {
          detected = at < 10;
        }
        c.expect(detected, "flipped byte " + std::to_string(at) + " not detected");
        ++corruptions;
      }
      bool truncated = false;
      try {
        neural::deserialize_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 1));
      } catch (const neural::CorruptChecksum&) {
        truncated = true;
      }
      c.expect(truncated, "truncation not detected");
    }
  }
  return c.outcome("fixture search, miss, cache and built query ran with an aborting transport; " +
                   std::to_string(roundtrips) + " checkpoints round-trip bit-exact; " +
                   std::to_string(corruptions) + " single-bit corruptions and truncations "
                   "rejected by checksum");
}

// Structural schema of the eval report.
void validate_report(const json& j, std::size_t rows, std::size_t evaluated, Checks& c) {
  c.expect(j.is_object() && j.contains("rows") && j["rows"].is_array(), "report.rows");
  if (!j.contains("rows")) return;
  c.expect(j["rows"].size() == rows, "row count " + std::to_string(j["rows"].size()));
  for (const auto& r : j["rows"]) {
    c.expect(r.contains("model") && r["model"].is_string(), "row.model");
    for (const char* k : {"accuracy", "precision", "recall", "f1"}) {
      c.expect(r.contains(k) && r[k].is_number() && r[k].get<double>() >= 0.0 &&
                   r[k].get<double>() <= 1.0,
               std::string("row.") + k);
    }
    c.expect(r.contains("matrix") && r["matrix"].is_object(), "row.matrix");
    std::uint64_t total = 0;
    for (const char* k : {"tp", "fp", "fn", "tn"}) {
      const bool ok = r["matrix"].contains(k) && r["matrix"][k].is_number_unsigned();
      c.expect(ok, std::string("matrix.") + k);
      if (ok) total += r["matrix"][k].get<std::uint64_t>();
    }
    c.expect(total == evaluated, "matrix total " + std::to_string(total));
    c.expect(r.contains("degenerate") && r["degenerate"].is_array(), "row.degenerate");
  }
}

Outcome end_to_end_cli() {
  Checks c;
  const fs::path bin = MPSC_CLI_PATH;
  const fs::path toy = fs::path(MPSC_SOURCE_DIR) / "data" / "toy";
  testing::ScratchDir dir("acceptance_e2e");
  auto run = [&](const std::vector<std::string>& args) {
    const auto r = testing::run_cli(bin, args, dir.path());
    c.expect(r.exit_code == 0, args[0] + " exit " + std::to_string(r.exit_code) + ": " + r.err);
    return r;
  };
  run({"ingest", "--isot-true", (toy / "isot_true.csv").string(), "--isot-fake",
       (toy / "isot_fake.csv").string(), "--liar", (toy / "liar.tsv").string(), "--fakenewsnet",
       (toy / "fakenewsnet.csv").string(), "--fnid", (toy / "fnid.csv").string(), "--fnid-csv",
       "--out", "corpus.jsonl", "--seed", "42"});
  run({"train", "--model", "lstm", "--syntactic", "on", "--corpus", "corpus.jsonl", "--out",
       "lstm.ckpt", "--seed", "42"});
  run({"train", "--model", "gru", "--syntactic", "off", "--corpus", "corpus.jsonl", "--out",
       "gru.ckpt", "--seed", "42"});
  run({"eval", "lstm.ckpt", "gru.ckpt", "--corpus", "corpus.jsonl", "--baseline", "syntactic",
       "--json-out", "report.json", "--seed", "42"});
  std::size_t evaluated = 0;
  try {
    evaluated = json::parse(testing::slurp(dir / "corpus.split.json"))["counts"]["evaluation"];
    const std::string text = testing::slurp(dir / "report.json");
    c.expect(!text.empty() && text.back() == '\n', "report lacks trailing newline");
    validate_report(json::parse(text), 3, evaluated, c);
  } catch (const json::exception& e) {
    c.expect(false, std::string("report: ") + e.what());
  }
  const auto offline = run({"check", "--policy", "statement", "--model", "lstm.ckpt",
                            "SHOCKING: Senator CAUGHT hiding secret accounts!!!"});
  const auto online = run({"check", "--policy", "search", "--news-mode", "fixture", "--fixtures",
                           (toy / "fixtures.json").string(), "--model", "lstm.ckpt",
                           "Senate passes budget resolution after overnight session"});
  std::string verdicts;
  try {
    for (const auto* out : {&offline.out, &online.out}) {
      const auto j = json::parse(*out);
      c.expect(j["verdict"].is_string(), "check verdict");
      c.expect(j["probability_suspicious"].is_number(), "check probability");
      c.expect(j["query_terms"].is_array() && j["article_count"].is_number_unsigned(),
               "check fields");
      verdicts += " " + j["verdict"].get<std::string>() + "(" +
                  fmt(j["probability_suspicious"].get<double>(), 3) + ", " +
                  std::to_string(j["article_count"].get<std::size_t>()) + " articles)";
    }
  } catch (const json::exception& e) {
    c.expect(false, std::string("check output: ") + e.what());
  }
  return c.outcome("ingest -> train x2 -> eval (+baseline, 3 schema-valid rows over " +
                   std::to_string(evaluated) + " statements) -> check:" + verdicts);
}

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
  double limit_seconds = 0;  // 0 = no runtime criterion
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"syntactic-oracle", syntactic_oracle, kSyntacticSeconds},
      {"scaler-algebra", scaler_algebra},
      {"label-mapping", label_mapping},
      {"split-fidelity", split_fidelity},
      {"gradient-suite", gradient_suite, kGradientSeconds},
      {"masking-invariance", masking_invariance},
      {"memorization", memorization, kMemorizationSeconds},
      {"directional", directional, kDirectionalSeconds},
      {"metrics", metrics_check},
      {"query-generation", query_generation},
      {"news-and-checkpoint", news_and_checkpoint},
      {"end-to-end-cli", end_to_end_cli, kEndToEndSeconds},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt(secs, 1) + " s";
    if (cr.limit_seconds > 0) {
      timing += " < " + fmt(cr.limit_seconds, 0) + " s";
      if (secs >= cr.limit_seconds) {
        o.pass = false;
        timing = "over time limit: " + fmt(secs, 1) + " s >= " + fmt(cr.limit_seconds, 0) + " s";
      }
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << cr.name << ": " << o.detail << " [" << timing
              << "]" << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures;
}
