#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mpsc/checkpoint.hpp"
#include "mpsc/corpus.hpp"
#include "mpsc/evaluate.hpp"
#include "mpsc/neural.hpp"
#include "mpsc/newsclient.hpp"
#include "mpsc/querygen.hpp"
#include "mpsc/sha256.hpp"
#include "mpsc/textprep.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using namespace mpsc;

// Runtime I/O failure (exit 1).
class IoError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

// Staged writes: nothing becomes visible until commit() renames every file.
class StagedFiles {
 public:
  ~StagedFiles() {
    for (const auto& [tmp, _] : staged_) {
      std::error_code ec;
      fs::remove(tmp, ec);
    }
  }
  void add(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << bytes;
    out.close();
    if (!out) throw IoError("cannot write " + path.string());
    staged_.emplace_back(tmp, path);
  }
  void commit() {
    for (const auto& [tmp, path] : staged_) fs::rename(tmp, path);
    staged_.clear();
  }

 private:
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

void write_file(const fs::path& path, const std::string& bytes) {
  StagedFiles f;
  f.add(path, bytes);
  f.commit();
}

std::string now_iso() { return news::format_timestamp(news::SystemClock{}.now()); }

fs::path with_suffix(const fs::path& path, std::string_view suffix) {
  fs::path p = path;
  p += std::string(suffix);
  return p;
}

fs::path default_manifest_for(const fs::path& corpus) {
  fs::path p = corpus;
  p.replace_extension(".split.json");
  return p;
}

struct Globals {
  std::string config;
  std::uint64_t seed = 42;
  bool verbose = false;
  std::string run_manifest;
};

class RunManifest {
 public:
  RunManifest(std::string command, const Globals& g, std::vector<std::string> argv)
      : command_(std::move(command)), globals_(g), argv_(std::move(argv)), started_(now_iso()) {}

  void artifact(const std::string& kind, const fs::path& path) { artifacts_[kind] = path.string(); }
  void set_path(fs::path p) {
    if (path_.empty()) path_ = std::move(p);
  }

  void write(int exit_code, const std::string& error) const {
    if (path_.empty()) return;
    json j;
    j["command"] = command_;
    j["config"] = globals_.config.empty() ? json(nullptr) : json(globals_.config);
    j["seed"] = globals_.seed;
    j["arguments"] = argv_;
    j["started_at"] = started_;
    j["finished_at"] = now_iso();
    j["exit_code"] = exit_code;
    j["error"] = error.empty() ? json(nullptr) : json(error);
    j["artifacts"] = artifacts_;
    try {
      write_file(path_, j.dump(2) + "\n");
    } catch (const std::exception& e) {
      std::cerr << "mpsc: warning: cannot write run manifest: " << e.what() << "\n";
    }
  }

 private:
  std::string command_;
  Globals globals_;
  std::vector<std::string> argv_;
  std::string started_;
  fs::path path_;
  json artifacts_ = json::object();
};

void info(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << "\n";
}

void warn(const std::string& msg) { std::cerr << "mpsc: warning: " << msg << "\n"; }

// ---------------------------------------------------------------- featurizers

struct FeaturizerOptions {
  std::string embeddings;  // table file; empty selects the hash stub
  std::size_t embedding_dim = 32;
  std::string lemma_dict;
  std::string stopwords;
};

// Owns everything a Featurizers view points into.
struct FeaturizerSet {
  std::unique_ptr<textprep::EmbeddingProvider> provider;
  std::unique_ptr<textprep::Stoplist> stoplist;  // heap-held: the encoder keeps its address
  std::unique_ptr<textprep::Lemmatizer> lemmatizer;
  std::unique_ptr<neural::MeanPoolEncoder> encoder;
  std::map<std::string, std::string> description;

  neural::Featurizers view() const {
    neural::Featurizers f;
    f.lexical.provider = provider.get();
    f.lexical.stoplist = stoplist.get();
    f.lexical.lemmatizer = lemmatizer.get();
    f.encoder = encoder.get();
    return f;
  }
};

FeaturizerSet build_featurizers(const FeaturizerOptions& opt, bool quiet_stub) {
  FeaturizerSet set;
  if (!opt.embeddings.empty()) {
    const fs::path path = fs::absolute(opt.embeddings);
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    set.provider = std::make_unique<textprep::EmbeddingTable>(
        textprep::EmbeddingTable::load(in, path.filename().string()));
    set.description["embeddings_path"] = path.string();
    set.description["embeddings_sha256"] = sha256_hex(bytes);
  } else {
    if (opt.embedding_dim == 0) throw InputError("embedding dimension must be positive");
    set.provider = std::make_unique<textprep::HashEmbedding>(opt.embedding_dim);
    if (!quiet_stub) {
      warn("no --embeddings table given; using deterministic " + set.provider->name() +
           " vectors, which carry no semantic similarity");
    }
  }
  set.description["embeddings"] = set.provider->name();
  set.description["embedding_dimension"] = std::to_string(set.provider->dimension());

  if (!opt.stopwords.empty()) {
    const fs::path path = fs::absolute(opt.stopwords);
    std::istringstream in(read_file(path));
    set.stoplist = std::make_unique<textprep::Stoplist>(textprep::Stoplist::load(in));
    set.description["stopwords"] = path.string();
  } else {
    set.stoplist = std::make_unique<textprep::Stoplist>(textprep::Stoplist::english());
    set.description["stopwords"] = "english";
  }

  if (!opt.lemma_dict.empty()) {
    const fs::path path = fs::absolute(opt.lemma_dict);
    if (!fs::exists(path)) throw IoError("cannot read " + path.string());
    set.lemmatizer = std::make_unique<textprep::DictionaryLemmatizer>(
        textprep::DictionaryLemmatizer::load(path));
    set.description["lemma_dict"] = path.string();
  } else {
    set.lemmatizer = std::make_unique<textprep::SuffixLemmatizer>();
  }
  set.description["lemmatizer"] = set.lemmatizer->name();

  textprep::LexicalPipeline pipeline;
  pipeline.provider = set.provider.get();
  pipeline.stoplist = set.stoplist.get();
  pipeline.lemmatizer = set.lemmatizer.get();
  set.encoder = std::make_unique<neural::MeanPoolEncoder>(pipeline);
  return set;
}

// Rebuilds the featurizers a checkpoint was trained with; explicit flags override.
FeaturizerSet featurizers_for(const neural::NetworkParams& params, FeaturizerOptions overrides) {
  const auto& d = params.featurizer;
  auto get = [&](const std::string& key) -> std::string {
    const auto it = d.find(key);
    return it == d.end() ? std::string() : it->second;
  };
  FeaturizerOptions opt;
  opt.embeddings = !overrides.embeddings.empty() ? overrides.embeddings : get("embeddings_path");
  if (const auto dim = get("embedding_dimension"); !dim.empty()) {
    opt.embedding_dim = std::stoul(dim);
  } else if (params.config.input_dimension > 0) {
    opt.embedding_dim = params.config.input_dimension;
  }
  opt.lemma_dict = !overrides.lemma_dict.empty() ? overrides.lemma_dict : get("lemma_dict");
  if (!overrides.stopwords.empty()) {
    opt.stopwords = overrides.stopwords;
  } else if (const auto s = get("stopwords"); s != "english") {
    opt.stopwords = s;
  }
  FeaturizerSet set = build_featurizers(opt, true);
  if (params.config.use_lexical && set.provider->dimension() != params.config.input_dimension) {
    throw neural::ShapeMismatch("embedding dimension " +
                                std::to_string(set.provider->dimension()) +
                                " does not match the checkpoint input dimension " +
                                std::to_string(params.config.input_dimension));
  }
  return set;
}

// ---------------------------------------------------------------- corpus

struct LoadedCorpus {
  std::vector<corpus::LabeledStatement> statements;
  std::string sha256;
};

LoadedCorpus load_corpus(const fs::path& path) {
  LoadedCorpus c;
  const std::string bytes = read_file(path);
  c.sha256 = sha256_hex(bytes);
  std::istringstream in(bytes);
  c.statements = corpus::read_jsonl(in);
  return c;
}

// Re-derives the splits recorded in a manifest and checks the counts agree.
corpus::DataSplits resplit(const LoadedCorpus& c, const fs::path& manifest_path) {
  const auto manifest = corpus::parse_split_manifest(read_file(manifest_path));
  auto splits = corpus::stratified_split(c.statements, manifest.ratios, manifest.seed);
  const std::array<std::size_t, 3> got{splits.train.size(), splits.validation.size(),
                                       splits.evaluation.size()};
  if (got != manifest.counts) {
    throw Error("split manifest " + manifest_path.string() +
                " does not match the corpus (counts differ)");
  }
  return splits;
}

std::string counts_line(const corpus::DataSplits& s) {
  return "train " + std::to_string(s.train.size()) + ", validation " +
         std::to_string(s.validation.size()) + ", evaluation " +
         std::to_string(s.evaluation.size());
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string isot_true, isot_fake, liar, fakenewsnet, fnid;
  std::string out, manifest;
  // Reference split 72669 / 10501 / 10482 of 93652 records, as fractions.
  std::vector<double> ratios{72669.0 / 93652.0, 10501.0 / 93652.0, 10482.0 / 93652.0};
  bool fnid_fakenewsnet_layout = false;
};

void cmd_ingest(const IngestArgs& a, const Globals& g, RunManifest& run) {
  struct Input {
    corpus::SourceId source;
    std::string path;
    corpus::SourceFormat format;
  };
  std::vector<Input> inputs;
  auto add = [&](corpus::SourceId id, const std::string& path, corpus::SourceFormat fmt = {}) {
    if (!path.empty()) inputs.push_back({id, path, std::move(fmt)});
  };
  corpus::SourceFormat fake;
  fake.isot_label = "fake";
  corpus::SourceFormat fnid;
  fnid.fnid_fakenewsnet_layout = a.fnid_fakenewsnet_layout;
  add(corpus::SourceId::Isot, a.isot_true);
  add(corpus::SourceId::Isot, a.isot_fake, fake);
  add(corpus::SourceId::Liar, a.liar);
  add(corpus::SourceId::FakeNewsNet, a.fakenewsnet);
  add(corpus::SourceId::Fnid, a.fnid, fnid);
  if (inputs.empty()) throw InputError("ingest needs at least one dataset path");
  if (a.ratios.size() != 3) throw InputError("--ratios takes three comma-separated values");

  // Read everything before writing anything.
  std::vector<std::string> bytes;
  for (const auto& in : inputs) bytes.push_back(read_file(in.path));

  std::vector<std::pair<corpus::SourceId, std::vector<corpus::RawRecord>>> parsed;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    corpus::ParseResult r;
    try {
      r = corpus::parse_source(inputs[i].source, bytes[i], inputs[i].format);
    } catch (const corpus::MalformedRow& e) {
      throw InputError(inputs[i].path + ": " + e.what());
    }
    dropped += r.dropped_empty;
    std::cerr << "read " << r.records.size() << " records from " << inputs[i].path << " ("
              << corpus::source_name(inputs[i].source) << ", " << r.dropped_empty
              << " empty dropped)\n";
    parsed.emplace_back(inputs[i].source, std::move(r.records));
  }
  const auto merged = corpus::merge(parsed);
  const corpus::Ratios ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
  const auto splits = corpus::stratified_split(merged.statements, ratios, g.seed);

  std::ostringstream jsonl;
  corpus::write_jsonl(jsonl, merged.statements);
  const fs::path out = a.out;
  const fs::path manifest = a.manifest.empty() ? default_manifest_for(out) : fs::path(a.manifest);
  StagedFiles files;
  files.add(out, jsonl.str());
  files.add(manifest, corpus::split_manifest_json(splits));
  files.commit();
  run.artifact("corpus", out);
  run.artifact("split_manifest", manifest);

  std::size_t suspicious = 0;
  for (const auto& s : merged.statements) suspicious += s.label == corpus::Label::Suspicious;
  std::cerr << "merged " << merged.statements.size() << " statements (" << suspicious
            << " suspicious, " << merged.statements.size() - suspicious << " credible); "
            << merged.duplicates << " duplicates and " << dropped << " empty rows dropped\n";
  for (const auto& [source, n] : merged.duplicates_by_source) {
    std::cerr << "  duplicates in " << corpus::source_name(source) << ": " << n << "\n";
  }
  std::cerr << "split: " << counts_line(splits) << "\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string model = "lstm";
  std::string syntactic = "on";
  std::string corpus, manifest, out, history;
  FeaturizerOptions featurizers;
  std::optional<std::size_t> batch_size, max_epochs, patience, max_len, head_size;
  std::optional<double> learning_rate, dropout;
  std::vector<std::size_t> layers;
};

bool parse_switch(const std::string& v, const char* flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw InputError(std::string(flag) + " takes on or off");
}

json history_json(const neural::TrainResult& r, const neural::TrainConfig& tc,
                  const neural::ModelConfig& mc) {
  json j;
  j["model"] = neural::branch_name(mc.branch_type);
  j["syntactic"] = mc.use_syntactic;
  j["seed"] = tc.seed;
  j["batch_size"] = tc.batch_size;
  j["learning_rate"] = tc.learning_rate;
  j["max_epochs"] = tc.max_epochs;
  j["patience"] = tc.patience;
  j["best_epoch"] = r.best_epoch;
  j["stopped_early"] = r.stopped_early;
  json epochs = json::array();
  for (const auto& e : r.history) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"validation_loss", e.validation_loss},
                      {"validation_accuracy", e.validation_accuracy}});
  }
  j["epochs"] = std::move(epochs);
  return j;
}

void cmd_train(const TrainArgs& a, const Globals& g, RunManifest& run) {
  const auto branch = neural::parse_branch_name(a.model);
  const bool syntactic = parse_switch(a.syntactic, "--syntactic");
  const fs::path out = a.out;
  const fs::path history = a.history.empty() ? with_suffix(out, ".history.json") : fs::path(a.history);
  run.artifact("checkpoint", out);
  run.artifact("history", history);
  run.artifact("corpus", a.corpus);

  const auto c = load_corpus(a.corpus);
  const fs::path manifest = a.manifest.empty() ? default_manifest_for(a.corpus) : fs::path(a.manifest);
  const auto splits = resplit(c, manifest);
  info(g, "split: " + counts_line(splits));

  FeaturizerSet feats = build_featurizers(a.featurizers, false);
  auto config = neural::ModelConfig::defaults(branch, feats.provider->dimension());
  config.use_syntactic = syntactic;
  if (!a.layers.empty()) config.layer_sizes = a.layers;
  if (a.head_size) config.head_size = *a.head_size;
  if (a.dropout) config.dropout = *a.dropout;
  if (a.max_len) config.max_len = *a.max_len;
  config.validate();

  auto tc = neural::TrainConfig::defaults(branch);
  tc.seed = g.seed;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.max_epochs) tc.max_epochs = *a.max_epochs;
  if (a.patience) tc.patience = *a.patience;
  if (a.learning_rate) tc.learning_rate = *a.learning_rate;
  tc.validate();

  info(g, "training " + std::string(neural::branch_name(branch)) +
              (syntactic ? " + syntactic" : "") + ", batch " + std::to_string(tc.batch_size));
  auto on_epoch = [&](const neural::EpochStats& e) {
    if (!g.verbose) return;
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << "epoch " << e.epoch << ": loss " << e.train_loss
       << " acc " << e.train_accuracy << " | val loss " << e.validation_loss << " acc "
       << e.validation_accuracy;
    std::cerr << ss.str() << "\n";
  };
  auto result = neural::train(splits, config, tc, feats.view(), on_epoch);
  result.params.featurizer = feats.description;
  result.params.featurizer["corpus_sha256"] = c.sha256;

  StagedFiles files;
  files.add(out, neural::serialize_checkpoint(result.params));
  files.add(history, history_json(result, tc, config).dump(2) + "\n");
  files.commit();
  std::cerr << "trained " << result.history.size() << " epochs; best epoch "
            << result.best_epoch << " (validation loss "
            << result.history.at(result.best_epoch - 1).validation_loss << ")\n";
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string corpus, manifest, baseline, json_out, text_out;
  FeaturizerOptions featurizers;
  bool allow_corpus_mismatch = false;
};

std::string display_name(const neural::ModelConfig& c) {
  if (!c.use_lexical) return "Syntactic";
  std::string name = c.branch_type == neural::BranchType::Lstm  ? "LSTM"
                     : c.branch_type == neural::BranchType::Gru ? "GRU"
                                                                : "Encoder";
  if (c.use_syntactic) name += " + Syntactic";
  return name;
}

evaluate::MetricsReport score(const neural::NetworkParams& params,
                              std::span<const neural::Sample> samples,
                              std::span<const corpus::LabeledStatement> truth, std::string name) {
  const auto ev = neural::evaluate_samples(params, samples);
  std::vector<corpus::Label> predicted, actual;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    predicted.push_back(neural::Prediction::from_probability(ev.probabilities[i]).verdict);
    actual.push_back(truth[i].label);
  }
  return evaluate::metrics(evaluate::confusion(predicted, actual), std::move(name));
}

void cmd_eval(const EvalArgs& a, const Globals& g, RunManifest& run) {
  if (a.checkpoints.empty() && a.baseline.empty()) {
    throw InputError("eval needs at least one checkpoint or --baseline syntactic");
  }
  if (!a.baseline.empty() && a.baseline != "syntactic") {
    throw InputError("--baseline only supports 'syntactic'");
  }
  if (!a.json_out.empty()) run.artifact("report_json", a.json_out);
  if (!a.text_out.empty()) run.artifact("report_text", a.text_out);
  run.artifact("corpus", a.corpus);

  const auto c = load_corpus(a.corpus);
  const fs::path manifest = a.manifest.empty() ? default_manifest_for(a.corpus) : fs::path(a.manifest);
  const auto splits = resplit(c, manifest);
  if (splits.evaluation.empty()) throw evaluate::EmptyInput("evaluation split is empty");

  std::vector<evaluate::MetricsReport> reports;
  std::vector<std::string> names;
  for (const auto& path : a.checkpoints) {
    const auto params = neural::load_checkpoint(path);
    if (const auto it = params.featurizer.find("corpus_sha256");
        it != params.featurizer.end() && it->second != c.sha256 && !a.allow_corpus_mismatch) {
      throw Error("checkpoint " + path + " was trained on a different corpus than " + a.corpus);
    }
    const auto feats = featurizers_for(params, a.featurizers);
    const auto samples = neural::make_samples(splits.evaluation, params.config, feats.view());
    std::string name = display_name(params.config);
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      name += " [" + fs::path(path).filename().string() + "]";
    }
    names.push_back(name);
    info(g, "evaluating " + path + " as " + name);
    reports.push_back(score(params, samples, splits.evaluation, name));
  }
  if (!a.baseline.empty()) {
    neural::ModelConfig config;
    config.use_lexical = false;
    config.use_syntactic = true;
    const auto tc = [&] {
      auto t = neural::TrainConfig{};
      t.seed = g.seed;
      return t;
    }();
    info(g, "training the syntactic-only baseline");
    const auto result = neural::train(splits, config, tc, neural::Featurizers{});
    const auto samples = neural::make_samples(splits.evaluation, config, neural::Featurizers{});
    reports.push_back(score(result.params, samples, splits.evaluation, "Syntactic"));
  }

  const auto report = evaluate::comparison_report(reports);
  std::cout << report.text;
  StagedFiles files;
  if (!a.json_out.empty()) files.add(a.json_out, report.json);
  if (!a.text_out.empty()) files.add(a.text_out, report.text);
  files.commit();
}

// ---------------------------------------------------------------- check

struct CheckArgs {
  std::string statement, model;
  std::string policy = "statement";
  std::string news_mode = "fixture";
  std::string fixtures, endpoint, api_key_env = "NEWS_API_KEY", cache_dir;
  std::vector<std::string> sources;
  std::size_t page_size = 10;
  long long cache_ttl = news::kDefaultCacheTtl.count();
  std::optional<std::size_t> context_tokens;
  FeaturizerOptions featurizers;
};

void cmd_check(const CheckArgs& a, const Globals& g, RunManifest& run) {
  if (a.policy != "statement" && a.policy != "search") {
    throw InputError("--policy takes statement or search");
  }
  if (a.news_mode != "fixture" && a.news_mode != "live") {
    throw InputError("--news-mode takes fixture or live");
  }
  if (a.statement.empty()) throw InputError("check needs a statement");
  run.artifact("checkpoint", a.model);
  const auto params = neural::load_checkpoint(a.model);
  const auto feats = featurizers_for(params, a.featurizers);

  json out;
  std::vector<std::string> warnings;
  std::string applied = "statement";
  std::optional<std::string> context;
  json terms = json::array();
  std::size_t article_count = 0;

  if (a.policy == "search") {
    try {
      const auto query = querygen::build_query(a.statement);
      terms = query.terms;
      news::NewsSourceConfig nc;
      nc.mode = a.news_mode == "live" ? news::Mode::Live : news::Mode::Fixture;
      if (nc.mode == news::Mode::Fixture) {
        if (a.fixtures.empty()) throw InputError("--news-mode fixture needs --fixtures");
        if (!fs::exists(a.fixtures)) throw IoError("cannot read " + a.fixtures);
        nc.fixture_path = a.fixtures;
      }
      if (!a.endpoint.empty()) nc.endpoint = a.endpoint;
      nc.api_key_env = a.api_key_env;
      nc.sources = a.sources;
      nc.page_size = a.page_size;
      news::NewsClient::Options opts;
      // The only place a network transport is ever created.
      if (nc.mode == news::Mode::Live) opts.transport = news::make_http_transport();
      if (!a.cache_dir.empty()) opts.cache_dir = a.cache_dir;
      news::NewsClient client(nc, std::move(opts));
      const auto result = !a.cache_dir.empty()
                              ? client.cached(query, std::chrono::seconds(a.cache_ttl), true)
                              : client.search(query);
      for (const auto& w : result.warnings) warnings.push_back(w);
      for (const auto& f : result.failures) {
        warnings.push_back("source batch failed (" + std::to_string(f.status) + "): " + f.message);
      }
      article_count = result.articles.size();
      if (article_count == 0) {
        warnings.push_back("no articles found; classified the statement alone");
      } else {
        context = news::aggregate_content(result.articles,
                                          a.context_tokens.value_or(params.config.max_len));
        applied = "search";
      }
      info(g, "query: " + query.raw + " (" + std::to_string(article_count) + " articles)");
    } catch (const querygen::EmptyQuery& e) {
      warnings.push_back(std::string(e.what()) + "; falling back to the statement policy");
    } catch (const news::AuthError& e) {
      warnings.push_back(std::string(e.what()) + "; falling back to the statement policy");
    } catch (const news::TransportError& e) {
      warnings.push_back("news request failed: " + std::string(e.what()) +
                         "; falling back to the statement policy");
    } catch (const news::RateLimited& e) {
      warnings.push_back(std::string(e.what()) + "; falling back to the statement policy");
    }
  }

  const auto pred = context ? neural::predict(params, feats.view(), a.statement, *context)
                            : neural::predict(params, feats.view(), a.statement);
  for (const auto& w : warnings) warn(w);

  out["statement"] = a.statement;
  out["verdict"] = corpus::label_name(pred.verdict);
  out["probability_suspicious"] = pred.probability_suspicious;
  out["threshold"] = pred.threshold;
  out["policy"] = a.policy;
  out["applied_policy"] = applied;
  out["query_terms"] = terms;
  out["article_count"] = article_count;
  out["warnings"] = warnings;
  std::cout << out.dump(2) << "\n";
}

// ---------------------------------------------------------------- freq

struct FreqArgs {
  std::string corpus, stopwords, json_out;
  std::size_t top = 20;
};

void cmd_freq(const FreqArgs& a, const Globals&, RunManifest& run) {
  run.artifact("corpus", a.corpus);
  if (!a.json_out.empty()) run.artifact("report_json", a.json_out);
  const auto c = load_corpus(a.corpus);
  textprep::Stoplist custom;
  if (!a.stopwords.empty()) {
    std::istringstream in(read_file(a.stopwords));
    custom = textprep::Stoplist::load(in);
  }
  const auto& stoplist = a.stopwords.empty() ? textprep::Stoplist::english() : custom;

  json j;
  j["top"] = a.top;
  json classes = json::object();
  std::ostringstream text;
  for (const auto label : {corpus::Label::Credible, corpus::Label::Suspicious}) {
    const auto table = corpus::class_frequency(c.statements, label, a.top, stoplist);
    json rows = json::array();
    std::size_t width = 5;
    for (const auto& [token, n] : table.entries) width = std::max(width, token.size());
    text << corpus::label_name(label) << "\n";
    text << std::left << std::setw(static_cast<int>(width)) << "Token" << "  " << std::right
         << std::setw(8) << "Count" << "\n";
    text << std::string(width + 10, '-') << "\n";
    for (const auto& [token, n] : table.entries) {
      rows.push_back({{"token", token}, {"count", n}});
      text << std::left << std::setw(static_cast<int>(width)) << token << "  " << std::right
           << std::setw(8) << n << "\n";
    }
    text << "\n";
    classes[std::string(corpus::label_name(label))] = std::move(rows);
  }
  j["classes"] = std::move(classes);
  std::cout << text.str();
  if (!a.json_out.empty()) write_file(a.json_out, j.dump(2) + "\n");
}

// ---------------------------------------------------------------- wiring

void add_featurizer_flags(CLI::App* cmd, FeaturizerOptions& f, bool training) {
  cmd->add_option("--embeddings", f.embeddings, "Embedding table file (default: hash stub)");
  if (training) {
    cmd->add_option("--embedding-dim", f.embedding_dim, "Hash-stub dimension")
        ->check(CLI::PositiveNumber);
  }
  cmd->add_option("--lemma-dict", f.lemma_dict, "Lemma dictionary (\"inflected lemma\" lines)");
  cmd->add_option("--stopwords", f.stopwords, "Stopword list, one word per line");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Misinformation and propaganda statement classifier"};
  app.name("mpsc");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* config = app.set_config("--config", "",
                                "TOML-style key = value file mirroring the flags; flags win");
  app.add_option("--seed", g.seed, "Seed for splitting, initialization and shuffling");
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");
  app.add_option("--run-manifest", g.run_manifest, "Where to write the run manifest JSON");

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Merge datasets into one corpus and split it");
  ingest->add_option("--isot-true", ia.isot_true, "ISOT true-news CSV");
  ingest->add_option("--isot-fake", ia.isot_fake, "ISOT fake-news CSV");
  ingest->add_option("--liar", ia.liar, "LIAR TSV");
  ingest->add_option("--fakenewsnet", ia.fakenewsnet, "FakeNewsNet CSV");
  ingest->add_option("--fnid", ia.fnid, "FNID file (LIAR layout unless --fnid-csv)");
  ingest->add_flag("--fnid-csv", ia.fnid_fakenewsnet_layout, "FNID file uses the CSV layout");
  ingest->add_option("--out", ia.out, "Merged corpus (JSON lines)")->required();
  ingest->add_option("--manifest", ia.manifest, "Split manifest (default: <out>.split.json)");
  ingest->add_option("--ratios", ia.ratios, "train,validation,evaluation")->delimiter(',');

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a classifier on the training split");
  train->add_option("--model", ta.model, "lstm, gru or encoder");
  train->add_option("--syntactic", ta.syntactic, "on or off");
  train->add_option("--corpus", ta.corpus, "Merged corpus")->required();
  train->add_option("--manifest", ta.manifest, "Split manifest");
  train->add_option("--out", ta.out, "Checkpoint path")->required();
  train->add_option("--history", ta.history, "History JSON (default: <out>.history.json)");
  add_featurizer_flags(train, ta.featurizers, true);
  train->add_option("--batch-size", ta.batch_size, "Default 32 for lstm, 64 otherwise");
  train->add_option("--max-epochs", ta.max_epochs);
  train->add_option("--patience", ta.patience);
  train->add_option("--learning-rate", ta.learning_rate);
  train->add_option("--dropout", ta.dropout);
  train->add_option("--layers", ta.layers, "Recurrent layer sizes, e.g. 256,128")->delimiter(',');
  train->add_option("--head-size", ta.head_size);
  train->add_option("--max-len", ta.max_len, "Maximum tokens per statement");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Compare checkpoints on the evaluation split");
  eval->add_option("checkpoints", ea.checkpoints, "Checkpoint files");
  eval->add_option("--corpus", ea.corpus, "Merged corpus")->required();
  eval->add_option("--manifest", ea.manifest, "Split manifest");
  eval->add_option("--baseline", ea.baseline, "Add a row: 'syntactic' trains a head-only model");
  eval->add_option("--json-out", ea.json_out, "Write the JSON report here");
  eval->add_option("--text-out", ea.text_out, "Write the text table here");
  eval->add_flag("--allow-corpus-mismatch", ea.allow_corpus_mismatch);
  add_featurizer_flags(eval, ea.featurizers, false);

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "Classify one statement");
  check->add_option("statement", ca.statement, "Statement text")->required();
  check->add_option("--model", ca.model, "Checkpoint")->required();
  check->add_option("--policy", ca.policy, "statement or search");
  check->add_option("--news-mode", ca.news_mode, "fixture or live");
  check->add_option("--fixtures", ca.fixtures, "Fixture JSON keyed by query");
  check->add_option("--endpoint", ca.endpoint, "News aggregator base URL");
  check->add_option("--api-key-env", ca.api_key_env, "Environment variable holding the key");
  check->add_option("--sources", ca.sources, "News source ids")->delimiter(',');
  check->add_option("--page-size", ca.page_size)->check(CLI::PositiveNumber);
  check->add_option("--cache-dir", ca.cache_dir, "Cache search results here");
  check->add_option("--cache-ttl", ca.cache_ttl, "Cache lifetime in seconds");
  check->add_option("--context-tokens", ca.context_tokens, "Token budget for article context");
  add_featurizer_flags(check, ca.featurizers, false);

  FreqArgs fa;
  auto* freq = app.add_subcommand("freq", "Most frequent tokens per class");
  freq->add_option("--corpus", fa.corpus, "Merged corpus")->required();
  freq->add_option("--top", fa.top, "Rows per class")->check(CLI::PositiveNumber);
  freq->add_option("--stopwords", fa.stopwords);
  freq->add_option("--json-out", fa.json_out, "Write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (config->count() > 0) g.config = config->as<std::string>();

  CLI::App* cmd = app.get_subcommands().front();
  RunManifest run(cmd->get_name(), g, std::vector<std::string>(argv + 1, argv + argc));
  if (!g.run_manifest.empty()) {
    run.set_path(g.run_manifest);
  } else if (cmd == ingest) {
    run.set_path(with_suffix(ia.out, ".run.json"));
  } else if (cmd == train) {
    run.set_path(with_suffix(ta.out, ".run.json"));
  } else if (cmd == eval && !ea.json_out.empty()) {
    run.set_path(with_suffix(ea.json_out, ".run.json"));
  }
  if (!g.config.empty()) run.artifact("config", g.config);

  int code = 0;
  std::string error;
  try {
    if (cmd == ingest) cmd_ingest(ia, g, run);
    if (cmd == train) cmd_train(ta, g, run);
    if (cmd == eval) cmd_eval(ea, g, run);
    if (cmd == check) cmd_check(ca, g, run);
    if (cmd == freq) cmd_freq(fa, g, run);
  } catch (const InputError& e) {
    code = 2;
    error = e.what();
  } catch (const std::exception& e) {
    code = 1;
    error = e.what();
  }
  if (code != 0) std::cerr << "mpsc: error: " << error << "\n";
  run.write(code, error);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "mpsc: error: " << e.what() << "\n";
    return 1;
  }
}
