#include "mpsc/textprep.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include "mpsc/error.hpp"
#include "mpsc/unicode.hpp"
#include "stopwords_en.inc"

namespace mpsc::textprep {

namespace {

std::unordered_set<std::string> parse_word_list(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    words.insert(line.substr(first, last - first + 1));
  }
  return words;
}

bool is_ascii_alpha(std::string_view w) {
  return std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool has_vowel(std::string_view w) {
  return std::any_of(w.begin(), w.end(), [](char c) { return is_vowel(c) || c == 'y'; });
}

// Undo the spelling changes made when attaching -ing / -ed.
std::string restore_stem(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1]) &&
      std::string_view("lsz").find(stem[n - 1]) == std::string_view::npos) {
    stem.pop_back();
    return stem;
  }
  if (n == 3 && !is_vowel(stem[0]) && is_vowel(stem[1]) && !is_vowel(stem[2]) &&
      std::string_view("wxy").find(stem[2]) == std::string_view::npos) {
    stem.push_back('e');
  }
  return stem;
}

const std::unordered_set<std::string>& invariant_words() {
  static const std::unordered_set<std::string> words = {
      "news",   "series", "species", "always",   "perhaps", "across",    "thus",
      "bias",   "gas",    "virus",   "crisis",   "status",  "analysis",  "basis",
      "thesis", "census", "campus",  "politics", "physics", "economics", "ethics",
      "lens",   "bonus",  "focus",   "chaos",    "alias",   "canvas",    "atlas"};
  return words;
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

const Stoplist& Stoplist::english() {
  static const Stoplist list = [] {
    std::istringstream in{std::string(kBundledStopwords)};
    return load(in);
  }();
  return list;
}

Stoplist Stoplist::load(std::istream& in) { return Stoplist(parse_word_list(in)); }

Stoplist Stoplist::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stoplist " + path.string());
  return load(in);
}

std::string clean(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t cp : unicode::decode(text)) {
    if (unicode::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (unicode::is_punct(cp)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    unicode::append_utf8(out, unicode::to_lower(cp));
  }
  return out;
}

TokenSequence tokenize(std::string_view cleaned) {
  TokenSequence tokens;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && (cleaned[i] == ' ' || cleaned[i] == '\t' || cleaned[i] == '\n')) ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ' && cleaned[j] != '\t' && cleaned[j] != '\n') ++j;
    if (j > i) tokens.emplace_back(cleaned.substr(i, j - i));
    i = j;
  }
  return tokens;
}

TokenSequence remove_stopwords(const TokenSequence& seq, const Stoplist& stoplist) {
  TokenSequence out;
  out.reserve(seq.size());
  std::copy_if(seq.begin(), seq.end(), std::back_inserter(out),
               [&](const std::string& t) { return !stoplist.contains(t); });
  return out;
}

std::string SuffixLemmatizer::lemma(std::string_view token) const {
  std::string w(token);
  if (w.size() <= 3 || !is_ascii_alpha(w) || invariant_words().contains(w)) return w;

  if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return w;
  if (ends_with(w, "es")) {
    const std::string stem = w.substr(0, w.size() - 2);
    if (ends_with(stem, "s") || ends_with(stem, "x") || ends_with(stem, "z") ||
        ends_with(stem, "ch") || ends_with(stem, "sh")) {
      return stem;
    }
  }
  if (ends_with(w, "s")) return w.substr(0, w.size() - 1);

  if (ends_with(w, "ied") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "eed")) return w;
  if (ends_with(w, "ing") && w.size() >= 5) {
    std::string stem = w.substr(0, w.size() - 3);
    if (!has_vowel(stem)) return w;
    return restore_stem(std::move(stem));
  }
  if (ends_with(w, "ed") && w.size() >= 5) {
    std::string stem = w.substr(0, w.size() - 2);
    if (!has_vowel(stem)) return w;
    return restore_stem(std::move(stem));
  }
  return w;
}

DictionaryLemmatizer::DictionaryLemmatizer(std::unordered_map<std::string, std::string> entries,
                                           std::string source)
    : entries_(std::move(entries)), source_(std::move(source)) {}

DictionaryLemmatizer DictionaryLemmatizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lemma dictionary " + path.string());
  std::unordered_map<std::string, std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string inflected, lemma;
    if (!(fields >> inflected >> lemma) || inflected.front() == '#') continue;
    entries.emplace(unicode::lower(inflected), unicode::lower(lemma));
  }
  return DictionaryLemmatizer(std::move(entries), path.filename().string());
}

std::string DictionaryLemmatizer::lemma(std::string_view token) const {
  const auto it = entries_.find(std::string(token));
  return it == entries_.end() ? std::string(token) : it->second;
}

TokenSequence lemmatize(const TokenSequence& seq, const Lemmatizer& lemmatizer) {
  TokenSequence out;
  out.reserve(seq.size());
  for (const auto& t : seq) out.push_back(lemmatizer.lemma(t));
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

EmbeddingTable EmbeddingTable::load(std::istream& in, std::string name) {
  EmbeddingTable table;
  table.name_ = std::move(name);
  std::string header;
  if (!std::getline(in, header)) throw InputError("embedding file: missing header");
  std::istringstream hs(header);
  std::size_t vocab = 0;
  if (!(hs >> table.dimension_ >> vocab >> table.oov_buckets_) || table.dimension_ == 0 ||
      table.oov_buckets_ == 0) {
    throw InputError("embedding file: header must be 'dimension vocab_size oov_buckets'");
  }
  const std::size_t d = table.dimension_;
  table.rows_.reserve((vocab + table.oov_buckets_) * d);
  std::string line;
  auto read_values = [&](std::istringstream& ls, std::size_t line_no) {
    for (std::size_t k = 0; k < d; ++k) {
      float v;
      if (!(ls >> v)) {
        throw InputError("embedding file: line " + std::to_string(line_no) + " has fewer than " +
                         std::to_string(d) + " values");
      }
      table.rows_.push_back(v);
    }
  };
  for (std::size_t r = 0; r < vocab + table.oov_buckets_; ++r) {
    if (!std::getline(in, line)) throw InputError("embedding file: truncated");
    std::istringstream ls(line);
    if (r < vocab) {
      std::string token;
      ls >> token;
      if (!table.index_.emplace(token, r).second) {
        throw InputError("embedding file: duplicate token '" + token + "'");
      }
    }
    read_values(ls, r + 2);
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file " + path.string());
  return load(in, path.filename().string());
}

void EmbeddingTable::lookup(std::string_view token, std::span<float> out) const {
  const auto it = index_.find(std::string(token));
  const std::size_t row = it != index_.end()
                              ? it->second
                              : index_.size() + fnv1a64(token) % oov_buckets_;
  std::copy_n(rows_.begin() + static_cast<std::ptrdiff_t>(row * dimension_), dimension_,
              out.begin());
}

void HashEmbedding::lookup(std::string_view token, std::span<float> out) const {
  std::uint64_t state = fnv1a64(token);
  for (std::size_t k = 0; k < dimension_; ++k) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    out[k] = static_cast<float>(2.0 * u - 1.0);
  }
}

EmbeddedSequence embed(const TokenSequence& seq, const EmbeddingProvider& provider,
                       std::size_t max_len) {
  EmbeddedSequence out;
  out.max_len = max_len;
  out.dimension = provider.dimension();
  out.vectors.assign(max_len * out.dimension, 0.0f);
  out.mask.assign(max_len, 0);
  out.true_length = std::min(seq.size(), max_len);
  for (std::size_t t = 0; t < out.true_length; ++t) {
    provider.lookup(seq[t], std::span<float>(out.vectors.data() + t * out.dimension, out.dimension));
    out.mask[t] = 1;
  }
  return out;
}

TokenSequence lexical_tokens(std::string_view text, const Stoplist& stoplist,
                             const Lemmatizer& lemmatizer) {
  const TokenSequence filtered = remove_stopwords(tokenize(clean(text)), stoplist);
  // Lemmas can land on stopwords ("haves" -> "have"); filter once more.
  return remove_stopwords(lemmatize(filtered, lemmatizer), stoplist);
}

EmbeddedSequence lexical_features(std::string_view text, const EmbeddingProvider& provider,
                                  const Stoplist& stoplist, const Lemmatizer& lemmatizer,
                                  std::size_t max_len) {
  return embed(lexical_tokens(text, stoplist, lemmatizer), provider, max_len);
}

EmbeddedSequence lexical_features(std::string_view text, const LexicalPipeline& pipeline) {
  return lexical_features(text, *pipeline.provider, *pipeline.stoplist, *pipeline.lemmatizer,
                          pipeline.max_len);
}

}  // namespace mpsc::textprep
