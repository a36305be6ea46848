#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mpsc/error.hpp"

namespace mpsc::textprep {

// Ordered list of non-empty lowercase tokens without punctuation or whitespace.
using TokenSequence = std::vector<std::string>;

class Stoplist {
 public:
  Stoplist() = default;
  explicit Stoplist(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  bool contains(std::string_view token) const { return words_.contains(std::string(token)); }
  std::size_t size() const { return words_.size(); }

  // The English list bundled at build time from data/stopwords_en.txt.
  static const Stoplist& english();
  // One lowercase token per line; blank lines and '#' comments ignored.
  static Stoplist load(std::istream& in);
  static Stoplist load(const std::filesystem::path& path);

 private:
  std::unordered_set<std::string> words_;
};

// Lowercase, strip punctuation, collapse whitespace runs, trim.
std::string clean(std::string_view text);

TokenSequence tokenize(std::string_view cleaned);

TokenSequence remove_stopwords(const TokenSequence& seq, const Stoplist& stoplist);

class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  // Total: unknown tokens map to themselves.
  virtual std::string lemma(std::string_view token) const = 0;
  virtual std::string name() const = 0;
};

// Rule-based fallback: plural -s/-es/-ies, -ing and -ed with restore rules
// (undoubling, silent-e). Ignores part of speech.
class SuffixLemmatizer final : public Lemmatizer {
 public:
  std::string lemma(std::string_view token) const override;
  std::string name() const override { return "suffix"; }
};

// Lookup table of "inflected lemma" pairs, one per line (WordNet exception-list style).
class DictionaryLemmatizer final : public Lemmatizer {
 public:
  explicit DictionaryLemmatizer(std::unordered_map<std::string, std::string> entries,
                                std::string source = "inline");
  static DictionaryLemmatizer load(const std::filesystem::path& path);

  std::string lemma(std::string_view token) const override;
  std::string name() const override { return "dictionary:" + source_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::string> entries_;
  std::string source_;
};

TokenSequence lemmatize(const TokenSequence& seq, const Lemmatizer& lemmatizer);

// 64-bit FNV-1a over the UTF-8 bytes.
std::uint64_t fnv1a64(std::string_view bytes);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t oov_buckets() const = 0;
  // Writes dimension() values into `out`. Deterministic and safe for concurrent reads.
  virtual void lookup(std::string_view token, std::span<float> out) const = 0;

  std::vector<float> lookup(std::string_view token) const {
    std::vector<float> v(dimension());
    lookup(token, v);
    return v;
  }
};

// Pretrained table loaded from the text format
//   dimension vocab_size oov_buckets
//   token v1 ... vd          (vocab_size lines)
//   v1 ... vd                (oov_buckets lines)
// Out-of-vocabulary tokens use bucket fnv1a64(token) % oov_buckets.
class EmbeddingTable final : public EmbeddingProvider {
 public:
  static EmbeddingTable load(std::istream& in, std::string name = "table");
  static EmbeddingTable load(const std::filesystem::path& path);

  std::string name() const override { return name_; }
  std::size_t dimension() const override { return dimension_; }
  std::size_t oov_buckets() const override { return oov_buckets_; }
  std::size_t vocab_size() const { return index_.size(); }
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  using EmbeddingProvider::lookup;
  void lookup(std::string_view token, std::span<float> out) const override;

 private:
  std::string name_;
  std::size_t dimension_ = 0;
  std::size_t oov_buckets_ = 1;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> rows_;     // vocab rows followed by bucket rows
};

// Deterministic stand-in for a pretrained table: every token's vector is drawn
// uniformly from [-1, 1) by a generator seeded with fnv1a64(token). There is no
// vocabulary, so the whole hash space acts as a single bucket family.
class HashEmbedding final : public EmbeddingProvider {
 public:
  explicit HashEmbedding(std::size_t dimension = 32) : dimension_(dimension) {}

  std::string name() const override { return "hash-stub-" + std::to_string(dimension_); }
  std::size_t dimension() const override { return dimension_; }
  std::size_t oov_buckets() const override { return 1; }
  using EmbeddingProvider::lookup;
  void lookup(std::string_view token, std::span<float> out) const override;

 private:
  std::size_t dimension_;
};

struct EmbeddedSequence {
  std::size_t max_len = 0;
  std::size_t dimension = 0;
  std::vector<float> vectors;        // max_len x dimension, row-major
  std::vector<std::uint8_t> mask;    // max_len entries, 1 = real token
  std::size_t true_length = 0;

  std::span<const float> row(std::size_t t) const {
    return {vectors.data() + t * dimension, dimension};
  }
};

// Looks up the first min(|seq|, max_len) tokens; the rest of the rows are zero and masked out.
EmbeddedSequence embed(const TokenSequence& seq, const EmbeddingProvider& provider,
                       std::size_t max_len);

inline constexpr std::size_t kDefaultMaxLen = 128;

// Everything needed to turn raw text into lexical features.
struct LexicalPipeline {
  const EmbeddingProvider* provider = nullptr;
  const Stoplist* stoplist = nullptr;
  const Lemmatizer* lemmatizer = nullptr;
  std::size_t max_len = kDefaultMaxLen;
};

// clean -> tokenize -> remove_stopwords -> lemmatize.
TokenSequence lexical_tokens(std::string_view text, const Stoplist& stoplist,
                             const Lemmatizer& lemmatizer);

EmbeddedSequence lexical_features(std::string_view text, const EmbeddingProvider& provider,
                                  const Stoplist& stoplist, const Lemmatizer& lemmatizer,
                                  std::size_t max_len);
EmbeddedSequence lexical_features(std::string_view text, const LexicalPipeline& pipeline);

}  // namespace mpsc::textprep
