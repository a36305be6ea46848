#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "mpsc/error.hpp"
#include "mpsc/textprep.hpp"

namespace mpsc::querygen {

// Splits on '.', '!' or '?' runs followed by whitespace or end of text. A lone
// '.' ending a known abbreviation ("Dr.", "U.S.") or a single-letter initial
// does not end a sentence.
std::vector<std::string> split_sentences(std::string_view text);

const std::unordered_set<std::string>& abbreviations();

struct RankOptions {
  double damping = 0.85;
  double epsilon = 1e-6;
  int max_iterations = 100;
};

// Weighted PageRank-style power iteration from a uniform start of 1 per node.
// `similarity` is n x n row-major, symmetric, non-negative. Nodes without edges
// spread their score uniformly, so the scores keep summing to n.
std::vector<double> rank_graph(const std::vector<double>& similarity, std::size_t n,
                               const RankOptions& options = {});

// |shared tokens| / (ln|a| + ln|b|); 0 when the denominator vanishes.
double sentence_similarity(const textprep::TokenSequence& a, const textprep::TokenSequence& b);

struct SentenceGraph {
  std::vector<std::string> sentences;
  std::vector<double> similarity;  // n x n row-major, zero diagonal
  std::vector<double> scores;
};

SentenceGraph build_sentence_graph(std::string_view text);

// The ceil(ratio * n) best-ranked sentences, in document order.
std::vector<std::string> summarize(std::string_view text, double ratio);

struct TermStats {
  std::string term;
  std::uint64_t frequency = 0;
  std::uint64_t casing_count = 0;   // max(capitalized mid-sentence, acronym) occurrences
  std::size_t first_position = 0;   // token index of the first occurrence
  std::size_t sentence_spread = 0;  // number of sentences containing the term
  double score = 0.0;               // lower is more relevant
};

struct KeywordCandidate {
  std::vector<std::string> ngram;  // lowercase words
  double score = 0.0;              // lower is more relevant
  std::uint64_t frequency = 0;
  std::size_t first_position = 0;
  std::vector<TermStats> term_stats;

  std::string text() const;
};

// Statistical keyword extraction; results sorted by ascending score, ties by first
// occurrence, near-duplicates (normalized edit similarity > 0.8) removed.
std::vector<KeywordCandidate> extract_keywords(
    std::string_view text, std::size_t k, std::size_t max_ngram = 3,
    const textprep::Stoplist& stoplist = textprep::Stoplist::english());

// 1 - levenshtein(a, b) / max(|a|, |b|), over code points.
double edit_similarity(std::string_view a, std::string_view b);

enum class QueryOrigin { Keywords, Summary, Hybrid };
std::string_view origin_name(QueryOrigin origin);

struct SearchQuery {
  std::vector<std::string> terms;
  std::string raw;  // terms joined by single spaces
  QueryOrigin origin = QueryOrigin::Keywords;
};

class EmptyQuery : public Error {
 public:
  EmptyQuery() : Error("statement yields no query terms") {}
};

inline constexpr std::size_t kDefaultMaxTerms = 8;

// Keyword words first; with fewer than two keywords, non-stopword tokens of the
// half-length summary are appended.
SearchQuery build_query(std::string_view statement, std::size_t max_terms = kDefaultMaxTerms);

// Percent-encodes everything outside RFC 3986 unreserved characters; spaces become "%20".
std::string url_encode(std::string_view text);

}  // namespace mpsc::querygen
