#include "mpsc/querygen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "mpsc/unicode.hpp"

namespace mpsc::querygen {

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// The whitespace-delimited word ending at (and including) position `dot`.
std::string word_ending_at(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_ascii_space(text[b - 1])) --b;
  return std::string(text.substr(b, dot - b + 1));
}

bool is_abbreviation(std::string_view word) {
  // strip leading openers such as '(' or '"'
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
    word.remove_prefix(1);
  }
  if (word.size() == 2 && std::isalpha(static_cast<unsigned char>(word[0])) &&
      std::isupper(static_cast<unsigned char>(word[0]))) {
    return true;  // initial such as "F."
  }
  return abbreviations().contains(unicode::lower(word));
}

// A sentence broken into punctuation-free chunks of words (original casing).
struct SentenceChunks {
  std::vector<std::vector<std::string>> chunks;
};

SentenceChunks chunk_sentence(std::string_view sentence) {
  SentenceChunks out;
  std::vector<std::string> chunk;
  std::string word;
  auto flush_word = [&] {
    if (!word.empty()) chunk.push_back(std::move(word));
    word.clear();
  };
  auto flush_chunk = [&] {
    flush_word();
    if (!chunk.empty()) out.chunks.push_back(std::move(chunk));
    chunk.clear();
  };
  for (char32_t cp : unicode::decode(sentence)) {
    if (unicode::is_space(cp)) {
      flush_word();
    } else if (unicode::is_punct(cp)) {
      flush_chunk();
    } else {
      unicode::append_utf8(word, cp);
    }
  }
  flush_chunk();
  return out;
}

bool has_letter(std::string_view word) {
  for (char32_t cp : unicode::decode(word)) {
    if (unicode::is_letter(cp)) return true;
  }
  return false;
}

std::size_t codepoint_length(std::string_view word) { return unicode::decode(word).size(); }

bool starts_upper(std::string_view word) {
  const auto cps = unicode::decode(word);
  return !cps.empty() && unicode::is_upper(cps.front());
}

// All cased letters uppercase, at least two characters.
bool is_acronym(std::string_view word) {
  const auto cps = unicode::decode(word);
  if (cps.size() < 2) return false;
  bool any_upper = false;
  for (char32_t cp : cps) {
    if (unicode::is_letter(cp) && !unicode::is_upper(cp)) return false;
    any_upper |= unicode::is_upper(cp);
  }
  return any_upper;
}

struct TermAccumulator {
  std::uint64_t tf = 0;
  std::uint64_t tf_upper = 0;
  std::uint64_t tf_acronym = 0;
  std::size_t first_position = 0;
  std::set<std::size_t> sentences;
  std::map<std::string, std::uint64_t> left;
  std::map<std::string, std::uint64_t> right;
};

double dispersion(const std::map<std::string, std::uint64_t>& neighbours) {
  std::uint64_t total = 0;
  for (const auto& [w, n] : neighbours) total += n;
  return total == 0 ? 0.0 : static_cast<double>(neighbours.size()) / static_cast<double>(total);
}

}  // namespace

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> list = {
      "mr.",   "mrs.",  "ms.",   "dr.",    "prof.", "sr.",   "jr.",  "st.",   "vs.",  "etc.",
      "e.g.",  "i.e.",  "u.s.",  "u.k.",   "u.n.",  "inc.",  "ltd.", "co.",   "corp.", "gov.",
      "sen.",  "rep.",  "gen.",  "col.",   "lt.",   "sgt.",  "capt.", "jan.", "feb.", "mar.",
      "apr.",  "jun.",  "jul.",  "aug.",   "sep.",  "sept.", "oct.", "nov.",  "dec.", "no.",
      "mt.",   "ft.",   "approx.", "dept.", "est.", "fig.",  "al.",  "gov't.", "pres.", "rev."};
  return list;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_terminator(text[j])) ++j;
    const bool single_dot = j == i + 1 && text[i] == '.';
    while (j < text.size() && is_closer(text[j])) ++j;
    const bool at_boundary = j == text.size() || is_ascii_space(text[j]);
    if (at_boundary && !(single_dot && is_abbreviation(word_ending_at(text, i)) && j < text.size())) {
      std::string s = trim(text.substr(start, j - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = j;
    }
    i = j;
  }
  std::string tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

std::vector<double> rank_graph(const std::vector<double>& similarity, std::size_t n,
                               const RankOptions& options) {
  std::vector<double> scores(n, 1.0);
  if (n == 0) return scores;
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) out_weight[j] += similarity[j * n + k];
  }
  std::vector<double> next(n);
  const double d = options.damping;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double dangling = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (out_weight[j] <= 0.0) dangling += scores[j];
    }
    double max_delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double incoming = dangling / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) {
        if (out_weight[j] > 0.0) incoming += similarity[j * n + i] / out_weight[j] * scores[j];
      }
      next[i] = (1.0 - d) + d * incoming;
      max_delta = std::max(max_delta, std::abs(next[i] - scores[i]));
    }
    scores.swap(next);
    if (max_delta < options.epsilon) break;
  }
  return scores;
}

double sentence_similarity(const textprep::TokenSequence& a, const textprep::TokenSequence& b) {
  if (a.empty() || b.empty()) return 0.0;
  const double denom = std::log(static_cast<double>(a.size())) + std::log(static_cast<double>(b.size()));
  if (denom <= 0.0) return 0.0;
  const std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> common;
  for (const auto& t : b) {
    if (sa.contains(t)) common.insert(t);
  }
  return static_cast<double>(common.size()) / denom;
}

SentenceGraph build_sentence_graph(std::string_view text) {
  SentenceGraph g;
  g.sentences = split_sentences(text);
  const std::size_t n = g.sentences.size();
  const textprep::SuffixLemmatizer lemmatizer;
  std::vector<textprep::TokenSequence> tokens;
  tokens.reserve(n);
  for (const auto& s : g.sentences) {
    tokens.push_back(textprep::lexical_tokens(s, textprep::Stoplist::english(), lemmatizer));
  }
  g.similarity.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = sentence_similarity(tokens[i], tokens[j]);
      g.similarity[i * n + j] = w;
      g.similarity[j * n + i] = w;
    }
  }
  g.scores = rank_graph(g.similarity, n);
  return g;
}

std::vector<std::string> summarize(std::string_view text, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InputError("summary ratio must lie in (0, 1]");
  const SentenceGraph g = build_sentence_graph(text);
  const std::size_t n = g.sentences.size();
  if (n <= 1) return g.sentences;
  const auto keep = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.scores[a] > g.scores[b]; });
  order.resize(std::min(std::max<std::size_t>(keep, 1), n));
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (std::size_t i : order) out.push_back(g.sentences[i]);
  return out;
}

std::string KeywordCandidate::text() const {
  std::string out;
  for (const auto& w : ngram) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

double edit_similarity(std::string_view a, std::string_view b) {
  const auto x = unicode::decode(a);
  const auto y = unicode::decode(b);
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 1.0;
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1)});
    }
    prev.swap(cur);
  }
  return 1.0 - static_cast<double>(prev[y.size()]) / static_cast<double>(longest);
}

std::vector<KeywordCandidate> extract_keywords(std::string_view text, std::size_t k,
                                               std::size_t max_ngram,
                                               const textprep::Stoplist& stoplist) {
  if (k == 0) throw InputError("k must be at least 1");
  if (max_ngram == 0 || max_ngram > 3) throw InputError("max_ngram must be 1, 2 or 3");

  const auto sentences = split_sentences(text);
  std::unordered_map<std::string, TermAccumulator> terms;

  std::vector<std::vector<std::string>> lowered_chunks;
  std::vector<std::size_t> chunk_start;  // token index of the first word in each chunk

  std::size_t position = 0;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    bool sentence_start = true;
    for (auto& chunk : chunk_sentence(sentences[s]).chunks) {
      std::vector<std::string> lowered;
      chunk_start.push_back(position);
      for (std::size_t w = 0; w < chunk.size(); ++w) {
        const std::string key = unicode::lower(chunk[w]);
        auto& acc = terms[key];
        if (acc.tf == 0) acc.first_position = position;
        ++acc.tf;
        if (is_acronym(chunk[w])) {
          ++acc.tf_acronym;
        } else if (!sentence_start && starts_upper(chunk[w])) {
          ++acc.tf_upper;
        }
        acc.sentences.insert(s);
        if (w > 0) ++acc.left[unicode::lower(chunk[w - 1])];
        if (w + 1 < chunk.size()) ++acc.right[unicode::lower(chunk[w + 1])];
        lowered.push_back(key);
        sentence_start = false;
        ++position;
      }
      lowered_chunks.push_back(std::move(lowered));
    }
  }
  if (terms.empty()) return {};

  // Frequency normalization uses the non-stopword vocabulary.
  std::vector<double> valid_tf;
  std::uint64_t max_tf = 0;
  for (const auto& [term, acc] : terms) {
    max_tf = std::max(max_tf, acc.tf);
    if (!stoplist.contains(term)) valid_tf.push_back(static_cast<double>(acc.tf));
  }
  if (valid_tf.empty()) {
    for (const auto& [term, acc] : terms) valid_tf.push_back(static_cast<double>(acc.tf));
  }
  const double mean_tf = std::accumulate(valid_tf.begin(), valid_tf.end(), 0.0) /
                         static_cast<double>(valid_tf.size());
  double var_tf = 0.0;
  for (double tf : valid_tf) var_tf += (tf - mean_tf) * (tf - mean_tf);
  const double std_tf = std::sqrt(var_tf / static_cast<double>(valid_tf.size()));
  const double n_sentences = static_cast<double>(sentences.size());

  std::unordered_map<std::string, TermStats> stats;
  for (const auto& [term, acc] : terms) {
    const double tf = static_cast<double>(acc.tf);
    const double casing = static_cast<double>(std::max(acc.tf_upper, acc.tf_acronym)) /
                          (1.0 + std::log(tf));
    const double pos = std::log(std::log(3.0 + static_cast<double>(acc.first_position)));
    const double tf_norm = tf / (mean_tf + std_tf);
    const double rel = 1.0 + (dispersion(acc.left) + dispersion(acc.right)) * tf /
                                 static_cast<double>(max_tf);
    const double spread = static_cast<double>(acc.sentences.size()) / n_sentences;
    TermStats st;
    st.term = term;
    st.frequency = acc.tf;
    st.casing_count = std::max(acc.tf_upper, acc.tf_acronym);
    st.first_position = acc.first_position;
    st.sentence_spread = acc.sentences.size();
    st.score = rel * pos / (casing + tf_norm / rel + spread / rel);
    stats.emplace(term, std::move(st));
  }

  // Candidate n-grams inside punctuation-free chunks.
  std::map<std::string, KeywordCandidate> candidates;
  for (std::size_t c = 0; c < lowered_chunks.size(); ++c) {
    const auto& words = lowered_chunks[c];
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t len = 1; len <= max_ngram && i + len <= words.size(); ++len) {
        const std::vector<std::string> ngram(words.begin() + static_cast<std::ptrdiff_t>(i),
                                             words.begin() + static_cast<std::ptrdiff_t>(i + len));
        const bool usable = std::all_of(ngram.begin(), ngram.end(), [](const std::string& w) {
          return has_letter(w) && codepoint_length(w) >= 2;
        });
        if (!usable) break;  // longer n-grams would contain the same word
        if (stoplist.contains(ngram.front()) || stoplist.contains(ngram.back())) continue;
        KeywordCandidate probe;
        probe.ngram = ngram;
        auto [it, inserted] = candidates.try_emplace(probe.text(), std::move(probe));
        if (inserted) it->second.first_position = chunk_start[c] + i;
        ++it->second.frequency;
      }
    }
  }

  std::vector<KeywordCandidate> ranked;
  ranked.reserve(candidates.size());
  for (auto& [key, cand] : candidates) {
    double product = 1.0;
    double sum = 0.0;
    for (const auto& w : cand.ngram) {
      const TermStats& st = stats.at(w);
      product *= st.score;
      sum += st.score;
      cand.term_stats.push_back(st);
    }
    cand.score = product / (static_cast<double>(cand.frequency) * (1.0 + sum));
    ranked.push_back(std::move(cand));
  }
  std::sort(ranked.begin(), ranked.end(), [](const KeywordCandidate& a, const KeywordCandidate& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.first_position != b.first_position) return a.first_position < b.first_position;
    return a.ngram.size() < b.ngram.size();
  });

  std::vector<KeywordCandidate> selected;
  for (auto& cand : ranked) {
    if (selected.size() == k) break;
    const std::string key = cand.text();
    const bool near_duplicate = std::any_of(selected.begin(), selected.end(), [&](const auto& s) {
      return edit_similarity(key, s.text()) > 0.8;
    });
    if (!near_duplicate) selected.push_back(std::move(cand));
  }
  return selected;
}

std::string_view origin_name(QueryOrigin origin) {
  switch (origin) {
    case QueryOrigin::Keywords: return "KEYWORDS";
    case QueryOrigin::Summary: return "SUMMARY";
    case QueryOrigin::Hybrid: return "HYBRID";
  }
  return "UNKNOWN";
}

SearchQuery build_query(std::string_view statement, std::size_t max_terms) {
  if (max_terms == 0) throw InputError("max_terms must be at least 1");
  SearchQuery q;
  std::set<std::string> seen;
  auto add = [&](const std::string& term) {
    if (q.terms.size() >= max_terms) return false;
    const std::string folded = unicode::lower(term);
    if (folded.empty() || !seen.insert(folded).second) return false;
    q.terms.push_back(folded);
    return true;
  };

  const auto keywords = extract_keywords(statement, max_terms, 3);
  for (const auto& kw : keywords) {
    for (const auto& w : kw.ngram) add(w);
  }
  q.origin = QueryOrigin::Keywords;
  if (keywords.size() < 2) {
    std::string summary;
    for (const auto& s : summarize(statement, 0.5)) summary += s + " ";
    bool added = false;
    for (const auto& tok : textprep::remove_stopwords(textprep::tokenize(textprep::clean(summary)),
                                                      textprep::Stoplist::english())) {
      added |= add(tok);
    }
    if (keywords.empty()) {
      q.origin = QueryOrigin::Summary;
    } else if (added) {
      q.origin = QueryOrigin::Hybrid;
    }
  }
  if (q.terms.empty()) throw EmptyQuery();
  for (const auto& t : q.terms) {
    if (!q.raw.empty()) q.raw.push_back(' ');
    q.raw += t;
  }
  return q;
}

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

}  // namespace mpsc::querygen
