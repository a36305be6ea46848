#include "mpsc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "mpsc/csv.hpp"
#include "mpsc/random.hpp"
#include "mpsc/unicode.hpp"

namespace mpsc::corpus {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

std::size_t column_index(const csv::Row& header, std::string_view name) {
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    if (ascii_lower(trim(header.fields[i])) == ascii_lower(name)) return i;
  }
  throw MalformedRow(header.line, "header lacks column '" + std::string(name) + "'");
}

void check_width(const csv::Row& row, std::size_t expected) {
  if (row.fields.size() != expected) {
    throw MalformedRow(row.line, "expected " + std::to_string(expected) + " fields, found " +
                                     std::to_string(row.fields.size()));
  }
}

// Keeps non-empty records, moving every column other than text/label into extra_fields.
void emit(ParseResult& result, SourceId source, std::string text, std::string label,
          const csv::Row& row, const std::vector<std::string>& names,
          std::initializer_list<std::size_t> used) {
  text = trim(text);
  if (text.empty()) {
    ++result.dropped_empty;
    return;
  }
  RawRecord rec;
  rec.source = source;
  rec.text = std::move(text);
  rec.raw_label = trim(label);
  for (std::size_t i = 0; i < row.fields.size(); ++i) {
    if (std::find(used.begin(), used.end(), i) != used.end()) continue;
    const std::string key = i < names.size() ? names[i] : "field" + std::to_string(i + 1);
    rec.extra_fields.emplace(key, row.fields[i]);
  }
  result.records.push_back(std::move(rec));
}

ParseResult parse_isot(std::string_view bytes, const SourceFormat& format) {
  ParseResult result;
  const auto rows = csv::parse(bytes, ',');
  if (rows.empty()) return result;
  const auto& header = rows.front();
  const std::size_t title = column_index(header, "title");
  const std::size_t body = column_index(header, "text");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    check_width(row, header.fields.size());
    const std::string t = trim(row.fields[title]);
    const std::string b = trim(row.fields[body]);
    std::string text = t.empty() ? b : (b.empty() ? t : t + ". " + b);
    emit(result, SourceId::Isot, std::move(text), format.isot_label, row, header.fields,
         {title, body});
  }
  return result;
}

ParseResult parse_liar_layout(SourceId source, std::string_view bytes, std::size_t label_field,
                              std::size_t text_field, std::size_t expected) {
  if (label_field == 0 || text_field == 0) throw InputError("LIAR field indices are 1-based");
  ParseResult result;
  const std::size_t needed = std::max(label_field, text_field);
  for (const auto& row : csv::split_lines(bytes, '\t')) {
    if (expected != 0) {
      check_width(row, expected);
    } else if (row.fields.size() < needed) {
      throw MalformedRow(row.line, "expected at least " + std::to_string(needed) +
                                       " fields, found " + std::to_string(row.fields.size()));
    }
    emit(result, source, row.fields[text_field - 1], row.fields[label_field - 1], row, {},
         {label_field - 1, text_field - 1});
  }
  return result;
}

ParseResult parse_fakenewsnet_layout(SourceId source, std::string_view bytes,
                                     const SourceFormat& format) {
  ParseResult result;
  const auto rows = csv::parse(bytes, ',');
  if (rows.empty()) return result;
  const auto& header = rows.front();
  const std::size_t text_col = column_index(header, format.fakenewsnet_text_column);
  const std::size_t label_col = column_index(header, format.fakenewsnet_label_column);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    check_width(row, header.fields.size());
    const std::string flag = trim(row.fields[label_col]);
    std::string label = flag == "1" ? "real" : flag == "0" ? "fake" : flag;
    emit(result, source, row.fields[text_col], std::move(label), row, header.fields,
         {text_col, label_col});
  }
  return result;
}

}  // namespace

std::string_view source_name(SourceId id) {
  switch (id) {
    case SourceId::Isot: return "isot";
    case SourceId::Liar: return "liar";
    case SourceId::FakeNewsNet: return "fakenewsnet";
    case SourceId::Fnid: return "fnid";
  }
  throw UnsupportedSource(std::to_string(static_cast<int>(id)));
}

SourceId parse_source_name(std::string_view name) {
  const std::string lowered = ascii_lower(name);
  for (SourceId id : kAllSources) {
    if (source_name(id) == lowered) return id;
  }
  throw UnsupportedSource(name);
}

std::string_view label_name(Label label) {
  return label == Label::Suspicious ? "SUSPICIOUS" : "CREDIBLE";
}

ParseResult parse_source(SourceId source, std::string_view bytes, const SourceFormat& format) {
  if (!unicode::valid_utf8(bytes)) throw MalformedRow(0, "input is not valid UTF-8");
  switch (source) {
    case SourceId::Isot:
      return parse_isot(bytes, format);
    case SourceId::Liar:
      return parse_liar_layout(source, bytes, format.liar_label_field, format.liar_text_field,
                               format.liar_expected_fields);
    case SourceId::FakeNewsNet:
      return parse_fakenewsnet_layout(source, bytes, format);
    case SourceId::Fnid:
      if (format.fnid_fakenewsnet_layout) return parse_fakenewsnet_layout(source, bytes, format);
      return parse_liar_layout(source, bytes, format.liar_label_field, format.liar_text_field,
                               format.fnid_expected_fields);
  }
  throw UnsupportedSource(std::to_string(static_cast<int>(source)));
}

Label normalize_label(SourceId source, std::string_view raw_label) {
  const std::string l = ascii_lower(trim(raw_label));
  switch (source) {
    case SourceId::Liar:
    case SourceId::Fnid:
      if (l == "true" || l == "mostly-true") return Label::Credible;
      if (l == "half-true" || l == "barely-true" || l == "false" || l == "pants-fire") {
        return Label::Suspicious;
      }
      // FNID also ships in the FakeNewsNet layout.
      if (source == SourceId::Fnid && l == "real") return Label::Credible;
      if (source == SourceId::Fnid && l == "fake") return Label::Suspicious;
      break;
    case SourceId::Isot:
      if (l == "true") return Label::Credible;
      if (l == "fake") return Label::Suspicious;
      break;
    case SourceId::FakeNewsNet:
      if (l == "real") return Label::Credible;
      if (l == "fake") return Label::Suspicious;
      break;
  }
  throw UnknownLabel(source, std::string(raw_label));
}

MergeResult merge(std::span<const std::pair<SourceId, std::vector<RawRecord>>> collections) {
  MergeResult result;
  std::set<std::tuple<SourceId, Label, std::string>> seen;
  for (const auto& [source, records] : collections) {
    for (const auto& rec : records) {
      const Label label = normalize_label(source, rec.raw_label);
      if (!seen.emplace(source, label, rec.text).second) {
        ++result.duplicates;
        ++result.duplicates_by_source[source];
        continue;
      }
      result.statements.push_back({rec.text, label, source});
    }
  }
  return result;
}

DataSplits stratified_split(std::span<const LabeledStatement> corpus, const Ratios& ratios,
                            std::uint64_t seed) {
  double sum = 0.0;
  std::size_t nonzero = 0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidRatios("ratios must be non-negative");
    sum += r;
    nonzero += r > 0.0;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidRatios("ratios must sum to 1");
  if (corpus.empty()) throw InsufficientClassSamples("cannot split an empty corpus");

  std::map<std::pair<SourceId, Label>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    strata[{corpus[i].source, corpus[i].label}].push_back(i);
  }

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> assigned;
  for (auto& [key, members] : strata) {
    const std::size_t n = members.size();
    if (n < nonzero) {
      throw InsufficientClassSamples(
          "stratum " + std::string(source_name(key.first)) + "/" +
          std::string(label_name(key.second)) + " has " + std::to_string(n) +
          " records for " + std::to_string(nonzero) + " non-empty splits");
    }
    rng.shuffle(std::span<std::size_t>(members));

    std::array<std::size_t, 3> quota{};
    std::array<double, 3> remainder{};
    std::size_t allocated = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double exact = ratios[k] * static_cast<double>(n);
      quota[k] = std::min(n, static_cast<std::size_t>(std::floor(exact)));
      remainder[k] = exact - static_cast<double>(quota[k]);
      allocated += quota[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t j = 0; allocated < n; j = (j + 1) % 3) {
      if (ratios[order[j]] == 0.0) continue;
      ++quota[order[j]];
      ++allocated;
    }
    while (allocated > n) {  // guards floor() overshoot from rounding noise
      for (std::size_t k = 3; k-- > 0 && allocated > n;) {
        if (quota[k] > 0) --quota[k], --allocated;
      }
    }

    std::size_t offset = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      assigned[k].insert(assigned[k].end(), members.begin() + static_cast<std::ptrdiff_t>(offset),
                         members.begin() + static_cast<std::ptrdiff_t>(offset + quota[k]));
      offset += quota[k];
    }
  }

  DataSplits splits;
  splits.seed = seed;
  splits.ratios = ratios;
  std::array<std::vector<LabeledStatement>*, 3> outs = {&splits.train, &splits.validation,
                                                        &splits.evaluation};
  for (std::size_t k = 0; k < 3; ++k) {
    std::sort(assigned[k].begin(), assigned[k].end());
    outs[k]->reserve(assigned[k].size());
    for (std::size_t i : assigned[k]) outs[k]->push_back(corpus[i]);
  }
  return splits;
}

FrequencyTable class_frequency(std::span<const LabeledStatement> statements, Label class_label,
                               std::size_t top_n, const textprep::Stoplist& stoplist) {
  if (top_n == 0) throw InputError("top_n must be at least 1");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& s : statements) {
    if (s.label != class_label) continue;
    for (auto& token : textprep::remove_stopwords(textprep::tokenize(textprep::clean(s.text)),
                                                  stoplist)) {
      ++counts[token];
    }
  }
  FrequencyTable table;
  table.class_label = class_label;
  table.entries.assign(counts.begin(), counts.end());
  std::sort(table.entries.begin(), table.entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (table.entries.size() > top_n) table.entries.resize(top_n);
  return table;
}

void write_jsonl(std::ostream& out, std::span<const LabeledStatement> statements) {
  for (const auto& s : statements) {
    ordered_json j;
    j["text"] = s.text;
    j["label"] = static_cast<int>(s.label);
    j["source"] = source_name(s.source);
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

std::vector<LabeledStatement> read_jsonl(std::istream& in) {
  std::vector<LabeledStatement> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const int label = j.at("label").get<int>();
      if (label != 0 && label != 1) throw MalformedRow(line_no, "label must be 0 or 1");
      out.push_back({j.at("text").get<std::string>(), static_cast<Label>(label),
                     parse_source_name(j.at("source").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRow(line_no, e.what());
    }
  }
  return out;
}

std::string split_manifest_json(const DataSplits& splits) {
  ordered_json j;
  j["seed"] = splits.seed;
  j["ratios"] = splits.ratios;
  j["counts"] = {{"train", splits.train.size()},
                 {"validation", splits.validation.size()},
                 {"evaluation", splits.evaluation.size()}};
  return j.dump(2) + "\n";
}

SplitManifest parse_split_manifest(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.ratios = j.at("ratios").get<Ratios>();
    const auto& c = j.at("counts");
    m.counts = {c.at("train").get<std::size_t>(), c.at("validation").get<std::size_t>(),
                c.at("evaluation").get<std::size_t>()};
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("split manifest: ") + e.what());
  }
}

}  // namespace mpsc::corpus
