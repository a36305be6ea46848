#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpsc/error.hpp"
#include "mpsc/textprep.hpp"

namespace mpsc::corpus {

enum class SourceId { Isot, Liar, FakeNewsNet, Fnid };
inline constexpr std::array<SourceId, 4> kAllSources = {SourceId::Isot, SourceId::Liar,
                                                        SourceId::FakeNewsNet, SourceId::Fnid};

// Suspicious is the positive class.
enum class Label : int { Credible = 0, Suspicious = 1 };

std::string_view source_name(SourceId id);  // "isot", "liar", "fakenewsnet", "fnid"
SourceId parse_source_name(std::string_view name);
std::string_view label_name(Label label);

class UnsupportedSource : public InputError {
 public:
  explicit UnsupportedSource(std::string_view name)
      : InputError("unsupported source '" + std::string(name) + "'") {}
};

class MalformedRow : public InputError {
 public:
  MalformedRow(std::size_t row, std::string reason)
      : InputError("row " + std::to_string(row) + ": " + reason),
        row_(row),
        reason_(std::move(reason)) {}
  std::size_t row() const { return row_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t row_;
  std::string reason_;
};

class UnknownLabel : public InputError {
 public:
  UnknownLabel(SourceId source, std::string raw)
      : InputError("unknown label '" + raw + "' for source " + std::string(source_name(source))),
        source_(source),
        raw_label_(std::move(raw)) {}
  SourceId source() const { return source_; }
  const std::string& raw_label() const { return raw_label_; }

 private:
  SourceId source_;
  std::string raw_label_;
};

class InsufficientClassSamples : public InputError {
 public:
  using InputError::InputError;
};

class InvalidRatios : public InputError {
 public:
  using InputError::InputError;
};

struct RawRecord {
  SourceId source = SourceId::Liar;
  std::string text;
  std::string raw_label;
  std::map<std::string, std::string> extra_fields;
};

struct LabeledStatement {
  std::string text;
  Label label = Label::Credible;
  SourceId source = SourceId::Liar;

  bool operator==(const LabeledStatement&) const = default;
};

// Field layouts. LIAR indices are 1-based; expected_fields = 0 accepts any row
// wide enough to hold both indexed fields.
struct SourceFormat {
  std::string isot_label = "true";  // "true" for the true-source file, "fake" for the fake one

  std::size_t liar_label_field = 2;
  std::size_t liar_text_field = 3;
  std::size_t liar_expected_fields = 14;

  std::string fakenewsnet_text_column = "title";
  std::string fakenewsnet_label_column = "real";

  bool fnid_fakenewsnet_layout = false;
  std::size_t fnid_expected_fields = 0;
};

struct ParseResult {
  std::vector<RawRecord> records;
  std::size_t dropped_empty = 0;
};

// Parses one source file held in memory.
ParseResult parse_source(SourceId source, std::string_view bytes, const SourceFormat& format = {});

Label normalize_label(SourceId source, std::string_view raw_label);

struct MergeResult {
  std::vector<LabeledStatement> statements;
  std::size_t duplicates = 0;
  std::map<SourceId, std::size_t> duplicates_by_source;
};

// Stable merge; exact (text, label) duplicates within one source are dropped.
MergeResult merge(std::span<const std::pair<SourceId, std::vector<RawRecord>>> collections);

using Ratios = std::array<double, 3>;

struct DataSplits {
  std::vector<LabeledStatement> train;
  std::vector<LabeledStatement> validation;
  std::vector<LabeledStatement> evaluation;
  std::uint64_t seed = 0;
  Ratios ratios{};
};

// Stratifies on (source x label), shuffles each stratum with the seed and
// apportions it by the largest-remainder method. Each split keeps corpus order.
DataSplits stratified_split(std::span<const LabeledStatement> corpus, const Ratios& ratios,
                            std::uint64_t seed);

struct FrequencyTable {
  Label class_label = Label::Credible;
  std::vector<std::pair<std::string, std::uint64_t>> entries;  // count desc, token asc
};

FrequencyTable class_frequency(std::span<const LabeledStatement> statements, Label class_label,
                               std::size_t top_n,
                               const textprep::Stoplist& stoplist = textprep::Stoplist::english());

// Merged corpus as JSON lines: {"text": ..., "label": 0|1, "source": "..."}.
void write_jsonl(std::ostream& out, std::span<const LabeledStatement> statements);
std::vector<LabeledStatement> read_jsonl(std::istream& in);

// {"seed": ..., "ratios": [...], "counts": {"train": ..., "validation": ..., "evaluation": ...}}
std::string split_manifest_json(const DataSplits& splits);

struct SplitManifest {
  std::uint64_t seed = 0;
  Ratios ratios{};
  std::array<std::size_t, 3> counts{};
};
SplitManifest parse_split_manifest(std::string_view json);

}  // namespace mpsc::corpus
