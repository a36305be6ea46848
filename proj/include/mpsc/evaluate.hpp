#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mpsc/corpus.hpp"
#include "mpsc/error.hpp"
#include "mpsc/neural.hpp"

namespace mpsc::evaluate {

// Positive class is SUSPICIOUS.
struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

ConfusionMatrix confusion(std::span<const corpus::Label> predicted,
                          std::span<const corpus::Label> actual);
ConfusionMatrix confusion(std::span<const neural::Prediction> predictions,
                          std::span<const corpus::Label> actual);

struct MetricsReport {
  std::string model_name;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  ConfusionMatrix matrix;
  // Set when the metric had a zero denominator and was reported as 0.
  bool precision_degenerate = false, recall_degenerate = false, f1_degenerate = false;
};

// Throws EmptyInput for an all-zero matrix.
MetricsReport metrics(const ConfusionMatrix& cm, std::string model_name = {});

// Percentage with two decimals, rounded half-up on the shortest decimal form of the
// fraction (0.92585 -> "92.59").
std::string format_percent(double fraction);

struct ComparisonReport {
  std::string text;  // aligned table, one row per report in the given order
  std::string json;  // {"rows":[...]} with full-precision values, newline-terminated
};

ComparisonReport comparison_report(std::span<const MetricsReport> reports);

}  // namespace mpsc::evaluate
