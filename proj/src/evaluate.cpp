#include "mpsc/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace mpsc::evaluate {

ConfusionMatrix confusion(std::span<const corpus::Label> predicted,
                          std::span<const corpus::Label> actual) {
  if (predicted.size() != actual.size()) {
    throw LengthMismatch(std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(actual.size()) + " labels");
  }
  if (predicted.empty()) throw EmptyInput("nothing to evaluate");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == corpus::Label::Suspicious;
    const bool a = actual[i] == corpus::Label::Suspicious;
    if (p && a) {
      ++cm.tp;
    } else if (p) {
      ++cm.fp;
    } else if (a) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

ConfusionMatrix confusion(std::span<const neural::Prediction> predictions,
                          std::span<const corpus::Label> actual) {
  std::vector<corpus::Label> verdicts;
  verdicts.reserve(predictions.size());
  for (const auto& p : predictions) verdicts.push_back(p.verdict);
  return confusion(verdicts, actual);
}

MetricsReport metrics(const ConfusionMatrix& cm, std::string model_name) {
  if (cm.total() == 0) throw EmptyInput("empty confusion matrix");
  MetricsReport r;
  r.model_name = std::move(model_name);
  r.matrix = cm;
  const auto tp = static_cast<double>(cm.tp);
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp == 0) {
    r.precision_degenerate = true;
  } else {
    r.precision = tp / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    r.recall_degenerate = true;
  } else {
    r.recall = tp / static_cast<double>(cm.tp + cm.fn);
  }
  if (r.precision + r.recall == 0.0) {
    r.f1_degenerate = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

std::string format_percent(double fraction) {
  // Shortest representation that round-trips, e.g. "0.92585" or "1e-05".
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, fraction, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  const bool negative = !s.empty() && s[0] == '-';
  if (negative) s.erase(0, 1);
  auto dot = s.find('.');
  std::string digits = dot == std::string::npos ? s : s.substr(0, dot) + s.substr(dot + 1);
  std::size_t int_len = dot == std::string::npos ? s.size() : dot;
  // Multiply by 100, keep two decimals: integer part grows by 2 digits.
  int_len += 2;
  while (digits.size() < int_len + 3) digits.push_back('0');
  const bool round_up = digits[int_len + 2] >= '5';
  digits.resize(int_len + 2);
  if (round_up) {
    std::size_t i = digits.size();
    while (i > 0) {
      --i;
      if (digits[i] == '9') {
        digits[i] = '0';
      } else {
        ++digits[i];
        break;
      }
      if (i == 0) {
        digits.insert(digits.begin(), '1');
        ++int_len;
      }
    }
  }
  std::string integer = digits.substr(0, int_len);
  integer.erase(0, std::min(integer.find_first_not_of('0'), integer.size() - 1));
  std::string out = integer + "." + digits.substr(int_len, 2);
  if (negative && out != "0.00") out.insert(out.begin(), '-');
  return out;
}

ComparisonReport comparison_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw EmptyInput("no reports to compare");
  ComparisonReport out;

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json degenerate = nlohmann::ordered_json::array();
    if (r.precision_degenerate) degenerate.push_back("precision");
    if (r.recall_degenerate) degenerate.push_back("recall");
    if (r.f1_degenerate) degenerate.push_back("f1");
    rows.push_back({{"model", r.model_name},
                    {"accuracy", r.accuracy},
                    {"precision", r.precision},
                    {"recall", r.recall},
                    {"f1", r.f1},
                    {"matrix",
                     {{"tp", r.matrix.tp}, {"fp", r.matrix.fp}, {"fn", r.matrix.fn}, {"tn", r.matrix.tn}}},
                    {"degenerate", degenerate}});
  }
  out.json = nlohmann::ordered_json{{"rows", rows}}.dump(2) + "\n";

  const std::vector<std::string> header = {"Model", "Accuracy", "Precision", "Recall", "F1-Score"};
  std::vector<std::vector<std::string>> cells;
  bool any_degenerate = false;
  for (const auto& r : reports) {
    auto mark = [&](double v, bool degenerate) {
      any_degenerate = any_degenerate || degenerate;
      return format_percent(v) + (degenerate ? "*" : "");
    };
    cells.push_back({r.model_name, format_percent(r.accuracy), mark(r.precision, r.precision_degenerate),
                     mark(r.recall, r.recall_degenerate), mark(r.f1, r.f1_degenerate)});
  }
  if (any_degenerate) {
    for (auto& row : cells) {
      for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c].back() != '*') row[c] += ' ';
      }
    }
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream text;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        text << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        text << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    text << '\n';
  };
  emit(header);
  std::size_t rule = 0;
  for (auto w : width) rule += w;
  text << std::string(rule + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : cells) emit(row);
  if (any_degenerate) text << "* zero denominator, reported as 0\n";
  out.text = text.str();
  return out;
}

}  // namespace mpsc::evaluate
