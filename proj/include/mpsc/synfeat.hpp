#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "mpsc/error.hpp"

namespace mpsc::synfeat {

inline constexpr std::size_t kFeatureCount = 5;
using Scaled = std::array<double, kFeatureCount>;

// Structure counts of a raw statement. Whitespace contributes to total_chars only.
struct SyntacticVector {
  std::uint64_t total_chars = 0;
  std::uint64_t uppercase = 0;
  std::uint64_t digits = 0;
  std::uint64_t punctuation = 0;
  std::uint64_t unknown = 0;  // not a letter, digit, punctuation mark or whitespace

  Scaled as_array() const {
    return {double(total_chars), double(uppercase), double(digits), double(punctuation),
            double(unknown)};
  }
  bool operator==(const SyntacticVector&) const = default;
};

// Counts Unicode scalar values; invalid UTF-8 bytes decode to U+FFFD (unknown).
SyntacticVector count_features(std::string_view text);

class EmptyFit : public Error {
 public:
  EmptyFit() : Error("cannot fit a scaler on an empty sample") {}
};

// Standardization statistics. Only obtainable by fitting or by restoring saved
// values, so a fitted scaler can never be refitted in place.
class ScalerParams {
 public:
  static constexpr double kMinStd = 1e-12;

  // Population standard deviation; dimensions with std < kMinStd get std = 1.
  static ScalerParams fit(std::span<const SyntacticVector> vectors);
  static ScalerParams restore(const Scaled& mean, const Scaled& std, std::uint64_t fitted_on);

  const Scaled& mean() const { return mean_; }
  const Scaled& std() const { return std_; }
  std::uint64_t fitted_on() const { return fitted_on_; }

  Scaled scale(const SyntacticVector& v) const { return scale(v.as_array()); }
  Scaled scale(const Scaled& raw) const;
  Scaled unscale(const Scaled& scaled) const;

  bool operator==(const ScalerParams&) const = default;

 private:
  ScalerParams(const Scaled& mean, const Scaled& std, std::uint64_t fitted_on)
      : mean_(mean), std_(std), fitted_on_(fitted_on) {}

  Scaled mean_{};
  Scaled std_{};
  std::uint64_t fitted_on_ = 0;
};

inline ScalerParams fit_scaler(std::span<const SyntacticVector> vectors) {
  return ScalerParams::fit(vectors);
}
inline Scaled scale(const SyntacticVector& v, const ScalerParams& p) { return p.scale(v); }

}  // namespace mpsc::synfeat
