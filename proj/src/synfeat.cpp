#include "mpsc/synfeat.hpp"

#include <cmath>
#include <string>

#include "mpsc/unicode.hpp"

namespace mpsc::synfeat {

SyntacticVector count_features(std::string_view text) {
  SyntacticVector v;
  for (char32_t cp : unicode::decode(text)) {
    ++v.total_chars;
    const std::uint8_t cls = unicode::classify(cp);
    if (cls & unicode::kUpper) ++v.uppercase;
    if (cls & unicode::kDigit) ++v.digits;
    if (cls & unicode::kPunct) ++v.punctuation;
    if (!(cls & (unicode::kLetter | unicode::kDigit | unicode::kPunct | unicode::kSpace))) {
      ++v.unknown;
    }
  }
  return v;
}

ScalerParams ScalerParams::fit(std::span<const SyntacticVector> vectors) {
  if (vectors.empty()) throw EmptyFit();
  const double n = static_cast<double>(vectors.size());
  Scaled mean{};
  for (const auto& v : vectors) {
    const Scaled x = v.as_array();
    for (std::size_t i = 0; i < kFeatureCount; ++i) mean[i] += x[i];
  }
  for (auto& m : mean) m /= n;
  Scaled var{};
  for (const auto& v : vectors) {
    const Scaled x = v.as_array();
    for (std::size_t i = 0; i < kFeatureCount; ++i) var[i] += (x[i] - mean[i]) * (x[i] - mean[i]);
  }
  Scaled std{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    std[i] = std::sqrt(var[i] / n);
    if (std[i] < kMinStd) std[i] = 1.0;
  }
  return ScalerParams(mean, std, vectors.size());
}

ScalerParams ScalerParams::restore(const Scaled& mean, const Scaled& std, std::uint64_t fitted_on) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!(std[i] > 0.0) || !std::isfinite(std[i]) || !std::isfinite(mean[i])) {
      throw Error("scaler: std[" + std::to_string(i) + "] must be positive and finite");
    }
  }
  return ScalerParams(mean, std, fitted_on);
}

Scaled ScalerParams::scale(const Scaled& raw) const {
  Scaled out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = (raw[i] - mean_[i]) / std_[i];
  return out;
}

Scaled ScalerParams::unscale(const Scaled& scaled) const {
  Scaled out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = scaled[i] * std_[i] + mean_[i];
  return out;
}

}  // namespace mpsc::synfeat
