#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "mpsc/random.hpp"
#include "mpsc/synfeat.hpp"
#include "mpsc/unicode.hpp"

using namespace mpsc::synfeat;

namespace {

SyntacticVector counts(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d,
                       std::uint64_t e) {
  return {a, b, c, d, e};
}

}  // namespace

TEST_CASE("count_features on hand-checked strings") {
  CHECK(count_features("") == counts(0, 0, 0, 0, 0));
  CHECK(count_features("Hello, World 123!") == counts(17, 2, 3, 2, 0));
  // '€' is a currency symbol, not punctuation.
  CHECK(count_features("Ab1# \xE2\x82\xAC") == counts(6, 1, 1, 1, 1));
}

TEST_CASE("count_features matches the unicodedata oracle fixture") {
  std::ifstream in(MPSC_TEST_DATA_DIR "/syntactic_oracle.jsonl");
  REQUIRE(in);
  std::string line;
  std::size_t checked = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto text = j["text"].get<std::string>();
    const auto expected = j["counts"].get<std::vector<std::uint64_t>>();
    const auto got = count_features(text);
    INFO("line " << checked + 1);
    CHECK(got == counts(expected[0], expected[1], expected[2], expected[3], expected[4]));
    CHECK(got.uppercase + got.digits + got.punctuation + got.unknown <= got.total_chars);
    ++checked;
  }
  CHECK(checked >= 1000);
}

TEST_CASE("invalid UTF-8 bytes count as unknown replacement characters") {
  const auto v = count_features("a\xFF" "b");
  CHECK(v == counts(3, 0, 0, 0, 1));
}

TEST_CASE("lowercase mapping is idempotent and never yields punctuation or space") {
  for (char32_t cp = 0; cp < 0x110000; ++cp) {
    if (cp >= 0xD800 && cp <= 0xDFFF) continue;
    const char32_t lo = mpsc::unicode::to_lower(cp);
    REQUIRE(mpsc::unicode::to_lower(lo) == lo);
    if (!mpsc::unicode::is_punct(cp)) REQUIRE(!mpsc::unicode::is_punct(lo));
    if (!mpsc::unicode::is_space(cp)) REQUIRE(!mpsc::unicode::is_space(lo));
  }
}

TEST_CASE("fit_scaler statistics") {
  SUBCASE("two values") {
    std::vector<SyntacticVector> v = {counts(0, 0, 0, 0, 0), counts(2, 2, 2, 2, 2)};
    const auto p = fit_scaler(v);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      CHECK(p.mean()[i] == doctest::Approx(1.0));
      CHECK(p.std()[i] == doctest::Approx(1.0));
    }
    CHECK(p.fitted_on() == 2);
    CHECK(scale(counts(0, 0, 0, 0, 0), p)[0] == doctest::Approx(-1.0));
  }
  SUBCASE("constant dimension is clamped") {
    std::vector<SyntacticVector> v(3, counts(5, 5, 5, 5, 5));
    const auto p = fit_scaler(v);
    CHECK(p.mean()[0] == 5.0);
    CHECK(p.std()[0] == 1.0);
  }
  SUBCASE("population std") {
    std::vector<SyntacticVector> v = {counts(1, 0, 0, 0, 0), counts(2, 0, 0, 0, 0),
                                      counts(3, 0, 0, 0, 0)};
    const auto p = fit_scaler(v);
    CHECK(p.mean()[0] == doctest::Approx(2.0));
    CHECK(p.std()[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(p.std()[0] == doctest::Approx(0.81650).epsilon(1e-5));
    CHECK(scale(counts(3, 0, 0, 0, 0), p)[0] == doctest::Approx(1.2247).epsilon(1e-4));
    CHECK(scale(counts(2, 0, 0, 0, 0), p)[0] == 0.0);
  }
  SUBCASE("empty") {
    CHECK_THROWS_AS(fit_scaler(std::span<const SyntacticVector>{}), EmptyFit);
  }
}

TEST_CASE("scaled training sample has zero mean and unit variance") {
  mpsc::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SyntacticVector> sample(2 + rng.below(200));
    for (auto& v : sample) {
      v = counts(rng.below(500), rng.below(50), rng.below(30), rng.below(40), rng.below(5));
    }
    sample[0].unknown = 0;
    sample[1].unknown = 1;  // keep every dimension non-constant
    sample[0].digits = 0;
    sample[1].digits = 1;
    const auto p = fit_scaler(sample);
    Scaled mean{}, var{};
    for (const auto& v : sample) {
      const auto s = p.scale(v);
      for (std::size_t i = 0; i < kFeatureCount; ++i) mean[i] += s[i];
    }
    for (auto& m : mean) m /= static_cast<double>(sample.size());
    for (const auto& v : sample) {
      const auto s = p.scale(v);
      for (std::size_t i = 0; i < kFeatureCount; ++i) var[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      CHECK(std::abs(mean[i]) < 1e-9);
      CHECK(std::abs(var[i] / static_cast<double>(sample.size()) - 1.0) < 1e-6);
    }
    for (const auto& v : sample) {
      const auto back = p.unscale(p.scale(v));
      const auto raw = v.as_array();
      for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(std::abs(back[i] - raw[i]) <= 1e-12 * std::max(1.0, raw[i]));
    }
  }
}

TEST_CASE("restored scaler rejects non-positive std") {
  CHECK_THROWS(ScalerParams::restore({0, 0, 0, 0, 0}, {1, 1, 0, 1, 1}, 3));
  const auto p = ScalerParams::restore({1, 2, 3, 4, 5}, {1, 1, 1, 1, 2}, 3);
  CHECK(p.scale(SyntacticVector{1, 2, 3, 4, 7})[4] == 1.0);
}
