#pragma once

#include <cstdint>
#include <string>

#include "mpsc/neural.hpp"

namespace mpsc::testing {

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t floored = 0;    // entries whose magnitude fell below kDenominatorFloor
  double max_rel_error = 0;  // |a - n| / max(|a|, |n|, kDenominatorFloor)
  double max_abs_error = 0;
  std::string worst;         // tensor name and index of the largest error

  bool ok() const { return checked > 0 && failures == 0; }
  void merge(const GradCheck& other);
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kRelTolerance = 1e-4;
// Double-precision central differences resolve about eps / kFdStep ~ 2e-11 of an O(1)
// loss, so relative error is only meaningful for gradients well above 2e-7.
inline constexpr double kDenominatorFloor = 1e-6;

// Compares analytic and central-difference gradients of a random scalar loss of one step.
GradCheck check_lstm_cell(std::uint64_t seed);
GradCheck check_gru_cell(std::uint64_t seed);

// Full network (two recurrent layers, syntactic input, train-mode dropout) on a batch of
// a 3-token and a 2-token sequence with BCE loss.
GradCheck check_network(neural::BranchType branch, std::uint64_t seed);

}  // namespace mpsc::testing
