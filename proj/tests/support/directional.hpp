#pragma once

#include <cstdint>
#include <vector>

#include "mpsc/corpus.hpp"

namespace mpsc::testing {

// Statements whose class depends on a cue word and on digit density jointly: in 80% of
// statements the cue names the class and the single number is short (slightly longer for
// SUSPICIOUS); in the rest the cue names the other class and the number has 10-16 digits.
std::vector<corpus::LabeledStatement> directional_corpus(std::size_t n, std::uint64_t seed);

struct DirectionalRun {
  double combined = 0;   // evaluation accuracy, lexical + syntactic
  double lexical = 0;    // lexical only
  double syntactic = 0;  // syntactic counts only
  double seconds = 0;
};

// Splits the corpus 0.776/0.112/0.112, trains the three LSTM variants with seed and
// 32-d hash embeddings, and scores them on the evaluation split.
DirectionalRun run_directional(std::size_t n, std::uint64_t seed, bool verbose = false);

}  // namespace mpsc::testing
