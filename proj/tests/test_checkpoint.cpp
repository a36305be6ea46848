#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mpsc/checkpoint.hpp"

using namespace mpsc;
using namespace mpsc::neural;
namespace fs = std::filesystem;

namespace {

NetworkParams sample_params(BranchType type, bool syntactic) {
  ModelConfig config = ModelConfig::defaults(type, 6);
  config.layer_sizes = {7, 5};
  config.head_size = 4;
  config.use_syntactic = syntactic;
  NetworkParams p = initialize(config, 11);
  p.scaler = synfeat::ScalerParams::restore({51.123456789012345, 3.1, 4.0, 2.0, 0.1},
                                            {10.5, 2.25, 1.0 / 3.0, 1.0, 1.0}, 977);
  p.featurizer = {{"embedding", "hash-stub-6"}, {"lemmatizer", "suffix"}};
  // Values that stress exact float transport.
  p.weights.out_b(0, 0) = -0.0f;
  p.weights.head_b(0, 0) = 1.17549435e-38f;
  return p;
}

textprep::EmbeddedSequence seq6() {
  textprep::EmbeddedSequence s;
  s.max_len = 3;
  s.dimension = 6;
  s.mask = {1, 1, 0};
  s.true_length = 2;
  for (int i = 0; i < 18; ++i) s.vectors.push_back(0.1f * float(i % 7) - 0.3f);
  return s;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("mpsc-ckpt-" + std::to_string(::getpid()) + "-" + name);
}

}  // namespace

TEST_CASE("checkpoint round-trip is bit-exact") {
  for (auto type : {BranchType::Lstm, BranchType::Gru, BranchType::EncoderAdapter}) {
    for (bool syntactic : {true, false}) {
      const NetworkParams p = sample_params(type, syntactic);
      const NetworkParams q = deserialize_checkpoint(serialize_checkpoint(p));
      CHECK(q == p);
      CHECK(std::signbit(q.weights.out_b(0, 0)));
      CHECK(q.scaler->std()[2] == 1.0 / 3.0);
      const std::optional<synfeat::Scaled> syn =
          syntactic ? std::optional<synfeat::Scaled>(synfeat::Scaled{1, 2, 3, 4, 5}) : std::nullopt;
      CHECK(forward(p, seq6(), syn, false, 0) == forward(q, seq6(), syn, false, 0));
    }
  }
}

TEST_CASE("checkpoint files") {
  const auto path = temp_file("a.ckpt");
  const NetworkParams p = sample_params(BranchType::Lstm, true);
  save_checkpoint(p, path);
  CHECK(load_checkpoint(path) == p);
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));

  std::string bytes = serialize_checkpoint(p);
  SUBCASE("truncated") {
    for (std::size_t keep : {bytes.size() - 1, bytes.size() / 2, std::size_t{40}}) {
      std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(), std::streamsize(keep));
      CHECK_THROWS_AS(load_checkpoint(path), CorruptChecksum);
    }
  }
  SUBCASE("flipped payload bit") {
    bytes[bytes.size() - 40] ^= 0x01;
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), CorruptChecksum);
  }
  SUBCASE("future version") {
    const std::string future = serialize_checkpoint(p, kCheckpointVersion + 1);
    try {
      deserialize_checkpoint(future);
      FAIL("expected FormatVersionMismatch");
    } catch (const FormatVersionMismatch& e) {
      CHECK(e.found() == kCheckpointVersion + 1);
    }
    // The version is reported even when the file is also truncated.
    CHECK_THROWS_AS(deserialize_checkpoint(std::string_view(future).substr(0, 100)),
                    FormatVersionMismatch);
  }
  SUBCASE("not a checkpoint") {
    CHECK_THROWS_AS(deserialize_checkpoint("hello world, definitely not a model file......"),
                    CheckpointError);
  }
  fs::remove(path);
}
