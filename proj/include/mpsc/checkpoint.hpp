#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mpsc/error.hpp"
#include "mpsc/neural.hpp"

namespace mpsc::neural {

// File layout: "MPSC", u16 LE version, u32 LE header length, JSON header (config, scaler,
// featurizer, tensor directory), float32 LE tensor payloads, SHA-256 of everything before it.
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class FormatVersionMismatch : public CheckpointError {
 public:
  explicit FormatVersionMismatch(std::uint16_t found)
      : CheckpointError("checkpoint format version " + std::to_string(found) +
                        " is not supported (expected " + std::to_string(kCheckpointVersion) + ")"),
        found_(found) {}
  std::uint16_t found() const { return found_; }

 private:
  std::uint16_t found_;
};

class CorruptChecksum : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

std::string serialize_checkpoint(const NetworkParams& params,
                                 std::uint16_t version = kCheckpointVersion);
NetworkParams deserialize_checkpoint(std::string_view bytes);

// Writes through a temporary file and renames it into place.
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mpsc::neural
