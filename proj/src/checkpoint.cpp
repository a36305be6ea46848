#include "mpsc/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpsc/sha256.hpp"

namespace mpsc::neural {

using nlohmann::ordered_json;

namespace {

constexpr std::string_view kMagic = "MPSC";
constexpr std::size_t kPrefix = 4 + 2 + 4;
constexpr std::size_t kDigest = 32;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

ordered_json config_json(const ModelConfig& c) {
  return {{"branch", std::string(branch_name(c.branch_type))},
          {"layer_sizes", c.layer_sizes},
          {"head_size", c.head_size},
          {"dropout", c.dropout},
          {"use_syntactic", c.use_syntactic},
          {"use_lexical", c.use_lexical},
          {"input_dimension", c.input_dimension},
          {"max_len", c.max_len}};
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig c;
  c.branch_type = parse_branch_name(j.at("branch").get<std::string>());
  c.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  c.head_size = j.at("head_size").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.use_syntactic = j.at("use_syntactic").get<bool>();
  c.use_lexical = j.at("use_lexical").get<bool>();
  c.input_dimension = j.at("input_dimension").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.validate();
  return c;
}

}  // namespace

std::string serialize_checkpoint(const NetworkParams& params, std::uint16_t version) {
  ordered_json tensors = ordered_json::array();
  std::string payload;
  params.weights.visit([&](const std::string& name, const Mat<float>& m) {
    tensors.push_back({{"name", name},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"offset", payload.size()}});
    // Column-major element order.
    for (Eigen::Index k = 0; k < m.size(); ++k) put_u32(payload, std::bit_cast<std::uint32_t>(m(k)));
  });
  ordered_json header;
  header["config"] = config_json(params.config);
  if (params.scaler) {
    header["scaler"] = {{"mean", params.scaler->mean()},
                        {"std", params.scaler->std()},
                        {"fitted_on", params.scaler->fitted_on()}};
  } else {
    header["scaler"] = nullptr;
  }
  header["featurizer"] = params.featurizer;
  header["tensors"] = tensors;
  header["payload_bytes"] = payload.size();
  const std::string text = header.dump();

  std::string out(kMagic);
  put_u16(out, version);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += payload;
  const auto digest = sha256(out);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

NetworkParams deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  if (bytes.size() < kPrefix + kDigest) throw CorruptChecksum("checkpoint is truncated");
  const auto version = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[4]) |
                                                  (static_cast<unsigned char>(bytes[5]) << 8));
  if (version != kCheckpointVersion) throw FormatVersionMismatch(version);

  const std::string_view body = bytes.substr(0, bytes.size() - kDigest);
  const auto digest = sha256(body);
  if (std::memcmp(digest.data(), bytes.data() + body.size(), kDigest) != 0) {
    throw CorruptChecksum("checkpoint checksum mismatch");
  }

  const std::uint32_t header_len = get_u32(bytes, 6);
  if (kPrefix + header_len > body.size()) throw CheckpointError("header length out of range");
  NetworkParams params;
  ordered_json header;
  try {
    header = ordered_json::parse(body.substr(kPrefix, header_len));
    params.config = config_from_json(header.at("config"));
    const auto& sc = header.at("scaler");
    if (!sc.is_null()) {
      params.scaler = synfeat::ScalerParams::restore(sc.at("mean").get<synfeat::Scaled>(),
                                                     sc.at("std").get<synfeat::Scaled>(),
                                                     sc.at("fitted_on").get<std::uint64_t>());
    }
    params.featurizer = header.at("featurizer").get<std::map<std::string, std::string>>();

  const std::string_view payload = body.substr(kPrefix + header_len);
  params.weights = Weights<float>::zeros(params.config);
  const auto& tensors = header.at("tensors");
  std::size_t index = 0;
  std::size_t expected_offset = 0;
  params.weights.visit([&](const std::string& name, Mat<float>& m) {
    if (index >= tensors.size()) throw CheckpointError("missing tensor " + name);
    const auto& t = tensors[index++];
    if (t.at("name").get<std::string>() != name || t.at("rows").get<Eigen::Index>() != m.rows() ||
        t.at("cols").get<Eigen::Index>() != m.cols()) {
      throw ShapeMismatch("tensor " + name + " does not match the model configuration");
    }
    const auto offset = t.at("offset").get<std::size_t>();
    const auto size = static_cast<std::size_t>(m.size()) * 4;
    if (offset != expected_offset || offset + size > payload.size()) {
      throw CheckpointError("tensor " + name + " lies outside the payload");
    }
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      m(k) = std::bit_cast<float>(get_u32(payload, offset + static_cast<std::size_t>(k) * 4));
      if (!std::isfinite(m(k))) throw CheckpointError("tensor " + name + " has non-finite values");
    }
    expected_offset += size;
  });
  if (index != tensors.size() || expected_offset != payload.size()) {
    throw CheckpointError("tensor directory does not cover the payload");
  }
  } catch (const ordered_json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  } catch (const InputError& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  return params;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(params);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace mpsc::neural
