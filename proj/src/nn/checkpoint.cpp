// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/random.hpp"
#include "nn/network.hpp"

namespace notecoder::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoints are little-endian; add byte swapping for this host");

namespace {
constexpr const char* kFormatName = "notecoder.checkpoint";
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string payload;
  payload.reserve(ckpt.params.total() * sizeof(float));
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : ckpt.params.tensors) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}});
    for (double x : t.data) {
      const float f = static_cast<float>(x);
      char bytes[sizeof(float)];
      std::memcpy(bytes, &f, sizeof f);
      payload.append(bytes, sizeof bytes);
    }
  }
  nlohmann::json header = {{"format", kFormatName},
                           {"version", kCheckpointVersion},
                           {"spec", to_json(ckpt.spec)},
                           {"tensors", tensors},
                           {"payload_bytes", payload.size()},
                           {"checksum", hex64(fnv1a64(payload))},
                           {"meta", ckpt.meta}};
  return header.dump() + '\n' + payload;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  require(nl != std::string::npos, ErrorCode::kLoad, "checkpoint has no header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kLoad, std::string("checkpoint header: ") + e.what());
  }
  require(header.value("format", std::string()) == kFormatName, ErrorCode::kLoad,
          "not a notecoder checkpoint");
  const int version = header.value("version", 0);
  require(version == kCheckpointVersion, ErrorCode::kLoad,
          "checkpoint version " + std::to_string(version) + " not supported (expected " +
              std::to_string(kCheckpointVersion) + ")");
  const std::string payload = bytes.substr(nl + 1);
  require(payload.size() == header.value("payload_bytes", std::size_t{0}),
          ErrorCode::kLoad, "checkpoint payload is truncated or padded");
  require(hex64(fnv1a64(payload)) == header.value("checksum", std::string()),
          ErrorCode::kLoad, "checkpoint checksum mismatch");

  Checkpoint ckpt;
  try {
    ckpt.spec = net_spec_from_json(header.at("spec"));
    ckpt.meta = header.value("meta", nlohmann::json::object());
  } catch (const Error& e) {
    fail(ErrorCode::kLoad, std::string("checkpoint spec: ") + e.what());
  }
  ckpt.params = make_params(ckpt.spec);
  const auto& tensors = header.at("tensors");
  require(tensors.size() == ckpt.params.tensors.size(), ErrorCode::kLoad,
          "checkpoint tensor list does not match its spec");
  std::size_t offset = 0;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    auto& t = ckpt.params.tensors[k];
    require(tensors[k].at("name").get<std::string>() == t.name &&
                tensors[k].at("shape").get<std::vector<std::size_t>>() == t.shape,
            ErrorCode::kLoad, "checkpoint tensor " + t.name + " has wrong name or shape");
    for (double& x : t.data) {
      require(offset + sizeof(float) <= payload.size(), ErrorCode::kLoad,
              "checkpoint payload too short");
      float f;
      std::memcpy(&f, payload.data() + offset, sizeof f);
      offset += sizeof f;
      x = static_cast<double>(f);
    }
  }
  require(offset == payload.size(), ErrorCode::kLoad, "checkpoint payload too long");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  out << serialize_checkpoint(ckpt);
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace notecoder::nn
