// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "embed/provider.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/random.hpp"

namespace notecoder::embed {

std::string kind_name(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kHashed: return "hashed";
    case ProviderKind::kFile: return "file";
    case ProviderKind::kRemote: return "remote";
  }
  return "unknown";
}

void validate(const ProviderConfig& cfg) {
  require(cfg.dim > 0, ErrorCode::kConfig, "embedding dim must be > 0");
  if (cfg.kind == ProviderKind::kRemote) {
    require(cfg.timeout_ms > 0, ErrorCode::kConfig,
            "remote timeout must be > 0");
    require(cfg.max_retries >= 0, ErrorCode::kConfig,
            "max_retries must be >= 0");
    require(cfg.max_batch >= 1, ErrorCode::kConfig, "max_batch must be >= 1");
    require(cfg.max_in_flight >= 1, ErrorCode::kConfig,
            "max_in_flight must be >= 1");
    require(!cfg.endpoint.empty(), ErrorCode::kConfig,
            "remote provider needs an endpoint");
  }
  if (cfg.kind == ProviderKind::kFile)
    require(!cfg.path.empty(), ErrorCode::kConfig, "file provider needs a path");
}

nlohmann::json to_json(const ProviderConfig& cfg) {
  nlohmann::json j = {{"kind", kind_name(cfg.kind)}, {"dim", cfg.dim}};
  switch (cfg.kind) {
    case ProviderKind::kHashed: j["seed"] = cfg.seed; break;
    case ProviderKind::kFile: j["path"] = cfg.path; break;
    case ProviderKind::kRemote:
      j["endpoint"] = cfg.endpoint;
      j["model"] = cfg.model;
      j["timeout_ms"] = cfg.timeout_ms;
      j["max_retries"] = cfg.max_retries;
      j["max_batch"] = cfg.max_batch;
      j["max_in_flight"] = cfg.max_in_flight;
      break;
  }
  return j;
}

ProviderConfig provider_config_from_json(const nlohmann::json& j) {
  ProviderConfig cfg;
  try {
    const std::string kind = j.value("kind", std::string("hashed"));
    if (kind == "hashed") cfg.kind = ProviderKind::kHashed;
    else if (kind == "file") cfg.kind = ProviderKind::kFile;
    else if (kind == "remote") cfg.kind = ProviderKind::kRemote;
    else fail(ErrorCode::kConfig, "unknown provider kind '" + kind + "'");
    cfg.dim = j.value("dim", cfg.dim);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.path = j.value("path", cfg.path);
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.model = j.value("model", cfg.model);
    cfg.timeout_ms = j.value("timeout_ms", cfg.timeout_ms);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.max_batch = j.value("max_batch", cfg.max_batch);
    cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("provider config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

void apply_mask(EmbeddingTensor& t, const preprocess::TokenChunk& chunk) {
  t.valid_rows = chunk.valid_tokens();
  for (std::size_t i = 0; i < t.L; ++i) {
    if (i < chunk.mask.size() && chunk.mask[i]) continue;
    std::fill_n(t.row(i), t.D, 0.0);
  }
}

std::vector<EmbeddingTensor> Provider::embed_batch(
    std::span<const preprocess::TokenChunk> chunks,
    std::span<const ChunkRef> refs) const {
  require(refs.empty() || refs.size() == chunks.size(), ErrorCode::kShape,
          "chunk refs do not match chunks");
  std::vector<EmbeddingTensor> out;
  out.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    try {
      out.push_back(embed_chunk(chunks[i], refs.empty() ? ChunkRef{} : refs[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "chunk " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

HashedProvider::HashedProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  require(dim > 0, ErrorCode::kConfig, "embedding dim must be > 0");
}

std::vector<double> HashedProvider::token_vector(preprocess::TokenId token,
                                                 std::size_t dim,
                                                 std::uint64_t seed) {
  std::vector<double> v(dim);
  const std::uint64_t base = mix(seed, static_cast<std::uint64_t>(token));
  double norm2 = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    v[d] = 2.0 * unit_double(mix(base, static_cast<std::uint64_t>(d))) - 1.0;
    norm2 += v[d] * v[d];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

const std::vector<double>& HashedProvider::cached_row(
    preprocess::TokenId token) const {
  std::lock_guard lock(mu_);
  auto it = cache_.find(token);
  if (it == cache_.end())
    it = cache_.emplace(token, token_vector(token, dim_, seed_)).first;
  // unordered_map never moves its nodes, so the reference stays valid.
  return it->second;
}

EmbeddingTensor HashedProvider::embed_chunk(const preprocess::TokenChunk& chunk,
                                            const ChunkRef&) const {
  EmbeddingTensor t(chunk.length(), dim_);
  for (std::size_t i = 0; i < chunk.length(); ++i) {
    if (!chunk.mask[i]) continue;
    const auto& row = cached_row(chunk.token_ids[i]);
    std::copy(row.begin(), row.end(), t.row(i));
  }
  t.valid_rows = chunk.valid_tokens();
  return t;
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg) {
  validate(cfg);
  switch (cfg.kind) {
    case ProviderKind::kHashed:
      return std::make_unique<HashedProvider>(cfg.dim, cfg.seed);
    case ProviderKind::kFile: {
      auto p = std::make_unique<FileProvider>(cfg.path);
      require(p->dim() == cfg.dim, ErrorCode::kShape,
              "embedding file dim " + std::to_string(p->dim()) +
                  " != configured " + std::to_string(cfg.dim));
      return p;
    }
    case ProviderKind::kRemote:
      return std::make_unique<RemoteProvider>(cfg);
  }
  fail(ErrorCode::kConfig, "unknown provider kind");
}

}  // namespace notecoder::embed
