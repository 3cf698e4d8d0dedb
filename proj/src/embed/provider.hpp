// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "preprocess/chunker.hpp"

namespace notecoder::embed {

// L x D row-major matrix. Rows at or past valid_rows are all zero (they sit
// under mask == 0), which lets the network skip windows that only see
// padding.
struct EmbeddingTensor {
  std::size_t L = 0;
  std::size_t D = 0;
  std::size_t valid_rows = 0;
  std::vector<double> values;

  EmbeddingTensor() = default;
  EmbeddingTensor(std::size_t rows, std::size_t dim)
      : L(rows), D(dim), valid_rows(rows), values(rows * dim, 0.0) {}

  double* row(std::size_t i) { return values.data() + i * D; }
  const double* row(std::size_t i) const { return values.data() + i * D; }
  double at(std::size_t i, std::size_t d) const { return values[i * D + d]; }
};

// Identifies a chunk for providers that look embeddings up by position.
struct ChunkRef {
  std::string note_id;
  std::size_t chunk_index = 0;
};

enum class ProviderKind { kHashed, kFile, kRemote };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kHashed;
  std::size_t dim = 128;
  std::uint64_t seed = 0x5eed;  // hashed
  std::string path;             // file
  std::string endpoint;         // remote, e.g. http://127.0.0.1:8600
  std::string model = "clinical-encoder";
  int timeout_ms = 10000;
  int max_retries = 2;
  std::size_t max_batch = 16;
  std::size_t max_in_flight = 4;
};

void validate(const ProviderConfig& cfg);
nlohmann::json to_json(const ProviderConfig& cfg);
ProviderConfig provider_config_from_json(const nlohmann::json& j);
std::string kind_name(ProviderKind kind);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderKind kind() const = 0;
  virtual std::size_t dim() const = 0;

  virtual EmbeddingTensor embed_chunk(const preprocess::TokenChunk& chunk,
                                      const ChunkRef& ref) const = 0;
  // Element-wise equal to embed_chunk. Errors carry the failing index.
  virtual std::vector<EmbeddingTensor> embed_batch(
      std::span<const preprocess::TokenChunk> chunks,
      std::span<const ChunkRef> refs) const;
};

// Unit-normalised pseudo-random rows, a pure function of
// (token_id, dim, seed). Thread-safe; rows are memoised per token.
class HashedProvider final : public Provider {
 public:
  HashedProvider(std::size_t dim, std::uint64_t seed);
  ProviderKind kind() const override { return ProviderKind::kHashed; }
  std::size_t dim() const override { return dim_; }
  EmbeddingTensor embed_chunk(const preprocess::TokenChunk& chunk,
                              const ChunkRef& ref) const override;

  // The row for one token, computed without the cache.
  static std::vector<double> token_vector(preprocess::TokenId token,
                                          std::size_t dim, std::uint64_t seed);

 private:
  const std::vector<double>& cached_row(preprocess::TokenId token) const;

  std::size_t dim_;
  std::uint64_t seed_;
  mutable std::mutex mu_;
  mutable std::unordered_map<preprocess::TokenId, std::vector<double>> cache_;
};

// Precomputed embeddings: one JSON header line
//   {"dim": D, "L": L, "index": [{"note_id", "chunk_idx", "offset"}]}
// followed by little-endian float32 payloads of L*D values each. offset is
// the byte offset of an entry from the start of the payload.
class FileProvider final : public Provider {
 public:
  explicit FileProvider(const std::string& path);
  ProviderKind kind() const override { return ProviderKind::kFile; }
  std::size_t dim() const override { return dim_; }
  EmbeddingTensor embed_chunk(const preprocess::TokenChunk& chunk,
                              const ChunkRef& ref) const override;

 private:
  std::size_t dim_ = 0;
  std::size_t length_ = 0;
  std::unordered_map<std::string, std::vector<float>> entries_;
};

struct FileEntry {
  std::string note_id;
  std::size_t chunk_index = 0;
  const EmbeddingTensor* tensor = nullptr;
};
void write_embedding_file(const std::string& path, std::span<const FileEntry> entries);

// Client for the remote wire protocol (POST /v1/embed).
class RemoteProvider final : public Provider {
 public:
  explicit RemoteProvider(ProviderConfig cfg);
  ProviderKind kind() const override { return ProviderKind::kRemote; }
  std::size_t dim() const override { return cfg_.dim; }
  EmbeddingTensor embed_chunk(const preprocess::TokenChunk& chunk,
                              const ChunkRef& ref) const override;
  std::vector<EmbeddingTensor> embed_batch(
      std::span<const preprocess::TokenChunk> chunks,
      std::span<const ChunkRef> refs) const override;

  // Requests sent so far, retries included.
  std::size_t requests_sent() const;

 private:
  std::vector<EmbeddingTensor> request(
      std::span<const preprocess::TokenChunk> chunks) const;

  ProviderConfig cfg_;
  std::string host_;
  int port_ = 80;
  mutable std::mutex mu_;
  mutable std::size_t requests_ = 0;
  mutable std::size_t in_flight_ = 0;
  mutable std::condition_variable slot_free_;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg);

// Request body for a batch, as sent by RemoteProvider.
nlohmann::json embed_request_json(std::span<const preprocess::TokenChunk> chunks,
                                  const std::string& model);

// Zeroes rows under mask == 0 and sets valid_rows.
void apply_mask(EmbeddingTensor& t, const preprocess::TokenChunk& chunk);

}  // namespace notecoder::embed
