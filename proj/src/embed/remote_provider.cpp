// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <cmath>

#include "common/error.hpp"
#include "embed/provider.hpp"

namespace notecoder::embed {

namespace {

// Counts one in-flight request against the provider's limit.
class InFlightSlot {
 public:
  InFlightSlot(std::mutex& mu, std::condition_variable& cv, std::size_t& n,
               std::size_t limit)
      : mu_(mu), cv_(cv), n_(n) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return n_ < limit; });
    ++n_;
  }
  ~InFlightSlot() {
    {
      std::lock_guard lock(mu_);
      --n_;
    }
    cv_.notify_one();
  }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  std::size_t& n_;
};

}  // namespace

nlohmann::json embed_request_json(std::span<const preprocess::TokenChunk> chunks,
                                  const std::string& model) {
  nlohmann::json body;
  body["model"] = model;
  body["chunks"] = nlohmann::json::array();
  body["masks"] = nlohmann::json::array();
  body["texts"] = nlohmann::json::array();
  for (const auto& c : chunks) {
    body["chunks"].push_back(c.token_ids);
    body["masks"].push_back(c.mask);
    body["texts"].push_back(c.text);
  }
  return body;
}

RemoteProvider::RemoteProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.kind = ProviderKind::kRemote;
  validate(cfg_);
}

std::size_t RemoteProvider::requests_sent() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::vector<EmbeddingTensor> RemoteProvider::request(
    std::span<const preprocess::TokenChunk> chunks) const {
  const std::string body = embed_request_json(chunks, cfg_.model).dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    InFlightSlot slot(mu_, slot_free_, in_flight_, cfg_.max_in_flight);
    {
      std::lock_guard lock(mu_);
      ++requests_;
    }
    httplib::Client client(cfg_.endpoint);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const auto res = client.Post("/v1/embed", body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    require(res->status == 200, ErrorCode::kInvalidArgument,
            "embedding service rejected request: HTTP " +
                std::to_string(res->status) + " " + res->body);

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kFormat, std::string("embedding response: ") + e.what());
    }
    const auto dim = j.value("dim", std::size_t{0});
    require(dim == cfg_.dim, ErrorCode::kShape,
            "embedding service dim " + std::to_string(dim) +
                " != configured " + std::to_string(cfg_.dim));
    const auto& embs = j.at("embeddings");
    require(embs.is_array() && embs.size() == chunks.size(), ErrorCode::kShape,
            "embedding response has wrong chunk count");
    std::vector<EmbeddingTensor> out;
    out.reserve(chunks.size());
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      const auto& rows = embs[c];
      const std::size_t L = chunks[c].length();
      require(rows.is_array() && rows.size() == L, ErrorCode::kShape,
              "embedding response has wrong row count");
      EmbeddingTensor t(L, dim);
      for (std::size_t i = 0; i < L; ++i) {
        require(rows[i].is_array() && rows[i].size() == dim, ErrorCode::kShape,
                "embedding response row has wrong width");
        for (std::size_t d = 0; d < dim; ++d) {
          const double v = rows[i][d].get<double>();
          require(std::isfinite(v), ErrorCode::kNumeric,
                  "non-finite value in embedding response");
          t.row(i)[d] = v;
        }
      }
      apply_mask(t, chunks[c]);
      out.push_back(std::move(t));
    }
    return out;
  }
  fail(ErrorCode::kProviderUnavailable,
       "embedding service unavailable after " +
           std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error);
}

EmbeddingTensor RemoteProvider::embed_chunk(const preprocess::TokenChunk& chunk,
                                            const ChunkRef&) const {
  return std::move(request(std::span(&chunk, 1)).front());
}

std::vector<EmbeddingTensor> RemoteProvider::embed_batch(
    std::span<const preprocess::TokenChunk> chunks,
    std::span<const ChunkRef>) const {
  std::vector<EmbeddingTensor> out;
  out.reserve(chunks.size());
  for (std::size_t start = 0; start < chunks.size(); start += cfg_.max_batch) {
    const std::size_t n = std::min(cfg_.max_batch, chunks.size() - start);
    try {
      auto part = request(chunks.subspan(start, n));
      for (auto& t : part) out.push_back(std::move(t));
    } catch (const Error& e) {
      throw Error(e.code(), "chunks " + std::to_string(start) + ".." +
                                std::to_string(start + n - 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace notecoder::embed
