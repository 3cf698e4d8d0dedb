// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

// In-process stand-in for a remote embedding service speaking POST /v1/embed.
// Rows come from HashedProvider::token_vector so results can be compared with
// the hashed provider. Failures can be injected per request.

#pragma once

#include <httplib.h>

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "embed/provider.hpp"

class FakeEmbedServer {
 public:
  FakeEmbedServer(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++requests_;
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(req.body);
      }
      if (n <= fail_first_) {
        res.status = fail_status_;
        res.set_content("{\"error\":\"injected\"}", "application/json");
        return;
      }
      const auto j = nlohmann::json::parse(req.body);
      nlohmann::json out;
      const std::size_t rd = reply_dim_.load();
      out["dim"] = rd ? rd : dim_;
      out["embeddings"] = nlohmann::json::array();
      const auto& chunks = j.at("chunks");
      const auto& masks = j.at("masks");
      for (std::size_t c = 0; c < chunks.size(); ++c) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < chunks[c].size(); ++i) {
          const auto id = chunks[c][i].get<std::uint32_t>();
          // Masked rows deliberately carry junk; the client must zero them.
          auto v = notecoder::embed::HashedProvider::token_vector(id, dim_, seed_);
          if (masks[c][i].get<int>() == 0) v.assign(dim_, 0.25);
          rows.push_back(v);
        }
        out["embeddings"].push_back(rows);
      }
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEmbedServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  void fail_first(int n, int status = 503) {
    fail_first_ = n;
    fail_status_ = status;
  }
  void reply_with_dim(std::size_t d) { reply_dim_ = d; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> fail_first_{0};
  std::atomic<int> fail_status_{503};
  std::atomic<std::size_t> reply_dim_{0};
  mutable std::mutex mu_;
  std::vector<std::string> bodies_;
};
