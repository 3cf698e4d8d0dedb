// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include <json.hpp>

#include "embed/provider.hpp"
#include "model/bundle.hpp"

namespace httplib {
class Server;
}

namespace notecoder::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 = pick a free port
  std::string bundle_path;
  // Overrides the provider recorded in the bundle.
  std::optional<embed::ProviderConfig> provider;
  // Serve through a remote encoder at this URL; dim and model come from the
  // provider above or the bundle.
  std::string embed_endpoint;
  std::size_t max_body_bytes = 1 << 20;
  int request_timeout_ms = 30000;
  std::size_t threads = 8;
};

// Throws Error(kConfig).
void validate(const ServiceConfig& cfg);
nlohmann::json to_json(const ServiceConfig& cfg);
// Unknown keys are rejected.
ServiceConfig service_config_from_json(const nlohmann::json& j);
ServiceConfig load_service_config(const std::string& path);

using EnvLookup = std::function<const char*(const char*)>;
// BIND_ADDR (host:port or host), BUNDLE_PATH, EMBED_ENDPOINT. A set
// EMBED_ENDPOINT switches the provider to remote.
void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env);
void apply_env_overrides(ServiceConfig& cfg);

struct Response {
  int status = 200;
  std::string body;  // JSON
};

// Request handling over one immutable bundle. Usable without a socket.
class Handler {
 public:
  Handler(std::shared_ptr<const model::ModelBundle> bundle,
          std::shared_ptr<const embed::Provider> provider, std::size_t max_body_bytes);

  Response predict(std::string_view body) const;
  Response healthz() const;
  Response model_info() const;

  bool bundle_loaded() const { return bundle_ != nullptr; }

 private:
  Response internal_error(const std::string& detail) const;

  std::shared_ptr<const model::ModelBundle> bundle_;
  std::shared_ptr<const embed::Provider> provider_;
  std::size_t max_body_bytes_;
  mutable std::atomic<std::uint64_t> error_seq_{0};
};

class Server {
 public:
  // Loads cfg.bundle_path if set; a bundle-less server still answers /healthz.
  explicit Server(ServiceConfig cfg);
  Server(ServiceConfig cfg, std::shared_ptr<const model::ModelBundle> bundle,
         std::shared_ptr<const embed::Provider> provider);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void serve();
  void stop();

  int port() const { return port_; }
  const Handler& handler() const { return *handler_; }

 private:
  void bind();

  ServiceConfig cfg_;
  std::unique_ptr<Handler> handler_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace notecoder::service
