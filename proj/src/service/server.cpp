// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "service/server.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "common/error.hpp"
#include "common/random.hpp"

namespace notecoder::service {

using nlohmann::json;

namespace {

Response error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

int parse_port(const std::string& text) {
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == text.size() && port >= 0 && port <= 65535, ErrorCode::kConfig,
          "invalid port '" + text + "'");
  return port;
}

}  // namespace

void validate(const ServiceConfig& cfg) {
  require(!cfg.host.empty(), ErrorCode::kConfig, "bind host is empty");
  require(cfg.port >= 0 && cfg.port <= 65535, ErrorCode::kConfig, "port out of range");
  require(cfg.max_body_bytes >= 1024, ErrorCode::kConfig, "body cap must be at least 1 KiB");
  require(cfg.request_timeout_ms > 0, ErrorCode::kConfig, "request timeout must be positive");
  require(cfg.threads >= 1, ErrorCode::kConfig, "threads must be >= 1");
  if (cfg.provider) embed::validate(*cfg.provider);
}

json to_json(const ServiceConfig& cfg) {
  json j{{"host", cfg.host},
         {"port", cfg.port},
         {"bundle_path", cfg.bundle_path},
         {"max_body_bytes", cfg.max_body_bytes},
         {"request_timeout_ms", cfg.request_timeout_ms},
         {"threads", cfg.threads},
         {"embed_endpoint", cfg.embed_endpoint}};
  j["provider"] = cfg.provider ? embed::to_json(*cfg.provider) : json(nullptr);
  return j;
}

ServiceConfig service_config_from_json(const json& j) {
  require(j.is_object(), ErrorCode::kConfig, "service config must be a JSON object");
  static const char* const kKeys[] = {"host",           "port",    "bundle_path",       "provider",
                                      "max_body_bytes", "threads", "request_timeout_ms",
                                      "embed_endpoint"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    require(known, ErrorCode::kConfig, "unknown service config key '" + key + "'");
  }
  ServiceConfig cfg;
  try {
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.bundle_path = j.value("bundle_path", cfg.bundle_path);
    cfg.max_body_bytes = j.value("max_body_bytes", cfg.max_body_bytes);
    cfg.request_timeout_ms = j.value("request_timeout_ms", cfg.request_timeout_ms);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.embed_endpoint = j.value("embed_endpoint", cfg.embed_endpoint);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("service config: ") + e.what());
  }
  if (j.contains("provider") && !j["provider"].is_null())
    cfg.provider = embed::provider_config_from_json(j["provider"]);
  validate(cfg);
  return cfg;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open service config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "service config " + path + ": " + e.what());
  }
  return service_config_from_json(j);
}

void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env) {
  if (const char* bind = env("BIND_ADDR"); bind && *bind) {
    const std::string s(bind);
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) {
      cfg.host = s;
    } else {
      cfg.host = s.substr(0, colon);
      cfg.port = parse_port(s.substr(colon + 1));
    }
  }
  if (const char* path = env("BUNDLE_PATH"); path && *path) cfg.bundle_path = path;
  if (const char* endpoint = env("EMBED_ENDPOINT"); endpoint && *endpoint)
    cfg.embed_endpoint = endpoint;
  validate(cfg);
}

void apply_env_overrides(ServiceConfig& cfg) {
  apply_env_overrides(cfg, [](const char* name) { return std::getenv(name); });
}

Handler::Handler(std::shared_ptr<const model::ModelBundle> bundle,
                 std::shared_ptr<const embed::Provider> provider, std::size_t max_body_bytes)
    : bundle_(std::move(bundle)), provider_(std::move(provider)), max_body_bytes_(max_body_bytes) {
  require(!bundle_ || provider_, ErrorCode::kConfig, "a loaded bundle needs a provider");
}

Response Handler::internal_error(const std::string& detail) const {
  const std::uint64_t n = error_seq_.fetch_add(1);
  const std::string id = hex64(mix(n, detail)).substr(0, 12);
  std::fprintf(stderr, "notecoder-service: error %s: %s\n", id.c_str(), detail.c_str());
  return {500, json{{"error", "internal error"}, {"id", id}}.dump()};
}

Response Handler::predict(std::string_view body) const {
  const auto t0 = std::chrono::steady_clock::now();
  if (body.size() > max_body_bytes_) return error_response(413, "request body too large");
  if (!bundle_) return error_response(503, "no model bundle loaded");

  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "request body is not valid JSON");
  }
  if (!req.is_object()) return error_response(400, "request body must be a JSON object");
  const auto text = req.find("text");
  if (text == req.end() || !text->is_string())
    return error_response(400, "field 'text' must be a string");
  if (text->get_ref<const std::string&>().empty())
    return error_response(400, "field 'text' is empty");

  model::PredictOptions options;
  if (const auto k = req.find("top_k_codes"); k != req.end() && !k->is_null()) {
    if (!k->is_number_integer() || k->get<long long>() < 0)
      return error_response(400, "field 'top_k_codes' must be a non-negative integer");
    options.top_k_codes = k->get<std::size_t>();
  }

  try {
    const auto result =
        model::predict_note(text->get_ref<const std::string&>(), *bundle_, *provider_, options);
    json out = model::to_json(result);
    out["latency_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {200, out.dump()};
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kEmptyNote:
      case ErrorCode::kInvalidArgument:
        return error_response(400, e.what());
      case ErrorCode::kProviderUnavailable:
        return error_response(503, "embedding provider unavailable");
      default:
        return internal_error(e.what());
    }
  } catch (const std::exception& e) {
    return internal_error(e.what());
  }
}

Response Handler::healthz() const {
  return {200, json{{"status", "ok"}, {"bundle_loaded", bundle_ != nullptr}}.dump()};
}

Response Handler::model_info() const {
  if (!bundle_) return error_response(503, "no model bundle loaded");
  const auto& b = *bundle_;
  const std::size_t C = b.space.num_chapters();
  json chapters = json::array();
  for (const auto& c : b.space.chapters()) chapters.push_back(json{{"id", c.id}, {"name", c.name}});
  json codes = json::array();
  for (const auto& c : b.space.codes())
    codes.push_back(json{{"code", c.code}, {"chapter_id", c.chapter}});
  json out{{"fingerprint", b.fingerprint},
           {"label_space",
            {{"chapters", C},
             {"codes", b.space.num_codes()},
             {"labels", b.space.num_labels()},
             {"fingerprint", b.space.fingerprint_hex()},
             {"chapter_list", chapters},
             {"code_list", codes}}},
           {"thresholds",
            {{"chapters", std::vector<double>(b.thresholds.begin(), b.thresholds.begin() + C)},
             {"codes", std::vector<double>(b.thresholds.begin() + C, b.thresholds.end())}}},
           {"tau_ch", b.tau_ch},
           {"provider", embed::kind_name(b.provider.kind)},
           {"serving_provider", embed::kind_name(provider_->kind())},
           {"aggregation", model::to_string(b.aggregation)},
           {"gating", model::to_string(b.gating)}};
  return {200, out.dump()};
}

Server::Server(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  std::shared_ptr<const model::ModelBundle> bundle;
  std::shared_ptr<const embed::Provider> provider;
  if (!cfg_.bundle_path.empty()) {
    bundle = std::make_shared<const model::ModelBundle>(model::load_bundle(cfg_.bundle_path));
    embed::ProviderConfig pc = cfg_.provider.value_or(bundle->provider);
    if (!cfg_.embed_endpoint.empty()) {
      pc.kind = embed::ProviderKind::kRemote;
      pc.endpoint = cfg_.embed_endpoint;
    }
    provider = embed::make_provider(pc);
  }
  handler_ = std::make_unique<Handler>(std::move(bundle), std::move(provider), cfg_.max_body_bytes);
}

Server::Server(ServiceConfig cfg, std::shared_ptr<const model::ModelBundle> bundle,
               std::shared_ptr<const embed::Provider> provider)
    : cfg_(std::move(cfg)) {
  validate(cfg_);
  handler_ = std::make_unique<Handler>(std::move(bundle), std::move(provider), cfg_.max_body_bytes);
}

Server::~Server() { stop(); }

void Server::bind() {
  require(!http_, ErrorCode::kInvalidArgument, "server already started");
  http_ = std::make_unique<httplib::Server>();
  auto& http = *http_;
  const std::size_t threads = cfg_.threads;
  http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  http.set_payload_max_length(cfg_.max_body_bytes);
  const auto secs = std::chrono::milliseconds(cfg_.request_timeout_ms);
  http.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(secs).count(),
                        static_cast<long>((cfg_.request_timeout_ms % 1000) * 1000));
  http.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(secs).count(),
                         static_cast<long>((cfg_.request_timeout_ms % 1000) * 1000));

  const Handler* h = handler_.get();
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  http.Post("/v1/predict", [h, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, h->predict(req.body));
  });
  http.Get("/healthz",
           [h, reply](const httplib::Request&, httplib::Response& res) { reply(res, h->healthz()); });
  http.Get("/v1/model", [h, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, h->model_info());
  });
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const char* msg = res.status == 413   ? "request body too large"
                      : res.status == 404 ? "not found"
                                          : "request failed";
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  });

  if (cfg_.port == 0) {
    port_ = http.bind_to_any_port(cfg_.host);
    require(port_ > 0, ErrorCode::kIo, "cannot bind " + cfg_.host);
  } else {
    require(http.bind_to_port(cfg_.host, cfg_.port), ErrorCode::kIo,
            "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    port_ = cfg_.port;
  }
}

int Server::start() {
  bind();
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return port_;
}

void Server::serve() {
  bind();
  std::fprintf(stderr, "notecoder-service: listening on %s:%d\n", cfg_.host.c_str(), port_);
  http_->listen_after_bind();
}

void Server::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace notecoder::service
