// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "notecoder/notecoder.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  nc_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& workdir() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / ("notecoder_capi_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

const char* kSpec = R"({"n_notes":150,"vocab_size":200,"seed":5})";
const char* kConfig =
    R"({"epochs":1,"batch_size":16,"kernel_widths":[1,2],"filters":6,"hidden":0,)"
    R"("chunk_length":32,"provider":{"kind":"hashed","dim":12},"augment_copies":1})";

// Trained once and shared by the cases below.
const fs::path& trained_run() {
  static const fs::path run = [] {
    const auto corpus = workdir() / "corpus.jsonl";
    const auto ls = workdir() / "labelspace.json";
    REQUIRE(nc_synth(kSpec, corpus.c_str(), ls.c_str()) == NC_OK);
    char* out = nullptr;
    const auto r = workdir() / "run";
    REQUIRE_MESSAGE(nc_train(corpus.c_str(), ls.c_str(), kConfig, r.c_str(), &out) == NC_OK,
                    nc_last_error());
    take(out);
    return r;
  }();
  return run;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NOTECODER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(nc_version()).size() > 0);
  CHECK(std::string(nc_status_name(NC_OK)) == "ok");
  CHECK(std::string(nc_status_name(NC_ERR_EMPTY_NOTE)) == "empty_note");
  CHECK(std::string(nc_status_name(NC_ERR_INTERNAL)) == "internal");
}

TEST_CASE("null arguments are rejected with a message") {
  char* out = nullptr;
  CHECK(nc_predict(nullptr, "text", nullptr, &out) == NC_ERR_INVALID_ARGUMENT);
  CHECK(out == nullptr);
  CHECK(std::string(nc_last_error()).size() > 0);
  CHECK(nc_synth(nullptr, nullptr, nullptr) == NC_ERR_INVALID_ARGUMENT);
}

TEST_CASE("bad json arguments") {
  char* out = nullptr;
  CHECK(nc_preprocess_text("a b c.", "{not json", &out) == NC_ERR_CONFIG);
  CHECK(nc_synth(R"({"n_note":3})", (workdir() / "x.jsonl").c_str(), nullptr) == NC_ERR_CONFIG);
}

TEST_CASE("synth is deterministic") {
  const auto a = workdir() / "a.jsonl", b = workdir() / "b.jsonl";
  REQUIRE(nc_synth(kSpec, a.c_str(), nullptr) == NC_OK);
  REQUIRE(nc_synth(kSpec, b.c_str(), nullptr) == NC_OK);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).size() > 0);
}

TEST_CASE("preprocess and augment preview") {
  char* out = nullptr;
  REQUIRE(nc_preprocess_text("Pt has CP. She was seen [**Name**] today.", R"({"chunk_length":8})", &out) ==
          NC_OK);
  const auto j = json::parse(take(out));
  CHECK(j["sentences"].size() == 2);
  for (const auto& c : j["chunks"]) CHECK(c["token_ids"].size() == 8);
  CHECK(j.dump().find("[**") == std::string::npos);

  REQUIRE(nc_augment_preview("A one. B two. C three.", "n1", 3, 7, &out) == NC_OK);
  const auto a = json::parse(take(out));
  CHECK(a["copies"].size() == 3);
  REQUIRE(nc_preprocess_text("[**x**]", nullptr, &out) == NC_OK);
  CHECK(json::parse(take(out))["chunks"].empty());
}

TEST_CASE("train, load, predict and evaluate") {
  const auto& run = trained_run();
  CHECK(fs::exists(run / "bundle" / "manifest.json"));
  CHECK(fs::exists(run / "metrics.jsonl"));
  CHECK(fs::exists(run / "eval.json"));

  nc_bundle* b = nullptr;
  REQUIRE(nc_bundle_load((run / "bundle").c_str(), nullptr, &b) == NC_OK);
  char* out = nullptr;
  REQUIRE(nc_predict(b, "chest pain and sob", R"({"top_k_codes":4})", &out) == NC_OK);
  const auto p = json::parse(take(out));
  CHECK(p["chapters"].size() == 16);
  CHECK(p["codes"].size() <= 4);
  REQUIRE(nc_predict(b, "chest pain and sob", R"({"top_k_codes":4})", &out) == NC_OK);
  CHECK(json::parse(take(out)) == p);
  CHECK(nc_predict(b, "   ", nullptr, &out) == NC_ERR_EMPTY_NOTE);

  REQUIRE(nc_bundle_info(b, &out) == NC_OK);
  const auto info = json::parse(take(out));
  CHECK(info["label_space"]["labels"] == 66);
  nc_bundle_free(b);

  REQUIRE(nc_eval((run / "bundle").c_str(), (workdir() / "corpus.jsonl").c_str(),
                  R"({"split":"test"})", &out) == NC_OK);
  auto ev = json::parse(take(out));
  CHECK(ev["split"] == "test");
  ev.erase("split");
  ev.erase("fingerprint");
  const auto saved = json::parse(slurp(run / "eval.json"));
  CHECK(ev == saved["test"]);
  CHECK(nc_eval((run / "bundle").c_str(), (workdir() / "corpus.jsonl").c_str(),
                R"({"split":"nope"})", &out) == NC_ERR_CONFIG);
}

TEST_CASE("missing bundle fails to load") {
  nc_bundle* b = nullptr;
  CHECK(nc_bundle_load((workdir() / "nowhere").c_str(), nullptr, &b) != NC_OK);
  CHECK(b == nullptr);
}

TEST_CASE("server start and stop") {
  const auto& run = trained_run();
  const json cfg{{"port", 0}, {"bundle_path", (run / "bundle").string()}};
  nc_server* s = nullptr;
  REQUIRE(nc_server_start(cfg.dump().c_str(), &s) == NC_OK);
  const int port = nc_server_port(s);
  CHECK(port > 0);
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Post("/v1/predict", R"({"text":"chest pain"})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  nc_server_stop(s);

  char* out = nullptr;
  REQUIRE(nc_service_config(nullptr, 0, &out) == NC_OK);
  CHECK(json::parse(take(out))["port"] == 8080);
}

TEST_CASE("cli exit codes") {
  const auto& run = trained_run();
  const std::string bundle = (run / "bundle").string();
  CHECK(run_cli("") == 2);
  CHECK(run_cli("bogus") == 2);
  CHECK(run_cli("predict --text hi") == 2);
  CHECK(run_cli("predict --bundle " + bundle + " --text 'chest pain'") == 0);
  CHECK(run_cli("predict --bundle " + bundle + " --text '[**Name**]'") == 1);
  CHECK(run_cli("predict --bundle /nonexistent --text x") == 1);
  CHECK(run_cli("synth --out " + (workdir() / "cli.jsonl").string() + " --notes 20") == 0);
  CHECK(fs::exists(workdir() / "cli.labelspace.json"));
  CHECK(run_cli("augment-preview --text 'A a. B b.' --copies 2") == 0);
}

int main(int argc, char** argv) {
  doctest::Context ctx(argc, argv);
  const int rc = ctx.run();
  fs::remove_all(workdir());
  return rc;
}
