// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "notecoder/notecoder.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "corpus/dataset.hpp"
#include "corpus/sampling.hpp"
#include "corpus/synth.hpp"
#include "model/bundle.hpp"
#include "preprocess/chunker.hpp"
#include "preprocess/raw_note.hpp"
#include "service/server.hpp"
#include "train/trainer.hpp"

#ifndef NOTECODER_VERSION
#define NOTECODER_VERSION "0.0.0"
#endif

using nlohmann::json;
namespace nc = notecoder;

struct nc_bundle {
  nc::model::ModelBundle bundle;
  std::unique_ptr<nc::embed::Provider> provider;
};

struct nc_server {
  std::unique_ptr<nc::service::Server> server;
};

namespace {

thread_local std::string g_last_error;

nc_status record(nc_status s, const std::string& what) {
  g_last_error = what;
  return s;
}

template <typename F>
nc_status guarded(F&& f) {
  try {
    f();
    return NC_OK;
  } catch (const nc::Error& e) {
    return record(static_cast<nc_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return record(NC_ERR_FORMAT, e.what());
  } catch (const std::bad_alloc&) {
    return record(NC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(NC_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const json& j) {
  if (out) *out = dup_string(j.dump());
}

void need(const void* p, const char* name) {
  nc::require(p != nullptr, nc::ErrorCode::kInvalidArgument, std::string(name) + " is null");
}

json parse_arg(const char* text, const char* name) {
  if (!text || !*text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    nc::fail(nc::ErrorCode::kConfig, std::string(name) + " is not valid JSON: " + e.what());
  }
}

nc::corpus::LabelSpace resolve_space(const std::vector<nc::preprocess::RawNote>& notes,
                                     const char* labelspace_path) {
  if (labelspace_path && *labelspace_path) return nc::corpus::LabelSpace::load(labelspace_path);
  return nc::corpus::label_space_from_corpus(notes, nc::corpus::LabelSpace::builtin_chapters());
}

json chunks_json(const std::vector<nc::preprocess::TokenChunk>& chunks) {
  json out = json::array();
  for (const auto& c : chunks)
    out.push_back(json{{"token_ids", c.token_ids},
                       {"mask", c.mask},
                       {"sentence_begin", c.sentence_begin},
                       {"sentence_end", c.sentence_end},
                       {"text", c.text}});
  return out;
}

struct PreprocessContext {
  nc::preprocess::AbbreviationTable abbreviations = nc::preprocess::AbbreviationTable::builtin();
  std::size_t chunk_length = nc::preprocess::kDefaultChunkLength;
  std::optional<nc::preprocess::Vocabulary> vocab;
};

PreprocessContext preprocess_context(const json& opts) {
  PreprocessContext ctx;
  for (const auto& [key, _] : opts.items())
    nc::require(key == "bundle" || key == "chunk_length", nc::ErrorCode::kConfig,
                "unknown preprocess option '" + key + "'");
  if (opts.contains("bundle")) {
    auto b = nc::model::load_bundle(opts["bundle"].get<std::string>());
    ctx.abbreviations = b.abbreviations;
    ctx.chunk_length = b.chunk_length;
    ctx.vocab = b.vocab;
  }
  ctx.chunk_length = opts.value("chunk_length", ctx.chunk_length);
  return ctx;
}

std::string joined(const nc::preprocess::SentenceList& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    out += s;
    out += ' ';
  }
  return out;
}

std::vector<nc::train::Variant> parse_variants(const char* variants) {
  using nc::train::Variant;
  if (!variants || !*variants)
    return {Variant::kBaseline, Variant::kBalance, Variant::kAugment, Variant::kBalanceAugment};
  std::vector<Variant> out;
  std::stringstream ss(variants);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(nc::train::variant_from_name(item));
  return out;
}

}  // namespace

extern "C" {

const char* nc_version(void) { return NOTECODER_VERSION; }

const char* nc_status_name(nc_status status) {
  switch (status) {
    case NC_OK: return "ok";
    case NC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case NC_ERR_IO: return "io";
    case NC_ERR_FORMAT: return "format";
    case NC_ERR_SHAPE: return "shape";
    case NC_ERR_NUMERIC: return "numeric";
    case NC_ERR_EMPTY_NOTE: return "empty_note";
    case NC_ERR_COMPATIBILITY: return "compatibility";
    case NC_ERR_PROVIDER_UNAVAILABLE: return "provider_unavailable";
    case NC_ERR_MISSING_EMBEDDING: return "missing_embedding";
    case NC_ERR_UNMAPPED_CODE: return "unmapped_code";
    case NC_ERR_LOAD: return "load";
    case NC_ERR_CONFIG: return "config";
    case NC_ERR_USAGE: return "usage";
    case NC_ERR_UNDEFINED_METRIC: return "undefined_metric";
    case NC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* nc_last_error(void) { return g_last_error.c_str(); }

void nc_string_free(char* s) { std::free(s); }

nc_status nc_synth(const char* spec_json, const char* corpus_path, const char* labelspace_path) {
  return guarded([&] {
    need(corpus_path, "corpus_path");
    const auto spec = nc::corpus::synth_spec_from_json(parse_arg(spec_json, "spec_json"));
    const auto sc = nc::corpus::synthesize(spec);
    nc::preprocess::write_notes_jsonl(corpus_path, sc.notes, true);
    if (labelspace_path && *labelspace_path) sc.space.save(labelspace_path);
  });
}

nc_status nc_preprocess_text(const char* text, const char* options_json, char** out_json) {
  return guarded([&] {
    need(text, "text");
    need(out_json, "out_json");
    const auto ctx = preprocess_context(parse_arg(options_json, "options_json"));
    const auto sentences = nc::preprocess::clean_and_split(text, ctx.abbreviations);
    const auto vocab =
        ctx.vocab ? *ctx.vocab : nc::preprocess::Vocabulary::build({joined(sentences)});
    const auto chunks = nc::preprocess::chunk_and_tokenize(sentences, vocab, ctx.chunk_length);
    emit(out_json, json{{"sentences", sentences},
                        {"chunks", chunks_json(chunks)},
                        {"vocab_size", vocab.size()}});
  });
}

nc_status nc_preprocess_corpus(const char* corpus_path, const char* options_json,
                               const char* out_path, char** out_json) {
  return guarded([&] {
    need(corpus_path, "corpus_path");
    need(out_path, "out_path");
    const auto ctx = preprocess_context(parse_arg(options_json, "options_json"));
    const auto notes = nc::preprocess::read_notes_jsonl(corpus_path);
    std::vector<nc::preprocess::SentenceList> sentences;
    sentences.reserve(notes.size());
    for (const auto& n : notes)
      sentences.push_back(nc::preprocess::clean_and_split(n.text, ctx.abbreviations));
    nc::preprocess::Vocabulary vocab;
    if (ctx.vocab) {
      vocab = *ctx.vocab;
    } else {
      std::vector<std::string> texts;
      for (const auto& s : sentences) texts.push_back(joined(s));
      vocab = nc::preprocess::Vocabulary::build(texts);
    }
    std::ofstream out(out_path, std::ios::binary);
    nc::require(out.good(), nc::ErrorCode::kIo, std::string("cannot write ") + out_path);
    std::size_t chunk_count = 0;
    std::size_t empty = 0;
    for (std::size_t i = 0; i < notes.size(); ++i) {
      std::vector<nc::preprocess::TokenChunk> chunks;
      if (sentences[i].empty()) ++empty;
      else chunks = nc::preprocess::chunk_and_tokenize(sentences[i], vocab, ctx.chunk_length);
      chunk_count += chunks.size();
      out << json{{"note_id", notes[i].note_id},
                  {"subject_id", notes[i].subject_id},
                  {"sentences", sentences[i]},
                  {"chunks", chunks_json(chunks)}}
                 .dump()
          << '\n';
    }
    nc::require(out.good(), nc::ErrorCode::kIo, std::string("write failed: ") + out_path);
    emit(out_json, json{{"notes", notes.size()},
                        {"empty_notes", empty},
                        {"chunks", chunk_count},
                        {"vocab_size", vocab.size()},
                        {"chunk_length", ctx.chunk_length}});
  });
}

nc_status nc_train(const char* corpus_path, const char* labelspace_path, const char* config_json,
                   const char* run_dir, char** out_json) {
  return guarded([&] {
    need(corpus_path, "corpus_path");
    need(run_dir, "run_dir");
    const auto cfg = nc::train::train_config_from_json(parse_arg(config_json, "config_json"));
    const auto notes = nc::preprocess::read_notes_jsonl(corpus_path);
    const auto space = resolve_space(notes, labelspace_path);
    const auto data = nc::train::prepare_corpus(notes, space, cfg);
    const auto provider = nc::embed::make_provider(cfg.provider);
    const auto out = nc::train::train_pipeline(data, *provider, cfg, run_dir);
    emit(out_json, json{{"fingerprint", out.bundle.fingerprint},
                        {"bundle", (std::filesystem::path(run_dir) / "bundle").string()},
                        {"val", nc::train::to_json(out.val, space)},
                        {"test", nc::train::to_json(out.test, space)}});
  });
}

nc_status nc_eval(const char* bundle_dir, const char* corpus_path, const char* options_json,
                  char** out_json) {
  return guarded([&] {
    need(bundle_dir, "bundle_dir");
    need(corpus_path, "corpus_path");
    need(out_json, "out_json");
    const json opts = parse_arg(options_json, "options_json");
    for (const auto& [key, _] : opts.items())
      nc::require(key == "split", nc::ErrorCode::kConfig, "unknown eval option '" + key + "'");
    const std::string split = opts.value("split", std::string("test"));
    nc::require(split == "test" || split == "val" || split == "train" || split == "all",
                nc::ErrorCode::kConfig, "unknown split '" + split + "'");

    const auto bundle = nc::model::load_bundle(bundle_dir);
    const auto notes = nc::preprocess::read_notes_jsonl(corpus_path);
    nc::corpus::BuildOptions bo;
    bo.abbreviations = &bundle.abbreviations;
    bo.chunk_length = bundle.chunk_length;
    auto examples = nc::corpus::build_examples(notes, bundle.space, bundle.vocab, bo);
    if (split != "all") {
      const json& m = bundle.meta;
      nc::corpus::SplitRatios ratios;
      if (m.contains("splits")) {
        ratios.train = m["splits"].value("train", ratios.train);
        ratios.val = m["splits"].value("val", ratios.val);
        ratios.test = m["splits"].value("test", ratios.test);
      }
      const auto parts =
          nc::corpus::split_by_patient(examples, ratios, m.value("seed", std::uint64_t{1}));
      examples = split == "test" ? parts.test : split == "val" ? parts.val : parts.train;
    }
    nc::require(!examples.empty(), nc::ErrorCode::kInvalidArgument,
                "no examples in split '" + split + "'");
    const auto provider = nc::embed::make_provider(bundle.provider);
    const auto report = nc::train::evaluate(bundle, examples, *provider);
    json j = nc::train::to_json(report, bundle.space);
    j["split"] = split;
    j["fingerprint"] = bundle.fingerprint;
    emit(out_json, j);
  });
}

nc_status nc_ablate(const char* corpus_path, const char* labelspace_path, const char* config_json,
                    const char* variants, const char* run_dir, char** out_json) {
  return guarded([&] {
    need(corpus_path, "corpus_path");
    const auto plan = parse_variants(variants);
    const auto cfg = nc::train::train_config_from_json(parse_arg(config_json, "config_json"));
    const auto notes = nc::preprocess::read_notes_jsonl(corpus_path);
    const auto space = resolve_space(notes, labelspace_path);
    const auto data = nc::train::prepare_corpus(notes, space, cfg);
    const auto provider = nc::embed::make_provider(cfg.provider);
    const auto table =
        nc::train::run_ablation(plan, data, *provider, cfg, run_dir ? run_dir : "");
    json j = table.to_json();
    emit(out_json, json{{"table", j}, {"csv", table.to_csv()}});
  });
}

nc_status nc_bundle_load(const char* dir, const char* provider_json, nc_bundle** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = nullptr;
    auto b = std::make_unique<nc_bundle>();
    b->bundle = nc::model::load_bundle(dir);
    const json pj = parse_arg(provider_json, "provider_json");
    // Fields not given fall back to the bundle's provider.
    json merged = nc::embed::to_json(b->bundle.provider);
    if (!pj.empty()) merged.merge_patch(pj);
    const auto pcfg = nc::embed::provider_config_from_json(merged);
    b->provider = nc::embed::make_provider(pcfg);
    *out = b.release();
  });
}

void nc_bundle_free(nc_bundle* bundle) { delete bundle; }

nc_status nc_bundle_info(const nc_bundle* bundle, char** out_json) {
  return guarded([&] {
    need(bundle, "bundle");
    need(out_json, "out_json");
    nc::service::Handler h(std::shared_ptr<const nc::model::ModelBundle>(
                               &bundle->bundle, [](const nc::model::ModelBundle*) {}),
                           std::shared_ptr<const nc::embed::Provider>(
                               bundle->provider.get(), [](const nc::embed::Provider*) {}),
                           1024);
    *out_json = dup_string(h.model_info().body);
  });
}

nc_status nc_predict(const nc_bundle* bundle, const char* text, const char* options_json,
                     char** out_json) {
  return guarded([&] {
    need(bundle, "bundle");
    need(text, "text");
    need(out_json, "out_json");
    const json opts = parse_arg(options_json, "options_json");
    nc::model::PredictOptions po;
    for (const auto& [key, _] : opts.items())
      nc::require(key == "top_k_codes" || key == "note_id", nc::ErrorCode::kConfig,
                  "unknown predict option '" + key + "'");
    po.top_k_codes = opts.value("top_k_codes", std::size_t{0});
    po.note_id = opts.value("note_id", std::string());
    const auto r = nc::model::predict_note(text, bundle->bundle, *bundle->provider, po);
    emit(out_json, nc::model::to_json(r));
  });
}

nc_status nc_augment_preview(const char* text, const char* note_id, uint32_t n_copies,
                             uint64_t seed, char** out_json) {
  return guarded([&] {
    need(text, "text");
    need(out_json, "out_json");
    const std::string id = note_id ? note_id : "";
    const auto sentences =
        nc::preprocess::clean_and_split(text, nc::preprocess::AbbreviationTable::builtin());
    nc::require(!sentences.empty(), nc::ErrorCode::kEmptyNote, "note is empty after cleaning");
    json copies = json::array();
    for (std::uint32_t i = 0; i < n_copies; ++i) {
      const auto perm = nc::corpus::shuffle_permutation(sentences.size(), seed, id, i);
      json order = json::array();
      for (std::size_t k : perm) order.push_back(sentences[k]);
      copies.push_back(json{{"permutation", perm}, {"sentences", order}});
    }
    emit(out_json, json{{"note_id", id}, {"seed", seed}, {"original", sentences}, {"copies", copies}});
  });
}

nc_status nc_service_config(const char* config_path, int apply_env, char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    nc::service::ServiceConfig cfg;
    if (config_path && *config_path) cfg = nc::service::load_service_config(config_path);
    if (apply_env) nc::service::apply_env_overrides(cfg);
    emit(out_json, nc::service::to_json(cfg));
  });
}

nc_status nc_server_start(const char* config_json, nc_server** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto s = std::make_unique<nc_server>();
    s->server = std::make_unique<nc::service::Server>(
        nc::service::service_config_from_json(parse_arg(config_json, "config_json")));
    s->server->start();
    *out = s.release();
  });
}

int nc_server_port(const nc_server* server) { return server ? server->server->port() : -1; }

void nc_server_stop(nc_server* server) { delete server; }

nc_status nc_serve(const char* config_json) {
  return guarded([&] {
    nc::service::Server server(
        nc::service::service_config_from_json(parse_arg(config_json, "config_json")));
    server.serve();
  });
}

}  // extern "C"
