// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

// notecoder command line. Talks to the library through the C API only.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "notecoder/notecoder.h"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  nc_status status;
  std::string message;
};

void check(nc_status s) {
  if (s != NC_OK) throw Failure{s, nc_last_error()};
}

// Owns a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  nc_string_free(s);
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{NC_ERR_IO, "cannot open " + path};
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Failure{NC_ERR_CONFIG, path + ": " + e.what()};
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{NC_ERR_IO, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sibling_labelspace(const std::string& corpus) {
  std::filesystem::path p(corpus);
  return (p.parent_path() / (p.stem().string() + ".labelspace.json")).string();
}

// Explicit path, else the synth sibling when it exists.
std::optional<std::string> labelspace_for(const std::string& corpus, const std::string& flag) {
  if (!flag.empty()) return flag;
  const std::string s = sibling_labelspace(corpus);
  if (std::filesystem::exists(s)) return s;
  return std::nullopt;
}

const char* opt_cstr(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

void print_json(const std::string& body) { std::cout << json::parse(body).dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"notecoder: clinical note to ICD-9 chapter and code classifier"};
  app.set_version_flag("--version", std::string(nc_version()));
  app.require_subcommand(1, 1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic labeled corpus");
  std::string synth_out, synth_spec, synth_labelspace;
  std::size_t synth_notes = 2000;
  std::uint64_t synth_seed = 7;
  std::optional<double> synth_noise;
  synth->add_option("--out", synth_out, "Corpus JSONL path")->required();
  synth->add_option("--notes", synth_notes, "Number of notes")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--noise-rate", synth_noise, "Keyword noise rate");
  synth->add_option("--spec", synth_spec, "Synth spec JSON file (flags override it)");
  synth->add_option("--labelspace", synth_labelspace,
                    "Label space output (default: <out stem>.labelspace.json)");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Clean, split and chunk notes");
  std::string prep_in, prep_out, prep_text, prep_bundle;
  std::optional<std::size_t> prep_length;
  auto* prep_in_opt = prep->add_option("--in", prep_in, "Corpus JSONL");
  auto* prep_text_opt = prep->add_option("--text", prep_text, "A single note");
  prep_in_opt->excludes(prep_text_opt);
  prep->add_option("--out", prep_out, "Output JSONL (with --in)");
  prep->add_option("--bundle", prep_bundle, "Use this bundle's vocabulary");
  prep->add_option("--chunk-length", prep_length, "Tokens per chunk");

  // train
  auto* train = app.add_subcommand("train", "Train both layers and write a bundle");
  std::string train_corpus, train_labelspace, train_config, train_run;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--corpus", train_corpus, "Labeled corpus JSONL")->required();
  train->add_option("--labelspace", train_labelspace, "Label space JSON");
  train->add_option("--config", train_config, "Training config JSON");
  train->add_option("--run-dir", train_run, "Output directory")->required();
  train->add_option("--seed", train_seed, "Overrides the config seed");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a bundle on a labeled corpus");
  std::string eval_bundle, eval_corpus, eval_split = "test";
  eval->add_option("--bundle", eval_bundle, "Bundle directory")->required();
  eval->add_option("--corpus", eval_corpus, "Labeled corpus JSONL")->required();
  eval->add_option("--split", eval_split, "test, val, train or all")
      ->check(CLI::IsMember({"test", "val", "train", "all"}))
      ->capture_default_str();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Balancing / augmentation ablation table");
  std::string abl_corpus, abl_labelspace, abl_config, abl_run, abl_variants;
  std::optional<std::uint64_t> abl_seed;
  ablate->add_option("--corpus", abl_corpus, "Labeled corpus JSONL")->required();
  ablate->add_option("--labelspace", abl_labelspace, "Label space JSON");
  ablate->add_option("--config", abl_config, "Training config JSON");
  ablate->add_option("--run-dir", abl_run, "Writes ablation.json and ablation.csv here");
  ablate->add_option("--variants", abl_variants,
                     "Comma-separated subset of baseline,+balance,+augment,+balance+augment");
  ablate->add_option("--seed", abl_seed, "Overrides the config seed");

  // predict
  auto* predict = app.add_subcommand("predict", "Score one note");
  std::string pred_bundle, pred_text, pred_in, pred_endpoint;
  std::size_t pred_top_k = 0;
  predict->add_option("--bundle", pred_bundle, "Bundle directory")->required();
  auto* pred_text_opt = predict->add_option("--text", pred_text, "Note text");
  auto* pred_in_opt = predict->add_option("--in", pred_in, "File holding the note text");
  pred_text_opt->excludes(pred_in_opt);
  predict->add_option("--top-k", pred_top_k, "Codes to report (0 = all)");
  predict->add_option("--embed-endpoint", pred_endpoint, "Remote embedding endpoint");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve a bundle over HTTP");
  std::string serve_config, serve_bundle, serve_bind;
  serve->add_option("--config", serve_config, "Service config JSON");
  serve->add_option("--bundle", serve_bundle, "Bundle directory");
  serve->add_option("--bind", serve_bind, "host:port");

  // augment-preview
  auto* aug = app.add_subcommand("augment-preview", "Show sentence shuffles for a note");
  std::string aug_text, aug_in, aug_note;
  std::uint32_t aug_copies = 2;
  std::uint64_t aug_seed = 1;
  auto* aug_text_opt = aug->add_option("--text", aug_text, "Note text");
  auto* aug_in_opt = aug->add_option("--in", aug_in, "Corpus JSONL (with --note-id)");
  aug_text_opt->excludes(aug_in_opt);
  aug->add_option("--note-id", aug_note, "Note id (selects the note with --in)");
  aug->add_option("--copies", aug_copies, "Shuffled copies")->capture_default_str();
  aug->add_option("--seed", aug_seed, "Random seed")->capture_default_str();
  aug->add_flag("--json", "Print JSON instead of text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kExitUsage;
  }

  try {
    if (*synth) {
      json spec = synth_spec.empty() ? json::object() : read_json_file(synth_spec);
      if (synth_spec.empty() || synth->count("--notes")) spec["n_notes"] = synth_notes;
      if (synth_spec.empty() || synth->count("--seed")) spec["seed"] = synth_seed;
      if (synth_noise) spec["noise_rate"] = *synth_noise;
      const std::string ls = synth_labelspace.empty() ? sibling_labelspace(synth_out) : synth_labelspace;
      check(nc_synth(spec.dump().c_str(), synth_out.c_str(), ls.c_str()));
      std::cerr << "wrote " << synth_out << " and " << ls << '\n';
    } else if (*prep) {
      json opts = json::object();
      if (!prep_bundle.empty()) opts["bundle"] = prep_bundle;
      if (prep_length) opts["chunk_length"] = *prep_length;
      char* out = nullptr;
      if (!prep_text.empty() || prep->count("--text")) {
        check(nc_preprocess_text(prep_text.c_str(), opts.dump().c_str(), &out));
      } else {
        if (prep_in.empty() || prep_out.empty())
          throw Failure{NC_ERR_USAGE, "preprocess needs --text, or --in with --out"};
        check(nc_preprocess_corpus(prep_in.c_str(), opts.dump().c_str(), prep_out.c_str(), &out));
      }
      print_json(take(out));
    } else if (*train) {
      json cfg = train_config.empty() ? json::object() : read_json_file(train_config);
      if (train_seed) cfg["seed"] = *train_seed;
      const auto ls = labelspace_for(train_corpus, train_labelspace);
      char* out = nullptr;
      check(nc_train(train_corpus.c_str(), opt_cstr(ls), cfg.dump().c_str(), train_run.c_str(), &out));
      print_json(take(out));
    } else if (*eval) {
      const json opts{{"split", eval_split}};
      char* out = nullptr;
      check(nc_eval(eval_bundle.c_str(), eval_corpus.c_str(), opts.dump().c_str(), &out));
      print_json(take(out));
    } else if (*ablate) {
      json cfg = abl_config.empty() ? json::object() : read_json_file(abl_config);
      if (abl_seed) cfg["seed"] = *abl_seed;
      const auto ls = labelspace_for(abl_corpus, abl_labelspace);
      char* out = nullptr;
      check(nc_ablate(abl_corpus.c_str(), opt_cstr(ls), cfg.dump().c_str(),
                      abl_variants.empty() ? nullptr : abl_variants.c_str(),
                      abl_run.empty() ? nullptr : abl_run.c_str(), &out));
      std::cout << json::parse(take(out))["csv"].get<std::string>();
    } else if (*predict) {
      std::string text;
      if (predict->count("--text")) text = pred_text;
      else if (!pred_in.empty()) text = read_text_file(pred_in);
      else throw Failure{NC_ERR_USAGE, "predict needs --text or --in"};
      std::string provider;
      if (!pred_endpoint.empty())
        provider = json{{"kind", "remote"}, {"endpoint", pred_endpoint}}.dump();
      nc_bundle* bundle = nullptr;
      check(nc_bundle_load(pred_bundle.c_str(), provider.empty() ? nullptr : provider.c_str(), &bundle));
      char* out = nullptr;
      const json opts{{"top_k_codes", pred_top_k}};
      const nc_status s = nc_predict(bundle, text.c_str(), opts.dump().c_str(), &out);
      nc_bundle_free(bundle);
      check(s);
      print_json(take(out));
    } else if (*serve) {
      char* resolved = nullptr;
      check(nc_service_config(serve_config.empty() ? nullptr : serve_config.c_str(), 1, &resolved));
      json cfg = json::parse(take(resolved));
      if (!serve_bundle.empty()) cfg["bundle_path"] = serve_bundle;
      if (!serve_bind.empty()) {
        const auto colon = serve_bind.rfind(':');
        if (colon == std::string::npos) throw Failure{NC_ERR_USAGE, "--bind expects host:port"};
        cfg["host"] = serve_bind.substr(0, colon);
        try {
          cfg["port"] = std::stoi(serve_bind.substr(colon + 1));
        } catch (const std::exception&) {
          throw Failure{NC_ERR_USAGE, "--bind expects host:port"};
        }
      }
      check(nc_serve(cfg.dump().c_str()));
    } else if (*aug) {
      std::string text;
      if (aug->count("--text")) {
        text = aug_text;
      } else if (!aug_in.empty()) {
        if (aug_note.empty()) throw Failure{NC_ERR_USAGE, "--in needs --note-id"};
        std::ifstream in(aug_in);
        if (!in) throw Failure{NC_ERR_IO, "cannot open " + aug_in};
        std::string line;
        bool found = false;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          const json j = json::parse(line);
          if (j.value("note_id", std::string()) == aug_note) {
            text = j.value("text", std::string());
            found = true;
            break;
          }
        }
        if (!found) throw Failure{NC_ERR_INVALID_ARGUMENT, "note " + aug_note + " not found"};
      } else {
        throw Failure{NC_ERR_USAGE, "augment-preview needs --text or --in"};
      }
      char* out = nullptr;
      check(nc_augment_preview(text.c_str(), aug_note.c_str(), aug_copies, aug_seed, &out));
      const json j = json::parse(take(out));
      if (aug->count("--json")) {
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << "original:\n";
        for (const auto& s : j["original"]) std::cout << "  " << s.get<std::string>() << '\n';
        std::size_t i = 0;
        for (const auto& c : j["copies"]) {
          std::cout << "copy " << ++i << " (order " << c["permutation"].dump() << "):\n";
          for (const auto& s : c["sentences"]) std::cout << "  " << s.get<std::string>() << '\n';
        }
      }
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << nc_status_name(f.status) << "): " << f.message << '\n';
    return f.status == NC_ERR_USAGE ? kExitUsage : kExitFailure;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
