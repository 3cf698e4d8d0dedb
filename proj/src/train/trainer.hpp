// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus/dataset.hpp"
#include "corpus/sampling.hpp"
#include "embed/provider.hpp"
#include "metrics/metrics.hpp"
#include "model/bundle.hpp"

namespace notecoder::train {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t code_epochs = 0;  // 0 = same as epochs
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t patience = 3;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  bool balance = true;
  double balance_ratio = 1.5;
  bool augment = true;
  std::size_t augment_copies = 2;

  bool transfer = true;
  std::size_t freeze_epochs = 1;

  std::vector<std::size_t> kernel_widths{3, 4, 5};
  std::size_t filters = 64;
  std::size_t hidden = 128;  // 0 = no hidden layer
  double dropout = 0;        // on pooled conv features, training only
  model::Aggregation aggregation = model::Aggregation::kMax;

  embed::ProviderConfig provider;
  std::size_t chunk_length = preprocess::kDefaultChunkLength;
  std::size_t vocab_min_count = 1;
  std::size_t vocab_max_size = 0;
  corpus::SplitRatios splits;

  // When set, an epoch draws as many examples as the untreated training set
  // holds, so balancing and augmentation change what is seen but not how
  // much.
  bool fixed_epoch_length = false;

  double tau_ch = 0.5;
  bool tune_thresholds = true;
  std::size_t workers = 1;  // code models trained concurrently

  std::size_t effective_code_epochs() const { return code_epochs ? code_epochs : epochs; }
};

// Throws Error(kConfig).
void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

// Raw notes after splitting, vocabulary building (train split only) and
// preprocessing.
struct PreparedCorpus {
  corpus::LabelSpace space;
  preprocess::Vocabulary vocab;
  preprocess::AbbreviationTable abbreviations;
  corpus::Splits<corpus::Example> splits;
  corpus::BuildReport report;
};

PreparedCorpus prepare_corpus(const std::vector<preprocess::RawNote>& notes,
                              const corpus::LabelSpace& space, const TrainConfig& cfg,
                              const preprocess::AbbreviationTable* abbreviations = nullptr);

struct EpochRecord {
  std::string stage;  // "chapter" or "code"
  int chapter = -1;   // code stage only
  std::size_t epoch = 0;
  std::size_t train_examples = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_micro_f1 = 0;
  double val_macro_f1 = 0;
  bool frozen = false;
  bool improved = false;
};

nlohmann::json to_json(const EpochRecord& r);

struct History {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 = never trained
  double best_val_micro_f1 = 0;
  bool early_stopped = false;
};

struct ChapterStage {
  model::ChapterModel model;
  History history;
};

// Balancing and augmentation (per cfg) touch only the training split.
ChapterStage train_chapter(const PreparedCorpus& data, const embed::Provider& provider,
                           const TrainConfig& cfg);

struct CodeStage {
  std::vector<model::CodeModel> models;  // one per chapter
  std::vector<History> histories;
};

// `chapter` must already be rounded to float precision (as bundles store it).
CodeStage train_codes(const PreparedCorpus& data, const model::ChapterModel& chapter,
                      const embed::Provider& provider, const TrainConfig& cfg);

// Scores of a bundle over labeled examples, gated as at inference.
struct ScoredSet {
  metrics::ScoreMatrix chapter_scores;
  metrics::ScoreMatrix code_scores;  // 0 where the chapter was gated off
  metrics::BinaryMatrix chapter_labels;
  metrics::BinaryMatrix code_labels;
};

ScoredSet score_examples(const model::ModelBundle& bundle,
                         const std::vector<corpus::Example>& examples,
                         const embed::Provider& provider);

struct EvalReport {
  metrics::ConfusionCounts chapters;
  metrics::ConfusionCounts codes;
  double chapter_micro_f1 = 0;
  double chapter_macro_f1 = 0;
  double code_micro_f1 = 0;
  double code_macro_f1 = 0;
  std::size_t examples = 0;
};

EvalReport evaluate(const model::ModelBundle& bundle, const ScoredSet& scored);
EvalReport evaluate(const model::ModelBundle& bundle,
                    const std::vector<corpus::Example>& examples,
                    const embed::Provider& provider);
nlohmann::json to_json(const EvalReport& r, const corpus::LabelSpace& space);

struct TrainOutcome {
  model::ModelBundle bundle;
  History chapter_history;
  std::vector<History> code_histories;
  EvalReport val;
  EvalReport test;
};

// Both stages, threshold selection on the validation split and evaluation.
// With a non-empty run_dir, writes config.json, metrics.jsonl, eval.json and
// bundle/ there.
TrainOutcome train_pipeline(const PreparedCorpus& data, const embed::Provider& provider,
                            const TrainConfig& cfg, const std::string& run_dir = "");

// Assembles a bundle from trained stages with the given thresholds.
model::ModelBundle make_bundle(const PreparedCorpus& data, ChapterStage chapter,
                               CodeStage codes, std::vector<double> thresholds,
                               const TrainConfig& cfg);

enum class Variant { kBaseline, kBalance, kAugment, kBalanceAugment };
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct AblationRow {
  Variant variant = Variant::kBaseline;
  bool ok = false;
  std::string error;
  std::size_t train_examples = 0;
  EvalReport test;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
  // variant,chapter_micro_f1,chapter_macro_f1,code_micro_f1,code_macro_f1,
  // delta_chapter_micro_f1,delta_code_micro_f1,error
  std::string to_csv() const;
};

// Runs train_pipeline once per variant with identical seeds and settings;
// only the training split treatment differs. Rows hold test-split scores.
// A failing variant is recorded and the rest continue.
AblationTable run_ablation(const std::vector<Variant>& plan, const PreparedCorpus& data,
                           const embed::Provider& provider, const TrainConfig& cfg,
                           const std::string& run_dir = "");

}  // namespace notecoder::train
