// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpus/label_space.hpp"
#include "embed/provider.hpp"
#include "model/classifier.hpp"
#include "preprocess/text_clean.hpp"
#include "preprocess/vocabulary.hpp"

namespace notecoder::model {

inline constexpr int kBundleVersion = 1;

// Everything inference needs. thresholds holds num_chapters chapter
// thresholds followed by num_codes code thresholds.
struct ModelBundle {
  corpus::LabelSpace space;
  preprocess::Vocabulary vocab;
  preprocess::AbbreviationTable abbreviations;
  std::size_t chunk_length = preprocess::kDefaultChunkLength;
  embed::ProviderConfig provider;
  ChapterModel chapter;
  std::vector<CodeModel> code_models;  // one per chapter, by chapter id
  std::vector<double> thresholds;
  double tau_ch = 0.5;
  Aggregation aggregation = Aggregation::kMax;
  GatingMode gating = GatingMode::kHard;
  nlohmann::json meta = nlohmann::json::object();

  // Shape and consistency checks. Throws kShape / kConfig / kCompatibility.
  void validate() const;

  // Content hash over every file the bundle would write except the manifest.
  std::string compute_fingerprint() const;
  // Cached by load_bundle / finalize(); empty until then.
  std::string fingerprint;
  void finalize() { validate(); fingerprint = compute_fingerprint(); }

  double chapter_threshold(std::size_t c) const { return thresholds.at(c); }
  double code_threshold(std::size_t j) const { return thresholds.at(space.num_chapters() + j); }
};

// Writes the bundle directory (created if missing):
//   manifest.json labelspace.json vocab.txt abbreviations.tsv thresholds.json
//   chapter.ckpt code_NN.ckpt (non-empty code models only)
void save_bundle(const ModelBundle& bundle, const std::string& dir);
// Throws Error(kLoad) on missing, truncated or tampered files.
ModelBundle load_bundle(const std::string& dir);

struct ChapterPrediction {
  std::size_t id = 0;
  std::string name;
  double score = 0;
  bool decided = false;
};

struct CodePrediction {
  std::string code;
  std::string description;
  double score = 0;
  std::size_t chapter_id = 0;
  bool decided = false;
};

struct PredictionResult {
  std::vector<ChapterPrediction> chapters;  // every chapter, by id
  std::vector<CodePrediction> codes;        // codes of active chapters, score descending
  std::string fingerprint;
};

nlohmann::json to_json(const PredictionResult& r);

struct PredictOptions {
  // If set, the bundle must have been trained on this label space.
  std::optional<std::string> label_space_fingerprint;
  std::string note_id;  // passed to position-keyed providers
  // Codes reported; 0 = all.
  std::size_t top_k_codes = 0;
};

// Clean -> split -> chunk -> embed -> chapters -> gated codes. Throws
// Error(kEmptyNote) if nothing survives cleaning and Error(kCompatibility)
// on a label space mismatch.
PredictionResult predict_note(std::string_view text, const ModelBundle& bundle,
                              const embed::Provider& provider,
                              const PredictOptions& options = {});

// The gated stages over already-embedded chunks.
PredictionResult predict_embedded(std::span<const EmbeddingTensor> chunks,
                                  const ModelBundle& bundle);

// Chunks of a raw note as the bundle sees them.
std::vector<preprocess::TokenChunk> note_chunks(std::string_view text,
                                                const ModelBundle& bundle);

}  // namespace notecoder::model
