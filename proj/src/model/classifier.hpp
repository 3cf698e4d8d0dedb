// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus/label_space.hpp"
#include "embed/provider.hpp"
#include "nn/network.hpp"
#include "preprocess/chunker.hpp"

namespace notecoder::model {

using embed::EmbeddingTensor;

// How chunk-level outputs combine into note-level ones.
enum class Aggregation { kMax, kMean };
// Hard: a chapter's code model runs only if the chapter clears tau_ch.
// Soft: every code model runs and code scores are scaled by the chapter score.
enum class GatingMode { kHard, kSoft };

std::string to_string(Aggregation a);
std::string to_string(GatingMode g);
Aggregation aggregation_from_string(const std::string& s);
GatingMode gating_from_string(const std::string& s);

// Layer 1: one network with one output per chapter.
struct ChapterModel {
  nn::NetSpec spec;
  nn::ParamSet params;
};

// Layer 2: one network per chapter over that chapter's codes. Its auxiliary
// input is the note's chapter scores followed by the chapter model's pooled
// note features. A chapter with no codes gets an empty model.
struct CodeModel {
  std::size_t chapter_id = 0;
  std::vector<std::size_t> code_indices;  // into LabelSpace::codes()
  nn::NetSpec spec;
  nn::ParamSet params;
  std::string label_space_fingerprint;

  bool empty() const { return code_indices.empty(); }
};

// Per-chunk forward passes over one note plus their aggregate.
struct NotePass {
  std::vector<nn::ForwardCache> caches;  // empty unless requested
  std::vector<double> probs;
  std::vector<double> features;
  // Max aggregation: chunk that produced each output.
  std::vector<std::size_t> source_chunk;
  std::size_t chunks = 0;
};

// Forward over every chunk of a note. Throws Error(kEmptyNote) when there are
// no chunks. input_scale is passed to every chunk's forward.
NotePass forward_note(std::span<const EmbeddingTensor> chunks, std::span<const double> aux,
                      const nn::ParamSet& params, const nn::NetSpec& spec,
                      Aggregation aggregation, bool keep_caches,
                      std::span<const double> input_scale = {});

// Same aggregation over precomputed per-chunk conv features.
NotePass forward_note_from_features(std::span<const std::vector<double>> chunk_features,
                                    std::span<const double> aux, const nn::ParamSet& params,
                                    const nn::NetSpec& spec, Aggregation aggregation,
                                    bool keep_caches,
                                    std::span<const double> input_scale = {});

// Accumulates d(bce(note probs, labels))/d(params). Requires keep_caches.
void backward_note(const NotePass& pass, std::span<const double> labels,
                   const nn::ParamSet& params, const nn::NetSpec& spec,
                   Aggregation aggregation, nn::GradSet& grads);

struct ChapterOutput {
  std::vector<double> scores;    // one per chapter
  std::vector<double> features;  // pooled conv features, aggregated
};

ChapterOutput chapter_forward_note(std::span<const EmbeddingTensor> chunks,
                                   const ChapterModel& model,
                                   Aggregation aggregation = Aggregation::kMax);

// scores ++ features: the auxiliary input of every code model.
std::vector<double> code_model_aux(const ChapterOutput& chapter);

struct CodeOutput {
  std::vector<double> scores;       // one per code; 0 where not run
  std::vector<std::uint8_t> gated;  // 1 where the code's model ran
};

// Runs the code models of the active chapters. Throws Error(kCompatibility)
// if an active model was built for a different label space.
CodeOutput code_forward_note(std::span<const EmbeddingTensor> chunks,
                             const ChapterOutput& chapter,
                             std::span<const CodeModel> models,
                             const std::vector<bool>& active, std::size_t num_codes,
                             const std::string& label_space_fingerprint,
                             Aggregation aggregation = Aggregation::kMax);

std::vector<bool> active_chapters(std::span<const double> chapter_scores, double tau);

}  // namespace notecoder::model
