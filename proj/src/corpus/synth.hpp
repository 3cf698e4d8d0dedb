// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corpus/label_space.hpp"
#include "preprocess/raw_note.hpp"

namespace notecoder::corpus {

// Parameters of the planted-keyword generator. Each code label owns
// keywords_per_label reserved words; a note positive for a code mentions one
// of them, a negative note mentions one only with probability noise_rate.
struct SynthSpec {
  std::size_t n_notes = 2000;
  std::size_t vocab_size = 2000;  // filler words
  // Filler word i is drawn with weight (i + 1)^-zipf_exponent; 0 = uniform.
  double zipf_exponent = 1.0;
  std::size_t keywords_per_label = 3;
  // One marginal per code label. Empty = the default decaying profile.
  std::vector<double> label_marginals;
  double noise_rate = 0.002;
  std::uint64_t seed = 7;

  std::size_t min_sentences = 4;
  std::size_t max_sentences = 8;
  std::size_t min_words = 5;
  std::size_t max_words = 10;
  std::size_t max_notes_per_patient = 3;
  // Per-sentence chance of a de-ID placeholder / abbreviation.
  double deid_rate = 0.15;
  double abbreviation_rate = 0.15;
};

void validate(const SynthSpec& spec);
nlohmann::json to_json(const SynthSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
SynthSpec synth_spec_from_json(const nlohmann::json& j);

struct SynthCorpus {
  std::vector<preprocess::RawNote> notes;  // codes filled in
  std::map<std::string, std::vector<std::string>> codes_by_note;
  LabelSpace space;
};

// The built-in 50-code list (real ICD-9 codes, at least one per chapter of
// the bundled grouping).
const std::vector<CodeLabel>& synthetic_codes();

// Marginals falling geometrically from `high` to `high / ratio` across the
// codes; ratio = 10 gives a 10:1 imbalance.
std::vector<double> decaying_marginals(std::size_t n, double high, double ratio);

// Deterministic per seed.
SynthCorpus synthesize(const SynthSpec& spec);

// Reserved keyword strings for code index `label`.
std::vector<std::string> keywords_for_label(std::size_t label,
                                            std::size_t keywords_per_label);
std::string filler_word(std::size_t index);

}  // namespace notecoder::corpus
