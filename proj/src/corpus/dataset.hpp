// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus/label_space.hpp"
#include "preprocess/chunker.hpp"
#include "preprocess/raw_note.hpp"

namespace notecoder::corpus {

using LabelVector = std::vector<std::uint8_t>;

// One labeled note ready for the model. chapter_labels is always a superset
// of the chapter image of code_labels.
struct Example {
  std::string note_id;
  std::string subject_id;
  std::vector<preprocess::TokenChunk> chunks;
  preprocess::SentenceList sentences;
  LabelVector chapter_labels;
  LabelVector code_labels;
  // 0 for the original note, i + 1 for the i-th augmented copy.
  int variant = 0;
};

struct LabelStats {
  std::size_t malformed_codes = 0;
  std::size_t unmapped_codes = 0;
};

// Chapter and code multi-hot vectors for a note's code list. Codes outside
// the label space's code list still set their chapter; malformed or
// unmapped codes are counted and skipped.
void label_vectors(const std::vector<std::string>& codes,
                   const LabelSpace& space, LabelVector& chapters,
                   LabelVector& code_labels, LabelStats* stats = nullptr);

struct BuildOptions {
  const preprocess::AbbreviationTable* abbreviations = nullptr;  // builtin
  std::size_t chunk_length = preprocess::kDefaultChunkLength;
};

struct BuildReport {
  LabelStats labels;
  std::size_t empty_notes = 0;
};

// Preprocesses each note and attaches its labels. Notes with no text left
// after cleaning are dropped and counted.
std::vector<Example> build_examples(const std::vector<preprocess::RawNote>& notes,
                                    const LabelSpace& space,
                                    const preprocess::Vocabulary& vocab,
                                    const BuildOptions& opts,
                                    BuildReport* report = nullptr);

// Label space with the k most frequent mappable codes of the corpus.
LabelSpace label_space_from_corpus(const std::vector<preprocess::RawNote>& notes,
                                   const LabelSpace& chapters,
                                   std::size_t k = kDefaultTopCodes);

bool chapter_closure_holds(const Example& e, const LabelSpace& space);

}  // namespace notecoder::corpus
