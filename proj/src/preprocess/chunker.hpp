// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "preprocess/sentences.hpp"
#include "preprocess/text_clean.hpp"
#include "preprocess/vocabulary.hpp"

namespace notecoder::preprocess {

inline constexpr std::size_t kDefaultChunkLength = 128;

// Fixed-length token window over a run of consecutive sentences.
// token_ids and mask both have length L; the mask is a prefix of ones and
// masked-out positions hold kPadId.
struct TokenChunk {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> mask;
  // Half-open [begin, end) into the note's SentenceList.
  std::size_t sentence_begin = 0;
  std::size_t sentence_end = 0;
  // Source sentences joined by single spaces (sent to remote encoders).
  std::string text;

  std::size_t length() const { return token_ids.size(); }
  std::size_t valid_tokens() const;

  bool operator==(const TokenChunk&) const = default;
};

// Greedy packing: consecutive sentences share a chunk while their merged
// token count stays <= L; a sentence longer than L gets its own chunk,
// truncated to L. Throws Error(kInvalidArgument) if L < 2.
std::vector<TokenChunk> chunk_and_tokenize(const SentenceList& sentences,
                                           const Vocabulary& vocab,
                                           std::size_t L);

// Checks the TokenChunk invariants for a chunk of length L.
bool chunk_is_well_formed(const TokenChunk& chunk, std::size_t L);

// strip_deid -> expand_abbreviations -> split_sentences.
SentenceList clean_and_split(std::string_view raw_text,
                             const AbbreviationTable& table);

}  // namespace notecoder::preprocess
