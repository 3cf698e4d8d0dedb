// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "preprocess/chunker.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace notecoder::preprocess {

std::size_t TokenChunk::valid_tokens() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::vector<TokenChunk> chunk_and_tokenize(const SentenceList& sentences,
                                           const Vocabulary& vocab,
                                           std::size_t L) {
  require(L >= 2, ErrorCode::kInvalidArgument, "chunk length must be >= 2");
  std::vector<TokenChunk> chunks;

  std::vector<TokenId> pending;
  std::size_t begin = 0;
  auto emit = [&](std::size_t end) {
    TokenChunk c;
    const std::size_t n = std::min(pending.size(), L);
    c.token_ids.assign(L, kPadId);
    c.mask.assign(L, 0);
    std::copy_n(pending.begin(), n, c.token_ids.begin());
    std::fill_n(c.mask.begin(), n, std::uint8_t{1});
    c.sentence_begin = begin;
    c.sentence_end = end;
    for (std::size_t s = begin; s < end; ++s) {
      if (s > begin) c.text.push_back(' ');
      c.text += sentences[s];
    }
    chunks.push_back(std::move(c));
    pending.clear();
    begin = end;
  };

  for (std::size_t s = 0; s < sentences.size(); ++s) {
    std::vector<TokenId> ids = vocab.encode(sentences[s]);
    if (s > begin && pending.size() + ids.size() > L) emit(s);
    pending.insert(pending.end(), ids.begin(), ids.end());
  }
  if (begin < sentences.size()) emit(sentences.size());
  return chunks;
}

bool chunk_is_well_formed(const TokenChunk& chunk, std::size_t L) {
  if (chunk.token_ids.size() != L || chunk.mask.size() != L) return false;
  bool in_tail = false;
  for (std::size_t i = 0; i < L; ++i) {
    if (chunk.mask[i] > 1) return false;
    if (chunk.mask[i] == 0) in_tail = true;
    if (in_tail && (chunk.mask[i] != 0 || chunk.token_ids[i] != kPadId))
      return false;
  }
  return chunk.sentence_begin < chunk.sentence_end;
}

SentenceList clean_and_split(std::string_view raw_text,
                             const AbbreviationTable& table) {
  return split_sentences(expand_abbreviations(strip_deid(raw_text), table));
}

}  // namespace notecoder::preprocess
