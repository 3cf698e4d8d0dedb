// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace notecoder::preprocess {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";

// Word-level tokenizer: lower-cased runs of word bytes, and each punctuation
// byte as its own token. Whitespace separates and is dropped.
std::vector<std::string> tokenize(std::string_view text);

// Word vocabulary with id 0 = [PAD] and id 1 = [UNK]. Immutable after
// construction.
class Vocabulary {
 public:
  // Only the two special tokens.
  Vocabulary();
  // `tokens` must start with [PAD], [UNK] and contain no duplicates.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Frequency-ranked vocabulary over the tokenized texts. Ties break by
  // ascending token string so the result is independent of input order
  // beyond counts. max_size counts the special tokens; 0 = unlimited.
  static Vocabulary build(const std::vector<std::string>& texts,
                          std::size_t min_count = 1,
                          std::size_t max_size = 0);

  // One token per line; the line index is the id.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(std::string_view text) const;

  // FNV-1a over the token list; identifies the vocabulary inside bundles.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace notecoder::preprocess
