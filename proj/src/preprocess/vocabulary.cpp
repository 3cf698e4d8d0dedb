// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "preprocess/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "common/error.hpp"
#include "common/random.hpp"
#include "preprocess/text_clean.hpp"

namespace notecoder::preprocess {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v') {
      ++i;
    } else if (is_word_byte(c)) {
      std::string word;
      while (i < text.size() &&
             is_word_byte(static_cast<unsigned char>(text[i]))) {
        word.push_back(ascii_lower(text[i++]));
      }
      out.push_back(std::move(word));
    } else {
      out.emplace_back(1, text[i++]);
    }
  }
  return out;
}

Vocabulary::Vocabulary()
    : Vocabulary(std::vector<std::string>{std::string(kPadToken),
                                          std::string(kUnkToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  require(tokens_.size() >= 2 && tokens_[0] == kPadToken &&
              tokens_[1] == kUnkToken,
          ErrorCode::kFormat, "vocabulary must start with [PAD], [UNK]");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    require(index_.emplace(tokens_[i], static_cast<TokenId>(i)).second,
            ErrorCode::kFormat, "duplicate vocabulary token: " + tokens_[i]);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts,
                             std::size_t min_count, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != kPadToken && tok != kUnkToken)
      ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{std::string(kPadToken),
                                  std::string(kUnkToken)};
  for (auto& [tok, n] : ranked) {
    if (max_size != 0 && tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path);
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
  return ids;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = fnv1a64("vocab");
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

}  // namespace notecoder::preprocess
