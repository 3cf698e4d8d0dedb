// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "preprocess/sentences.hpp"

#include <array>
#include <algorithm>

#include "preprocess/text_clean.hpp"

namespace notecoder::preprocess {
namespace {

constexpr std::array<std::string_view, 28> kGuardedWords = {
    "dr.",   "mr.",   "mrs.",   "ms.",   "prof.", "sr.",   "jr.",
    "st.",   "mg.",   "mcg.",   "ml.",   "no.",   "vs.",   "approx.",
    "q.d.",  "b.i.d.", "t.i.d.", "q.i.d.", "q.h.s.", "p.o.", "p.r.n.",
    "e.g.",  "i.e.",  "a.m.",   "p.m.",  "h.s.",  "fig.",  "etc.",
};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_upper_or_digit(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_guarded(std::string_view word) {
  const std::string lower = to_lower_ascii(word);
  return std::find(kGuardedWords.begin(), kGuardedWords.end(), lower) !=
         kGuardedWords.end();
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), is_space);
}

// "1. ", "12) ", "- ", "* ", "• " at the start of a line (after indentation).
bool starts_with_list_marker(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  line.remove_prefix(i);
  auto followed_by_space = [&](std::size_t n) {
    return line.size() > n && (line[n] == ' ' || line[n] == '\t');
  };
  if (line.starts_with("\xE2\x80\xA2")) return followed_by_space(3);
  if (!line.empty() && (line[0] == '-' || line[0] == '*'))
    return followed_by_space(1);
  std::size_t d = 0;
  while (d < line.size() && d < 3 && line[d] >= '0' && line[d] <= '9') ++d;
  if (d == 0 || d > 2 || d >= line.size()) return false;
  if (line[d] != '.' && line[d] != ')') return false;
  return followed_by_space(d + 1);
}

// Splits one block (no blank lines, no list-marker line breaks) on sentence
// punctuation. `block` is already whitespace-normalised.
void split_block(const std::string& block, SentenceList& out) {
  std::size_t start = 0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const char c = block[i];
    if (c != '.' && c != '!' && c != '?') continue;
    // Normalised text: a boundary candidate is "<punct> <Upper|digit>".
    if (i + 2 >= block.size() || block[i + 1] != ' ' ||
        !is_upper_or_digit(block[i + 2])) {
      continue;
    }
    if (c == '.') {
      std::size_t w = i;
      while (w > start && block[w - 1] != ' ') --w;
      if (is_guarded(std::string_view(block).substr(w, i + 1 - w))) continue;
    }
    out.emplace_back(block.substr(start, i + 1 - start));
    start = i + 2;
  }
  if (start < block.size()) out.emplace_back(block.substr(start));
}

}  // namespace

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

SentenceList split_sentences(std::string_view text) {
  SentenceList out;
  std::string block;
  auto flush = [&] {
    const std::string norm = normalize_whitespace(block);
    if (!norm.empty()) split_block(norm, out);
    block.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (is_blank(line)) {
      flush();
      continue;
    }
    if (starts_with_list_marker(line)) flush();
    block.append(line);
    block.push_back('\n');
  }
  flush();
  return out;
}

}  // namespace notecoder::preprocess
