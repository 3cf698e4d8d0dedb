// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace notecoder::preprocess {

// Removes MIMIC-style `[** ... **]` de-identification placeholders.
//
// A placeholder must close on the same line; an unclosed `[**` is removed up
// to the end of its line. Horizontal whitespace left on both sides of a
// removal collapses to a single space, or disappears entirely at a line edge.
// The result contains no `[**` and the function is idempotent.
std::string strip_deid(std::string_view text);

// Case-insensitive abbreviation -> expansion table. Immutable after load.
class AbbreviationTable {
 public:
  using Entry = std::pair<std::string, std::string>;

  AbbreviationTable() = default;
  // Throws Error(kFormat) on empty or duplicate (case-insensitive) keys.
  explicit AbbreviationTable(std::vector<Entry> entries);

  // `key<TAB>expansion` per line; blank lines and `#` comments ignored.
  static AbbreviationTable parse_tsv(std::string_view tsv);
  static AbbreviationTable load_tsv(const std::string& path);
  // Built-in clinical table (data/abbreviations.tsv, embedded at build time).
  static const AbbreviationTable& builtin();

  std::string to_tsv() const;

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  friend std::string expand_abbreviations(std::string_view,
                                          const AbbreviationTable&);
  std::vector<Entry> entries_;
  // Lower-cased keys, longest first, paired with the index into entries_.
  std::vector<std::pair<std::string, std::size_t>> by_length_;
};

// Replaces every word-bounded, case-insensitive occurrence of a table key.
// The longest key wins at a position; unmatched bytes are copied verbatim.
std::string expand_abbreviations(std::string_view text,
                                 const AbbreviationTable& table);

// Bytes that belong to a word: ASCII alphanumerics and any non-ASCII byte.
inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string to_lower_ascii(std::string_view s);

}  // namespace notecoder::preprocess
