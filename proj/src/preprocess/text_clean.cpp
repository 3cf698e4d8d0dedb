// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "preprocess/text_clean.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "common/error.hpp"

namespace notecoder::preprocess {

extern const char* const kBuiltinAbbreviationsTsv;

namespace {

constexpr std::string_view kOpen = "[**";
constexpr std::string_view kClose = "**]";

bool is_hspace(char c) { return c == ' ' || c == '\t'; }

// One left-to-right removal pass. Returns true if anything was removed.
bool strip_once(std::string_view in, std::string& out) {
  out.clear();
  out.reserve(in.size());
  bool changed = false;
  std::size_t i = 0;
  while (i < in.size()) {
    const std::size_t open = in.find(kOpen, i);
    if (open == std::string_view::npos) {
      out.append(in.substr(i));
      break;
    }
    changed = true;
    out.append(in.substr(i, open - i));
    const std::size_t eol = std::min(in.find('\n', open), in.size());
    const std::size_t close = in.find(kClose, open + kOpen.size());
    std::size_t resume;
    if (close != std::string_view::npos && close + kClose.size() <= eol) {
      resume = close + kClose.size();
    } else {
      resume = eol;
    }

    // Whitespace on either side of the hole.
    bool had_left = false;
    while (!out.empty() && is_hspace(out.back())) {
      out.pop_back();
      had_left = true;
    }
    bool had_right = false;
    while (resume < in.size() && is_hspace(in[resume])) {
      ++resume;
      had_right = true;
    }
    const bool at_line_start = out.empty() || out.back() == '\n';
    const bool at_line_end = resume >= in.size() || in[resume] == '\n' ||
                             in[resume] == '\r';
    if ((had_left || had_right) && !at_line_start && !at_line_end) {
      out.push_back(' ');
    }
    i = resume;
  }
  return changed;
}

}  // namespace

std::string strip_deid(std::string_view text) {
  std::string cur(text);
  std::string next;
  // Each pass strictly shortens the text, so this terminates. Iterating to a
  // fixpoint catches placeholders formed by joining the two sides of a hole.
  while (strip_once(cur, next)) cur.swap(next);
  return cur;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

AbbreviationTable::AbbreviationTable(std::vector<Entry> entries)
    : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [key, expansion] = entries_[i];
    require(!key.empty(), ErrorCode::kFormat, "abbreviation key is empty");
    std::string lower = to_lower_ascii(key);
    require(seen.insert(lower).second, ErrorCode::kFormat,
            "duplicate abbreviation key: " + key);
    by_length_.emplace_back(std::move(lower), i);
  }
  std::stable_sort(by_length_.begin(), by_length_.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.size() > b.first.size();
                   });
}

AbbreviationTable AbbreviationTable::parse_tsv(std::string_view tsv) {
  std::vector<Entry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= tsv.size()) {
    std::size_t end = tsv.find('\n', pos);
    if (end == std::string_view::npos) end = tsv.size();
    std::string_view line = tsv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == tsv.size()) break;
      continue;
    }
    const std::size_t tab = line.find('\t');
    require(tab != std::string_view::npos, ErrorCode::kFormat,
            "abbreviation line " + std::to_string(line_no) + " has no tab");
    entries.emplace_back(std::string(line.substr(0, tab)),
                         std::string(line.substr(tab + 1)));
    if (end == tsv.size()) break;
  }
  return AbbreviationTable(std::move(entries));
}

AbbreviationTable AbbreviationTable::load_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tsv(ss.str());
}

const AbbreviationTable& AbbreviationTable::builtin() {
  static const AbbreviationTable table = parse_tsv(kBuiltinAbbreviationsTsv);
  return table;
}

std::string AbbreviationTable::to_tsv() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += '\t';
    out += v;
    out += '\n';
  }
  return out;
}

std::string expand_abbreviations(std::string_view text,
                                 const AbbreviationTable& table) {
  if (table.empty()) return std::string(text);
  std::string out;
  out.reserve(text.size() + text.size() / 4);
  std::size_t i = 0;
  while (i < text.size()) {
    const bool left_ok =
        i == 0 || !is_word_byte(static_cast<unsigned char>(text[i - 1]));
    bool matched = false;
    if (left_ok) {
      for (const auto& [key, index] : table.by_length_) {
        if (key.size() > text.size() - i) continue;
        bool eq = true;
        for (std::size_t k = 0; k < key.size(); ++k) {
          if (ascii_lower(text[i + k]) != key[k]) {
            eq = false;
            break;
          }
        }
        if (!eq) continue;
        const std::size_t end = i + key.size();
        // A key ending in a word byte must not run into another word byte.
        const bool right_ok =
            end == text.size() ||
            !is_word_byte(static_cast<unsigned char>(text[end])) ||
            !is_word_byte(static_cast<unsigned char>(key.back()));
        if (!right_ok) continue;
        out += table.entries_[index].second;
        i = end;
        matched = true;
        break;
      }
    }
    if (!matched) {
      // Copy the rest of the current word in one go so no match can start
      // inside it.
      const bool word = is_word_byte(static_cast<unsigned char>(text[i]));
      out.push_back(text[i++]);
      if (word) {
        while (i < text.size() &&
               is_word_byte(static_cast<unsigned char>(text[i]))) {
          out.push_back(text[i++]);
        }
      }
    }
  }
  return out;
}

}  // namespace notecoder::preprocess
