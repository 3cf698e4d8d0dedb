// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "common/random.hpp"

namespace notecoder::corpus {

inline constexpr std::size_t kDefaultChapters = 16;
inline constexpr std::size_t kDefaultTopCodes = 50;

// Root of an ICD-9 code: the 3-digit number, or the E/V prefix plus its
// numeric part ("V45.81" -> {'V', 45}).
struct IcdRoot {
  char prefix = 0;  // 0, 'E' or 'V'
  int value = 0;
  bool operator==(const IcdRoot&) const = default;
};

// Throws Error(kFormat) unless the code is NNN[.D[D]], VNN[.D[D]] or
// ENNN[.D[D]].
IcdRoot parse_icd9(std::string_view code);

struct CodeRange {
  char prefix = 0;
  int lo = 0;
  int hi = 0;
  bool contains(const IcdRoot& r) const {
    return r.prefix == prefix && r.value >= lo && r.value <= hi;
  }
};

// "390-459", "V01-V91", "E000-E999", or a single root "311".
CodeRange parse_range(std::string_view text);
std::string format_range(const CodeRange& r);

struct Chapter {
  int id = 0;
  std::string name;
  std::vector<CodeRange> ranges;
};

struct CodeLabel {
  std::string code;
  std::string description;
  int chapter = 0;
};

// Chapter labels (layer 1) and code labels (layer 2) with the code->chapter
// map. Chapter ids are 0..n-1 in order; ranges never overlap, so every code
// maps to at most one chapter.
class LabelSpace {
 public:
  LabelSpace() = default;
  // Validates ids, overlaps and that each code sits in its stated chapter.
  LabelSpace(std::vector<Chapter> chapters, std::vector<CodeLabel> codes);

  // The bundled 16-chapter ICD-9 grouping with no codes.
  static const LabelSpace& builtin_chapters();

  // {"chapters": [{"id","name","ranges"}], "codes": [{"code","description"}]}
  // "codes" is optional; a code's "chapter" is derived when absent.
  static LabelSpace from_json(const nlohmann::json& j);
  static LabelSpace load(const std::string& path);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;

  LabelSpace with_codes(std::vector<CodeLabel> codes) const;

  std::size_t num_chapters() const { return chapters_.size(); }
  std::size_t num_codes() const { return codes_.size(); }
  std::size_t num_labels() const { return num_chapters() + num_codes(); }

  const std::vector<Chapter>& chapters() const { return chapters_; }
  const std::vector<CodeLabel>& codes() const { return codes_; }

  std::optional<std::size_t> code_index(std::string_view code) const;
  // Code indices owned by a chapter, ascending.
  const std::vector<std::size_t>& codes_in_chapter(std::size_t chapter) const {
    return by_chapter_.at(chapter);
  }

  // Chapter whose ranges contain the code's root. Throws kFormat or
  // kUnmappedCode.
  int chapter_of(std::string_view code) const;

  std::uint64_t fingerprint() const;
  std::string fingerprint_hex() const;

 private:
  std::vector<Chapter> chapters_;
  std::vector<CodeLabel> codes_;
  std::unordered_map<std::string, std::size_t> code_index_;
  std::vector<std::vector<std::size_t>> by_chapter_;
};

int map_code_to_chapter(std::string_view code, const LabelSpace& space);

// The k codes with the highest count, descending; ties by ascending code.
std::vector<std::string> select_top_codes(
    const std::map<std::string, std::size_t>& code_counts, std::size_t k);

using notecoder::hex64;

}  // namespace notecoder::corpus
