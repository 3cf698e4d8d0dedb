// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "corpus/label_space.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "common/error.hpp"
#include "common/random.hpp"

namespace notecoder::corpus {

extern const char* const kBuiltinChaptersJson;

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

int parse_digits(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace

IcdRoot parse_icd9(std::string_view code) {
  auto bad = [&] {
    fail(ErrorCode::kFormat, "malformed ICD-9 code '" + std::string(code) + "'");
  };
  if (code.empty()) bad();
  IcdRoot root;
  std::size_t digits = 3;
  std::size_t pos = 0;
  if (code[0] == 'V' || code[0] == 'E') {
    root.prefix = code[0];
    digits = code[0] == 'V' ? 2 : 3;
    pos = 1;
  }
  if (code.size() < pos + digits) bad();
  for (std::size_t i = pos; i < pos + digits; ++i)
    if (!is_digit(code[i])) bad();
  root.value = parse_digits(code.substr(pos, digits));
  std::string_view rest = code.substr(pos + digits);
  if (!rest.empty()) {
    if (rest[0] != '.' || rest.size() < 2 || rest.size() > 3) bad();
    for (char c : rest.substr(1))
      if (!is_digit(c)) bad();
  }
  return root;
}

CodeRange parse_range(std::string_view text) {
  auto bad = [&] {
    fail(ErrorCode::kFormat, "malformed code range '" + std::string(text) + "'");
  };
  auto parse_end = [&](std::string_view s) {
    IcdRoot r;
    if (!s.empty() && (s[0] == 'V' || s[0] == 'E')) {
      r.prefix = s[0];
      s.remove_prefix(1);
    }
    if (s.empty() || s.size() > 3) bad();
    for (char c : s)
      if (!is_digit(c)) bad();
    r.value = parse_digits(s);
    return r;
  };
  const std::size_t dash = text.find('-');
  const IcdRoot lo = parse_end(text.substr(0, dash));
  const IcdRoot hi =
      dash == std::string_view::npos ? lo : parse_end(text.substr(dash + 1));
  if (lo.prefix != hi.prefix || lo.value > hi.value) bad();
  return CodeRange{lo.prefix, lo.value, hi.value};
}

std::string format_range(const CodeRange& r) {
  const int width = r.prefix == 'V' ? 2 : 3;
  char buf[32];
  std::string prefix = r.prefix ? std::string(1, r.prefix) : std::string();
  std::snprintf(buf, sizeof buf, "%s%0*d-%s%0*d", prefix.c_str(), width, r.lo,
                prefix.c_str(), width, r.hi);
  return buf;
}

LabelSpace::LabelSpace(std::vector<Chapter> chapters,
                       std::vector<CodeLabel> codes)
    : chapters_(std::move(chapters)), codes_(std::move(codes)) {
  require(!chapters_.empty(), ErrorCode::kConfig, "label space has no chapters");
  for (std::size_t i = 0; i < chapters_.size(); ++i) {
    require(chapters_[i].id == static_cast<int>(i), ErrorCode::kConfig,
            "chapter ids must be 0..n-1 in order");
    require(!chapters_[i].ranges.empty(), ErrorCode::kConfig,
            "chapter " + std::to_string(i) + " has no ranges");
  }
  // Pairwise overlap check; the tables are tiny.
  for (std::size_t a = 0; a < chapters_.size(); ++a)
    for (const auto& ra : chapters_[a].ranges)
      for (std::size_t b = a; b < chapters_.size(); ++b)
        for (const auto& rb : chapters_[b].ranges) {
          if (&ra == &rb) continue;
          const bool overlap = ra.prefix == rb.prefix && ra.lo <= rb.hi &&
                               rb.lo <= ra.hi;
          require(!overlap, ErrorCode::kConfig,
                  "overlapping chapter ranges " + format_range(ra) + " and " +
                      format_range(rb));
        }

  by_chapter_.assign(chapters_.size(), {});
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    auto& c = codes_[i];
    const int ch = chapter_of(c.code);
    require(c.chapter == ch, ErrorCode::kConfig,
            "code " + c.code + " is not in chapter " + std::to_string(c.chapter));
    require(code_index_.emplace(c.code, i).second, ErrorCode::kConfig,
            "duplicate code " + c.code);
    by_chapter_[static_cast<std::size_t>(ch)].push_back(i);
  }
}

const LabelSpace& LabelSpace::builtin_chapters() {
  static const LabelSpace space =
      from_json(nlohmann::json::parse(kBuiltinChaptersJson));
  return space;
}

LabelSpace LabelSpace::from_json(const nlohmann::json& j) {
  try {
    std::vector<Chapter> chapters;
    for (const auto& cj : j.at("chapters")) {
      Chapter c;
      c.id = cj.at("id").get<int>();
      c.name = cj.at("name").get<std::string>();
      for (const auto& r : cj.at("ranges"))
        c.ranges.push_back(parse_range(r.get<std::string>()));
      chapters.push_back(std::move(c));
    }
    // Codes are resolved against the chapters first.
    LabelSpace base(chapters, {});
    std::vector<CodeLabel> codes;
    if (const auto it = j.find("codes"); it != j.end()) {
      for (const auto& cj : *it) {
        CodeLabel c;
        c.code = cj.at("code").get<std::string>();
        c.description = cj.value("description", std::string());
        c.chapter = cj.contains("chapter") ? cj.at("chapter").get<int>()
                                           : base.chapter_of(c.code);
        codes.push_back(std::move(c));
      }
    }
    return LabelSpace(std::move(chapters), std::move(codes));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("label space JSON: ") + e.what());
  }
}

LabelSpace LabelSpace::load(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json LabelSpace::to_json() const {
  nlohmann::json j;
  j["chapters"] = nlohmann::json::array();
  for (const auto& c : chapters_) {
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& r : c.ranges) ranges.push_back(format_range(r));
    j["chapters"].push_back({{"id", c.id}, {"name", c.name}, {"ranges", ranges}});
  }
  j["codes"] = nlohmann::json::array();
  for (const auto& c : codes_) {
    j["codes"].push_back({{"code", c.code},
                          {"description", c.description},
                          {"chapter", c.chapter}});
  }
  return j;
}

void LabelSpace::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  out << to_json().dump(2) << '\n';
}

LabelSpace LabelSpace::with_codes(std::vector<CodeLabel> codes) const {
  return LabelSpace(chapters_, std::move(codes));
}

std::optional<std::size_t> LabelSpace::code_index(std::string_view code) const {
  const auto it = code_index_.find(std::string(code));
  if (it == code_index_.end()) return std::nullopt;
  return it->second;
}

int LabelSpace::chapter_of(std::string_view code) const {
  const IcdRoot root = parse_icd9(code);
  for (const auto& c : chapters_)
    for (const auto& r : c.ranges)
      if (r.contains(root)) return c.id;
  fail(ErrorCode::kUnmappedCode,
       "code '" + std::string(code) + "' is in no configured chapter range");
}

std::uint64_t LabelSpace::fingerprint() const {
  return fnv1a64(to_json().dump());
}

std::string LabelSpace::fingerprint_hex() const { return hex64(fingerprint()); }

int map_code_to_chapter(std::string_view code, const LabelSpace& space) {
  return space.chapter_of(code);
}

std::vector<std::string> select_top_codes(
    const std::map<std::string, std::size_t>& code_counts, std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> v(code_counts.begin(),
                                                     code_counts.end());
  // std::map iteration is already ascending by code, so a stable sort on
  // count alone gives the lexicographic tie-break.
  std::stable_sort(v.begin(), v.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size() && i < k; ++i) out.push_back(v[i].first);
  return out;
}

}  // namespace notecoder::corpus
