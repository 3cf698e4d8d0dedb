// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "preprocess/raw_note.hpp"

#include <fstream>
#include <unordered_set>

#include "common/error.hpp"

namespace notecoder::preprocess {

namespace {

std::string string_field(const nlohmann::json& j, const char* key,
                         bool required) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    require(!required, ErrorCode::kFormat,
            std::string("missing field '") + key + "'");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  fail(ErrorCode::kFormat, std::string("field '") + key + "' is not a string");
}

}  // namespace

RawNote note_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kFormat, "note is not a JSON object");
  RawNote n;
  n.note_id = string_field(j, "note_id", true);
  require(!n.note_id.empty(), ErrorCode::kFormat, "empty note_id");
  n.subject_id = string_field(j, "subject_id", false);
  n.hadm_id = string_field(j, "hadm_id", false);
  n.text = string_field(j, "text", false);
  if (const auto it = j.find("codes"); it != j.end() && it->is_array()) {
    for (const auto& c : *it) {
      require(c.is_string(), ErrorCode::kFormat, "code is not a string");
      n.codes.push_back(c.get<std::string>());
    }
  }
  return n;
}

nlohmann::json note_to_json(const RawNote& note, bool with_codes) {
  nlohmann::json j = {{"note_id", note.note_id},
                      {"subject_id", note.subject_id},
                      {"hadm_id", note.hadm_id},
                      {"text", note.text}};
  if (with_codes) j["codes"] = note.codes;
  return j;
}

std::vector<RawNote> read_notes_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::vector<RawNote> notes;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kFormat,
           path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    RawNote n = note_from_json(j);
    require(ids.insert(n.note_id).second, ErrorCode::kFormat,
            path + ":" + std::to_string(line_no) + ": duplicate note_id " +
                n.note_id);
    notes.push_back(std::move(n));
  }
  return notes;
}

void write_notes_jsonl(const std::string& path,
                       const std::vector<RawNote>& notes, bool with_codes) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  for (const auto& n : notes) out << note_to_json(n, with_codes).dump() << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path);
}

}  // namespace notecoder::preprocess
