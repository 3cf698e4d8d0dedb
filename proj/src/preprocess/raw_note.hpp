// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace notecoder::preprocess {

struct RawNote {
  std::string note_id;
  std::string subject_id;
  std::string hadm_id;
  std::string text;
  // Present when the line also carries labels (labeled corpus JSONL).
  std::vector<std::string> codes;
};

RawNote note_from_json(const nlohmann::json& j);
nlohmann::json note_to_json(const RawNote& note, bool with_codes);

// One JSON object per line. Blank lines are skipped; duplicate or empty
// note_id is a format error.
std::vector<RawNote> read_notes_jsonl(const std::string& path);
void write_notes_jsonl(const std::string& path,
                       const std::vector<RawNote>& notes, bool with_codes);

}  // namespace notecoder::preprocess
