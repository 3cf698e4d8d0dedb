// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace notecoder::preprocess {

using SentenceList = std::vector<std::string>;

// Rule-based clinical sentence splitter.
//
// Boundaries fall after `.`, `!` or `?` followed by whitespace and an
// upper-case letter or digit (unless the preceding word is a guarded
// abbreviation such as "Dr." or "q.d."), at blank lines, and before lines
// that open with a list marker ("1.", "2)", "-", "*"). Each sentence is
// whitespace-normalised, so joining the result with single spaces gives the
// whitespace-normalised input.
SentenceList split_sentences(std::string_view text);

// Collapses every whitespace run to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

}  // namespace notecoder::preprocess
