// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "corpus/dataset.hpp"

#include <map>

#include "common/error.hpp"

namespace notecoder::corpus {

void label_vectors(const std::vector<std::string>& codes,
                   const LabelSpace& space, LabelVector& chapters,
                   LabelVector& code_labels, LabelStats* stats) {
  chapters.assign(space.num_chapters(), 0);
  code_labels.assign(space.num_codes(), 0);
  for (const auto& code : codes) {
    int ch;
    try {
      ch = space.chapter_of(code);
    } catch (const Error& e) {
      if (stats) {
        if (e.code() == ErrorCode::kFormat) ++stats->malformed_codes;
        else ++stats->unmapped_codes;
      }
      continue;
    }
    chapters[static_cast<std::size_t>(ch)] = 1;
    if (const auto idx = space.code_index(code)) code_labels[*idx] = 1;
  }
}

std::vector<Example> build_examples(const std::vector<preprocess::RawNote>& notes,
                                    const LabelSpace& space,
                                    const preprocess::Vocabulary& vocab,
                                    const BuildOptions& opts,
                                    BuildReport* report) {
  const auto& table = opts.abbreviations
                          ? *opts.abbreviations
                          : preprocess::AbbreviationTable::builtin();
  std::vector<Example> out;
  out.reserve(notes.size());
  for (const auto& n : notes) {
    Example e;
    e.note_id = n.note_id;
    e.subject_id = n.subject_id.empty() ? n.note_id : n.subject_id;
    e.sentences = preprocess::clean_and_split(n.text, table);
    if (e.sentences.empty()) {
      if (report) ++report->empty_notes;
      continue;
    }
    e.chunks = preprocess::chunk_and_tokenize(e.sentences, vocab,
                                              opts.chunk_length);
    label_vectors(n.codes, space, e.chapter_labels, e.code_labels,
                  report ? &report->labels : nullptr);
    out.push_back(std::move(e));
  }
  return out;
}

LabelSpace label_space_from_corpus(const std::vector<preprocess::RawNote>& notes,
                                   const LabelSpace& chapters, std::size_t k) {
  std::map<std::string, std::size_t> counts;
  for (const auto& n : notes) {
    for (const auto& code : n.codes) {
      try {
        chapters.chapter_of(code);
      } catch (const Error&) {
        continue;
      }
      ++counts[code];
    }
  }
  std::vector<CodeLabel> codes;
  for (auto& code : select_top_codes(counts, k)) {
    const int ch = chapters.chapter_of(code);
    codes.push_back(CodeLabel{std::move(code), {}, ch});
  }
  return chapters.with_codes(std::move(codes));
}

bool chapter_closure_holds(const Example& e, const LabelSpace& space) {
  for (std::size_t i = 0; i < e.code_labels.size(); ++i) {
    if (!e.code_labels[i]) continue;
    if (!e.chapter_labels[static_cast<std::size_t>(space.codes()[i].chapter)])
      return false;
  }
  return true;
}

}  // namespace notecoder::corpus
