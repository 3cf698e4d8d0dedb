// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "corpus/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/random.hpp"

namespace notecoder::corpus {

namespace {

double ratio_of(const std::vector<std::size_t>& counts) {
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    lo = lo == 0 ? c : std::min(lo, c);
    hi = std::max(hi, c);
  }
  return lo == 0 ? 1.0 : static_cast<double>(hi) / static_cast<double>(lo);
}

}  // namespace

BalanceResult undersample(const std::vector<LabelVector>& labels,
                          const BalanceConfig& cfg) {
  require(cfg.target_ratio >= 1.0, ErrorCode::kConfig,
          "balance target ratio must be >= 1");
  BalanceResult r;
  const std::size_t k = labels.empty() ? 0 : labels.front().size();
  r.counts_before.assign(k, 0);
  for (const auto& row : labels) {
    require(row.size() == k, ErrorCode::kShape, "ragged label matrix");
    for (std::size_t j = 0; j < k; ++j) r.counts_before[j] += row[j] ? 1 : 0;
  }
  std::size_t min_pos = 0;
  for (std::size_t c : r.counts_before)
    if (c > 0) min_pos = min_pos == 0 ? c : std::min(min_pos, c);
  r.cap = static_cast<std::size_t>(
      std::floor(cfg.target_ratio * static_cast<double>(min_pos) + 1e-9));

  std::vector<std::size_t> counts = r.counts_before;
  std::vector<bool> removed(labels.size(), false);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix(cfg.seed, std::string_view("undersample")));
  rng.shuffle(order);

  for (std::size_t i : order) {
    const auto& row = labels[i];
    bool any = false;
    bool removable = true;
    for (std::size_t j = 0; j < k && removable; ++j) {
      if (!row[j]) continue;
      any = true;
      removable = counts[j] > r.cap;
    }
    if (!any || !removable) continue;
    removed[i] = true;
    for (std::size_t j = 0; j < k; ++j)
      if (row[j]) --counts[j];
  }

  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!removed[i]) r.kept.push_back(i);
  r.counts_after = std::move(counts);
  r.achieved_ratio = ratio_of(r.counts_after);
  return r;
}

std::vector<Example> undersample(const std::vector<Example>& examples,
                                 const BalanceConfig& cfg, BalanceLevel level,
                                 BalanceResult* result) {
  std::vector<LabelVector> rows;
  rows.reserve(examples.size());
  for (const auto& e : examples) {
    LabelVector row;
    if (level != BalanceLevel::kCode)
      row.insert(row.end(), e.chapter_labels.begin(), e.chapter_labels.end());
    if (level != BalanceLevel::kChapter)
      row.insert(row.end(), e.code_labels.begin(), e.code_labels.end());
    rows.push_back(std::move(row));
  }
  BalanceResult r = undersample(rows, cfg);
  std::vector<Example> out;
  out.reserve(r.kept.size());
  for (std::size_t i : r.kept) out.push_back(examples[i]);
  if (result) *result = std::move(r);
  return out;
}

std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed,
                                             const std::string& note_id,
                                             std::size_t copy_index) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(mix(mix(seed, note_id), static_cast<std::uint64_t>(copy_index)));
  rng.shuffle(perm);
  return perm;
}

std::vector<Example> augment_shuffle(const Example& example,
                                     const preprocess::SentenceList& sentences,
                                     std::size_t n_copies, std::uint64_t seed,
                                     const preprocess::Vocabulary& vocab,
                                     std::size_t L) {
  std::vector<Example> out;
  out.reserve(n_copies);
  for (std::size_t i = 0; i < n_copies; ++i) {
    const auto perm = shuffle_permutation(sentences.size(), seed,
                                          example.note_id, i);
    Example copy;
    copy.note_id = example.note_id;
    copy.subject_id = example.subject_id;
    copy.chapter_labels = example.chapter_labels;
    copy.code_labels = example.code_labels;
    copy.variant = static_cast<int>(i) + 1;
    copy.sentences.reserve(sentences.size());
    for (std::size_t p : perm) copy.sentences.push_back(sentences[p]);
    copy.chunks = preprocess::chunk_and_tokenize(copy.sentences, vocab, L);
    out.push_back(std::move(copy));
  }
  return out;
}

void validate_ratios(const SplitRatios& r) {
  require(r.train > 0 && r.val > 0 && r.test > 0, ErrorCode::kConfig,
          "split ratios must be positive");
  require(std::abs(r.train + r.val + r.test - 1.0) <= 1e-9, ErrorCode::kConfig,
          "split ratios must sum to 1");
}

Split assign_split(const std::string& subject_id, const SplitRatios& ratios,
                   std::uint64_t seed) {
  const double u = unit_double(mix(mix(seed, std::string_view("split")),
                                   subject_id));
  if (u < ratios.train) return Split::kTrain;
  if (u < ratios.train + ratios.val) return Split::kVal;
  return Split::kTest;
}

Splits<Example> split_by_patient(const std::vector<Example>& examples,
                                 const SplitRatios& ratios, std::uint64_t seed) {
  validate_ratios(ratios);
  Splits<Example> s;
  for (const auto& e : examples) {
    switch (assign_split(e.subject_id, ratios, seed)) {
      case Split::kTrain: s.train.push_back(e); break;
      case Split::kVal: s.val.push_back(e); break;
      case Split::kTest: s.test.push_back(e); break;
    }
  }
  return s;
}

}  // namespace notecoder::corpus
