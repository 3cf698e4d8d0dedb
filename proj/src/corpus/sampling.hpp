// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "corpus/dataset.hpp"

namespace notecoder::corpus {

struct BalanceConfig {
  double target_ratio = 1.5;  // rho >= 1
  std::uint64_t seed = 0;
};

enum class BalanceLevel { kChapter, kCode, kBoth };

struct BalanceResult {
  // Indices of kept rows, ascending.
  std::vector<std::size_t> kept;
  std::vector<std::size_t> counts_before;
  std::vector<std::size_t> counts_after;
  std::size_t cap = 0;
  // max / min over labels with nonzero count after the pass.
  double achieved_ratio = 1.0;
};

// Greedy undersampling over a multi-hot label matrix.
//
// cap = floor(rho * smallest nonzero positive count). Rows are visited once in
// a seeded random order; a row is removed only if it carries at least one
// label and every label it carries is still above cap. Rows with no positive
// labels are always kept. No label that starts nonzero can reach zero.
BalanceResult undersample(const std::vector<LabelVector>& labels,
                          const BalanceConfig& cfg);

std::vector<Example> undersample(const std::vector<Example>& examples,
                                 const BalanceConfig& cfg, BalanceLevel level,
                                 BalanceResult* result = nullptr);

// n_copies re-chunked copies of `example`, each with its sentences permuted
// by a generator seeded from (seed, note_id, copy index). Labels are copied
// verbatim; copy i has variant = i + 1.
std::vector<Example> augment_shuffle(const Example& example,
                                     const preprocess::SentenceList& sentences,
                                     std::size_t n_copies, std::uint64_t seed,
                                     const preprocess::Vocabulary& vocab,
                                     std::size_t L);

// The permutation used for copy `copy_index`.
std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed,
                                             const std::string& note_id,
                                             std::size_t copy_index);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

enum class Split : int { kTrain = 0, kVal = 1, kTest = 2 };

// Seeded hash of subject_id against the ratio cut points.
Split assign_split(const std::string& subject_id, const SplitRatios& ratios,
                   std::uint64_t seed);

template <class T>
struct Splits {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

Splits<Example> split_by_patient(const std::vector<Example>& examples,
                                 const SplitRatios& ratios, std::uint64_t seed);

void validate_ratios(const SplitRatios& ratios);

}  // namespace notecoder::corpus
