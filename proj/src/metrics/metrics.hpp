// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace notecoder::metrics {

using BinaryMatrix = std::vector<std::vector<std::uint8_t>>;  // N x K
using ScoreMatrix = std::vector<std::vector<double>>;         // N x K

struct LabelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

struct ConfusionCounts {
  std::vector<LabelCounts> per_label;
  std::size_t examples = 0;

  LabelCounts pooled() const;
};

// Per-label counts. Throws Error(kShape) if the matrices differ in shape or
// are ragged.
ConfusionCounts confusion(const BinaryMatrix& decisions, const BinaryMatrix& labels);

// What to do with a label (or pooled total) that has tp = fp = fn = 0, i.e.
// no positives and no predictions.
enum class ZeroPolicy {
  kSkip,        // leave it out of macro averages; micro over nothing = 0
  kCountAsOne,  // score it as a perfect 1.0
  kError,       // throw Error(kUndefinedMetric)
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 2tp / (2tp + fp + fn), algebraically equal to 2PR / (P + R).
double f1_score(const LabelCounts& c, ZeroPolicy policy = ZeroPolicy::kSkip);

Prf micro(const ConfusionCounts& counts, ZeroPolicy policy = ZeroPolicy::kSkip);
Prf macro(const ConfusionCounts& counts, ZeroPolicy policy = ZeroPolicy::kSkip);
double micro_f1(const ConfusionCounts& counts, ZeroPolicy policy = ZeroPolicy::kSkip);
double macro_f1(const ConfusionCounts& counts, ZeroPolicy policy = ZeroPolicy::kSkip);

// 0.05, 0.10, ..., 0.95.
std::vector<double> default_grid();

// decisions[n][k] = scores[n][k] >= thresholds[k].
BinaryMatrix decide(const ScoreMatrix& scores, const std::vector<double>& thresholds);

// Per label, the grid value maximising that label's F1; ties go to the
// smallest value. Labels with no positives keep `fallback`.
std::vector<double> tune_thresholds(const ScoreMatrix& scores, const BinaryMatrix& labels,
                                    const std::vector<double>& grid,
                                    double fallback = 0.5);

// tune_thresholds, then keeps each label's tuned value only if pooled
// micro-F1 does not drop (labels visited in order, starting from
// `fallback` everywhere). The result never scores below the uniform
// fallback threshold on the tuning data.
std::vector<double> select_thresholds(const ScoreMatrix& scores, const BinaryMatrix& labels,
                                      const std::vector<double>& grid,
                                      double fallback = 0.5);

// Report: per-label and pooled counts, micro/macro P/R/F1, thresholds.
nlohmann::json report_json(const ConfusionCounts& counts,
                           const std::vector<std::string>& label_names,
                           const std::vector<double>& thresholds = {});

}  // namespace notecoder::metrics
