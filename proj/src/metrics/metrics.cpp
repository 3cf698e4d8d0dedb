// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "metrics/metrics.hpp"

#include <cmath>

#include "common/error.hpp"

namespace notecoder::metrics {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_shape(const BinaryMatrix& a, std::size_t n, std::size_t k, const char* what) {
  require(a.size() == n, ErrorCode::kShape, std::string(what) + ": row count mismatch");
  for (const auto& row : a)
    require(row.size() == k, ErrorCode::kShape, std::string(what) + ": ragged rows");
}

}  // namespace

LabelCounts ConfusionCounts::pooled() const {
  LabelCounts p;
  for (const auto& c : per_label) {
    p.tp += c.tp;
    p.fp += c.fp;
    p.fn += c.fn;
    p.tn += c.tn;
  }
  return p;
}

ConfusionCounts confusion(const BinaryMatrix& decisions, const BinaryMatrix& labels) {
  const std::size_t n = labels.size();
  const std::size_t k = n == 0 ? 0 : labels.front().size();
  check_shape(labels, n, k, "labels");
  check_shape(decisions, n, k, "decisions");
  ConfusionCounts c;
  c.examples = n;
  c.per_label.assign(k, {});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const bool d = decisions[i][j] != 0;
      const bool y = labels[i][j] != 0;
      auto& lc = c.per_label[j];
      if (d && y) ++lc.tp;
      else if (d) ++lc.fp;
      else if (y) ++lc.fn;
      else ++lc.tn;
    }
  }
  return c;
}

double f1_score(const LabelCounts& c, ZeroPolicy policy) {
  const std::size_t den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) {
    switch (policy) {
      case ZeroPolicy::kSkip: return 0.0;
      case ZeroPolicy::kCountAsOne: return 1.0;
      case ZeroPolicy::kError:
        fail(ErrorCode::kUndefinedMetric, "F1 undefined: no positives and no predictions");
    }
  }
  return static_cast<double>(2 * c.tp) / static_cast<double>(den);
}

Prf micro(const ConfusionCounts& counts, ZeroPolicy policy) {
  const LabelCounts p = counts.pooled();
  Prf r;
  r.precision = ratio(p.tp, p.tp + p.fp);
  r.recall = ratio(p.tp, p.tp + p.fn);
  r.f1 = f1_score(p, policy);
  return r;
}

Prf macro(const ConfusionCounts& counts, ZeroPolicy policy) {
  Prf sum;
  std::size_t n = 0;
  for (const auto& c : counts.per_label) {
    if (c.tp + c.fp + c.fn == 0) {
      if (policy == ZeroPolicy::kSkip) continue;
      if (policy == ZeroPolicy::kError)
        fail(ErrorCode::kUndefinedMetric, "macro F1 undefined for an empty label");
      sum.precision += 1.0;
      sum.recall += 1.0;
      sum.f1 += 1.0;
      ++n;
      continue;
    }
    sum.precision += ratio(c.tp, c.tp + c.fp);
    sum.recall += ratio(c.tp, c.tp + c.fn);
    sum.f1 += f1_score(c, policy);
    ++n;
  }
  if (n == 0) return Prf{};
  const double inv = 1.0 / static_cast<double>(n);
  return Prf{sum.precision * inv, sum.recall * inv, sum.f1 * inv};
}

double micro_f1(const ConfusionCounts& counts, ZeroPolicy policy) {
  return micro(counts, policy).f1;
}

double macro_f1(const ConfusionCounts& counts, ZeroPolicy policy) {
  return macro(counts, policy).f1;
}

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
  return g;
}

BinaryMatrix decide(const ScoreMatrix& scores, const std::vector<double>& thresholds) {
  BinaryMatrix out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(scores[i].size() == thresholds.size(), ErrorCode::kShape,
            "decide: score row length != threshold count");
    out[i].resize(thresholds.size());
    for (std::size_t j = 0; j < thresholds.size(); ++j)
      out[i][j] = scores[i][j] >= thresholds[j] ? 1 : 0;
  }
  return out;
}

std::vector<double> tune_thresholds(const ScoreMatrix& scores, const BinaryMatrix& labels,
                                    const std::vector<double>& grid, double fallback) {
  require(!grid.empty(), ErrorCode::kInvalidArgument, "threshold grid is empty");
  for (double g : grid)
    require(g > 0 && g < 1, ErrorCode::kInvalidArgument, "grid values must be in (0, 1)");
  const std::size_t n = labels.size();
  const std::size_t k = n == 0 ? 0 : labels.front().size();
  check_shape(labels, n, k, "labels");
  require(scores.size() == n, ErrorCode::kShape, "scores: row count mismatch");
  for (const auto& row : scores)
    require(row.size() == k, ErrorCode::kShape, "scores: ragged rows");

  std::vector<double> out(k, fallback);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) positives += labels[i][j] ? 1 : 0;
    if (positives == 0) continue;
    double best_f1 = -1.0;
    double best_t = 0.0;
    for (double t : grid) {
      LabelCounts c;
      for (std::size_t i = 0; i < n; ++i) {
        const bool d = scores[i][j] >= t;
        const bool y = labels[i][j] != 0;
        if (d && y) ++c.tp;
        else if (d) ++c.fp;
        else if (y) ++c.fn;
      }
      const double f1 = f1_score(c);
      if (f1 > best_f1 || (f1 == best_f1 && t < best_t)) {
        best_f1 = f1;
        best_t = t;
      }
    }
    out[j] = best_t;
  }
  return out;
}

std::vector<double> select_thresholds(const ScoreMatrix& scores, const BinaryMatrix& labels,
                                      const std::vector<double>& grid, double fallback) {
  const std::vector<double> tuned = tune_thresholds(scores, labels, grid, fallback);
  std::vector<double> chosen(tuned.size(), fallback);
  ConfusionCounts counts = confusion(decide(scores, chosen), labels);
  double current = micro_f1(counts);
  for (std::size_t j = 0; j < tuned.size(); ++j) {
    if (tuned[j] == fallback) continue;
    // Only column j changes; recount it alone.
    LabelCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool d = scores[i][j] >= tuned[j];
      const bool y = labels[i][j] != 0;
      if (d && y) ++c.tp;
      else if (d) ++c.fp;
      else if (y) ++c.fn;
      else ++c.tn;
    }
    ConfusionCounts trial = counts;
    trial.per_label[j] = c;
    const double f1 = micro_f1(trial);
    if (f1 >= current) {
      chosen[j] = tuned[j];
      counts = std::move(trial);
      current = f1;
    }
  }
  return chosen;
}

nlohmann::json report_json(const ConfusionCounts& counts,
                           const std::vector<std::string>& label_names,
                           const std::vector<double>& thresholds) {
  nlohmann::json labels = nlohmann::json::array();
  for (std::size_t j = 0; j < counts.per_label.size(); ++j) {
    const auto& c = counts.per_label[j];
    nlohmann::json l = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn},
                        {"f1", f1_score(c)}};
    if (j < label_names.size()) l["label"] = label_names[j];
    if (j < thresholds.size()) l["threshold"] = thresholds[j];
    labels.push_back(std::move(l));
  }
  const LabelCounts p = counts.pooled();
  const Prf mi = micro(counts);
  const Prf ma = macro(counts);
  return {{"examples", counts.examples},
          {"pooled", {{"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}, {"tn", p.tn}}},
          {"micro", {{"precision", mi.precision}, {"recall", mi.recall}, {"f1", mi.f1}}},
          {"macro", {{"precision", ma.precision}, {"recall", ma.recall}, {"f1", ma.f1}}},
          {"labels", labels},
          {"thresholds", thresholds}};
}

}  // namespace notecoder::metrics
