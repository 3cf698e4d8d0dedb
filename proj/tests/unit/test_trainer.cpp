// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "common/error.hpp"
#include "support/fixtures.hpp"
#include "train/trainer.hpp"

using namespace notecoder;
using namespace notecoder::train;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 16;
  c.kernel_widths = {1, 2};
  c.filters = 6;
  c.hidden = 0;
  c.learning_rate = 0.01;
  c.chunk_length = 32;
  c.provider.dim = 12;
  c.augment_copies = 1;
  return c;
}

struct Data {
  corpus::SynthCorpus corp;
  PreparedCorpus prepared;
};

const Data& tiny_data() {
  static const Data d = [] {
    Data out{fixture::small_corpus(160, 31), {}};
    out.prepared = prepare_corpus(out.corp.notes, out.corp.space, tiny_config());
    return out;
  }();
  return d;
}

bool same_params(const nn::ParamSet& a, const nn::ParamSet& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t k = 0; k < a.tensors.size(); ++k)
    if (a.tensors[k].data != b.tensors[k].data) return false;
  return true;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config json round trip") {
  TrainConfig c = tiny_config();
  c.seed = 99;
  c.balance_ratio = 2.0;
  c.aggregation = model::Aggregation::kMean;
  c.splits = {0.7, 0.2, 0.1};
  const auto j = to_json(c);
  CHECK(to_json(train_config_from_json(j)) == j);
  CHECK(train_config_from_json(nlohmann::json::object()).epochs == TrainConfig{}.epochs);
}

TEST_CASE("config rejects unknown keys and bad values") {
  auto code_of = [](const nlohmann::json& j) {
    try {
      validate(train_config_from_json(j));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternal;
  };
  CHECK(code_of({{"epoch", 3}}) == ErrorCode::kConfig);
  CHECK(code_of({{"epochs", "three"}}) == ErrorCode::kConfig);
  CHECK(code_of({{"epochs", 0}}) == ErrorCode::kConfig);
  CHECK(code_of({{"balance_ratio", 0.5}}) == ErrorCode::kConfig);
  CHECK(code_of({{"kernel_widths", nlohmann::json::array()}}) == ErrorCode::kConfig);
  CHECK(code_of({{"splits", {{"train", 0.9}, {"val", 0.2}, {"test", 0.1}}}}) == ErrorCode::kConfig);
  CHECK(code_of(nlohmann::json::array()) == ErrorCode::kConfig);
}

TEST_CASE("prepare_corpus splits by patient") {
  const auto& d = tiny_data().prepared;
  CHECK(d.space.num_labels() == 66);
  CHECK(!d.splits.train.empty());
  CHECK(!d.splits.val.empty());
  std::set<std::string> train_subjects;
  for (const auto& e : d.splits.train) train_subjects.insert(e.subject_id);
  for (const auto& e : d.splits.val) CHECK(train_subjects.count(e.subject_id) == 0);
  for (const auto& e : d.splits.test) CHECK(train_subjects.count(e.subject_id) == 0);
  for (const auto& e : d.splits.train) {
    CHECK(e.chapter_labels.size() == 16);
    CHECK(e.code_labels.size() == 50);
    for (const auto& c : e.chunks) CHECK(c.token_ids.size() == 32);
  }
}

TEST_CASE("patience zero stops after one epoch") {
  auto cfg = tiny_config();
  cfg.epochs = 4;
  cfg.patience = 0;
  const embed::HashedProvider p(cfg.provider.dim, cfg.provider.seed);
  const auto st = train_chapter(tiny_data().prepared, p, cfg);
  CHECK(st.history.epochs.size() == 1);
  CHECK(st.history.early_stopped);
  CHECK(st.history.best_epoch == 1);
}

TEST_CASE("chapter training is deterministic and records history") {
  const auto cfg = tiny_config();
  const embed::HashedProvider p(cfg.provider.dim, cfg.provider.seed);
  const auto a = train_chapter(tiny_data().prepared, p, cfg);
  const auto b = train_chapter(tiny_data().prepared, p, cfg);
  CHECK(same_params(a.model.params, b.model.params));
  REQUIRE(a.history.epochs.size() == 2);
  for (const auto& r : a.history.epochs) {
    CHECK(r.stage == "chapter");
    CHECK(std::isfinite(r.train_loss));
    CHECK(r.train_examples > 0);
  }
  CHECK(a.history.best_epoch >= 1);
  for (const auto& t : a.model.params.tensors)
    for (double v : t.data) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

TEST_CASE("transfer with freezing keeps the chapter convolutions") {
  auto cfg = tiny_config();
  cfg.freeze_epochs = cfg.epochs;
  const embed::HashedProvider p(cfg.provider.dim, cfg.provider.seed);
  const auto& d = tiny_data().prepared;
  const auto ch = train_chapter(d, p, cfg);
  const auto codes = train_codes(d, ch.model, p, cfg);
  std::size_t trained = 0;
  for (const auto& m : codes.models) {
    if (m.empty()) continue;
    ++trained;
    for (const auto& t : m.params.tensors)
      if (nn::is_conv_tensor(t.name)) CHECK(t.data == ch.model.params.at(t.name).data);
  }
  CHECK(trained > 0);

  cfg.transfer = false;
  const auto fresh = train_codes(d, ch.model, p, cfg);
  bool any_diff = false;
  for (const auto& m : fresh.models)
    if (!m.empty() && m.params.at("conv_w0").data != ch.model.params.at("conv_w0").data)
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("pipeline produces a loadable bundle and consistent evaluation") {
  const auto cfg = tiny_config();
  const embed::HashedProvider p(cfg.provider.dim, cfg.provider.seed);
  const auto& d = tiny_data().prepared;
  const auto out = train_pipeline(d, p, cfg);
  CHECK(out.bundle.thresholds.size() == 66);
  CHECK_NOTHROW(out.bundle.validate());
  CHECK(out.test.examples == d.splits.test.size());
  const auto again = evaluate(out.bundle, d.splits.test, p);
  CHECK(again.code_micro_f1 == out.test.code_micro_f1);
  CHECK(again.chapter_micro_f1 == out.test.chapter_micro_f1);
  const auto j = to_json(out.test, d.space);
  CHECK(j.contains("chapters"));
  CHECK(out.bundle.meta["seed"] == cfg.seed);
}

TEST_CASE("ablation rows share evaluation data") {
  auto cfg = tiny_config();
  cfg.epochs = 1;
  const embed::HashedProvider p(cfg.provider.dim, cfg.provider.seed);
  const auto& d = tiny_data().prepared;
  const auto t = run_ablation({Variant::kBaseline, Variant::kBalanceAugment}, d, p, cfg);
  REQUIRE(t.rows.size() == 2);
  for (const auto& r : t.rows) {
    CHECK(r.ok);
    CHECK(r.test.examples == d.splits.test.size());
  }
  CHECK(t.rows[0].variant == Variant::kBaseline);
  CHECK(t.rows[0].train_examples != t.rows[1].train_examples);
  const std::string csv = t.to_csv();
  CHECK(csv.rfind("variant,chapter_micro_f1", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(t.to_json()["rows"].size() == 2);

  const auto one = run_ablation({Variant::kAugment}, d, p, cfg);
  CHECK(one.rows.size() == 1);
  CHECK(variant_from_name(variant_name(Variant::kBalance)) == Variant::kBalance);
  CHECK_THROWS_AS(variant_from_name("bogus"), Error);
}

}  // TEST_SUITE
