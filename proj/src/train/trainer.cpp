// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "train/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "common/error.hpp"
#include "common/random.hpp"
#include "preprocess/sentences.hpp"

namespace notecoder::train {

namespace fs = std::filesystem;
using corpus::Example;
using embed::EmbeddingTensor;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void validate(const TrainConfig& cfg) {
  require(cfg.epochs >= 1, ErrorCode::kConfig, "epochs must be >= 1");
  require(cfg.batch_size >= 1, ErrorCode::kConfig, "batch_size must be >= 1");
  require(cfg.learning_rate > 0 && std::isfinite(cfg.learning_rate), ErrorCode::kConfig,
          "learning_rate must be positive");
  require(cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1,
          ErrorCode::kConfig, "Adam betas must lie in [0, 1)");
  require(cfg.adam_eps > 0, ErrorCode::kConfig, "adam_eps must be positive");
  require(cfg.balance_ratio >= 1.0, ErrorCode::kConfig, "balance_ratio must be >= 1");
  require(!cfg.kernel_widths.empty(), ErrorCode::kConfig, "kernel_widths is empty");
  for (auto w : cfg.kernel_widths)
    require(w >= 1 && w <= cfg.chunk_length, ErrorCode::kConfig,
            "kernel width outside [1, chunk_length]");
  require(cfg.filters >= 1, ErrorCode::kConfig, "filters must be >= 1");
  require(cfg.dropout >= 0 && cfg.dropout < 1, ErrorCode::kConfig, "dropout must be in [0, 1)");
  require(cfg.chunk_length >= 2, ErrorCode::kConfig, "chunk_length must be >= 2");
  require(cfg.tau_ch > 0 && cfg.tau_ch < 1, ErrorCode::kConfig, "tau_ch outside (0, 1)");
  require(!(cfg.augment && cfg.augment_copies > 0 && cfg.provider.kind == embed::ProviderKind::kFile),
          ErrorCode::kConfig,
          "augmentation re-chunks notes, which a file provider cannot embed");
  corpus::validate_ratios(cfg.splits);
  embed::validate(cfg.provider);
}

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"code_epochs", c.code_epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"patience", c.patience},
              {"learning_rate", c.learning_rate},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"balance", c.balance},
              {"balance_ratio", c.balance_ratio},
              {"augment", c.augment},
              {"augment_copies", c.augment_copies},
              {"transfer", c.transfer},
              {"freeze_epochs", c.freeze_epochs},
              {"kernel_widths", c.kernel_widths},
              {"filters", c.filters},
              {"hidden", c.hidden},
              {"dropout", c.dropout},
              {"aggregation", model::to_string(c.aggregation)},
              {"provider", embed::to_json(c.provider)},
              {"chunk_length", c.chunk_length},
              {"vocab_min_count", c.vocab_min_count},
              {"vocab_max_size", c.vocab_max_size},
              {"splits", {{"train", c.splits.train}, {"val", c.splits.val}, {"test", c.splits.test}}},
              {"fixed_epoch_length", c.fixed_epoch_length},
              {"tau_ch", c.tau_ch},
              {"tune_thresholds", c.tune_thresholds},
              {"workers", c.workers}};
}

TrainConfig train_config_from_json(const json& j) {
  require(j.is_object(), ErrorCode::kConfig, "training config must be a JSON object");
  const json known = to_json(TrainConfig{});
  for (const auto& [key, _] : j.items())
    require(known.contains(key), ErrorCode::kConfig, "unknown config key '" + key + "'");
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.code_epochs = j.value("code_epochs", c.code_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.patience = j.value("patience", c.patience);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.balance = j.value("balance", c.balance);
    c.balance_ratio = j.value("balance_ratio", c.balance_ratio);
    c.augment = j.value("augment", c.augment);
    c.augment_copies = j.value("augment_copies", c.augment_copies);
    c.transfer = j.value("transfer", c.transfer);
    c.freeze_epochs = j.value("freeze_epochs", c.freeze_epochs);
    c.kernel_widths = j.value("kernel_widths", c.kernel_widths);
    c.filters = j.value("filters", c.filters);
    c.hidden = j.value("hidden", c.hidden);
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("aggregation"))
      c.aggregation = model::aggregation_from_string(j.at("aggregation").get<std::string>());
    if (j.contains("provider")) c.provider = embed::provider_config_from_json(j.at("provider"));
    c.chunk_length = j.value("chunk_length", c.chunk_length);
    c.vocab_min_count = j.value("vocab_min_count", c.vocab_min_count);
    c.vocab_max_size = j.value("vocab_max_size", c.vocab_max_size);
    if (j.contains("splits")) {
      const json& s = j.at("splits");
      c.splits.train = s.value("train", c.splits.train);
      c.splits.val = s.value("val", c.splits.val);
      c.splits.test = s.value("test", c.splits.test);
    }
    c.fixed_epoch_length = j.value("fixed_epoch_length", c.fixed_epoch_length);
    c.tau_ch = j.value("tau_ch", c.tau_ch);
    c.tune_thresholds = j.value("tune_thresholds", c.tune_thresholds);
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad training config: ") + e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Corpus preparation

PreparedCorpus prepare_corpus(const std::vector<preprocess::RawNote>& notes,
                              const corpus::LabelSpace& space, const TrainConfig& cfg,
                              const preprocess::AbbreviationTable* abbreviations) {
  validate(cfg);
  PreparedCorpus d;
  d.space = space;
  d.abbreviations = abbreviations ? *abbreviations : preprocess::AbbreviationTable::builtin();
  std::vector<std::string> train_texts;
  for (const auto& n : notes) {
    const std::string& subject = n.subject_id.empty() ? n.note_id : n.subject_id;
    if (corpus::assign_split(subject, cfg.splits, cfg.seed) != corpus::Split::kTrain) continue;
    std::string joined;
    for (const auto& s : preprocess::clean_and_split(n.text, d.abbreviations)) {
      joined += s;
      joined += ' ';
    }
    train_texts.push_back(std::move(joined));
  }
  d.vocab = preprocess::Vocabulary::build(train_texts, cfg.vocab_min_count, cfg.vocab_max_size);
  corpus::BuildOptions opts;
  opts.abbreviations = &d.abbreviations;
  opts.chunk_length = cfg.chunk_length;
  const auto examples = corpus::build_examples(notes, space, d.vocab, opts, &d.report);
  d.splits = corpus::split_by_patient(examples, cfg.splits, cfg.seed);
  return d;
}

// ---------------------------------------------------------------------------
// Training loop

json to_json(const EpochRecord& r) {
  json j{{"stage", r.stage},
         {"epoch", r.epoch},
         {"train_examples", r.train_examples},
         {"train_loss", r.train_loss},
         {"val_loss", r.val_loss},
         {"val_micro_f1", r.val_micro_f1},
         {"val_macro_f1", r.val_macro_f1},
         {"frozen", r.frozen},
         {"improved", r.improved}};
  if (r.chapter >= 0) j["chapter"] = r.chapter;
  return j;
}

namespace {

// Embeds an example's chunks. Providers other than the hashed one are
// memoised, since training revisits every chunk each epoch.
class ChunkEmbedder {
 public:
  explicit ChunkEmbedder(const embed::Provider& p)
      : provider_(p), memo_(p.kind() != embed::ProviderKind::kHashed) {}

  std::vector<EmbeddingTensor> embed(const Example& e) const {
    if (!memo_) {
      std::vector<embed::ChunkRef> refs(e.chunks.size());
      for (std::size_t i = 0; i < refs.size(); ++i) refs[i] = {e.note_id, i};
      return provider_.embed_batch(e.chunks, refs);
    }
    const std::string key = e.note_id + '\x1f' + std::to_string(e.variant);
    {
      std::lock_guard lock(mu_);
      if (auto it = memo_store_.find(key); it != memo_store_.end()) return it->second;
    }
    std::vector<embed::ChunkRef> refs(e.chunks.size());
    for (std::size_t i = 0; i < refs.size(); ++i) refs[i] = {e.note_id, i};
    auto out = provider_.embed_batch(e.chunks, refs);
    std::lock_guard lock(mu_);
    memo_store_.emplace(key, out);
    return out;
  }

 private:
  const embed::Provider& provider_;
  bool memo_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<EmbeddingTensor>> memo_store_;
};

std::vector<double> to_double(const corpus::LabelVector& v) {
  return std::vector<double>(v.begin(), v.end());
}

struct Sample {
  const Example* example = nullptr;
  std::vector<double> labels;
  const std::vector<double>* aux = nullptr;                       // null = none
  const std::vector<std::vector<double>>* chunk_features = nullptr;  // frozen path
};

struct FitSpec {
  std::string stage;
  int chapter = -1;
  std::size_t epochs = 1;
  std::size_t freeze_epochs = 0;  // epochs that leave conv tensors untouched
  std::uint64_t seed = 0;
  std::size_t epoch_length = 0;   // examples per epoch; 0 = training set size
};

struct FitResult {
  nn::ParamSet best;
  History history;
};

std::span<const double> aux_of(const Sample& s) {
  return s.aux ? std::span<const double>(*s.aux) : std::span<const double>();
}

model::NotePass run_sample(const Sample& s, bool use_features, const nn::ParamSet& params,
                           const nn::NetSpec& spec, model::Aggregation agg, bool keep,
                           const ChunkEmbedder& embedder,
                           std::vector<EmbeddingTensor>& storage,
                           std::span<const double> input_scale = {}) {
  if (use_features && s.chunk_features)
    return model::forward_note_from_features(*s.chunk_features, aux_of(s), params, spec, agg,
                                             keep, input_scale);
  storage = embedder.embed(*s.example);
  return model::forward_note(storage, aux_of(s), params, spec, agg, keep, input_scale);
}

// Inverted dropout over the conv features; aux inputs pass through.
void dropout_mask(Rng& rng, double rate, std::size_t features, std::vector<double>& scale) {
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < scale.size(); ++i)
    scale[i] = i >= features ? 1.0 : (rng.bernoulli(rate) ? 0.0 : keep);
}

FitResult fit(const nn::NetSpec& spec, nn::ParamSet params, const std::vector<Sample>& train,
              const std::vector<Sample>& val, const FitSpec& fs_, const TrainConfig& cfg,
              const ChunkEmbedder& embedder) {
  require(!train.empty(), ErrorCode::kConfig, fs_.stage + " stage has an empty training split");
  FitResult out;
  out.best = params;
  nn::AdamState adam = nn::AdamState::for_params(params, cfg.learning_rate);
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.adam_eps;
  std::vector<bool> conv_mask(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    conv_mask[i] = nn::is_conv_tensor(params.tensors[i].name);

  nn::GradSet grads = params.zeros_like();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t epoch_length = fs_.epoch_length ? fs_.epoch_length : train.size();
  Rng order_rng(fs_.seed);
  std::size_t cursor = order.size();  // forces a shuffle on first draw
  auto next_index = [&] {
    if (cursor == order.size()) {
      order_rng.shuffle(order);
      cursor = 0;
    }
    return order[cursor++];
  };
  double best_f1 = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const std::size_t K = spec.out_dim();
  Rng drop_rng(mix(fs_.seed, std::string_view("dropout")));
  std::vector<double> scale(cfg.dropout > 0 ? spec.dense_input_dim() : 0);

  for (std::size_t epoch = 1; epoch <= fs_.epochs; ++epoch) {
    const bool frozen = epoch <= fs_.freeze_epochs;
    if (!fs_.epoch_length) cursor = order.size();
    double loss_sum = 0;
    std::vector<EmbeddingTensor> storage;
    for (std::size_t start = 0; start < epoch_length; start += cfg.batch_size) {
      const std::size_t stop = std::min(epoch_length, start + cfg.batch_size);
      grads.set_zero();
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& s = train[next_index()];
        if (!scale.empty()) dropout_mask(drop_rng, cfg.dropout, spec.conv.features(), scale);
        const model::NotePass pass = run_sample(s, frozen, params, spec, cfg.aggregation, true,
                                                embedder, storage, scale);
        const double loss = nn::bce_loss(pass.probs, s.labels);
        if (!std::isfinite(loss))
          fail(ErrorCode::kNumeric, "non-finite loss in " + fs_.stage + " stage" +
                                        (fs_.chapter >= 0 ? " chapter " + std::to_string(fs_.chapter) : "") +
                                        " epoch " + std::to_string(epoch) + " note " +
                                        s.example->note_id);
        loss_sum += loss;
        model::backward_note(pass, s.labels, params, spec, cfg.aggregation, grads);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto& t : grads.tensors)
        for (double& g : t.data) g *= scale;
      nn::adam_step(params, grads, adam, frozen ? &conv_mask : nullptr);
    }

    EpochRecord rec;
    rec.stage = fs_.stage;
    rec.chapter = fs_.chapter;
    rec.epoch = epoch;
    rec.train_examples = train.size();
    rec.train_loss = loss_sum / static_cast<double>(epoch_length);
    rec.frozen = frozen;
    {
      metrics::BinaryMatrix decisions, labels;
      double vloss = 0;
      for (const Sample& s : val) {
        const model::NotePass pass =
            run_sample(s, frozen, params, spec, cfg.aggregation, false, embedder, storage);
        vloss += nn::bce_loss(pass.probs, s.labels);
        std::vector<std::uint8_t> d(K), y(K);
        for (std::size_t k = 0; k < K; ++k) {
          d[k] = pass.probs[k] >= 0.5;
          y[k] = s.labels[k] >= 0.5;
        }
        decisions.push_back(std::move(d));
        labels.push_back(std::move(y));
      }
      if (!val.empty()) {
        const auto counts = metrics::confusion(decisions, labels);
        rec.val_micro_f1 = metrics::micro_f1(counts);
        rec.val_macro_f1 = metrics::macro_f1(counts);
        rec.val_loss = vloss / static_cast<double>(val.size());
      } else {
        rec.val_loss = rec.train_loss;
      }
    }
    rec.improved = rec.val_micro_f1 > best_f1 ||
                   (rec.val_micro_f1 == best_f1 && rec.val_loss < best_loss);
    if (rec.improved) {
      best_f1 = rec.val_micro_f1;
      best_loss = rec.val_loss;
      out.best = params;
      out.history.best_epoch = epoch;
      out.history.best_val_micro_f1 = rec.val_micro_f1;
      since_best = 0;
    } else {
      ++since_best;
    }
    out.history.epochs.push_back(rec);
    if (since_best >= cfg.patience && epoch < fs_.epochs) {
      out.history.early_stopped = true;
      break;
    }
  }
  out.best.round_to_float();
  return out;
}

nn::NetSpec net_spec(const TrainConfig& cfg, std::size_t out, std::size_t aux) {
  return nn::NetSpec::text_cnn(cfg.provider.dim, cfg.kernel_widths, cfg.filters, cfg.hidden,
                               out, aux);
}

std::vector<Example> augment_all(const std::vector<Example>& examples, const TrainConfig& cfg,
                                 const preprocess::Vocabulary& vocab, std::uint64_t seed) {
  std::vector<Example> out = examples;
  if (!cfg.augment || cfg.augment_copies == 0) return out;
  for (const auto& e : examples) {
    auto copies =
        corpus::augment_shuffle(e, e.sentences, cfg.augment_copies, seed, vocab, cfg.chunk_length);
    for (auto& c : copies) out.push_back(std::move(c));
  }
  return out;
}

std::vector<Example> treat_chapter_split(const PreparedCorpus& d, const TrainConfig& cfg) {
  std::vector<Example> train = d.splits.train;
  if (cfg.balance)
    train = corpus::undersample(train, {cfg.balance_ratio, mix(cfg.seed, std::string_view("balance-chapter"))},
                                corpus::BalanceLevel::kChapter);
  return augment_all(train, cfg, d.vocab, mix(cfg.seed, std::string_view("augment")));
}

// Chapter-stage outputs per (note, variant), shared by all code models.
struct FeatureEntry {
  std::vector<std::vector<double>> chunk_features;
  std::vector<double> aux;
};

class FeatureStore {
 public:
  FeatureStore(const model::ChapterModel& chapter, const TrainConfig& cfg,
               const ChunkEmbedder& embedder)
      : chapter_(chapter), cfg_(cfg), embedder_(embedder) {}

  const FeatureEntry& get(const Example& e) {
    const std::string key = e.note_id + '\x1f' + std::to_string(e.variant);
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    const auto emb = embedder_.embed(e);
    FeatureEntry f;
    const model::NotePass pass = model::forward_note(emb, {}, chapter_.params, chapter_.spec,
                                                     cfg_.aggregation, true);
    for (const auto& c : pass.caches) f.chunk_features.push_back(c.features);
    f.aux = pass.probs;
    f.aux.insert(f.aux.end(), pass.features.begin(), pass.features.end());
    return entries_.emplace(key, std::move(f)).first->second;
  }

 private:
  const model::ChapterModel& chapter_;
  const TrainConfig& cfg_;
  const ChunkEmbedder& embedder_;
  std::mutex mu_;
  std::map<std::string, FeatureEntry> entries_;  // node-based: references stay valid
};

// Chapter-positive examples plus an equal seeded draw of chapter-negative ones.
std::vector<const Example*> select_for_chapter(const std::vector<Example>& pool, std::size_t c,
                                               std::uint64_t seed) {
  std::vector<const Example*> pos, neg;
  for (const auto& e : pool) (e.chapter_labels[c] ? pos : neg).push_back(&e);
  Rng rng(seed);
  rng.shuffle(neg);
  neg.resize(std::min(neg.size(), pos.size()));
  std::vector<const Example*> out = pos;
  out.insert(out.end(), neg.begin(), neg.end());
  return out;
}

std::vector<double> code_targets(const Example& e, const std::vector<std::size_t>& codes) {
  std::vector<double> y(codes.size());
  for (std::size_t j = 0; j < codes.size(); ++j) y[j] = e.code_labels[codes[j]];
  return y;
}

}  // namespace

ChapterStage train_chapter(const PreparedCorpus& d, const embed::Provider& provider,
                           const TrainConfig& cfg) {
  validate(cfg);
  require(provider.dim() == cfg.provider.dim, ErrorCode::kConfig,
          "provider dim does not match config");
  require(!d.splits.train.empty(), ErrorCode::kConfig, "empty training split");
  const ChunkEmbedder embedder(provider);
  const std::vector<Example> train = treat_chapter_split(d, cfg);
  std::vector<Sample> ts, vs;
  for (const auto& e : train) ts.push_back(Sample{&e, to_double(e.chapter_labels)});
  for (const auto& e : d.splits.val) vs.push_back(Sample{&e, to_double(e.chapter_labels)});
  const nn::NetSpec spec = net_spec(cfg, d.space.num_chapters(), 0);
  nn::ParamSet init = nn::init_params(spec, mix(cfg.seed, std::string_view("chapter-init")));
  FitSpec f{"chapter", -1, cfg.epochs, 0, mix(cfg.seed, std::string_view("chapter-order")),
            cfg.fixed_epoch_length ? d.splits.train.size() : 0};
  FitResult r = fit(spec, std::move(init), ts, vs, f, cfg, embedder);
  return ChapterStage{model::ChapterModel{spec, std::move(r.best)}, std::move(r.history)};
}

CodeStage train_codes(const PreparedCorpus& d, const model::ChapterModel& chapter,
                      const embed::Provider& provider, const TrainConfig& cfg) {
  validate(cfg);
  require(!d.splits.train.empty(), ErrorCode::kConfig, "empty training split");
  const std::size_t C = d.space.num_chapters();
  require(chapter.spec.out_dim() == C, ErrorCode::kShape, "chapter model does not match label space");
  const ChunkEmbedder embedder(provider);
  FeatureStore store(chapter, cfg, embedder);
  const std::size_t aux_dim = C + chapter.spec.conv.features();
  const std::string ls_fp = d.space.fingerprint_hex();

  // Per-chapter training sets, built up front so workers only read.
  struct Job {
    std::vector<Example> train;
    std::vector<const Example*> val;
    std::size_t untreated = 0;
  };
  std::vector<Job> jobs(C);
  for (std::size_t c = 0; c < C; ++c) {
    const auto& codes = d.space.codes_in_chapter(c);
    if (codes.empty()) continue;
    const auto picked = select_for_chapter(d.splits.train, c, mix(cfg.seed, "neg-train", c));
    std::vector<Example> train;
    for (const Example* e : picked) train.push_back(*e);
    jobs[c].untreated = train.size();
    if (cfg.balance) {
      std::vector<corpus::LabelVector> rows;
      for (const auto& e : train) {
        corpus::LabelVector r(codes.size());
        for (std::size_t j = 0; j < codes.size(); ++j) r[j] = e.code_labels[codes[j]];
        rows.push_back(std::move(r));
      }
      const auto res = corpus::undersample(rows, {cfg.balance_ratio, mix(cfg.seed, "balance-code", c)});
      std::vector<Example> kept;
      for (std::size_t i : res.kept) kept.push_back(std::move(train[i]));
      train = std::move(kept);
    }
    jobs[c].train = augment_all(train, cfg, d.vocab, mix(cfg.seed, std::string_view("augment")));
    jobs[c].val = select_for_chapter(d.splits.val, c, mix(cfg.seed, "neg-val", c));
    for (const auto& e : jobs[c].train) store.get(e);
    for (const Example* e : jobs[c].val) store.get(*e);
  }

  CodeStage out;
  out.models.resize(C);
  out.histories.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    out.models[c].chapter_id = c;
    out.models[c].code_indices = d.space.codes_in_chapter(c);
    out.models[c].label_space_fingerprint = ls_fp;
  }

  auto train_one = [&](std::size_t c) {
    const auto& codes = d.space.codes_in_chapter(c);
    if (codes.empty()) return;
    const nn::NetSpec spec = net_spec(cfg, codes.size(), aux_dim);
    nn::ParamSet params = nn::init_params(spec, mix(cfg.seed, "code-init", c));
    if (cfg.transfer) {
      for (auto& t : params.tensors)
        if (nn::is_conv_tensor(t.name)) t.data = chapter.params.at(t.name).data;
    }
    const bool cache_features = cfg.transfer && cfg.freeze_epochs > 0;
    std::vector<Sample> ts, vs;
    for (const auto& e : jobs[c].train) {
      const FeatureEntry& f = store.get(e);
      ts.push_back(Sample{&e, code_targets(e, codes), &f.aux,
                          cache_features ? &f.chunk_features : nullptr});
    }
    for (const Example* e : jobs[c].val) {
      const FeatureEntry& f = store.get(*e);
      vs.push_back(Sample{e, code_targets(*e, codes), &f.aux,
                          cache_features ? &f.chunk_features : nullptr});
    }
    FitSpec f{"code", static_cast<int>(c), cfg.effective_code_epochs(),
              cfg.transfer ? cfg.freeze_epochs : 0, mix(cfg.seed, "code-order", c),
              cfg.fixed_epoch_length ? jobs[c].untreated : 0};
    FitResult r = fit(spec, std::move(params), ts, vs, f, cfg, embedder);
    out.models[c].spec = spec;
    out.models[c].params = std::move(r.best);
    out.histories[c] = std::move(r.history);
  };

  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  if (workers == 1) {
    for (std::size_t c = 0; c < C; ++c) train_one(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(C);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, C); ++w)
      pool.emplace_back([&] {
        for (std::size_t c; (c = next++) < C;) {
          try {
            train_one(c);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

ScoredSet score_examples(const model::ModelBundle& bundle, const std::vector<Example>& examples,
                         const embed::Provider& provider) {
  const ChunkEmbedder embedder(provider);
  ScoredSet s;
  const std::size_t C = bundle.space.num_chapters();
  const std::size_t J = bundle.space.num_codes();
  for (const auto& e : examples) {
    const auto emb = embedder.embed(e);
    const model::PredictionResult r = model::predict_embedded(emb, bundle);
    std::vector<double> ch(C), co(J, 0.0);
    for (const auto& p : r.chapters) ch[p.id] = p.score;
    for (const auto& p : r.codes) co[*bundle.space.code_index(p.code)] = p.score;
    s.chapter_scores.push_back(std::move(ch));
    s.code_scores.push_back(std::move(co));
    s.chapter_labels.push_back(e.chapter_labels);
    s.code_labels.push_back(e.code_labels);
  }
  return s;
}

EvalReport evaluate(const model::ModelBundle& bundle, const ScoredSet& s) {
  const std::size_t C = bundle.space.num_chapters();
  std::vector<double> tc(bundle.thresholds.begin(), bundle.thresholds.begin() + C);
  std::vector<double> tj(bundle.thresholds.begin() + C, bundle.thresholds.end());
  EvalReport r;
  r.examples = s.chapter_scores.size();
  if (r.examples == 0) return r;
  r.chapters = metrics::confusion(metrics::decide(s.chapter_scores, tc), s.chapter_labels);
  r.codes = metrics::confusion(metrics::decide(s.code_scores, tj), s.code_labels);
  r.chapter_micro_f1 = metrics::micro_f1(r.chapters);
  r.chapter_macro_f1 = metrics::macro_f1(r.chapters);
  r.code_micro_f1 = metrics::micro_f1(r.codes);
  r.code_macro_f1 = metrics::macro_f1(r.codes);
  return r;
}

EvalReport evaluate(const model::ModelBundle& bundle, const std::vector<Example>& examples,
                    const embed::Provider& provider) {
  return evaluate(bundle, score_examples(bundle, examples, provider));
}

json to_json(const EvalReport& r, const corpus::LabelSpace& space) {
  std::vector<std::string> ch_names, code_names;
  for (const auto& c : space.chapters()) ch_names.push_back(c.name);
  for (const auto& c : space.codes()) code_names.push_back(c.code);
  json j{{"examples", r.examples},
         {"chapter_micro_f1", r.chapter_micro_f1},
         {"chapter_macro_f1", r.chapter_macro_f1},
         {"code_micro_f1", r.code_micro_f1},
         {"code_macro_f1", r.code_macro_f1}};
  if (r.examples > 0) {
    j["chapters"] = metrics::report_json(r.chapters, ch_names);
    j["codes"] = metrics::report_json(r.codes, code_names);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Pipeline

model::ModelBundle make_bundle(const PreparedCorpus& d, ChapterStage chapter, CodeStage codes,
                               std::vector<double> thresholds, const TrainConfig& cfg) {
  model::ModelBundle b;
  b.space = d.space;
  b.vocab = d.vocab;
  b.abbreviations = d.abbreviations;
  b.chunk_length = cfg.chunk_length;
  b.provider = cfg.provider;
  b.chapter = std::move(chapter.model);
  b.code_models = std::move(codes.models);
  b.thresholds = std::move(thresholds);
  b.tau_ch = cfg.tau_ch;
  b.aggregation = cfg.aggregation;
  b.gating = model::GatingMode::kHard;
  b.meta = json{{"seed", cfg.seed},
                {"train_examples", d.splits.train.size()},
                {"splits", {{"train", cfg.splits.train}, {"val", cfg.splits.val}, {"test", cfg.splits.test}}}};
  b.finalize();
  return b;
}

namespace {

void append_history(std::ofstream& out, const History& h) {
  for (const auto& r : h.epochs) out << to_json(r).dump() << '\n';
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
  out << s;
}

}  // namespace

TrainOutcome train_pipeline(const PreparedCorpus& d, const embed::Provider& provider,
                            const TrainConfig& cfg, const std::string& run_dir) {
  validate(cfg);
  ChapterStage ch = train_chapter(d, provider, cfg);
  CodeStage codes = train_codes(d, ch.model, provider, cfg);
  TrainOutcome out;
  out.chapter_history = ch.history;
  out.code_histories = codes.histories;

  const std::size_t C = d.space.num_chapters();
  std::vector<double> thresholds(d.space.num_labels(), 0.5);
  out.bundle = make_bundle(d, std::move(ch), std::move(codes), thresholds, cfg);
  if (cfg.tune_thresholds && !d.splits.val.empty()) {
    const ScoredSet s = score_examples(out.bundle, d.splits.val, provider);
    const auto grid = metrics::default_grid();
    const auto tc = metrics::select_thresholds(s.chapter_scores, s.chapter_labels, grid);
    const auto tj = metrics::select_thresholds(s.code_scores, s.code_labels, grid);
    std::copy(tc.begin(), tc.end(), thresholds.begin());
    std::copy(tj.begin(), tj.end(), thresholds.begin() + static_cast<std::ptrdiff_t>(C));
    out.bundle.thresholds = thresholds;
    out.bundle.finalize();
  }
  out.val = evaluate(out.bundle, d.splits.val, provider);
  out.test = evaluate(out.bundle, d.splits.test, provider);

  if (!run_dir.empty()) {
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create run directory " + run_dir);
    write_text(fs::path(run_dir) / "config.json", to_json(cfg).dump(2) + "\n");
    std::ofstream m(fs::path(run_dir) / "metrics.jsonl", std::ios::trunc);
    append_history(m, out.chapter_history);
    for (const auto& h : out.code_histories) append_history(m, h);
    write_text(fs::path(run_dir) / "eval.json",
               json{{"fingerprint", out.bundle.fingerprint},
                    {"val", to_json(out.val, d.space)},
                    {"test", to_json(out.test, d.space)}}
                       .dump(2) +
                   "\n");
    model::save_bundle(out.bundle, (fs::path(run_dir) / "bundle").string());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kBalance: return "+balance";
    case Variant::kAugment: return "+augment";
    case Variant::kBalanceAugment: return "+balance+augment";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::kBaseline, Variant::kBalance, Variant::kAugment,
                    Variant::kBalanceAugment})
    if (variant_name(v) == name) return v;
  fail(ErrorCode::kConfig, "unknown ablation variant '" + name + "'");
}

json AblationTable::to_json() const {
  json rows_j = json::array();
  const AblationRow* base = nullptr;
  for (const auto& r : rows)
    if (r.ok && !base) base = &r;
  const AblationRow* prev = nullptr;
  for (const auto& r : rows) {
    json j{{"variant", variant_name(r.variant)}, {"ok", r.ok}};
    if (r.ok) {
      j["train_examples"] = r.train_examples;
      j["chapter_micro_f1"] = r.test.chapter_micro_f1;
      j["chapter_macro_f1"] = r.test.chapter_macro_f1;
      j["code_micro_f1"] = r.test.code_micro_f1;
      j["code_macro_f1"] = r.test.code_macro_f1;
      if (prev) {
        j["delta_chapter_micro_f1"] = r.test.chapter_micro_f1 - prev->test.chapter_micro_f1;
        j["delta_code_micro_f1"] = r.test.code_micro_f1 - prev->test.code_micro_f1;
      }
      prev = &r;
    } else {
      j["error"] = r.error;
    }
    rows_j.push_back(std::move(j));
  }
  return json{{"split", "test"}, {"thresholds", 0.5}, {"rows", rows_j}};
}

std::string AblationTable::to_csv() const {
  std::string s =
      "variant,chapter_micro_f1,chapter_macro_f1,code_micro_f1,code_macro_f1,"
      "delta_chapter_micro_f1,delta_code_micro_f1,error\n";
  const AblationRow* prev = nullptr;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    s += variant_name(r.variant);
    if (r.ok) {
      s += "," + num(r.test.chapter_micro_f1) + "," + num(r.test.chapter_macro_f1) + "," +
           num(r.test.code_micro_f1) + "," + num(r.test.code_macro_f1) + ",";
      if (prev) s += num(r.test.chapter_micro_f1 - prev->test.chapter_micro_f1);
      s += ",";
      if (prev) s += num(r.test.code_micro_f1 - prev->test.code_micro_f1);
      s += ",\n";
      prev = &r;
    } else {
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      s += ",,,,,,," + err + "\n";
    }
  }
  return s;
}

AblationTable run_ablation(const std::vector<Variant>& plan, const PreparedCorpus& d,
                           const embed::Provider& provider, const TrainConfig& cfg,
                           const std::string& run_dir) {
  require(!plan.empty(), ErrorCode::kConfig, "ablation plan is empty");
  AblationTable table;
  for (Variant v : plan) {
    TrainConfig vc = cfg;
    vc.balance = v == Variant::kBalance || v == Variant::kBalanceAugment;
    vc.augment = v == Variant::kAugment || v == Variant::kBalanceAugment;
    AblationRow row;
    row.variant = v;
    try {
      const TrainOutcome out = train_pipeline(d, provider, vc);
      row.train_examples = out.chapter_history.epochs.empty()
                               ? 0
                               : out.chapter_history.epochs.front().train_examples;
      row.test = out.test;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  if (!run_dir.empty()) {
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create run directory " + run_dir);
    write_text(fs::path(run_dir) / "config.json", to_json(cfg).dump(2) + "\n");
    write_text(fs::path(run_dir) / "ablation.json", table.to_json().dump(2) + "\n");
    write_text(fs::path(run_dir) / "ablation.csv", table.to_csv());
  }
  return table;
}

}  // namespace notecoder::train
