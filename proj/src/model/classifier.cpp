// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "model/classifier.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace notecoder::model {

std::string to_string(Aggregation a) { return a == Aggregation::kMax ? "max" : "mean"; }
std::string to_string(GatingMode g) { return g == GatingMode::kHard ? "hard" : "soft"; }

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "max") return Aggregation::kMax;
  if (s == "mean") return Aggregation::kMean;
  fail(ErrorCode::kConfig, "unknown aggregation '" + s + "'");
}

GatingMode gating_from_string(const std::string& s) {
  if (s == "hard") return GatingMode::kHard;
  if (s == "soft") return GatingMode::kSoft;
  fail(ErrorCode::kConfig, "unknown gating mode '" + s + "'");
}

namespace {

template <class PerChunk>
NotePass aggregate(std::size_t n_chunks, const nn::NetSpec& spec, Aggregation aggregation,
                   bool keep_caches, PerChunk&& run) {
  require(n_chunks > 0, ErrorCode::kEmptyNote, "note has no chunks");
  NotePass pass;
  pass.chunks = n_chunks;
  const std::size_t K = spec.out_dim();
  const std::size_t F = spec.conv.features();
  pass.probs.assign(K, aggregation == Aggregation::kMax ? -1.0 : 0.0);
  pass.features.assign(F, aggregation == Aggregation::kMax ? -1.0 : 0.0);
  pass.source_chunk.assign(K, 0);
  if (keep_caches) pass.caches.resize(n_chunks);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    nn::ForwardCache local;
    nn::ForwardCache* cache = keep_caches ? &pass.caches[c] : &local;
    const std::vector<double> probs = run(c, cache);
    for (std::size_t k = 0; k < K; ++k) {
      if (aggregation == Aggregation::kMax) {
        if (probs[k] > pass.probs[k]) {
          pass.probs[k] = probs[k];
          pass.source_chunk[k] = c;
        }
      } else {
        pass.probs[k] += probs[k];
      }
    }
    for (std::size_t f = 0; f < F; ++f) {
      const double v = cache->features[f];
      if (aggregation == Aggregation::kMax) pass.features[f] = std::max(pass.features[f], v);
      else pass.features[f] += v;
    }
  }
  if (aggregation == Aggregation::kMean) {
    const double inv = 1.0 / static_cast<double>(n_chunks);
    for (double& p : pass.probs) p *= inv;
    for (double& f : pass.features) f *= inv;
  }
  return pass;
}

}  // namespace

NotePass forward_note(std::span<const EmbeddingTensor> chunks, std::span<const double> aux,
                      const nn::ParamSet& params, const nn::NetSpec& spec,
                      Aggregation aggregation, bool keep_caches,
                      std::span<const double> input_scale) {
  return aggregate(chunks.size(), spec, aggregation, keep_caches,
                   [&](std::size_t c, nn::ForwardCache* cache) {
                     return nn::forward(chunks[c], aux, params, spec, cache, input_scale);
                   });
}

NotePass forward_note_from_features(std::span<const std::vector<double>> chunk_features,
                                    std::span<const double> aux, const nn::ParamSet& params,
                                    const nn::NetSpec& spec, Aggregation aggregation,
                                    bool keep_caches,
                                    std::span<const double> input_scale) {
  return aggregate(chunk_features.size(), spec, aggregation, keep_caches,
                   [&](std::size_t c, nn::ForwardCache* cache) {
                     return nn::forward_from_features(chunk_features[c], aux, params, spec,
                                                      cache, input_scale);
                   });
}

void backward_note(const NotePass& pass, std::span<const double> labels,
                   const nn::ParamSet& params, const nn::NetSpec& spec,
                   Aggregation aggregation, nn::GradSet& grads) {
  require(pass.caches.size() == pass.chunks && pass.chunks > 0, ErrorCode::kUsage,
          "backward_note needs a pass with caches");
  const std::size_t K = spec.out_dim();
  require(labels.size() == K, ErrorCode::kShape, "label vector length != outputs");
  // d loss / d note-logit, in the single-chunk sense.
  const std::vector<double> g = nn::bce_logit_grad(pass.probs, labels);
  std::vector<double> dlogits(K);
  for (std::size_t c = 0; c < pass.chunks; ++c) {
    const auto& probs = pass.caches[c].probs;
    bool any = false;
    for (std::size_t k = 0; k < K; ++k) {
      if (aggregation == Aggregation::kMax) {
        dlogits[k] = pass.source_chunk[k] == c ? g[k] : 0.0;
      } else {
        // dL/dp_note * dp_note/dp_c * dp_c/dz_c, with dL/dp_note =
        // g / (p (1 - p)).
        const double p = pass.probs[k];
        const double pc = probs[k];
        const double denom = p * (1.0 - p);
        dlogits[k] = denom > 0 ? g[k] / denom * pc * (1.0 - pc) /
                                     static_cast<double>(pass.chunks)
                               : 0.0;
      }
      any = any || dlogits[k] != 0.0;
    }
    if (any) nn::backward_from_logits(pass.caches[c], dlogits, params, spec, grads);
  }
}

ChapterOutput chapter_forward_note(std::span<const EmbeddingTensor> chunks,
                                   const ChapterModel& model, Aggregation aggregation) {
  NotePass pass = forward_note(chunks, {}, model.params, model.spec, aggregation, false);
  return ChapterOutput{std::move(pass.probs), std::move(pass.features)};
}

std::vector<double> code_model_aux(const ChapterOutput& chapter) {
  std::vector<double> aux = chapter.scores;
  aux.insert(aux.end(), chapter.features.begin(), chapter.features.end());
  return aux;
}

CodeOutput code_forward_note(std::span<const EmbeddingTensor> chunks,
                             const ChapterOutput& chapter,
                             std::span<const CodeModel> models,
                             const std::vector<bool>& active, std::size_t num_codes,
                             const std::string& label_space_fingerprint,
                             Aggregation aggregation) {
  require(active.size() == chapter.scores.size(), ErrorCode::kShape,
          "active chapter mask has wrong length");
  CodeOutput out;
  out.scores.assign(num_codes, 0.0);
  out.gated.assign(num_codes, 0);
  const std::vector<double> aux = code_model_aux(chapter);
  for (const auto& m : models) {
    require(m.chapter_id < active.size(), ErrorCode::kShape, "code model chapter out of range");
    if (!active[m.chapter_id] || m.empty()) continue;
    require(m.label_space_fingerprint == label_space_fingerprint, ErrorCode::kCompatibility,
            "code model for chapter " + std::to_string(m.chapter_id) +
                " was built for label space " + m.label_space_fingerprint + ", expected " +
                label_space_fingerprint);
    const NotePass pass = forward_note(chunks, aux, m.params, m.spec, aggregation, false);
    for (std::size_t j = 0; j < m.code_indices.size(); ++j) {
      const std::size_t code = m.code_indices[j];
      require(code < num_codes, ErrorCode::kShape, "code index out of range");
      out.scores[code] = pass.probs[j];
      out.gated[code] = 1;
    }
  }
  return out;
}

std::vector<bool> active_chapters(std::span<const double> chapter_scores, double tau) {
  std::vector<bool> active(chapter_scores.size());
  for (std::size_t c = 0; c < chapter_scores.size(); ++c) active[c] = chapter_scores[c] >= tau;
  return active;
}

}  // namespace notecoder::model
