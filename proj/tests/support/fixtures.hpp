// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "corpus/synth.hpp"
#include "model/bundle.hpp"
#include "support/oracles.hpp"

namespace fixture {

using namespace notecoder;

inline corpus::SynthCorpus small_corpus(std::size_t n, std::uint64_t seed) {
  corpus::SynthSpec s;
  s.n_notes = n;
  s.vocab_size = 300;
  s.seed = seed;
  return corpus::synthesize(s);
}

// Untrained bundle over the synthetic label space with randomised weights,
// so scores spread over (0, 1).
inline model::ModelBundle random_bundle(std::uint64_t seed, std::size_t dim = 16,
                                        std::size_t chunk_length = 24) {
  const auto corp = small_corpus(60, seed);
  std::vector<std::string> texts;
  for (const auto& n : corp.notes) texts.push_back(n.text);

  model::ModelBundle b;
  b.space = corp.space;
  b.vocab = preprocess::Vocabulary::build(texts);
  b.chunk_length = chunk_length;
  b.provider.dim = dim;
  b.provider.seed = seed;

  std::mt19937_64 g(seed);
  const std::size_t C = b.space.num_chapters();
  b.chapter.spec = nn::NetSpec::text_cnn(dim, {1, 2}, 4, 0, C);
  b.chapter.params = nn::init_params(b.chapter.spec, seed);
  oracle::randomize(b.chapter.params, g, 0.6);
  b.chapter.params.round_to_float();
  const std::size_t aux = C + b.chapter.spec.conv.features();
  for (std::size_t c = 0; c < C; ++c) {
    model::CodeModel m;
    m.chapter_id = c;
    m.code_indices = b.space.codes_in_chapter(c);
    m.label_space_fingerprint = b.space.fingerprint_hex();
    if (!m.code_indices.empty()) {
      m.spec = nn::NetSpec::text_cnn(dim, {2}, 3, 0, m.code_indices.size(), aux);
      m.params = nn::init_params(m.spec, seed + c + 1);
      oracle::randomize(m.params, g, 0.6);
      m.params.round_to_float();
    }
    b.code_models.push_back(std::move(m));
  }
  b.thresholds.assign(b.space.num_labels(), 0.5);
  b.finalize();
  return b;
}

}  // namespace fixture
