// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <unistd.h>

#include "common/error.hpp"
#include "embed/provider.hpp"
#include "model/bundle.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace notecoder;
using namespace notecoder::model;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::vector<EmbeddingTensor> embed_text(const std::string& text, const ModelBundle& b,
                                        const embed::Provider& p) {
  const auto chunks = note_chunks(text, b);
  std::vector<embed::ChunkRef> refs(chunks.size());
  return p.embed_batch(chunks, refs);
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("notecoder_test_" + name + "_" +
                                              std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

std::string long_note(std::mt19937_64& g) {
  std::string text;
  const std::size_t n = gen::between(g, 2, 12);
  for (std::size_t i = 0; i < n; ++i) text += gen::clinical_text(g) + " kwa kwb filler. ";
  return text;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("chapter scores for one chunk equal a plain forward pass") {
  const auto b = fixture::random_bundle(3);
  std::mt19937_64 g(5);
  const auto x = oracle::random_embedding(g, b.chunk_length, b.provider.dim, 10);
  const std::vector<EmbeddingTensor> one{x};
  const auto out = chapter_forward_note(one, b.chapter);
  CHECK(out.scores == nn::forward(x, {}, b.chapter.params, b.chapter.spec));
  CHECK(out.features == nn::conv_features(x, b.chapter.params, b.chapter.spec));
}

TEST_CASE("max aggregation ignores duplicates and chunk order") {
  const auto b = fixture::random_bundle(4);
  std::mt19937_64 g(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EmbeddingTensor> chunks;
    const std::size_t n = gen::between(g, 1, 5);
    for (std::size_t i = 0; i < n; ++i)
      chunks.push_back(oracle::random_embedding(g, b.chunk_length, b.provider.dim,
                                                gen::between(g, 1, b.chunk_length)));
    const auto base = chapter_forward_note(chunks, b.chapter);
    auto dup = chunks;
    dup.push_back(chunks[gen::between(g, 0, n - 1)]);
    CHECK(chapter_forward_note(dup, b.chapter).scores == base.scores);
    auto perm = chunks;
    std::shuffle(perm.begin(), perm.end(), g);
    CHECK(chapter_forward_note(perm, b.chapter).scores == base.scores);
    // Max over chunks of per-chunk outputs.
    for (std::size_t c = 0; c < base.scores.size(); ++c) {
      double m = 0;
      for (const auto& x : chunks)
        m = std::max(m, nn::forward(x, {}, b.chapter.params, b.chapter.spec)[c]);
      CHECK(base.scores[c] == m);
    }
  }
}

TEST_CASE("mean aggregation is unchanged by duplicating every chunk") {
  const auto b = fixture::random_bundle(4);
  std::mt19937_64 g(7);
  std::vector<EmbeddingTensor> chunks;
  for (int i = 0; i < 3; ++i)
    chunks.push_back(oracle::random_embedding(g, b.chunk_length, b.provider.dim, 12));
  auto twice = chunks;
  twice.insert(twice.end(), chunks.begin(), chunks.end());
  const auto a = chapter_forward_note(chunks, b.chapter, Aggregation::kMean).scores;
  const auto c = chapter_forward_note(twice, b.chapter, Aggregation::kMean).scores;
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(c[k]).epsilon(1e-12));
}

TEST_CASE("code forward respects the active mask") {
  const auto b = fixture::random_bundle(8);
  std::mt19937_64 g(9);
  const std::vector<EmbeddingTensor> chunks{
      oracle::random_embedding(g, b.chunk_length, b.provider.dim, 9)};
  const auto ch = chapter_forward_note(chunks, b.chapter);
  const std::size_t C = b.space.num_chapters(), K = b.space.num_codes();
  const auto fp = b.space.fingerprint_hex();

  const auto none = code_forward_note(chunks, ch, b.code_models, std::vector<bool>(C, false), K, fp);
  for (std::size_t j = 0; j < K; ++j) {
    CHECK(none.gated[j] == 0);
    CHECK(none.scores[j] == 0.0);
  }
  const auto all = code_forward_note(chunks, ch, b.code_models, std::vector<bool>(C, true), K, fp);
  for (std::size_t j = 0; j < K; ++j) {
    CHECK(all.gated[j] == 1);
    CHECK(all.scores[j] > 0.0);
    CHECK(all.scores[j] < 1.0);
  }
  CHECK(code_of([&] {
          code_forward_note(chunks, ch, b.code_models, std::vector<bool>(C, true), K, "deadbeef");
        }) == ErrorCode::kCompatibility);
  CHECK(code_of([&] {
          code_forward_note(chunks, ch, b.code_models, std::vector<bool>(C - 1, true), K, fp);
        }) == ErrorCode::kShape);
}

TEST_CASE("hard gating equals running every code model then masking") {
  const auto b = fixture::random_bundle(10);
  const embed::HashedProvider p(b.provider.dim, b.provider.seed);
  std::mt19937_64 g(11);
  std::size_t some_active = 0, some_inactive = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto chunks = embed_text(long_note(g), b, p);
    const auto r = predict_embedded(chunks, b);
    const auto ch = chapter_forward_note(chunks, b.chapter);
    const auto all = code_forward_note(chunks, ch, b.code_models,
                                       std::vector<bool>(b.space.num_chapters(), true),
                                       b.space.num_codes(), b.space.fingerprint_hex());
    std::vector<std::string> want;
    for (std::size_t j = 0; j < b.space.num_codes(); ++j) {
      const auto c = static_cast<std::size_t>(b.space.codes()[j].chapter);
      if (ch.scores[c] >= b.tau_ch) {
        want.push_back(b.space.codes()[j].code);
        ++some_active;
      } else {
        ++some_inactive;
      }
    }
    std::vector<std::string> got;
    for (const auto& cp : r.codes) {
      got.push_back(cp.code);
      CHECK(cp.score == all.scores[*b.space.code_index(cp.code)]);
    }
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
  }
  CHECK(some_active > 0);
  CHECK(some_inactive > 0);
}

TEST_CASE("soft gating scores every code as code times chapter score") {
  auto b = fixture::random_bundle(12);
  b.gating = GatingMode::kSoft;
  b.finalize();
  const embed::HashedProvider p(b.provider.dim, b.provider.seed);
  std::mt19937_64 g(13);
  const auto chunks = embed_text(long_note(g), b, p);
  const auto r = predict_embedded(chunks, b);
  CHECK(r.codes.size() == b.space.num_codes());
  const auto ch = chapter_forward_note(chunks, b.chapter);
  const auto all = code_forward_note(chunks, ch, b.code_models,
                                     std::vector<bool>(b.space.num_chapters(), true),
                                     b.space.num_codes(), b.space.fingerprint_hex());
  for (const auto& cp : r.codes) {
    const auto j = *b.space.code_index(cp.code);
    CHECK(cp.score == all.scores[j] * ch.scores[cp.chapter_id]);
    CHECK(cp.decided == (cp.score >= b.code_threshold(j)));
  }
}

TEST_CASE("predict_note reports every chapter and sorted codes") {
  const auto b = fixture::random_bundle(14);
  const embed::HashedProvider p(b.provider.dim, b.provider.seed);
  CHECK(b.space.num_labels() == 66);
  const auto r = predict_note("Pt with sob. Chest pain on exertion. kwa kwb.", b, p);
  CHECK(r.chapters.size() == 16);
  for (std::size_t c = 0; c < r.chapters.size(); ++c) {
    CHECK(r.chapters[c].id == c);
    CHECK(r.chapters[c].decided == (r.chapters[c].score >= b.chapter_threshold(c)));
  }
  for (std::size_t k = 1; k < r.codes.size(); ++k) CHECK(r.codes[k - 1].score >= r.codes[k].score);
  CHECK(r.fingerprint == b.fingerprint);

  PredictOptions top;
  top.top_k_codes = 2;
  const auto t = predict_note("Pt with sob. Chest pain on exertion. kwa kwb.", b, p, top);
  CHECK(t.codes.size() == std::min<std::size_t>(2, r.codes.size()));
  const auto j = to_json(r);
  CHECK(j["chapters"].size() == 16);
  CHECK(j["fingerprint"] == b.fingerprint);
}

TEST_CASE("predict_note errors") {
  const auto b = fixture::random_bundle(15);
  const embed::HashedProvider p(b.provider.dim, b.provider.seed);
  CHECK(code_of([&] { predict_note("[**Name**] [**Date**]", b, p); }) == ErrorCode::kEmptyNote);
  CHECK(code_of([&] { predict_note("   \n\t", b, p); }) == ErrorCode::kEmptyNote);
  PredictOptions opt;
  opt.label_space_fingerprint = "0000000000000000";
  CHECK(code_of([&] { predict_note("chest pain", b, p, opt); }) == ErrorCode::kCompatibility);
  opt.label_space_fingerprint = b.space.fingerprint_hex();
  CHECK_NOTHROW(predict_note("chest pain", b, p, opt));
  const embed::HashedProvider wrong(b.provider.dim + 1, 1);
  CHECK(code_of([&] { predict_note("chest pain", b, wrong); }) == ErrorCode::kCompatibility);
}

TEST_CASE("bundle validation") {
  auto b = fixture::random_bundle(16);
  b.thresholds.pop_back();
  CHECK(code_of([&] { b.validate(); }) == ErrorCode::kShape);
  b = fixture::random_bundle(16);
  b.tau_ch = 1.0;
  CHECK(code_of([&] { b.validate(); }) == ErrorCode::kConfig);
  b = fixture::random_bundle(16);
  b.code_models[1].code_indices.clear();
  CHECK(code_of([&] { b.validate(); }) == ErrorCode::kCompatibility);
}

TEST_CASE("bundle save and load round trip") {
  const auto b = fixture::random_bundle(17);
  const auto dir = scratch_dir("bundle");
  save_bundle(b, dir.string());
  const auto back = load_bundle(dir.string());
  CHECK(back.fingerprint == b.fingerprint);
  CHECK(back.space.fingerprint() == b.space.fingerprint());
  CHECK(back.thresholds == b.thresholds);
  const embed::HashedProvider p(b.provider.dim, b.provider.seed);
  std::mt19937_64 g(18);
  for (int trial = 0; trial < 10; ++trial) {
    const auto text = long_note(g);
    const auto r1 = to_json(predict_note(text, b, p));
    const auto r2 = to_json(predict_note(text, back, p));
    CHECK(r1 == r2);
  }
  fs::remove_all(dir);
}

TEST_CASE("tampered bundles fail to load") {
  const auto b = fixture::random_bundle(19);
  const auto dir = scratch_dir("tamper");
  save_bundle(b, dir.string());
  const auto ckpt = dir / "chapter.ckpt";
  std::string bytes;
  {
    std::ifstream in(ckpt, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const fs::path& f, const std::string& s) {
    std::ofstream out(f, std::ios::binary | std::ios::trunc);
    out << s;
  };
  write(ckpt, bytes.substr(0, bytes.size() / 2));
  CHECK(code_of([&] { load_bundle(dir.string()); }) == ErrorCode::kLoad);
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x11;
  write(ckpt, flipped);
  CHECK(code_of([&] { load_bundle(dir.string()); }) == ErrorCode::kLoad);
  write(ckpt, bytes);
  CHECK_NOTHROW(load_bundle(dir.string()));
  write(dir / "manifest.json", "{not json");
  CHECK(code_of([&] { load_bundle(dir.string()); }) == ErrorCode::kLoad);
  fs::remove_all(dir);
}

}  // TEST_SUITE
