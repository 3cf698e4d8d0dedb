// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "corpus/dataset.hpp"
#include "corpus/label_space.hpp"
#include "corpus/sampling.hpp"
#include "corpus/synth.hpp"
#include "preprocess/chunker.hpp"
#include "support/generators.hpp"

using namespace notecoder;
using namespace notecoder::corpus;

namespace {

std::size_t chapter_named(const LabelSpace& s, const std::string& needle) {
  for (const auto& c : s.chapters())
    if (c.name.find(needle) != std::string::npos) return static_cast<std::size_t>(c.id);
  FAIL("no chapter named " << needle);
  return 0;
}

std::vector<std::size_t> counts_of(const std::vector<LabelVector>& rows,
                                   const std::vector<std::size_t>& keep) {
  std::vector<std::size_t> c(rows.empty() ? 0 : rows[0].size(), 0);
  for (std::size_t i : keep)
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += rows[i][k];
  return c;
}

LabelVector row(std::size_t k, std::initializer_list<std::size_t> on) {
  LabelVector r(k, 0);
  for (std::size_t i : on) r[i] = 1;
  return r;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("builtin chapters") {
  const auto& s = LabelSpace::builtin_chapters();
  CHECK(s.num_chapters() == 16);
  CHECK(s.num_codes() == 0);
  for (std::size_t i = 0; i < 16; ++i) CHECK(s.chapters()[i].id == static_cast<int>(i));
}

TEST_CASE("map_code_to_chapter") {
  const auto& s = LabelSpace::builtin_chapters();
  CHECK(map_code_to_chapter("428.0", s) ==
        static_cast<int>(chapter_named(s, "circulatory")));
  CHECK(map_code_to_chapter("401.9", s) == map_code_to_chapter("428.0", s));
  CHECK(map_code_to_chapter("V45.81", s) == static_cast<int>(chapter_named(s, "V codes")));
  CHECK(map_code_to_chapter("038.9", s) == static_cast<int>(chapter_named(s, "Infectious")));
  try {
    map_code_to_chapter("99x.1", s);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFormat);
  }
  for (const char* bad : {"", "12", "4280", "428.", "428.123", "X12.3", "V4"})
    CHECK_THROWS_AS(map_code_to_chapter(bad, s), Error);
}

TEST_CASE("map_code_to_chapter unmapped root") {
  const LabelSpace partial({Chapter{0, "circ", {parse_range("390-459")}}}, {});
  try {
    map_code_to_chapter("250.00", partial);
    FAIL("expected unmapped");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnmappedCode);
  }
}

TEST_CASE("every ICD-9 root maps to exactly one builtin chapter") {
  const auto& s = LabelSpace::builtin_chapters();
  for (int r = 1; r <= 999; ++r) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%03d", r);
    CHECK(map_code_to_chapter(buf, s) >= 0);
  }
  for (int r = 1; r <= 91; ++r) CHECK(map_code_to_chapter("V" + std::to_string(r / 10) + std::to_string(r % 10), s) >= 0);
}

TEST_CASE("select_top_codes") {
  CHECK(select_top_codes({{"A", 5}, {"B", 3}, {"C", 3}, {"D", 1}}, 2) ==
        std::vector<std::string>{"A", "B"});
  CHECK(select_top_codes({{"A", 5}}, 50) == std::vector<std::string>{"A"});
}

TEST_CASE("select_top_codes matches exhaustive sort") {
  std::mt19937_64 g(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, std::size_t> counts;
    const std::size_t n = gen::between(g, 1, 80);
    for (std::size_t i = 0; i < n; ++i)
      counts["C" + std::to_string(gen::between(g, 0, 200))] = gen::between(g, 1, 10);
    std::vector<std::pair<std::size_t, std::string>> all;
    for (const auto& [code, c] : counts) all.emplace_back(c, code);
    // Bubble sort: count descending, then code ascending.
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = 0; j + 1 < all.size() - i; ++j) {
        const auto& a = all[j];
        const auto& b = all[j + 1];
        if (a.first < b.first || (a.first == b.first && a.second > b.second))
          std::swap(all[j], all[j + 1]);
      }
    const std::size_t k = gen::between(g, 1, 60);
    std::vector<std::string> expect;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) expect.push_back(all[i].second);
    CHECK(select_top_codes(counts, k) == expect);
  }
}

TEST_CASE("label space JSON round trip and fingerprint") {
  const auto sc = synthesize(SynthSpec{.n_notes = 10});
  const auto& s = sc.space;
  CHECK(s.num_codes() == 50);
  CHECK(s.num_labels() == 66);
  const auto back = LabelSpace::from_json(s.to_json());
  CHECK(back.fingerprint() == s.fingerprint());
  CHECK(back.to_json() == s.to_json());
  std::size_t total = 0;
  for (std::size_t c = 0; c < 16; ++c) total += s.codes_in_chapter(c).size();
  CHECK(total == 50);
  for (const auto& code : s.codes())
    CHECK(map_code_to_chapter(code.code, s) == code.chapter);
}

TEST_CASE("label_vectors keeps chapter closure") {
  const auto sc = synthesize(SynthSpec{.n_notes = 200});
  LabelStats stats;
  for (const auto& n : sc.notes) {
    auto codes = n.codes;
    codes.push_back("799.9");  // valid, outside the 50
    codes.push_back("bogus");
    LabelVector ch, co;
    label_vectors(codes, sc.space, ch, co, &stats);
    for (std::size_t j = 0; j < 50; ++j)
      if (co[j]) CHECK(ch[static_cast<std::size_t>(sc.space.codes()[j].chapter)] == 1);
    CHECK(ch[static_cast<std::size_t>(map_code_to_chapter("799.9", sc.space))] == 1);
  }
  CHECK(stats.malformed_codes == 200);
}

TEST_CASE("undersample hand-traced example") {
  std::vector<LabelVector> rows;
  for (int i = 0; i < 4; ++i) rows.push_back(row(2, {0}));
  for (int i = 0; i < 2; ++i) rows.push_back(row(2, {1}));
  const auto r = undersample(rows, {1.0, 3});
  CHECK(r.kept.size() == 4);
  CHECK(counts_of(rows, r.kept) == std::vector<std::size_t>{2, 2});
  CHECK(r.cap == 2);
}

TEST_CASE("undersample balanced input unchanged") {
  std::vector<LabelVector> rows;
  for (int i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) rows.push_back(row(4, {k}));
  rows.push_back(row(4, {}));
  for (double rho : {1.0, 1.5, 3.0}) {
    const auto r = undersample(rows, {rho, 9});
    CHECK(r.kept.size() == rows.size());
  }
}

TEST_CASE("undersample never drops an example carrying the rarest label") {
  std::vector<LabelVector> rows;
  for (int i = 0; i < 30; ++i) rows.push_back(row(2, {0}));
  rows.push_back(row(2, {0, 1}));
  rows.push_back(row(2, {0, 1}));
  const auto r = undersample(rows, {1.0, 5});
  CHECK(std::count(r.kept.begin(), r.kept.end(), 30) == 1);
  CHECK(std::count(r.kept.begin(), r.kept.end(), 31) == 1);
  CHECK(counts_of(rows, r.kept) == std::vector<std::size_t>{2, 2});
}

TEST_CASE("undersample properties on random multi-label matrices") {
  std::mt19937_64 g(22);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t K = gen::between(g, 1, 8);
    const std::size_t N = gen::between(g, 1, 120);
    std::vector<double> p(K);
    for (auto& x : p) x = std::uniform_real_distribution<double>(0.02, 0.6)(g);
    std::vector<LabelVector> rows(N, LabelVector(K, 0));
    for (auto& r : rows)
      for (std::size_t k = 0; k < K; ++k) r[k] = gen::coin(g, p[k]);
    const double rho = std::uniform_real_distribution<double>(1.0, 3.0)(g);
    const auto res = undersample(rows, {rho, trial * 7ull});
    const auto before = counts_of(rows, [&] {
      std::vector<std::size_t> all(N);
      for (std::size_t i = 0; i < N; ++i) all[i] = i;
      return all;
    }());
    const auto after = counts_of(rows, res.kept);
    CHECK(std::is_sorted(res.kept.begin(), res.kept.end()));
    CHECK(std::adjacent_find(res.kept.begin(), res.kept.end()) == res.kept.end());
    CHECK(after == res.counts_after);
    std::size_t mn = 0;
    for (std::size_t c : before) if (c) mn = mn ? std::min(mn, c) : c;
    CHECK(res.cap == static_cast<std::size_t>(std::floor(rho * static_cast<double>(mn) + 1e-9)));
    for (std::size_t k = 0; k < K; ++k) {
      CHECK(after[k] <= before[k]);
      if (before[k]) CHECK(after[k] > 0);
    }
    // Fixed point: a surviving labelled row has a label at or under the cap.
    for (std::size_t i : res.kept) {
      bool any = false, protected_row = false;
      for (std::size_t k = 0; k < K; ++k)
        if (rows[i][k]) {
          any = true;
          protected_row = protected_row || after[k] <= res.cap;
        }
      if (any) CHECK(protected_row);
    }
    // Rows carrying no label are never removed.
    for (std::size_t i = 0; i < N; ++i)
      if (std::all_of(rows[i].begin(), rows[i].end(), [](auto v) { return v == 0; }))
        CHECK(std::binary_search(res.kept.begin(), res.kept.end(), i));
    CHECK(undersample(rows, {rho, trial * 7ull}).kept == res.kept);
  }
}

TEST_CASE("undersample rejects rho below one") {
  CHECK_THROWS_AS(undersample({row(1, {0})}, {0.5, 1}), Error);
}

namespace {

Example example_from(const std::string& id, const preprocess::SentenceList& s,
                     const preprocess::Vocabulary& v, std::size_t L) {
  Example e;
  e.note_id = id;
  e.subject_id = "p" + id;
  e.sentences = s;
  e.chunks = preprocess::chunk_and_tokenize(s, v, L);
  e.chapter_labels = LabelVector(16, 0);
  e.code_labels = LabelVector(50, 0);
  e.chapter_labels[3] = 1;
  e.code_labels[7] = 1;
  return e;
}

}  // namespace

TEST_CASE("augment_shuffle conserves sentences and labels") {
  const preprocess::SentenceList s{"alpha one.", "beta two two.", "gamma three.", "delta."};
  const auto v = preprocess::Vocabulary::build({"alpha one. beta two two. gamma three. delta."});
  const auto e = example_from("n1", s, v, 6);
  const auto copies = augment_shuffle(e, s, 5, 42, v, 6);
  REQUIRE(copies.size() == 5);
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < copies.size(); ++i) {
    auto got = copies[i].sentences;
    std::sort(got.begin(), got.end());
    CHECK(got == sorted);
    CHECK(copies[i].chapter_labels == e.chapter_labels);
    CHECK(copies[i].code_labels == e.code_labels);
    CHECK(copies[i].variant == static_cast<int>(i + 1));
    CHECK(copies[i].chunks == preprocess::chunk_and_tokenize(copies[i].sentences, v, 6));
    const auto perm = shuffle_permutation(s.size(), 42, "n1", i);
    for (std::size_t k = 0; k < s.size(); ++k) CHECK(copies[i].sentences[k] == s[perm[k]]);
  }
  CHECK(augment_shuffle(e, s, 5, 42, v, 6)[3].sentences == copies[3].sentences);
  CHECK(augment_shuffle(e, s, 0, 42, v, 6).empty());
}

TEST_CASE("augment_shuffle single sentence is identity") {
  const preprocess::SentenceList s{"only one sentence here."};
  const auto v = preprocess::Vocabulary::build({s[0]});
  const auto e = example_from("n2", s, v, 4);
  for (const auto& c : augment_shuffle(e, s, 3, 1, v, 4)) {
    CHECK(c.sentences == s);
    CHECK(c.chunks == e.chunks);
  }
}

TEST_CASE("shuffle_permutation is a permutation") {
  std::mt19937_64 g(23);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = gen::between(g, 0, 30);
    auto p = shuffle_permutation(n, g(), "note" + std::to_string(i), gen::between(g, 0, 5));
    std::sort(p.begin(), p.end());
    for (std::size_t k = 0; k < n; ++k) CHECK(p[k] == k);
  }
}

TEST_CASE("split_by_patient") {
  const auto sc = synthesize(SynthSpec{.n_notes = 3000, .seed = 5});
  const auto v = preprocess::Vocabulary::build({"x"});
  BuildOptions bo;
  bo.chunk_length = 16;
  const auto ex = build_examples(sc.notes, sc.space, v, bo);
  const auto parts = split_by_patient(ex, SplitRatios{}, 9);
  CHECK(parts.train.size() + parts.val.size() + parts.test.size() == ex.size());
  std::map<std::string, int> where;
  auto mark = [&](const std::vector<Example>& xs, int id) {
    for (const auto& e : xs) {
      auto [it, fresh] = where.emplace(e.subject_id, id);
      CHECK(it->second == id);
    }
  };
  mark(parts.train, 0);
  mark(parts.val, 1);
  mark(parts.test, 2);
  CHECK(split_by_patient({}, SplitRatios{}, 1).train.empty());
  CHECK_THROWS_AS(split_by_patient(ex, SplitRatios{0.5, 0.2, 0.2}, 1), Error);
}

TEST_CASE("split ratios over 1000 patients stay within 3 points") {
  std::size_t c[3] = {0, 0, 0};
  for (int p = 0; p < 1000; ++p)
    ++c[static_cast<int>(assign_split("subject" + std::to_string(p), SplitRatios{}, 77))];
  CHECK(std::abs(static_cast<double>(c[0]) / 1000 - 0.8) <= 0.03);
  CHECK(std::abs(static_cast<double>(c[1]) / 1000 - 0.1) <= 0.03);
  CHECK(std::abs(static_cast<double>(c[2]) / 1000 - 0.1) <= 0.03);
}

TEST_CASE("synthesize marginal") {
  SynthSpec spec;
  spec.n_notes = 10000;
  spec.label_marginals.assign(50, 0.01);
  spec.label_marginals[4] = 0.5;
  const auto sc = synthesize(spec);
  const std::string code = synthetic_codes()[4].code;
  std::size_t pos = 0;
  for (const auto& n : sc.notes) pos += std::count(n.codes.begin(), n.codes.end(), code);
  CHECK(std::abs(static_cast<double>(pos) / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("synthesize planted keywords") {
  SynthSpec spec;
  spec.n_notes = 400;
  spec.noise_rate = 0;
  const auto sc = synthesize(spec);
  const auto& codes = synthetic_codes();
  for (const auto& n : sc.notes) {
    std::set<std::string> words;
    std::istringstream in(n.text);
    for (std::string w; in >> w;) {
      while (!w.empty() && (w.back() == '.' || w.back() == ',')) w.pop_back();
      words.insert(w);
    }
    for (std::size_t l = 0; l < codes.size(); ++l) {
      const bool positive = std::count(n.codes.begin(), n.codes.end(), codes[l].code) > 0;
      bool seen = false;
      for (const auto& kw : keywords_for_label(l, spec.keywords_per_label)) seen = seen || words.count(kw);
      CHECK(seen == positive);
    }
  }
}

TEST_CASE("synthesize is deterministic and validates") {
  const auto a = synthesize(SynthSpec{.n_notes = 50, .seed = 3});
  const auto b = synthesize(SynthSpec{.n_notes = 50, .seed = 3});
  const auto c = synthesize(SynthSpec{.n_notes = 50, .seed = 4});
  REQUIRE(a.notes.size() == 50);
  bool same = true, diff = false;
  for (std::size_t i = 0; i < 50; ++i) {
    same = same && a.notes[i].text == b.notes[i].text && a.notes[i].codes == b.notes[i].codes;
    diff = diff || a.notes[i].text != c.notes[i].text;
  }
  CHECK(same);
  CHECK(diff);
  CHECK_THROWS_AS(synthesize(SynthSpec{.n_notes = 0}), Error);
  CHECK_THROWS_AS(synthesize(SynthSpec{.noise_rate = 1.0}), Error);
  SynthSpec bad;
  bad.label_marginals.assign(49, 0.1);
  CHECK_THROWS_AS(synthesize(bad), Error);
  CHECK_THROWS_AS(synth_spec_from_json({{"n_notes", 5}, {"bogus", 1}}), Error);
  CHECK(synth_spec_from_json(to_json(SynthSpec{.n_notes = 9})).n_notes == 9);
}

}  // TEST_SUITE
