// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "model/bundle.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/random.hpp"
#include "preprocess/chunker.hpp"

namespace notecoder::model {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string code_file(std::size_t chapter) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "code_%02zu.ckpt", chapter);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::kLoad, "missing bundle file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + p.string());
}

std::string vocab_text(const preprocess::Vocabulary& v) {
  std::string s;
  for (const auto& t : v.tokens()) {
    s += t;
    s += '\n';
  }
  return s;
}

json thresholds_json(const ModelBundle& b) {
  const std::size_t C = b.space.num_chapters();
  json ch = json::array(), co = json::array();
  for (std::size_t i = 0; i < b.thresholds.size(); ++i) (i < C ? ch : co).push_back(b.thresholds[i]);
  return json{{"chapters", ch}, {"codes", co}};
}

std::string chapter_ckpt(const ModelBundle& b) {
  nn::Checkpoint ck{b.chapter.spec, b.chapter.params,
                    json{{"role", "chapter"}, {"label_space", b.space.fingerprint_hex()}}};
  return nn::serialize_checkpoint(ck);
}

std::string code_ckpt(const CodeModel& m) {
  json codes = json::array();
  for (auto i : m.code_indices) codes.push_back(i);
  nn::Checkpoint ck{m.spec, m.params,
                    json{{"role", "code"},
                         {"chapter", m.chapter_id},
                         {"codes", codes},
                         {"label_space", m.label_space_fingerprint}}};
  return nn::serialize_checkpoint(ck);
}

// File name -> bytes, manifest excluded, in a fixed order.
std::vector<std::pair<std::string, std::string>> bundle_files(const ModelBundle& b) {
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("labelspace.json", b.space.to_json().dump(2) + "\n");
  files.emplace_back("vocab.txt", vocab_text(b.vocab));
  files.emplace_back("abbreviations.tsv", b.abbreviations.to_tsv());
  files.emplace_back("thresholds.json", thresholds_json(b).dump(2) + "\n");
  files.emplace_back("chapter.ckpt", chapter_ckpt(b));
  for (const auto& m : b.code_models)
    if (!m.empty()) files.emplace_back(code_file(m.chapter_id), code_ckpt(m));
  return files;
}

json settings_json(const ModelBundle& b) {
  return json{{"tau_ch", b.tau_ch},
              {"chunk_length", b.chunk_length},
              {"aggregation", to_string(b.aggregation)},
              {"gating", to_string(b.gating)},
              {"provider", embed::to_json(b.provider)}};
}

std::string fingerprint_of(const std::vector<std::pair<std::string, std::string>>& files,
                           const json& settings) {
  std::uint64_t h = fnv1a64(settings.dump());
  for (const auto& [name, bytes] : files) {
    h = mix(h, name);
    h = mix(h, fnv1a64(bytes));
  }
  return hex64(h);
}

}  // namespace

void ModelBundle::validate() const {
  const std::size_t C = space.num_chapters();
  require(C > 0, ErrorCode::kConfig, "bundle label space has no chapters");
  require(thresholds.size() == space.num_labels(), ErrorCode::kShape,
          "bundle has " + std::to_string(thresholds.size()) + " thresholds, expected " +
              std::to_string(space.num_labels()));
  for (double t : thresholds)
    require(t > 0.0 && t < 1.0, ErrorCode::kConfig, "threshold outside (0, 1)");
  require(tau_ch > 0.0 && tau_ch < 1.0, ErrorCode::kConfig, "tau_ch outside (0, 1)");
  require(chunk_length >= 2, ErrorCode::kConfig, "chunk length must be >= 2");
  require(chapter.spec.out_dim() == C, ErrorCode::kShape, "chapter model output != chapters");
  require(chapter.spec.aux_dim == 0, ErrorCode::kShape, "chapter model takes no aux input");
  require(chapter.spec.conv.input_dim == provider.dim, ErrorCode::kShape,
          "chapter model input dim != provider dim");
  require(chapter.params.same_shapes(nn::make_params(chapter.spec)), ErrorCode::kShape,
          "chapter parameters do not match spec");
  require(code_models.size() == C, ErrorCode::kShape, "need one code model per chapter");
  const std::size_t aux = C + chapter.spec.conv.features();
  for (std::size_t c = 0; c < C; ++c) {
    const CodeModel& m = code_models[c];
    require(m.chapter_id == c, ErrorCode::kShape, "code models out of chapter order");
    require(m.code_indices == space.codes_in_chapter(c), ErrorCode::kCompatibility,
            "code model " + std::to_string(c) + " covers different codes than the label space");
    if (m.empty()) continue;
    require(m.spec.out_dim() == m.code_indices.size(), ErrorCode::kShape,
            "code model output != chapter codes");
    require(m.spec.aux_dim == aux, ErrorCode::kShape, "code model aux dim mismatch");
    require(m.spec.conv.input_dim == provider.dim, ErrorCode::kShape,
            "code model input dim != provider dim");
    require(m.params.same_shapes(nn::make_params(m.spec)), ErrorCode::kShape,
            "code model parameters do not match spec");
  }
}

std::string ModelBundle::compute_fingerprint() const {
  return fingerprint_of(bundle_files(*this), settings_json(*this));
}

void save_bundle(const ModelBundle& bundle, const std::string& dir) {
  bundle.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create bundle directory " + dir + ": " + ec.message());
  const auto files = bundle_files(bundle);
  const json settings = settings_json(bundle);
  json checksums = json::object();
  for (const auto& [name, bytes] : files) {
    write_file(fs::path(dir) / name, bytes);
    checksums[name] = hex64(fnv1a64(bytes));
  }
  json code_models = json::array();
  for (const auto& m : bundle.code_models) {
    json codes = json::array();
    for (auto i : m.code_indices) codes.push_back(i);
    code_models.push_back(json{{"chapter", m.chapter_id},
                               {"codes", codes},
                               {"file", m.empty() ? json(nullptr) : json(code_file(m.chapter_id))}});
  }
  json manifest{{"format", "notecoder.bundle"},
                {"version", kBundleVersion},
                {"fingerprint", fingerprint_of(files, settings)},
                {"label_space_fingerprint", bundle.space.fingerprint_hex()},
                {"vocab_fingerprint", hex64(bundle.vocab.fingerprint())},
                {"settings", settings},
                {"code_models", code_models},
                {"files", checksums},
                {"meta", bundle.meta}};
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

ModelBundle load_bundle(const std::string& dir) {
  const fs::path root(dir);
  json manifest;
  try {
    manifest = json::parse(read_file(root / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::kLoad, std::string("bad bundle manifest: ") + e.what());
  }
  try {
    if (manifest.at("format") != "notecoder.bundle")
      fail(ErrorCode::kLoad, "not a notecoder bundle: " + dir);
    if (manifest.at("version").get<int>() != kBundleVersion)
      fail(ErrorCode::kLoad, "unsupported bundle version " + manifest.at("version").dump());

    auto checked = [&](const std::string& name) {
      std::string bytes = read_file(root / name);
      const auto& sums = manifest.at("files");
      if (!sums.contains(name)) fail(ErrorCode::kLoad, "manifest has no checksum for " + name);
      if (sums.at(name).get<std::string>() != hex64(fnv1a64(bytes)))
        fail(ErrorCode::kLoad, "checksum mismatch in " + (root / name).string());
      return bytes;
    };

    ModelBundle b;
    b.space = corpus::LabelSpace::from_json(json::parse(checked("labelspace.json")));
    if (b.space.fingerprint_hex() != manifest.at("label_space_fingerprint").get<std::string>())
      fail(ErrorCode::kLoad, "label space fingerprint does not match manifest");
    {
      std::vector<std::string> tokens;
      std::istringstream in(checked("vocab.txt"));
      for (std::string line; std::getline(in, line);) tokens.push_back(line);
      b.vocab = preprocess::Vocabulary(std::move(tokens));
    }
    b.abbreviations = preprocess::AbbreviationTable::parse_tsv(checked("abbreviations.tsv"));
    {
      const json t = json::parse(checked("thresholds.json"));
      for (const auto& v : t.at("chapters")) b.thresholds.push_back(v.get<double>());
      for (const auto& v : t.at("codes")) b.thresholds.push_back(v.get<double>());
    }
    const json& s = manifest.at("settings");
    b.tau_ch = s.at("tau_ch").get<double>();
    b.chunk_length = s.at("chunk_length").get<std::size_t>();
    b.aggregation = aggregation_from_string(s.at("aggregation").get<std::string>());
    b.gating = gating_from_string(s.at("gating").get<std::string>());
    b.provider = embed::provider_config_from_json(s.at("provider"));

    nn::Checkpoint ch = nn::deserialize_checkpoint(checked("chapter.ckpt"));
    b.chapter = ChapterModel{std::move(ch.spec), std::move(ch.params)};
    for (const auto& entry : manifest.at("code_models")) {
      CodeModel m;
      m.chapter_id = entry.at("chapter").get<std::size_t>();
      m.code_indices = entry.at("codes").get<std::vector<std::size_t>>();
      m.label_space_fingerprint = b.space.fingerprint_hex();
      if (!entry.at("file").is_null()) {
        nn::Checkpoint ck = nn::deserialize_checkpoint(checked(entry.at("file").get<std::string>()));
        m.spec = std::move(ck.spec);
        m.params = std::move(ck.params);
        m.label_space_fingerprint = ck.meta.value("label_space", std::string());
      }
      b.code_models.push_back(std::move(m));
    }
    b.meta = manifest.value("meta", json::object());
    b.validate();
    b.fingerprint = b.compute_fingerprint();
    if (b.fingerprint != manifest.at("fingerprint").get<std::string>())
      fail(ErrorCode::kLoad, "bundle fingerprint does not match its contents");
    return b;
  } catch (const json::exception& e) {
    fail(ErrorCode::kLoad, std::string("bad bundle: ") + e.what());
  }
}

json to_json(const PredictionResult& r) {
  json chapters = json::array();
  for (const auto& c : r.chapters)
    chapters.push_back(
        json{{"id", c.id}, {"name", c.name}, {"score", c.score}, {"decided", c.decided}});
  json codes = json::array();
  for (const auto& c : r.codes)
    codes.push_back(json{{"code", c.code},
                         {"description", c.description},
                         {"score", c.score},
                         {"chapter_id", c.chapter_id},
                         {"decided", c.decided}});
  return json{{"chapters", chapters}, {"codes", codes}, {"fingerprint", r.fingerprint}};
}

std::vector<preprocess::TokenChunk> note_chunks(std::string_view text, const ModelBundle& bundle) {
  const auto sentences = preprocess::clean_and_split(text, bundle.abbreviations);
  if (sentences.empty()) fail(ErrorCode::kEmptyNote, "note is empty after cleaning");
  auto chunks = preprocess::chunk_and_tokenize(sentences, bundle.vocab, bundle.chunk_length);
  if (chunks.empty()) fail(ErrorCode::kEmptyNote, "note has no tokens after cleaning");
  return chunks;
}

PredictionResult predict_embedded(std::span<const EmbeddingTensor> chunks,
                                  const ModelBundle& bundle) {
  const auto& space = bundle.space;
  const std::size_t C = space.num_chapters();
  const ChapterOutput ch = chapter_forward_note(chunks, bundle.chapter, bundle.aggregation);
  const bool hard = bundle.gating == GatingMode::kHard;
  const std::vector<bool> active =
      hard ? active_chapters(ch.scores, bundle.tau_ch) : std::vector<bool>(C, true);
  const CodeOutput co = code_forward_note(chunks, ch, bundle.code_models, active,
                                          space.num_codes(), space.fingerprint_hex(),
                                          bundle.aggregation);
  PredictionResult r;
  r.fingerprint = bundle.fingerprint;
  for (std::size_t c = 0; c < C; ++c)
    r.chapters.push_back(ChapterPrediction{c, space.chapters()[c].name, ch.scores[c],
                                           ch.scores[c] >= bundle.chapter_threshold(c)});
  for (std::size_t j = 0; j < space.num_codes(); ++j) {
    if (!co.gated[j]) continue;
    const auto& label = space.codes()[j];
    const std::size_t c = static_cast<std::size_t>(label.chapter);
    const double score = hard ? co.scores[j] : co.scores[j] * ch.scores[c];
    r.codes.push_back(CodePrediction{label.code, label.description, score, c,
                                     score >= bundle.code_threshold(j)});
  }
  std::stable_sort(r.codes.begin(), r.codes.end(),
                   [](const CodePrediction& a, const CodePrediction& b) { return a.score > b.score; });
  return r;
}

PredictionResult predict_note(std::string_view text, const ModelBundle& bundle,
                              const embed::Provider& provider, const PredictOptions& options) {
  if (options.label_space_fingerprint &&
      *options.label_space_fingerprint != bundle.space.fingerprint_hex())
    fail(ErrorCode::kCompatibility, "bundle label space " + bundle.space.fingerprint_hex() +
                                        " does not match expected " +
                                        *options.label_space_fingerprint);
  require(provider.dim() == bundle.provider.dim, ErrorCode::kCompatibility,
          "provider dim " + std::to_string(provider.dim()) + " != bundle dim " +
              std::to_string(bundle.provider.dim));
  const auto chunks = note_chunks(text, bundle);
  std::vector<embed::ChunkRef> refs(chunks.size());
  for (std::size_t i = 0; i < refs.size(); ++i) refs[i] = {options.note_id, i};
  const auto embedded = provider.embed_batch(chunks, refs);
  PredictionResult r = predict_embedded(embedded, bundle);
  if (options.top_k_codes > 0 && r.codes.size() > options.top_k_codes)
    r.codes.resize(options.top_k_codes);
  return r;
}

}  // namespace notecoder::model
