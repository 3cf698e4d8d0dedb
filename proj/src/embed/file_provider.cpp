// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "embed/provider.hpp"

namespace notecoder::embed {

static_assert(std::endian::native == std::endian::little,
              "embedding files are little-endian; add byte swapping for this host");

namespace {

std::string entry_key(const std::string& note_id, std::size_t chunk_index) {
  return note_id + '\x1f' + std::to_string(chunk_index);
}

}  // namespace

FileProvider::FileProvider(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
    dim_ = header.at("dim").get<std::size_t>();
    length_ = header.at("L").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, path + ": bad embedding header: " + e.what());
  }
  require(dim_ > 0 && length_ > 0, ErrorCode::kFormat,
          path + ": header dim and L must be positive");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string payload = ss.str();
  const std::size_t entry_bytes = dim_ * length_ * sizeof(float);
  for (const auto& e : header.at("index")) {
    const auto note = e.at("note_id").get<std::string>();
    const auto idx = e.at("chunk_idx").get<std::size_t>();
    const auto offset = e.at("offset").get<std::size_t>();
    require(offset + entry_bytes <= payload.size(), ErrorCode::kFormat,
            path + ": entry for " + note + " runs past end of file");
    std::vector<float> values(dim_ * length_);
    std::memcpy(values.data(), payload.data() + offset, entry_bytes);
    entries_[entry_key(note, idx)] = std::move(values);
  }
}

EmbeddingTensor FileProvider::embed_chunk(const preprocess::TokenChunk& chunk,
                                          const ChunkRef& ref) const {
  require(chunk.length() == length_, ErrorCode::kShape,
          "chunk length " + std::to_string(chunk.length()) +
              " != embedding file L " + std::to_string(length_));
  const auto it = entries_.find(entry_key(ref.note_id, ref.chunk_index));
  require(it != entries_.end(), ErrorCode::kMissingEmbedding,
          "no embedding for note " + ref.note_id + " chunk " +
              std::to_string(ref.chunk_index));
  EmbeddingTensor t(length_, dim_);
  for (std::size_t i = 0; i < t.values.size(); ++i)
    t.values[i] = static_cast<double>(it->second[i]);
  apply_mask(t, chunk);
  return t;
}

void write_embedding_file(const std::string& path,
                          std::span<const FileEntry> entries) {
  nlohmann::json header;
  std::size_t dim = 0;
  std::size_t length = 0;
  header["index"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : entries) {
    require(e.tensor != nullptr, ErrorCode::kInvalidArgument, "null tensor");
    if (dim == 0) {
      dim = e.tensor->D;
      length = e.tensor->L;
    }
    require(e.tensor->D == dim && e.tensor->L == length, ErrorCode::kShape,
            "embedding file entries must share L and D");
    header["index"].push_back(
        {{"note_id", e.note_id}, {"chunk_idx", e.chunk_index}, {"offset", offset}});
    offset += dim * length * sizeof(float);
  }
  header["dim"] = dim;
  header["L"] = length;
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  out << header.dump() << '\n';
  for (const auto& e : entries) {
    std::vector<float> values(e.tensor->values.begin(), e.tensor->values.end());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path);
}

}  // namespace notecoder::embed
