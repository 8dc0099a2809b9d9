// Copyright 2026 The tbcnn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tbcnn/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

namespace tbcnn::embed {
namespace fs = std::filesystem;

namespace {

struct Header {
  std::size_t count = 0;
  std::size_t dim = 0;
};

Header parse_header(const std::string& line, const fs::path& path) {
  Header h;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  auto skip = [&] {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  };
  skip();
  auto r1 = std::from_chars(p, end, h.count);
  if (r1.ec != std::errc{}) throw Error(path.string() + ":1: malformed header '" + line + "'");
  p = r1.ptr;
  skip();
  auto r2 = std::from_chars(p, end, h.dim);
  if (r2.ec != std::errc{} || h.dim == 0) {
    throw Error(path.string() + ":1: malformed header '" + line + "'");
  }
  p = r2.ptr;
  skip();
  if (p != end) throw Error(path.string() + ":1: malformed header '" + line + "'");
  return h;
}

void fill_missing(EmbeddingMatrix& emb, const std::vector<bool>& found, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t i = 1; i < emb.vectors.rows; ++i) {
    if (found[i]) {
      ++hits;
      continue;
    }
    for (auto& x : emb.vectors.row(i)) x = rng.uniform(-kInitRange, kInitRange);
  }
  std::fill(emb.vectors.row(0).begin(), emb.vectors.row(0).end(), 0.0);
  emb.coverage = emb.vectors.rows > 1
                     ? static_cast<double>(hits) / static_cast<double>(emb.vectors.rows - 1)
                     : 0.0;
}

EmbeddingMatrix load_text(const fs::path& path, const corpus::Vocabulary& vocab,
                          std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read embeddings: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ":1: missing header");
  const Header header = parse_header(line, path);
  EmbeddingMatrix emb{Matrix(vocab.size(), header.dim), 0.0};
  std::vector<bool> found(vocab.size(), false);
  std::size_t line_no = 1;
  std::string word;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto space = line.find(' ');
    word.assign(line, 0, space);
    const auto index = vocab.find(word);
    const bool wanted = index && *index != corpus::Vocabulary::kPadIndex && !found[*index];
    // Every line is validated even when the word is not wanted.
    const char* p = space == std::string::npos ? line.data() + line.size() : line.data() + space;
    const char* end = line.data() + line.size();
    std::size_t n = 0;
    while (true) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double value = 0.0;
      const auto r = std::from_chars(p, end, value);
      if (r.ec != std::errc{}) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": bad number for '" + word + "'");
      }
      if (n < header.dim && wanted) emb.vectors(*index, n) = value;
      ++n;
      p = r.ptr;
    }
    if (n != header.dim) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(header.dim) + " values for '" + word + "', found " +
                  std::to_string(n));
    }
    if (wanted) found[*index] = true;
  }
  fill_missing(emb, found, seed);
  return emb;
}

EmbeddingMatrix load_binary(const fs::path& path, const corpus::Vocabulary& vocab,
                            std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read embeddings: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
  const Header header = parse_header(line, path);
  EmbeddingMatrix emb{Matrix(vocab.size(), header.dim), 0.0};
  std::vector<bool> found(vocab.size(), false);
  std::vector<float> buffer(header.dim);
  std::string word;
  for (std::size_t entry = 0; entry < header.count; ++entry) {
    word.clear();
    char c = 0;
    while (in.get(c) && c != ' ') {
      if (c != '\n') word.push_back(c);
    }
    if (!in) throw Error(path.string() + ": truncated at entry " + std::to_string(entry + 1));
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!in) throw Error(path.string() + ": truncated vector at entry " + std::to_string(entry + 1));
    const auto index = vocab.find(word);
    if (index && *index != corpus::Vocabulary::kPadIndex && !found[*index]) {
      for (std::size_t j = 0; j < header.dim; ++j) emb.vectors(*index, j) = buffer[j];
      found[*index] = true;
    }
  }
  fill_missing(emb, found, seed);
  return emb;
}

}  // namespace

EmbeddingMatrix load_embeddings(const fs::path& path, const corpus::Vocabulary& vocab,
                                std::uint64_t seed, EmbeddingFormat format) {
  if (format == EmbeddingFormat::kAuto) {
    format = path.extension() == ".bin" ? EmbeddingFormat::kBinary : EmbeddingFormat::kText;
  }
  return format == EmbeddingFormat::kBinary ? load_binary(path, vocab, seed)
                                            : load_text(path, vocab, seed);
}

EmbeddingMatrix random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error("random_embeddings: dimension must be positive");
  EmbeddingMatrix emb{Matrix(vocab_size, dim), 0.0};
  fill_missing(emb, std::vector<bool>(vocab_size, false), seed);
  return emb;
}

void save_embeddings(const fs::path& path, const EmbeddingMatrix& emb,
                     const corpus::Vocabulary& vocab) {
  if (vocab.size() != emb.vectors.rows) throw Error("save_embeddings: vocabulary size mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot write embeddings: " + path.string());
  out << emb.vectors.rows - 1 << ' ' << emb.dim() << '\n';
  char buf[64];
  for (std::size_t i = 1; i < emb.vectors.rows; ++i) {
    out << vocab.word(static_cast<std::int32_t>(i));
    for (const double x : emb.vectors.row(i)) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out << buf;
    }
    out << '\n';
  }
}

std::vector<double> topic_vector(const topic::TopicModel& model, std::size_t t,
                                 const Matrix& embeddings, std::size_t keywords) {
  if (t >= model.num_topics()) throw Error("topic_vector: topic index out of range");
  if (keywords < 1) throw Error("topic_vector: keyword count must be >= 1");
  if (embeddings.rows != model.vocab_size()) {
    throw Error("topic_vector: embedding rows do not match the topic model vocabulary");
  }
  auto words = top_keywords(model, t, keywords + 1);
  std::erase(words, corpus::Vocabulary::kPadIndex);
  if (words.size() > keywords) words.resize(keywords);
  std::vector<double> mean(embeddings.cols, 0.0);
  for (const auto w : words) {
    const auto row = embeddings.row(static_cast<std::size_t>(w));
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  const double n = static_cast<double>(words.size());
  for (auto& x : mean) x /= n;
  return mean;
}

TopicVectorTable build_topic_vectors(const topic::TopicModel& model, const EmbeddingMatrix& emb,
                                     std::size_t keywords) {
  TopicVectorTable table{Matrix(model.num_topics(), emb.dim()), keywords};
  for (std::size_t t = 0; t < model.num_topics(); ++t) {
    const auto v = topic_vector(model, t, emb.vectors, keywords);
    std::copy(v.begin(), v.end(), table.vectors.row(t).begin());
  }
  return table;
}

void save_topic_vectors(const fs::path& path, const TopicVectorTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write topic vectors: " + path.string());
  char buf[64];
  for (std::size_t t = 0; t < table.vectors.rows; ++t) {
    out << t;
    for (const double x : table.vectors.row(t)) {
      std::snprintf(buf, sizeof buf, "\t%.17g", x);
      out << buf;
    }
    out << '\n';
  }
}

void fuse_into(std::span<const std::int32_t> indices, const Matrix& embeddings,
               std::span<const double> topic_row, std::span<double> out) {
  const std::size_t y = embeddings.cols;
  const std::size_t width = y + topic_row.size();
  if (out.size() != indices.size() * width) throw Error("fuse: output buffer has the wrong size");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto word = embeddings.row(static_cast<std::size_t>(indices[i]));
    double* dst = out.data() + i * width;
    std::memcpy(dst, word.data(), y * sizeof(double));
    if (!topic_row.empty()) std::memcpy(dst + y, topic_row.data(), topic_row.size() * sizeof(double));
  }
}

FusedInput fuse(const corpus::PaddedDocument& doc, const EmbeddingMatrix& emb,
                const TopicVectorTable& topics, std::size_t topic) {
  if (topic >= topics.vectors.rows) throw Error("fuse: topic " + std::to_string(topic) + " unknown");
  if (topics.vectors.cols != emb.dim()) throw Error("fuse: topic vector width mismatch");
  FusedInput fused{Matrix(doc.indices.size(), 2 * emb.dim()), emb.dim()};
  fuse_into(doc.indices, emb.vectors, topics.vectors.row(topic), fused.matrix.data);
  return fused;
}

FusedInput fuse(const corpus::PaddedDocument& doc, const EmbeddingMatrix& emb,
                const TopicVectorTable& topics, const topic::TopicModel& model) {
  if (doc.doc_id < 0 || static_cast<std::size_t>(doc.doc_id) >= model.num_docs()) {
    throw Error("fuse: document " + std::to_string(doc.doc_id) + " has no topic in the model");
  }
  return fuse(doc, emb, topics, topic::dominant_topic(model, static_cast<std::size_t>(doc.doc_id)));
}

}  // namespace tbcnn::embed
