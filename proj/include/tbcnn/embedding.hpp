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

// Pretrained word vectors, per-topic keyword-mean vectors, and the fused
// [word vector | topic vector] input rows fed to the CNN.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tbcnn/common.hpp"
#include "tbcnn/corpus.hpp"
#include "tbcnn/topic_model.hpp"

namespace tbcnn::embed {

/// V x y word vectors; row 0 (padding) is all zeros.
struct EmbeddingMatrix {
  Matrix vectors;
  /// Fraction of non-pad vocabulary words found in the pretrained file.
  double coverage = 0.0;

  std::size_t dim() const { return vectors.cols; }
};

enum class EmbeddingFormat { kAuto, kText, kBinary };

inline constexpr double kInitRange = 0.25;

/// Loads the rows of `vocab` words from a word2vec file. Words missing from
/// the file get U(-0.25, 0.25) rows drawn in index order from `seed`.
/// kAuto picks binary for a ".bin" extension and text otherwise.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const corpus::Vocabulary& vocab,
                                std::uint64_t seed, EmbeddingFormat format = EmbeddingFormat::kAuto);

/// All rows random, as if no vocabulary word had a pretrained vector.
EmbeddingMatrix random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

/// word2vec text format over the non-pad rows, values printed round-trip exact.
void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& emb,
                     const corpus::Vocabulary& vocab);

/// k x y matrix of keyword-mean topic vectors.
struct TopicVectorTable {
  Matrix vectors;
  std::size_t keywords = 0;
};

/// Mean embedding row over the `keywords` top words of topic t. The pad word
/// is skipped so exactly `keywords` real words contribute.
std::vector<double> topic_vector(const topic::TopicModel& model, std::size_t t,
                                 const Matrix& embeddings, std::size_t keywords);

TopicVectorTable build_topic_vectors(const topic::TopicModel& model, const EmbeddingMatrix& emb,
                                     std::size_t keywords);

/// One row per topic: `topic<TAB>v1<TAB>...`.
void save_topic_vectors(const std::filesystem::path& path, const TopicVectorTable& table);

/// x x 2y matrix: left half word rows, right half the topic vector repeated.
struct FusedInput {
  Matrix matrix;
  std::size_t word_dim = 0;
};

/// Writes the fused rows for `indices` into `out` (indices.size() rows of
/// width y + topic_row.size()). An empty topic_row yields plain word rows.
void fuse_into(std::span<const std::int32_t> indices, const Matrix& embeddings,
               std::span<const double> topic_row, std::span<double> out);

FusedInput fuse(const corpus::PaddedDocument& doc, const EmbeddingMatrix& emb,
                const TopicVectorTable& topics, std::size_t topic);

/// Resolves the topic as the dominant topic of LDA document doc.doc_id.
FusedInput fuse(const corpus::PaddedDocument& doc, const EmbeddingMatrix& emb,
                const TopicVectorTable& topics, const topic::TopicModel& model);

}  // namespace tbcnn::embed
