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

// Dataset ingestion, tokenization, vocabulary and fixed-length encoding.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tbcnn/common.hpp"

namespace tbcnn::corpus {

inline constexpr int kNegative = 0;
inline constexpr int kPositive = 1;

struct LabeledDocument {
  std::vector<std::string> tokens;
  int label = kNegative;
  std::int64_t doc_id = 0;
};

/// A document mapped to exactly `length` vocabulary indices.
struct PaddedDocument {
  std::vector<std::int32_t> indices;
  std::size_t true_length = 0;
  int label = kNegative;
  std::int64_t doc_id = 0;

  bool operator==(const PaddedDocument&) const = default;
};

/// Word <-> index map. Index 0 is the padding token, which tokenize() can
/// never produce because '<' and '>' are separators.
class Vocabulary {
 public:
  static constexpr std::int32_t kPadIndex = 0;
  static constexpr std::string_view kPadToken = "<pad>";

  Vocabulary();

  std::size_t size() const { return words_.size(); }
  std::optional<std::int32_t> find(const std::string& word) const;
  const std::string& word(std::int32_t index) const { return words_.at(index); }
  std::int64_t count(std::int32_t index) const { return counts_.at(index); }

  /// Appends a new word; throws if it is already present.
  std::int32_t add(const std::string& word, std::int64_t count);

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::int32_t> index_;
  std::vector<std::string> words_;
  std::vector<std::int64_t> counts_;
};

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Lowercased alphanumeric tokens; HTML <br> markup and punctuation become
/// separators, apostrophes inside a word are dropped ("don't" -> "dont").
/// Bytes outside ASCII are kept as word characters.
std::vector<std::string> tokenize(std::string_view text);

/// Keeps words with frequency >= min_count, ranked by descending frequency
/// (ties lexicographic), at most max_size - 1 of them after the pad entry.
Vocabulary build_vocabulary(std::span<const LabeledDocument> docs, std::size_t min_count,
                            std::size_t max_size);

/// Drops out-of-vocabulary tokens, then truncates or right-pads to `length`.
PaddedDocument encode(const LabeledDocument& doc, const Vocabulary& vocab, std::size_t length);

/// Inverse of encode over the non-pad prefix.
LabeledDocument decode(const PaddedDocument& doc, const Vocabulary& vocab);

struct Dataset {
  std::vector<LabeledDocument> train;
  std::vector<LabeledDocument> test;
};

/// Accepts either `<root>/{train,test}/{pos,neg}/*.txt` or a directory
/// holding `train.tsv` and `test.tsv` in the `<label>\t<text>` format.
Dataset load_dataset(const std::filesystem::path& root);

/// Reads one IMDB split directory (`pos/` and `neg/` children). Documents are
/// ordered neg then pos, each by file name.
std::vector<LabeledDocument> load_imdb_split(const std::filesystem::path& split_dir);

/// Reads `<label>\t<text>` records; labels are `pos` or `neg`.
std::vector<LabeledDocument> load_delimited(const std::filesystem::path& file);

/// Persists encoded documents as `doc_id\tlabel\ttrue_length\tidx idx ...`.
void save_encoded(const std::filesystem::path& path, std::span<const PaddedDocument> docs);
std::vector<PaddedDocument> load_encoded(const std::filesystem::path& path);

}  // namespace tbcnn::corpus
