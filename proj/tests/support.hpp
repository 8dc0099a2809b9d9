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

// Shared test fixtures: seeded generators for property tests, temp dirs and
// small synthetic corpora.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "tbcnn/common.hpp"
#include "tbcnn/corpus.hpp"
#include "tbcnn/topic_model.hpp"

namespace tbcnn::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tbcnn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Random draws for property tests; every case is reproducible from its seed.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) { return lo + rng_.below(hi - lo + 1); }
  double real(double lo, double hi) { return rng_.uniform(lo, hi); }
  int label() { return static_cast<int>(rng_.below(2)); }

  std::vector<double> reals(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = real(lo, hi);
    return v;
  }

  Matrix matrix(std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (auto& x : m.data) x = real(lo, hi);
    return m;
  }

  /// Random bag corpus; every document has at least one token.
  topic::BagCorpus bags(std::size_t docs, std::size_t vocab, std::size_t max_len) {
    topic::BagCorpus c;
    c.vocab_size = vocab;
    for (std::size_t d = 0; d < docs; ++d) {
      std::vector<std::int32_t> doc(size(1, max_len));
      for (auto& w : doc) w = static_cast<std::int32_t>(rng_.below(vocab));
      c.docs.push_back(std::move(doc));
    }
    return c;
  }

  std::string word(std::size_t alphabet = 6, std::size_t max_len = 3) {
    std::string w(size(1, max_len), 'a');
    for (auto& ch : w) ch = static_cast<char>('a' + rng_.below(alphabet));
    return w;
  }

  std::vector<corpus::LabeledDocument> documents(std::size_t n, std::size_t max_tokens,
                                                 std::size_t alphabet = 6) {
    std::vector<corpus::LabeledDocument> docs(n);
    for (std::size_t i = 0; i < n; ++i) {
      docs[i].doc_id = static_cast<std::int64_t>(i);
      docs[i].label = static_cast<int>(i % 2);
      const std::size_t len = size(1, max_tokens);
      for (std::size_t t = 0; t < len; ++t) docs[i].tokens.push_back(word(alphabet));
    }
    return docs;
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
};

/// Two disjoint word blocks; document d uses only block d % 2. The generating
/// structure is two topics with disjoint supports.
inline topic::BagCorpus two_topic_corpus(std::size_t docs, std::size_t words_per_topic,
                                         std::size_t doc_len, std::uint64_t seed) {
  Rng rng(seed);
  topic::BagCorpus c;
  c.vocab_size = 2 * words_per_topic;
  for (std::size_t d = 0; d < docs; ++d) {
    const std::size_t block = d % 2;
    std::vector<std::int32_t> doc(doc_len);
    for (auto& w : doc) w = static_cast<std::int32_t>(block * words_per_topic + rng.below(words_per_topic));
    c.docs.push_back(std::move(doc));
  }
  return c;
}

/// Sentiment-flavoured synthetic reviews written as `<label>\t<text>` rows.
inline void write_synthetic_tsv(const std::filesystem::path& file, std::size_t n, std::size_t neutral,
                                std::size_t cue, std::uint64_t seed) {
  static const std::vector<std::string> pos = {"great", "wonderful", "excellent", "loved",
                                               "superb", "amazing", "brilliant", "moving"};
  static const std::vector<std::string> neg = {"awful", "terrible", "boring", "hated",
                                               "worst", "dull", "poor", "waste"};
  static const std::vector<std::string> filler = {"movie", "film", "plot", "actor", "scene", "story",
                                                  "the",   "a",    "and",  "it",    "was",   "cast",
                                                  "music", "end",  "time", "role"};
  Rng rng(seed);
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<std::string> words;
    for (std::size_t k = 0; k < neutral; ++k) words.push_back(filler[rng.below(filler.size())]);
    const auto& cues = label ? pos : neg;
    for (std::size_t k = 0; k < cue; ++k) words.push_back(cues[rng.below(cues.size())]);
    rng.shuffle(words);
    out << (label ? "pos" : "neg") << '\t';
    for (std::size_t k = 0; k < words.size(); ++k) out << (k ? " " : "") << words[k];
    out << '\n';
  }
}

}  // namespace tbcnn::testing
