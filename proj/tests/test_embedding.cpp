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

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tbcnn/embedding.hpp"

namespace tbcnn::embed {
namespace {

using corpus::Vocabulary;
using testing::Gen;
using testing::TempDir;
using testing::write_file;

Vocabulary vocab_of(const std::vector<std::string>& words) {
  Vocabulary v;
  for (const auto& w : words) v.add(w, 1);
  return v;
}

// Topic model over V words whose topic t ranks words by the given counts.
topic::TopicModel model_with_rows(const std::vector<std::vector<std::int32_t>>& rows) {
  topic::LdaConfig c;
  c.k = rows.size();
  c.iterations = 1;
  c.burn_in = 0;
  const std::size_t V = rows[0].size();
  topic::TopicModel model(c, 1, V);
  std::vector<std::int32_t> tw;
  std::int32_t total = 0;
  for (const auto& r : rows) {
    tw.insert(tw.end(), r.begin(), r.end());
    for (auto x : r) total += x;
  }
  std::vector<std::int32_t> dt(c.k, 0);
  dt[0] = total;
  model.set_counts(dt, tw);
  return model;
}

TEST(LoadEmbeddings, CopiesRowsAndZeroesPad) {
  TempDir dir("emb_text");
  write_file(dir / "v.txt", "3 2\na 1 2\nb 3 4\nextra 9 9\n");
  const auto emb = load_embeddings(dir / "v.txt", vocab_of({"a", "b"}), 1);
  EXPECT_EQ(emb.vectors.data, (std::vector<double>{0, 0, 1, 2, 3, 4}));
  EXPECT_EQ(emb.dim(), 2u);
  EXPECT_DOUBLE_EQ(emb.coverage, 1.0);
}

TEST(LoadEmbeddings, MissingWordsAreSeededUniform) {
  TempDir dir("emb_missing");
  write_file(dir / "v.txt", "1 3\na 1 2 3\n");
  const auto vocab = vocab_of({"a", "q", "r"});
  const auto e1 = load_embeddings(dir / "v.txt", vocab, 5);
  const auto e2 = load_embeddings(dir / "v.txt", vocab, 5);
  const auto e3 = load_embeddings(dir / "v.txt", vocab, 6);
  EXPECT_EQ(e1.vectors, e2.vectors);
  EXPECT_NE(e1.vectors, e3.vectors);
  EXPECT_DOUBLE_EQ(e1.coverage, 1.0 / 3.0);
  for (std::size_t r = 2; r < 4; ++r) {
    for (double x : e1.vectors.row(r)) {
      EXPECT_GE(x, -kInitRange);
      EXPECT_LT(x, kInitRange);
    }
  }
  for (double x : e1.vectors.row(0)) EXPECT_EQ(x, 0.0);
}

TEST(LoadEmbeddings, ShortLineNamesLineNumber) {
  TempDir dir("emb_bad");
  std::string text = "2 300\nok";
  for (int i = 0; i < 300; ++i) text += " 0.5";
  text += "\nbad";
  for (int i = 0; i < 299; ++i) text += " 0.5";
  text += "\n";
  write_file(dir / "v.txt", text);
  try {
    load_embeddings(dir / "v.txt", vocab_of({"ok"}), 1);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 299"), std::string::npos) << msg;
  }
}

TEST(LoadEmbeddings, MalformedHeaderAndMissingFile) {
  TempDir dir("emb_header");
  write_file(dir / "v.txt", "three 2\na 1 2\n");
  EXPECT_THROW(load_embeddings(dir / "v.txt", vocab_of({"a"}), 1), Error);
  write_file(dir / "w.txt", "1 0\n");
  EXPECT_THROW(load_embeddings(dir / "w.txt", vocab_of({"a"}), 1), Error);
  EXPECT_THROW(load_embeddings(dir / "none.txt", vocab_of({"a"}), 1), Error);
}

TEST(LoadEmbeddings, BinaryFormat) {
  TempDir dir("emb_bin");
  {
    std::ofstream out(dir / "v.bin", std::ios::binary);
    out << "2 2\n";
    const float a[] = {1.5f, -2.0f};
    const float b[] = {0.25f, 4.0f};
    out << "a ";
    out.write(reinterpret_cast<const char*>(a), sizeof a);
    out << "\nb ";
    out.write(reinterpret_cast<const char*>(b), sizeof b);
  }
  const auto emb = load_embeddings(dir / "v.bin", vocab_of({"b", "a"}), 1);
  EXPECT_EQ(emb.vectors.data, (std::vector<double>{0, 0, 0.25, 4.0, 1.5, -2.0}));
}

TEST(LoadEmbeddings, SaveLoadRoundTripIsBitExact) {
  TempDir dir("emb_rt");
  const auto vocab = vocab_of({"x", "y", "z"});
  const auto emb = random_embeddings(vocab.size(), 5, 3);
  save_embeddings(dir / "e.txt", emb, vocab);
  const auto back = load_embeddings(dir / "e.txt", vocab, 999);
  EXPECT_EQ(back.vectors, emb.vectors);
  EXPECT_DOUBLE_EQ(back.coverage, 1.0);
}

TEST(TopicVector, MeansOfKeywordRows) {
  // Words 1..3 with embedding rows [1,0], [0,1], [3,3]; topic 0 ranks 1 > 2 > 3.
  Matrix emb(4, 2);
  emb(1, 0) = 1;
  emb(2, 1) = 1;
  emb(3, 0) = 3;
  emb(3, 1) = 3;
  const auto model = model_with_rows({{0, 9, 5, 1}});
  EXPECT_EQ(topic_vector(model, 0, emb, 2), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(topic_vector(model, 0, emb, 1), (std::vector<double>{1.0, 0.0}));
  EXPECT_THROW(topic_vector(model, 1, emb, 1), Error);

  Matrix line(4, 2);
  for (std::size_t r = 1; r < 4; ++r) line(r, 0) = line(r, 1) = static_cast<double>(r);
  EXPECT_EQ(topic_vector(model, 0, line, 3), (std::vector<double>{2.0, 2.0}));
}

TEST(TopicVector, PadIsNeverAKeyword) {
  // Uniform topic: every word ties, so the pad index would rank first.
  const auto model = model_with_rows({{0, 0, 0}});
  Matrix emb(3, 1);
  emb(0, 0) = 100.0;  // would poison the mean if used
  emb(1, 0) = 2.0;
  emb(2, 0) = 4.0;
  EXPECT_EQ(topic_vector(model, 0, emb, 2), (std::vector<double>{3.0}));
}

TEST(TopicVector, PropertyLinearAndOrderFree) {
  Gen gen(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t V = gen.size(3, 12);
    const std::size_t y = gen.size(1, 6);
    std::vector<std::int32_t> row(V);
    for (auto& c : row) c = static_cast<std::int32_t>(gen.size(0, 20));
    const auto model = model_with_rows({row});
    const Matrix emb = gen.matrix(V, y);
    const std::size_t K = gen.size(1, V - 1);
    const auto v = topic_vector(model, 0, emb, K);
    const double c = gen.real(-3, 3);
    Matrix scaled = emb;
    for (auto& x : scaled.data) x *= c;
    const auto vs = topic_vector(model, 0, scaled, K);
    // Brute force: mean over the K best non-pad words by (count desc, index asc).
    std::vector<std::int32_t> words;
    for (std::size_t w = 1; w < V; ++w) words.push_back(static_cast<std::int32_t>(w));
    std::stable_sort(words.begin(), words.end(), [&](auto a, auto b) { return row[a] > row[b]; });
    words.resize(K);
    std::reverse(words.begin(), words.end());
    for (std::size_t j = 0; j < y; ++j) {
      double sum = 0.0;
      for (auto w : words) sum += emb(w, j);
      ASSERT_NEAR(v[j], sum / static_cast<double>(K), 1e-12);
      ASSERT_NEAR(vs[j], c * v[j], 1e-12);
    }
  }
}

TEST(Fuse, ConcatenatesWordAndTopicRows) {
  EmbeddingMatrix emb{Matrix(3, 3), 1.0};
  emb.vectors.data = {0, 0, 0, 1, 2, 3, 4, 5, 6};
  TopicVectorTable topics{Matrix(1, 3), 1};
  topics.vectors.data = {7, 8, 9};
  const corpus::PaddedDocument doc{{1, 2}, 2, 1, 0};
  const auto f = fuse(doc, emb, topics, std::size_t{0});
  EXPECT_EQ(f.matrix.rows, 2u);
  EXPECT_EQ(f.matrix.cols, 6u);
  EXPECT_EQ(f.matrix.data, (std::vector<double>{1, 2, 3, 7, 8, 9, 4, 5, 6, 7, 8, 9}));

  const corpus::PaddedDocument pad{{0, 0}, 0, 0, 0};
  EXPECT_EQ(fuse(pad, emb, topics, std::size_t{0}).matrix.data,
            (std::vector<double>{0, 0, 0, 7, 8, 9, 0, 0, 0, 7, 8, 9}));
  EXPECT_THROW(fuse(doc, emb, topics, std::size_t{1}), Error);
}

TEST(Fuse, ResolvesTopicThroughModel) {
  EmbeddingMatrix emb{Matrix(3, 1), 1.0};
  TopicVectorTable topics{Matrix(2, 1), 1};
  topics.vectors.data = {10, 20};
  topic::LdaConfig c;
  c.k = 2;
  c.iterations = 1;
  c.burn_in = 0;
  topic::TopicModel model(c, 1, 3);
  model.set_counts({0, 5}, {0, 0, 0, 0, 3, 2});
  const corpus::PaddedDocument doc{{1, 2}, 2, 1, 0};
  const auto f = fuse(doc, emb, topics, model);
  EXPECT_EQ(f.matrix(0, 1), 20.0);
  corpus::PaddedDocument stray = doc;
  stray.doc_id = 4;
  EXPECT_THROW(fuse(stray, emb, topics, model), Error);
}

TEST(Fuse, PropertyShapeAndRowConstantTopicHalf) {
  Gen gen(51);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t V = gen.size(2, 20);
    const std::size_t y = gen.size(1, 8);
    const std::size_t L = gen.size(1, 30);
    EmbeddingMatrix emb = random_embeddings(V, y, trial);
    TopicVectorTable topics{gen.matrix(gen.size(1, 4), y), 1};
    corpus::PaddedDocument doc;
    doc.indices.resize(L);
    for (auto& i : doc.indices) i = static_cast<std::int32_t>(gen.size(0, V - 1));
    const std::size_t t = gen.size(0, topics.vectors.rows - 1);
    const auto f = fuse(doc, emb, topics, t);
    ASSERT_EQ(f.matrix.rows, L);
    ASSERT_EQ(f.matrix.cols, 2 * y);
    for (std::size_t r = 0; r < L; ++r) {
      for (std::size_t j = 0; j < y; ++j) {
        ASSERT_EQ(f.matrix(r, j), emb.vectors(doc.indices[r], j));
        ASSERT_EQ(f.matrix(r, y + j), topics.vectors(t, j));
      }
    }
    ASSERT_EQ(fuse(doc, emb, topics, t).matrix, f.matrix);
  }
}

}  // namespace
}  // namespace tbcnn::embed
