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

// Bag-of-words comparison classifiers: multinomial naive Bayes, a linear SVM
// on term counts, and NBSVM (a linear classifier over binary features scaled
// by the naive Bayes log-count ratio).

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tbcnn/common.hpp"
#include "tbcnn/corpus.hpp"

namespace tbcnn::baselines {

/// Sorted (index, value) pairs.
using SparseVector = std::vector<std::pair<std::int32_t, double>>;

struct SparseCounts {
  std::vector<SparseVector> docs;
  std::size_t vocab_size = 0;
  std::vector<int> labels;
};

struct FeatureOptions {
  /// 1 = unigrams, 2 = unigrams + bigrams.
  std::size_t ngram = 1;
  bool binary = false;
};

/// Feature dictionary fitted on training documents; unseen features are
/// dropped at transform time.
class FeatureSpace {
 public:
  FeatureSpace(std::span<const corpus::LabeledDocument> train, FeatureOptions options);

  SparseCounts transform(std::span<const corpus::LabeledDocument> docs) const;
  std::size_t size() const { return index_.size(); }

 private:
  FeatureOptions options_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Replaces every present count by 1.
SparseCounts binarize(const SparseCounts& counts);

struct MnbModel {
  std::array<std::vector<double>, 2> log_prob;  // log P(w | c)
  std::array<double, 2> log_prior{};
  double smoothing = 1.0;
};

MnbModel train_mnb(const SparseCounts& counts, double smoothing);
/// Posterior [P(neg | doc), P(pos | doc)].
std::array<double, 2> mnb_posterior(const MnbModel& model, const SparseVector& doc);
/// argmax posterior, class 0 on ties.
int predict_mnb(const MnbModel& model, const SparseVector& doc);

/// r = log((p / |p|_1) / (q / |q|_1)), p and q the smoothed positive and
/// negative presence counts.
std::vector<double> nb_log_count_ratio(const SparseCounts& binary_counts, double smoothing);

/// Elementwise x_i * r_i on every document.
SparseCounts scale_features(const SparseCounts& counts, std::span<const double> ratio);

enum class LossKind { kHinge, kLogistic };

struct LinearConfig {
  LossKind loss = LossKind::kHinge;
  double reg = 1e-4;
  std::size_t epochs = 10;
  double max_step = 1.0;
  std::uint64_t seed = 1;
  /// NBSVM weight interpolation; 1 keeps the raw weights.
  double interpolation = 1.0;
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  LossKind loss = LossKind::kHinge;
  double reg = 0.0;
  double interpolation = 1.0;
};

/// Stochastic (sub)gradient descent on the L2-regularized loss, step
/// min(max_step, 1 / (reg * (t + 1))); the bias is unregularized. When
/// interpolation < 1 the final weights become (1 - b) * mean|w| + b * w.
LinearModel train_linear(const SparseCounts& features, const LinearConfig& config);

double decision_value(const LinearModel& model, const SparseVector& doc);
/// 1 when w.x + b > 0, else 0.
int predict_linear(const LinearModel& model, const SparseVector& doc);

/// Picks reg from `candidates` by accuracy on a seeded held-out slice, then
/// retrains on everything with the winner.
LinearModel tune_and_train_linear(const SparseCounts& features, LinearConfig config,
                                  std::span<const double> candidates, double holdout_fraction);

/// Text dumps: header lines then sparse `index<TAB>value` rows.
void save_mnb(const std::filesystem::path& path, const MnbModel& model);
void save_linear(const std::filesystem::path& path, const LinearModel& model);
MnbModel load_mnb(const std::filesystem::path& path);
LinearModel load_linear(const std::filesystem::path& path);

}  // namespace tbcnn::baselines
