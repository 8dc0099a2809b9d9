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

// One-layer convolutional sentence classifier with hand-written backprop.
//
//   input  x        L x d   (d = y for word-only input, 2y with topic rows)
//   conv   c_i      = w . x[i : i+h-1] + b      per filter, per region size h
//   relu + 1-max    f_j = max_i relu(c_i)
//   dropout         inverted, training only
//   dense           s = W_z f                   (no bias)
//   softmax         p = softmax(s)
//   loss            mean cross-entropy over the batch

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tbcnn/common.hpp"
#include "tbcnn/embedding.hpp"

namespace tbcnn::nn {

struct ConvSpec {
  std::vector<std::size_t> region_sizes{4, 5, 6};
  std::size_t filters_per_size = 100;

  /// Throws unless every region size is in [1, length] and filters >= 1.
  void validate(std::size_t length) const;
};

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  double dropout_rate = 0.5;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t shuffle_seed = 1;
  std::uint64_t dropout_seed = 2;
  bool fine_tune_embeddings = true;

  void validate() const;
};

// ---- layer primitives -------------------------------------------------------

/// Pre-activation feature map of one filter (h x d) over an x x d input.
std::vector<double> conv1d_forward(const Matrix& input, const Matrix& filter, double bias);

std::vector<double> relu(std::span<const double> values);

struct PoolResult {
  double value = 0.0;
  std::size_t index = 0;
};

/// Maximum and its first index.
PoolResult max_pool_1(std::span<const double> feature_map);

/// Inverted dropout; identity when `training` is false.
std::vector<double> dropout(std::span<const double> values, double rate, bool training, Rng& rng);

std::vector<double> softmax(std::span<const double> scores);

/// softmax(W_z * pooled).
std::vector<double> dense_softmax(std::span<const double> pooled, const Matrix& weights);

inline constexpr double kProbabilityFloor = 1e-12;

double cross_entropy(std::span<const double> probs, int gold);

// ---- model ------------------------------------------------------------------

/// Parameters in a fixed order: embedding, then per region size the filter
/// bank (F x h*d) and its biases (1 x F), then the dense weights (C x P).
class CnnModel {
 public:
  /// `topic_vectors` is empty for the word-only network; otherwise k x y and
  /// the input width becomes 2y. Filters and dense weights are drawn from
  /// U(-init_range, init_range).
  CnnModel(ConvSpec spec, Matrix embedding, Matrix topic_vectors, std::size_t num_classes,
           std::uint64_t init_seed, double init_range = 0.01);

  const ConvSpec& spec() const { return spec_; }
  std::size_t word_dim() const { return params_[0].cols; }
  std::size_t input_width() const { return word_dim() + topic_vectors_.cols; }
  bool uses_topics() const { return topic_vectors_.rows > 0; }
  std::size_t num_classes() const { return params_.back().rows; }
  std::size_t pooled_size() const { return spec_.filters_per_size * spec_.region_sizes.size(); }
  std::uint64_t init_seed() const { return init_seed_; }

  const Matrix& embedding() const { return params_[0]; }
  const Matrix& topic_vectors() const { return topic_vectors_; }
  const Matrix& filters(std::size_t region) const { return params_[1 + 2 * region]; }
  const Matrix& biases(std::size_t region) const { return params_[2 + 2 * region]; }
  const Matrix& dense() const { return params_.back(); }

  std::vector<Matrix>& parameters() { return params_; }
  const std::vector<Matrix>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }

  /// Sum over region sizes of F * (h * d + 1).
  std::size_t conv_parameter_count() const;

  /// Binary container with shapes, seeds and every tensor.
  void save(const std::filesystem::path& path) const;
  static CnnModel load(const std::filesystem::path& path);

  bool operator==(const CnnModel& other) const;

 private:
  CnnModel() = default;

  ConvSpec spec_;
  std::uint64_t init_seed_ = 0;
  Matrix topic_vectors_;
  std::vector<Matrix> params_;
  std::vector<std::string> names_;
};

/// One training or evaluation document: padded word indices plus the topic
/// whose vector fills the right half of each row (ignored by word-only models).
struct Example {
  std::span<const std::int32_t> indices;
  std::size_t topic = 0;
  int label = 0;
};

struct Gradients {
  std::vector<Matrix> tensors;  // same order and shapes as CnnModel::parameters()
  double loss = 0.0;            // mean over the batch
  std::size_t correct = 0;      // training-mode argmax hits
};

/// Exact gradients of the mean batch cross-entropy. Dropout masks are drawn
/// from `dropout_rng`, one per example in batch order. The topic half of the
/// input receives no gradient; neither does the pad embedding row.
Gradients compute_gradients(const CnnModel& model, std::span<const Example> batch,
                            const TrainConfig& config, Rng& dropout_rng);

/// Mean batch loss drawing dropout masks exactly as compute_gradients does.
double batch_loss(const CnnModel& model, std::span<const Example> batch, const TrainConfig& config,
                  Rng& dropout_rng);

class Optimizer {
 public:
  Optimizer(const CnnModel& model, const TrainConfig& config);
  void step(CnnModel& model, const Gradients& grads);

 private:
  TrainConfig config_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  std::size_t steps_ = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mini-batch training over shuffled examples. Throws with epoch and batch
/// coordinates if a gradient is not finite.
std::vector<EpochStats> train(CnnModel& model, std::span<const Example> examples,
                              const TrainConfig& config);

void write_training_log(const std::filesystem::path& path, std::span<const EpochStats> history);

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Inference-mode forward pass; label is the argmax, lower class on ties.
Prediction predict(const CnnModel& model, const Example& example);
Prediction predict(const CnnModel& model, const embed::FusedInput& input);

}  // namespace tbcnn::nn
