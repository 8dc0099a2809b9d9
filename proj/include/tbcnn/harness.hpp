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

// End-to-end experiment: prepare data, fit LDA, build topic vectors, train
// and evaluate every requested system, and write the comparison report.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tbcnn/baselines.hpp"
#include "tbcnn/corpus.hpp"
#include "tbcnn/neural.hpp"
#include "tbcnn/topic_model.hpp"

namespace tbcnn::harness {

// ---- metrics and reports ----------------------------------------------------

/// Percentages with the positive class (label 1) as target.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when a zero denominator forced a metric to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;

  bool operator==(const Metrics&) const = default;
};

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> gold);

/// Table label for a system id ("tbcnn" -> "TB-CNN").
std::string display_name(const std::string& system);

struct SystemResult {
  std::string system;
  Metrics metrics;
  /// Wall-clock seconds for model generation plus testing.
  double seconds = 0.0;

  bool operator==(const SystemResult&) const = default;
};

struct MetricsReport {
  std::vector<SystemResult> rows;

  bool operator==(const MetricsReport&) const = default;
};

/// Aligned plain-text table (header + one row per system).
std::string format_report_table(const MetricsReport& report);

/// Writes `report.txt` and `report.tsv` into `dir`.
void emit_report(const MetricsReport& report, const std::filesystem::path& dir);
MetricsReport read_report_tsv(const std::filesystem::path& path);

// ---- configuration ----------------------------------------------------------

inline const std::vector<std::string> kAllSystems = {"mnb", "bow-svm", "nbsvm", "textcnn", "tbcnn"};

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;

  // corpus
  std::size_t max_length = 200;
  std::size_t min_count = 2;
  std::size_t max_vocab = 30000;
  /// Seeded per-split subsample sizes; 0 keeps the whole split.
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;

  // topic model; k unset means sweep over sweep_k and keep the argmin
  topic::LdaConfig lda;
  std::optional<std::size_t> lda_k = 16;
  std::vector<std::size_t> sweep_k = {10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  std::size_t fold_in_sweeps = 50;

  // embeddings; an empty path means every row is randomly initialized
  std::filesystem::path embeddings;
  std::size_t embedding_dim = 300;
  std::size_t keywords = 20;

  nn::ConvSpec conv;
  nn::TrainConfig train;

  // baselines
  double mnb_smoothing = 1.0;
  std::size_t mnb_ngram = 2;
  bool mnb_binary = true;
  std::size_t svm_ngram = 1;
  std::vector<double> svm_regs = {1e-4, 1e-3, 1e-2};
  std::size_t svm_epochs = 10;
  double svm_holdout = 0.1;
  std::size_t nbsvm_ngram = 2;
  double nbsvm_smoothing = 1.0;
  double nbsvm_interpolation = 0.25;
  double nbsvm_reg = 1e-4;

  /// Canonical names from kAllSystems; "bow_svm" is accepted as an alias.
  std::vector<std::string> systems = kAllSystems;

  /// Throws on invalid values or missing referenced paths.
  void validate() const;
};

/// Loads a JSON config; absent keys keep their defaults.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies `section.key=value` (value parsed as JSON, falling back to a
/// plain string). Unknown keys throw.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// The config in the same JSON schema load_config reads.
std::string dump_config(const ExperimentConfig& config);

// ---- pipeline stages --------------------------------------------------------

/// Stage seeds derived from the master seed.
struct StageSeeds {
  std::uint64_t subsample;
  std::uint64_t lda;
  std::uint64_t fold_in;
  std::uint64_t embedding;
  std::uint64_t cnn_init;
  std::uint64_t cnn_shuffle;
  std::uint64_t cnn_dropout;
  std::uint64_t linear;

  static StageSeeds from_master(std::uint64_t master);
};

struct PreparedData {
  corpus::Dataset raw;  // tokenized documents (after subsampling)
  corpus::Vocabulary vocab;
  std::vector<corpus::PaddedDocument> train;
  std::vector<corpus::PaddedDocument> test;
  std::size_t empty_train = 0;  // encoded with zero in-vocabulary tokens
  std::size_t empty_test = 0;
};

struct TopicData {
  topic::TopicModel model;
  std::vector<std::size_t> train_topics;  // per train document
  std::vector<std::size_t> test_topics;   // fold-in, per test document
  std::optional<topic::SweepResult> sweep;
  double seconds = 0.0;
};

class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const StageSeeds& seeds() const { return seeds_; }

  /// Loads, subsamples, tokenizes and encodes; writes vocab.tsv, train.enc,
  /// test.enc and prepare_stats.tsv.
  PreparedData prepare() const;
  /// Reloads what prepare() wrote (the raw documents are re-read from the
  /// dataset, which prepare() does not copy).
  PreparedData load_prepared() const;

  /// Fits LDA (sweeping first when k is unset) and assigns topics to every
  /// train and test document. Writes lda_model.txt, topics_{train,test}.tsv,
  /// lda_seconds.txt and, after a sweep, lda_sweep.tsv.
  TopicData fit_topics(const PreparedData& data, bool force_sweep = false) const;
  TopicData load_topics() const;

  embed::EmbeddingMatrix load_embedding_matrix(const corpus::Vocabulary& vocab) const;

  /// Trains one system and writes its model plus `<system>/fit_seconds.txt`.
  void train_system(const std::string& system, const PreparedData& data,
                    const TopicData* topics) const;
  /// Evaluates a trained system on the test split; writes
  /// `<system>/metrics.tsv` and `<system>/predictions.tsv`.
  SystemResult evaluate_system(const std::string& system, const PreparedData& data,
                               const TopicData* topics) const;

  /// Collects `<system>/metrics.tsv` in config order and writes the report.
  MetricsReport report() const;

  /// The whole pipeline. On failure writes `STALE` naming the stage and
  /// rethrows.
  MetricsReport run_all() const;

 private:
  std::filesystem::path system_dir(const std::string& system) const;

  ExperimentConfig config_;
  StageSeeds seeds_;
};

/// `<dir>/STALE` holds `stage<TAB>cause` after a failed stage; artifacts in
/// that directory may be partial until a later run clears it.
void mark_stale(const std::filesystem::path& dir, const std::string& stage,
                const std::string& cause);
void clear_stale(const std::filesystem::path& dir);

/// Convenience wrapper around Experiment::run_all.
MetricsReport run_experiment(const ExperimentConfig& config);

}  // namespace tbcnn::harness
