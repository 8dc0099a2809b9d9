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

// Latent Dirichlet allocation fitted by collapsed Gibbs sampling.
//
// The sampler resamples one token's topic at a time from
//
//   p(z = t | rest) ∝ (n_dt[d][t] + alpha) * (n_tw[t][w] + beta) / (n_t[t] + V * beta)
//
// with the token's own assignment removed from all counts. Point estimates of
// the document-topic (theta) and topic-word (phi) distributions come from the
// final sample's counts.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tbcnn/common.hpp"
#include "tbcnn/corpus.hpp"

namespace tbcnn::topic {

/// Documents as sequences of word indices (one entry per occurrence).
struct BagCorpus {
  std::vector<std::vector<std::int32_t>> docs;
  std::size_t vocab_size = 0;

  std::size_t num_docs() const { return docs.size(); }
  std::size_t total_tokens() const;
  /// Throws if a word index is out of range.
  void validate() const;
};

/// Builds bags from the non-pad prefix of each encoded document.
BagCorpus make_bag_corpus(std::span<const corpus::PaddedDocument> docs, std::size_t vocab_size);

struct LdaConfig {
  std::size_t k = 16;
  /// Unset means 50 / k.
  std::optional<double> alpha;
  double beta = 0.01;
  std::size_t iterations = 1000;
  /// Recorded with the model. Only the final sample is used for estimates.
  std::size_t burn_in = 200;
  std::uint64_t seed = 1;

  double effective_alpha() const { return alpha.value_or(50.0 / static_cast<double>(k)); }
  void validate() const;
};

class TopicModel {
 public:
  TopicModel(const LdaConfig& config, std::size_t num_docs, std::size_t vocab_size);

  std::size_t num_topics() const { return config_.k; }
  std::size_t num_docs() const { return doc_length_.size(); }
  std::size_t vocab_size() const { return vocab_size_; }
  const LdaConfig& config() const { return config_; }
  double alpha() const { return alpha_; }
  double beta() const { return config_.beta; }

  std::int32_t doc_topic(std::size_t d, std::size_t t) const { return doc_topic_[d * config_.k + t]; }
  std::int32_t topic_word(std::size_t t, std::size_t w) const {
    return word_topic_[w * config_.k + t];
  }
  std::int32_t topic_total(std::size_t t) const { return topic_total_[t]; }
  std::int32_t doc_length(std::size_t d) const { return doc_length_[d]; }

  /// Per-token assignments; empty for a model restored from disk.
  const std::vector<std::vector<std::int32_t>>& assignments() const { return z_; }

  void add_token(std::size_t d, std::int32_t word, std::int32_t topic);
  void remove_token(std::size_t d, std::int32_t word, std::int32_t topic);

  /// Unnormalized conditional weights for word `w` in document `d` given
  /// the current counts. `out` must hold k entries.
  void topic_weights(std::size_t d, std::int32_t w, std::span<double> out) const;

  /// Throws if the count matrices disagree with each other or with the
  /// assignments (when present) for `corpus`.
  void check_counts(const BagCorpus* corpus = nullptr) const;

  /// Text container with config, sizes and both count matrices.
  void save(const std::filesystem::path& path) const;
  static TopicModel load(const std::filesystem::path& path);

  /// Replaces the counts; used by load and by tests that need exact states.
  void set_counts(std::vector<std::int32_t> doc_topic, std::vector<std::int32_t> topic_word);

 private:
  friend class GibbsSampler;

  LdaConfig config_;
  double alpha_;
  std::size_t vocab_size_;
  std::vector<std::int32_t> doc_topic_;   // M x k
  std::vector<std::int32_t> word_topic_;  // V x k (word-major for the sampler)
  std::vector<std::int32_t> topic_total_;
  std::vector<std::int32_t> doc_length_;
  std::vector<std::vector<std::int32_t>> z_;
};

/// Draws an index with probability proportional to `weights`.
std::size_t sample_from_weights(std::span<const double> weights, Rng& rng);

/// Owns the random stream and scratch buffer of one Gibbs chain.
class GibbsSampler {
 public:
  GibbsSampler(TopicModel& model, const BagCorpus& corpus, std::uint64_t seed);

  /// Assigns every token a uniformly random topic.
  void initialize();
  /// Resamples every token once, in document order.
  void sweep();
  /// Removes the current assignment of (d, position) from the counts.
  void remove_assignment(std::size_t d, std::size_t position);
  /// Samples a new topic for (d, position), whose assignment must already be
  /// removed, and adds it back to the counts.
  std::size_t resample_assignment(std::size_t d, std::size_t position);

 private:
  TopicModel& model_;
  const BagCorpus& corpus_;
  Rng rng_;
  std::vector<double> weights_;
};

using SweepObserver = std::function<void(std::size_t sweep, const TopicModel&)>;

/// Random initialization followed by config.iterations sweeps. The observer,
/// when set, sees the model after initialization (sweep 0) and after every
/// sweep.
TopicModel fit_lda(const BagCorpus& corpus, const LdaConfig& config,
                   const SweepObserver& observer = {});

std::vector<double> estimate_theta(const TopicModel& model, std::size_t d);
std::vector<double> estimate_phi(const TopicModel& model, std::size_t t);

/// exp of the negative mean per-token log-likelihood of `corpus` (which must
/// be the corpus the model was fitted on) under the point estimates.
double perplexity(const TopicModel& model, const BagCorpus& corpus);

/// The K most probable words of topic t, ties to the lower index.
std::vector<std::int32_t> top_keywords(const TopicModel& model, std::size_t t, std::size_t count);

/// argmax of theta_d, ties to the lower topic.
std::size_t dominant_topic(const TopicModel& model, std::size_t d);

struct SweepResult {
  std::vector<std::pair<std::size_t, double>> rows;  // (k, perplexity)
  std::size_t best_k = 0;
};

/// One fit per k with the template's seed and iteration budget.
SweepResult sweep_topics(const BagCorpus& corpus, std::span<const std::size_t> k_values,
                         const LdaConfig& config_template);
void write_sweep_report(const std::filesystem::path& path, const SweepResult& result);

/// Topic distribution of an unseen document by Gibbs sampling its tokens
/// against the model's frozen topic-word counts.
std::vector<double> fold_in(const TopicModel& model, std::span<const std::int32_t> words,
                            std::size_t sweeps, std::uint64_t seed);

/// Index of the largest entry; first on ties.
std::size_t argmax(std::span<const double> values);

}  // namespace tbcnn::topic
