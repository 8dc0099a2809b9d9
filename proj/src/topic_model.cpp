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

#include "tbcnn/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "tbcnn/simd/kernels.hpp"

namespace tbcnn::topic {

std::size_t BagCorpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& doc : docs) n += doc.size();
  return n;
}

void BagCorpus::validate() const {
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto w : docs[d]) {
      if (w < 0 || static_cast<std::size_t>(w) >= vocab_size) {
        throw Error("bag corpus: word index " + std::to_string(w) + " in document " +
                    std::to_string(d) + " outside vocabulary of size " + std::to_string(vocab_size));
      }
    }
  }
}

BagCorpus make_bag_corpus(std::span<const corpus::PaddedDocument> docs, std::size_t vocab_size) {
  BagCorpus bags;
  bags.vocab_size = vocab_size;
  bags.docs.reserve(docs.size());
  for (const auto& doc : docs) {
    bags.docs.emplace_back(doc.indices.begin(),
                           doc.indices.begin() + static_cast<std::ptrdiff_t>(doc.true_length));
  }
  return bags;
}

void LdaConfig::validate() const {
  if (k < 1) throw Error("lda: k must be >= 1");
  if (alpha && !(*alpha > 0.0)) throw Error("lda: alpha must be > 0");
  if (!(beta > 0.0)) throw Error("lda: beta must be > 0");
  if (iterations < 1) throw Error("lda: iterations must be >= 1");
  if (burn_in >= iterations) throw Error("lda: burn_in must be < iterations");
}

TopicModel::TopicModel(const LdaConfig& config, std::size_t num_docs, std::size_t vocab_size)
    : config_(config),
      alpha_(config.effective_alpha()),
      vocab_size_(vocab_size),
      doc_topic_(num_docs * config.k, 0),
      word_topic_(vocab_size * config.k, 0),
      topic_total_(config.k, 0),
      doc_length_(num_docs, 0) {}

void TopicModel::add_token(std::size_t d, std::int32_t word, std::int32_t topic) {
  const std::size_t k = config_.k;
  ++doc_topic_[d * k + topic];
  ++word_topic_[static_cast<std::size_t>(word) * k + topic];
  ++topic_total_[topic];
}

void TopicModel::remove_token(std::size_t d, std::int32_t word, std::int32_t topic) {
  const std::size_t k = config_.k;
  --doc_topic_[d * k + topic];
  --word_topic_[static_cast<std::size_t>(word) * k + topic];
  --topic_total_[topic];
}

void TopicModel::topic_weights(std::size_t d, std::int32_t w, std::span<double> out) const {
  const std::size_t k = config_.k;
  simd::active().lda_topic_weights(doc_topic_.data() + d * k,
                                   word_topic_.data() + static_cast<std::size_t>(w) * k,
                                   topic_total_.data(), alpha_, config_.beta,
                                   static_cast<double>(vocab_size_) * config_.beta, k, out.data());
}

void TopicModel::check_counts(const BagCorpus* corpus) const {
  const std::size_t k = config_.k;
  const std::size_t m = num_docs();
  for (std::size_t d = 0; d < m; ++d) {
    std::int64_t row = 0;
    for (std::size_t t = 0; t < k; ++t) {
      if (doc_topic_[d * k + t] < 0) throw Error("lda: negative doc-topic count");
      row += doc_topic_[d * k + t];
    }
    if (row != doc_length_[d]) {
      throw Error("lda: doc-topic row " + std::to_string(d) + " sums to " + std::to_string(row) +
                  ", document has " + std::to_string(doc_length_[d]) + " tokens");
    }
  }
  std::vector<std::int64_t> totals(k, 0);
  for (std::size_t w = 0; w < vocab_size_; ++w) {
    for (std::size_t t = 0; t < k; ++t) {
      if (word_topic_[w * k + t] < 0) throw Error("lda: negative topic-word count");
      totals[t] += word_topic_[w * k + t];
    }
  }
  std::int64_t grand = 0;
  for (std::size_t t = 0; t < k; ++t) {
    if (totals[t] != topic_total_[t]) {
      throw Error("lda: topic-word row " + std::to_string(t) + " disagrees with its total");
    }
    grand += totals[t];
  }
  const std::int64_t tokens = std::accumulate(doc_length_.begin(), doc_length_.end(), std::int64_t{0});
  if (grand != tokens) throw Error("lda: topic totals do not sum to the token count");

  if (corpus == nullptr || z_.empty()) return;
  // Recount from the assignments.
  std::vector<std::int32_t> dt(doc_topic_.size(), 0);
  std::vector<std::int32_t> wt(word_topic_.size(), 0);
  for (std::size_t d = 0; d < m; ++d) {
    const auto& words = corpus->docs[d];
    if (words.size() != z_[d].size()) throw Error("lda: assignment length mismatch");
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto t = z_[d][i];
      if (t < 0 || static_cast<std::size_t>(t) >= k) throw Error("lda: assignment out of range");
      ++dt[d * k + t];
      ++wt[static_cast<std::size_t>(words[i]) * k + t];
    }
  }
  if (dt != doc_topic_ || wt != word_topic_) {
    throw Error("lda: count matrices disagree with assignments");
  }
}

void TopicModel::set_counts(std::vector<std::int32_t> doc_topic,
                            std::vector<std::int32_t> topic_word) {
  const std::size_t k = config_.k;
  const std::size_t m = num_docs();
  if (doc_topic.size() != m * k || topic_word.size() != k * vocab_size_) {
    throw Error("lda: count matrix shape mismatch");
  }
  doc_topic_ = std::move(doc_topic);
  for (std::size_t d = 0; d < m; ++d) {
    doc_length_[d] = 0;
    for (std::size_t t = 0; t < k; ++t) doc_length_[d] += doc_topic_[d * k + t];
  }
  std::fill(topic_total_.begin(), topic_total_.end(), 0);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t w = 0; w < vocab_size_; ++w) {
      word_topic_[w * k + t] = topic_word[t * vocab_size_ + w];
      topic_total_[t] += topic_word[t * vocab_size_ + w];
    }
  }
  z_.clear();
}

namespace {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
T expect_field(std::istream& in, const std::string& key, const std::filesystem::path& path) {
  std::string name;
  T value{};
  if (!(in >> name) || name != key || !(in >> value)) {
    throw Error("lda model " + path.string() + ": expected field '" + key + "'");
  }
  return value;
}

}  // namespace

void TopicModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write lda model: " + path.string());
  const std::size_t k = config_.k;
  out << "tbcnn-lda 1\n";
  out << "k " << k << "\n";
  out << "V " << vocab_size_ << "\n";
  out << "M " << num_docs() << "\n";
  out << "alpha " << format_double(alpha_) << "\n";
  out << "beta " << format_double(config_.beta) << "\n";
  out << "iterations " << config_.iterations << "\n";
  out << "burn_in " << config_.burn_in << "\n";
  out << "seed " << config_.seed << "\n";
  out << "doc_topic\n";
  for (std::size_t d = 0; d < num_docs(); ++d) {
    for (std::size_t t = 0; t < k; ++t) out << (t ? " " : "") << doc_topic_[d * k + t];
    out << '\n';
  }
  out << "topic_word\n";
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t w = 0; w < vocab_size_; ++w) out << (w ? " " : "") << word_topic_[w * k + t];
    out << '\n';
  }
  if (!out) throw Error("failed writing lda model: " + path.string());
}

TopicModel TopicModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read lda model: " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "tbcnn-lda" || version != 1) {
    throw Error("not a tbcnn lda model: " + path.string());
  }
  LdaConfig config;
  config.k = expect_field<std::size_t>(in, "k", path);
  const auto vocab_size = expect_field<std::size_t>(in, "V", path);
  const auto num_docs = expect_field<std::size_t>(in, "M", path);
  config.alpha = expect_field<double>(in, "alpha", path);
  config.beta = expect_field<double>(in, "beta", path);
  config.iterations = expect_field<std::size_t>(in, "iterations", path);
  config.burn_in = expect_field<std::size_t>(in, "burn_in", path);
  config.seed = expect_field<std::uint64_t>(in, "seed", path);
  config.validate();

  auto read_block = [&](const std::string& name, std::size_t n) {
    std::string header;
    if (!(in >> header) || header != name) {
      throw Error("lda model " + path.string() + ": expected block '" + name + "'");
    }
    std::vector<std::int32_t> values(n);
    for (auto& v : values) {
      if (!(in >> v)) throw Error("lda model " + path.string() + ": truncated block " + name);
    }
    return values;
  };
  auto doc_topic = read_block("doc_topic", num_docs * config.k);
  auto topic_word = read_block("topic_word", config.k * vocab_size);
  TopicModel model(config, num_docs, vocab_size);
  model.set_counts(std::move(doc_topic), std::move(topic_word));
  return model;
}

std::size_t sample_from_weights(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (const double w : weights) total += w;
  const double u = rng.uniform01() * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cumulative += weights[i];
    if (u < cumulative) return i;
  }
  return weights.size() - 1;
}

GibbsSampler::GibbsSampler(TopicModel& model, const BagCorpus& corpus, std::uint64_t seed)
    : model_(model), corpus_(corpus), rng_(seed), weights_(model.num_topics()) {
  if (corpus.num_docs() != model.num_docs() || corpus.vocab_size != model.vocab_size()) {
    throw Error("gibbs: corpus shape does not match model");
  }
}

void GibbsSampler::initialize() {
  const std::size_t k = model_.num_topics();
  model_.z_.assign(corpus_.num_docs(), {});
  for (std::size_t d = 0; d < corpus_.num_docs(); ++d) {
    const auto& words = corpus_.docs[d];
    auto& z = model_.z_[d];
    z.resize(words.size());
    model_.doc_length_[d] = static_cast<std::int32_t>(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      z[i] = static_cast<std::int32_t>(rng_.below(k));
      model_.add_token(d, words[i], z[i]);
    }
  }
}

void GibbsSampler::remove_assignment(std::size_t d, std::size_t position) {
  model_.remove_token(d, corpus_.docs[d][position], model_.z_[d][position]);
}

std::size_t GibbsSampler::resample_assignment(std::size_t d, std::size_t position) {
  const std::int32_t w = corpus_.docs[d][position];
  model_.topic_weights(d, w, weights_);
  const auto t = static_cast<std::int32_t>(sample_from_weights(weights_, rng_));
  model_.z_[d][position] = t;
  model_.add_token(d, w, t);
  return static_cast<std::size_t>(t);
}

void GibbsSampler::sweep() {
  for (std::size_t d = 0; d < corpus_.num_docs(); ++d) {
    for (std::size_t i = 0; i < corpus_.docs[d].size(); ++i) {
      remove_assignment(d, i);
      resample_assignment(d, i);
    }
  }
}

TopicModel fit_lda(const BagCorpus& corpus, const LdaConfig& config, const SweepObserver& observer) {
  config.validate();
  if (corpus.num_docs() == 0) throw Error("fit_lda: empty corpus");
  corpus.validate();
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    if (corpus.docs[d].empty()) {
      throw Error("fit_lda: document " + std::to_string(d) + " has no in-vocabulary tokens");
    }
  }
  TopicModel model(config, corpus.num_docs(), corpus.vocab_size);
  GibbsSampler sampler(model, corpus, config.seed);
  sampler.initialize();
  if (observer) observer(0, model);
  for (std::size_t s = 1; s <= config.iterations; ++s) {
    sampler.sweep();
#ifndef NDEBUG
    model.check_counts();
#endif
    if (observer) observer(s, model);
  }
  return model;
}

std::vector<double> estimate_theta(const TopicModel& model, std::size_t d) {
  if (d >= model.num_docs()) throw Error("estimate_theta: document index out of range");
  const std::size_t k = model.num_topics();
  const double denom = static_cast<double>(model.doc_length(d)) + static_cast<double>(k) * model.alpha();
  std::vector<double> theta(k);
  for (std::size_t t = 0; t < k; ++t) {
    theta[t] = (static_cast<double>(model.doc_topic(d, t)) + model.alpha()) / denom;
  }
  return theta;
}

std::vector<double> estimate_phi(const TopicModel& model, std::size_t t) {
  if (t >= model.num_topics()) throw Error("estimate_phi: topic index out of range");
  const std::size_t v = model.vocab_size();
  const double denom =
      static_cast<double>(model.topic_total(t)) + static_cast<double>(v) * model.beta();
  std::vector<double> phi(v);
  for (std::size_t w = 0; w < v; ++w) {
    phi[w] = (static_cast<double>(model.topic_word(t, w)) + model.beta()) / denom;
  }
  return phi;
}

double perplexity(const TopicModel& model, const BagCorpus& corpus) {
  const std::size_t tokens = corpus.total_tokens();
  if (tokens == 0) throw Error("perplexity: empty corpus");
  if (corpus.num_docs() != model.num_docs()) {
    throw Error("perplexity: corpus has " + std::to_string(corpus.num_docs()) +
                " documents, model was fitted on " + std::to_string(model.num_docs()));
  }
  const std::size_t k = model.num_topics();
  const double vbeta = static_cast<double>(model.vocab_size()) * model.beta();
  std::vector<double> phi_norm(k);
  for (std::size_t t = 0; t < k; ++t) phi_norm[t] = static_cast<double>(model.topic_total(t)) + vbeta;

  double log_likelihood = 0.0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto theta = estimate_theta(model, d);
    for (const auto w : corpus.docs[d]) {
      double p = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        p += theta[t] * ((static_cast<double>(model.topic_word(t, w)) + model.beta()) / phi_norm[t]);
      }
      log_likelihood += std::log(p);
    }
  }
  return std::exp(-log_likelihood / static_cast<double>(tokens));
}

std::vector<std::int32_t> top_keywords(const TopicModel& model, std::size_t t, std::size_t count) {
  const auto phi = estimate_phi(model, t);
  std::vector<std::int32_t> order(phi.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(count, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::int32_t a, std::int32_t b) {
                      return phi[a] != phi[b] ? phi[a] > phi[b] : a < b;
                    });
  order.resize(n);
  return order;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t dominant_topic(const TopicModel& model, std::size_t d) {
  return argmax(estimate_theta(model, d));
}

SweepResult sweep_topics(const BagCorpus& corpus, std::span<const std::size_t> k_values,
                         const LdaConfig& config_template) {
  if (k_values.empty()) throw Error("sweep_topics: no k values");
  SweepResult result;
  double best = 0.0;
  for (const std::size_t k : k_values) {
    LdaConfig config = config_template;
    config.k = k;
    try {
      const TopicModel model = fit_lda(corpus, config);
      const double p = perplexity(model, corpus);
      result.rows.emplace_back(k, p);
      if (result.rows.size() == 1 || p < best) {
        best = p;
        result.best_k = k;
      }
    } catch (const Error& e) {
      throw Error("sweep_topics: k=" + std::to_string(k) + ": " + e.what());
    }
  }
  return result;
}

void write_sweep_report(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write sweep report: " + path.string());
  out << "k\tperplexity\n";
  for (const auto& [k, p] : result.rows) out << k << '\t' << format_double(p) << '\n';
}

std::vector<double> fold_in(const TopicModel& model, std::span<const std::int32_t> words,
                            std::size_t sweeps, std::uint64_t seed) {
  const std::size_t k = model.num_topics();
  const double alpha = model.alpha();
  const double beta = model.beta();
  const double vbeta = static_cast<double>(model.vocab_size()) * beta;
  Rng rng(seed);
  std::vector<std::int32_t> counts(k, 0);
  std::vector<std::int32_t> z(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] < 0 || static_cast<std::size_t>(words[i]) >= model.vocab_size()) {
      throw Error("fold_in: word index out of range");
    }
    z[i] = static_cast<std::int32_t>(rng.below(k));
    ++counts[z[i]];
  }
  // Frozen topic-word counts as contiguous rows for the weight kernel.
  std::vector<std::int32_t> totals(k);
  for (std::size_t t = 0; t < k; ++t) totals[t] = model.topic_total(t);
  std::vector<std::int32_t> column(k);
  std::vector<double> weights(k);
  const auto& kernels = simd::active();
  for (std::size_t s = 0; s < sweeps; ++s) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      --counts[z[i]];
      for (std::size_t t = 0; t < k; ++t) column[t] = model.topic_word(t, words[i]);
      kernels.lda_topic_weights(counts.data(), column.data(), totals.data(), alpha, beta, vbeta, k,
                                weights.data());
      z[i] = static_cast<std::int32_t>(sample_from_weights(weights, rng));
      ++counts[z[i]];
    }
  }
  std::vector<double> theta(k);
  const double denom = static_cast<double>(words.size()) + static_cast<double>(k) * alpha;
  for (std::size_t t = 0; t < k; ++t) theta[t] = (static_cast<double>(counts[t]) + alpha) / denom;
  return theta;
}

}  // namespace tbcnn::topic
