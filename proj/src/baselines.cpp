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

#include "tbcnn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>

namespace tbcnn::baselines {
namespace {

void for_each_feature(const corpus::LabeledDocument& doc, std::size_t ngram,
                      const std::function<void(const std::string&)>& visit) {
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    visit(doc.tokens[i]);
    if (ngram >= 2 && i + 1 < doc.tokens.size()) visit(doc.tokens[i] + ' ' + doc.tokens[i + 1]);
  }
}

void require_two_classes(const SparseCounts& counts, const char* who) {
  if (counts.docs.size() != counts.labels.size()) {
    throw Error(std::string(who) + ": label count does not match document count");
  }
  bool seen[2] = {false, false};
  for (const int y : counts.labels) {
    if (y != 0 && y != 1) throw Error(std::string(who) + ": labels must be 0 or 1");
    seen[y] = true;
  }
  if (!seen[0] || !seen[1]) throw Error(std::string(who) + ": both classes must be present");
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

FeatureSpace::FeatureSpace(std::span<const corpus::LabeledDocument> train, FeatureOptions options)
    : options_(options) {
  if (options_.ngram < 1 || options_.ngram > 2) throw Error("features: ngram must be 1 or 2");
  // Indices follow first appearance so the space is deterministic.
  for (const auto& doc : train) {
    for_each_feature(doc, options_.ngram, [&](const std::string& f) {
      index_.try_emplace(f, static_cast<std::int32_t>(index_.size()));
    });
  }
}

SparseCounts FeatureSpace::transform(std::span<const corpus::LabeledDocument> docs) const {
  SparseCounts out;
  out.vocab_size = index_.size();
  out.docs.reserve(docs.size());
  std::map<std::int32_t, double> row;
  for (const auto& doc : docs) {
    row.clear();
    for_each_feature(doc, options_.ngram, [&](const std::string& f) {
      if (const auto it = index_.find(f); it != index_.end()) row[it->second] += 1.0;
    });
    SparseVector v(row.begin(), row.end());
    if (options_.binary) {
      for (auto& e : v) e.second = 1.0;
    }
    out.docs.push_back(std::move(v));
    out.labels.push_back(doc.label);
  }
  return out;
}

SparseCounts binarize(const SparseCounts& counts) {
  SparseCounts out = counts;
  for (auto& doc : out.docs) {
    for (auto& e : doc) e.second = 1.0;
  }
  return out;
}

MnbModel train_mnb(const SparseCounts& counts, double smoothing) {
  if (!(smoothing > 0.0)) throw Error("mnb: smoothing must be > 0");
  require_two_classes(counts, "mnb");
  const std::size_t v = counts.vocab_size;
  std::array<std::vector<double>, 2> totals{std::vector<double>(v, 0.0), std::vector<double>(v, 0.0)};
  std::array<double, 2> class_docs{0.0, 0.0};
  for (std::size_t d = 0; d < counts.docs.size(); ++d) {
    const int c = counts.labels[d];
    class_docs[c] += 1.0;
    for (const auto& [w, x] : counts.docs[d]) totals[c][w] += x;
  }
  MnbModel model;
  model.smoothing = smoothing;
  const double n = class_docs[0] + class_docs[1];
  for (int c = 0; c < 2; ++c) {
    const double total = std::accumulate(totals[c].begin(), totals[c].end(), 0.0);
    const double denom = total + smoothing * static_cast<double>(v);
    model.log_prob[c].resize(v);
    for (std::size_t w = 0; w < v; ++w) model.log_prob[c][w] = std::log((totals[c][w] + smoothing) / denom);
    model.log_prior[c] = std::log(class_docs[c] / n);
  }
  return model;
}

std::array<double, 2> mnb_posterior(const MnbModel& model, const SparseVector& doc) {
  std::array<double, 2> score = model.log_prior;
  for (int c = 0; c < 2; ++c) {
    for (const auto& [w, x] : doc) score[c] += x * model.log_prob[c][static_cast<std::size_t>(w)];
  }
  const double top = std::max(score[0], score[1]);
  const double e0 = std::exp(score[0] - top);
  const double e1 = std::exp(score[1] - top);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

int predict_mnb(const MnbModel& model, const SparseVector& doc) {
  const auto post = mnb_posterior(model, doc);
  return post[1] > post[0] ? 1 : 0;
}

std::vector<double> nb_log_count_ratio(const SparseCounts& binary_counts, double smoothing) {
  require_two_classes(binary_counts, "nb_log_count_ratio");
  const std::size_t v = binary_counts.vocab_size;
  std::vector<double> p(v, smoothing);
  std::vector<double> q(v, smoothing);
  for (std::size_t d = 0; d < binary_counts.docs.size(); ++d) {
    auto& target = binary_counts.labels[d] == corpus::kPositive ? p : q;
    for (const auto& [w, x] : binary_counts.docs[d]) target[w] += x;
  }
  const double p_norm = std::accumulate(p.begin(), p.end(), 0.0);
  const double q_norm = std::accumulate(q.begin(), q.end(), 0.0);
  std::vector<double> r(v);
  // A difference of logs keeps r exactly antisymmetric under a class swap.
  for (std::size_t w = 0; w < v; ++w) r[w] = std::log(p[w] / p_norm) - std::log(q[w] / q_norm);
  return r;
}

SparseCounts scale_features(const SparseCounts& counts, std::span<const double> ratio) {
  if (ratio.size() != counts.vocab_size) throw Error("scale_features: ratio length mismatch");
  SparseCounts out = counts;
  for (auto& doc : out.docs) {
    for (auto& [w, x] : doc) x *= ratio[static_cast<std::size_t>(w)];
  }
  return out;
}

LinearModel train_linear(const SparseCounts& features, const LinearConfig& config) {
  if (features.docs.empty()) throw Error("train_linear: no documents");
  require_two_classes(features, "train_linear");
  if (!(config.reg > 0.0)) throw Error("train_linear: reg must be > 0");
  const std::size_t n = features.docs.size();
  // w = scale * v keeps the shrink step O(1).
  std::vector<double> v(features.vocab_size, 0.0);
  double scale = 1.0;
  double bias = 0.0;
  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (const std::size_t idx : order) {
      const auto& x = features.docs[idx];
      const double y = features.labels[idx] == corpus::kPositive ? 1.0 : -1.0;
      double wx = 0.0;
      for (const auto& [w, val] : x) wx += v[static_cast<std::size_t>(w)] * val;
      const double margin = y * (scale * wx + bias);
      if (!std::isfinite(margin)) {
        throw Error("train_linear: diverged at step " + std::to_string(t));
      }
      const double step = std::min(config.max_step, 1.0 / (config.reg * static_cast<double>(t + 1)));
      const double bias_step = config.max_step / (1.0 + static_cast<double>(t) / static_cast<double>(n));
      const double shrink = 1.0 - step * config.reg;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      double g = 0.0;
      if (config.loss == LossKind::kHinge) {
        g = margin < 1.0 ? 1.0 : 0.0;
      } else {
        g = 1.0 / (1.0 + std::exp(margin));
      }
      if (g != 0.0) {
        const double coef = step * g * y / scale;
        for (const auto& [w, val] : x) v[static_cast<std::size_t>(w)] += coef * val;
        bias += bias_step * g * y;
      }
      if (scale < 1e-9) {
        for (auto& e : v) e *= scale;
        scale = 1.0;
      }
      ++t;
    }
  }
  LinearModel model;
  model.loss = config.loss;
  model.reg = config.reg;
  model.interpolation = config.interpolation;
  model.bias = bias;
  model.weights.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) model.weights[i] = scale * v[i];
  if (config.interpolation < 1.0 && !model.weights.empty()) {
    double mean_abs = 0.0;
    for (const double w : model.weights) mean_abs += std::abs(w);
    mean_abs /= static_cast<double>(model.weights.size());
    for (auto& w : model.weights) w = (1.0 - config.interpolation) * mean_abs + config.interpolation * w;
  }
  for (const double w : model.weights) {
    if (!std::isfinite(w)) throw Error("train_linear: non-finite weight after training");
  }
  return model;
}

double decision_value(const LinearModel& model, const SparseVector& doc) {
  double s = model.bias;
  for (const auto& [w, x] : doc) {
    if (static_cast<std::size_t>(w) < model.weights.size()) s += model.weights[static_cast<std::size_t>(w)] * x;
  }
  return s;
}

int predict_linear(const LinearModel& model, const SparseVector& doc) {
  return decision_value(model, doc) > 0.0 ? 1 : 0;
}

LinearModel tune_and_train_linear(const SparseCounts& features, LinearConfig config,
                                  std::span<const double> candidates, double holdout_fraction) {
  if (candidates.empty()) throw Error("tune_linear: no candidate regularization strengths");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw Error("tune_linear: holdout fraction must be in (0, 1)");
  }
  const std::size_t n = features.docs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, "holdout"));
  rng.shuffle(order);
  const auto held = std::max<std::size_t>(1, static_cast<std::size_t>(holdout_fraction * static_cast<double>(n)));
  SparseCounts fit_part;
  SparseCounts held_part;
  fit_part.vocab_size = held_part.vocab_size = features.vocab_size;
  for (std::size_t i = 0; i < n; ++i) {
    auto& target = i < held ? held_part : fit_part;
    target.docs.push_back(features.docs[order[i]]);
    target.labels.push_back(features.labels[order[i]]);
  }
  double best_reg = candidates.front();
  double best_acc = -1.0;
  for (const double reg : candidates) {
    config.reg = reg;
    const LinearModel model = train_linear(fit_part, config);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < held_part.docs.size(); ++i) {
      hits += predict_linear(model, held_part.docs[i]) == held_part.labels[i] ? 1 : 0;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(held_part.docs.size());
    if (acc > best_acc) {
      best_acc = acc;
      best_reg = reg;
    }
  }
  config.reg = best_reg;
  return train_linear(features, config);
}

void save_mnb(const std::filesystem::path& path, const MnbModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model: " + path.string());
  out << "kind\tmnb\n";
  out << "smoothing\t" << format_double(model.smoothing) << '\n';
  out << "log_prior\t" << format_double(model.log_prior[0]) << '\t' << format_double(model.log_prior[1]) << '\n';
  for (int c = 0; c < 2; ++c) {
    out << "class\t" << c << '\n';
    for (std::size_t w = 0; w < model.log_prob[c].size(); ++w) {
      out << w << '\t' << format_double(model.log_prob[c][w]) << '\n';
    }
  }
}

void save_linear(const std::filesystem::path& path, const LinearModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model: " + path.string());
  out << "kind\tlinear\n";
  out << "loss\t" << (model.loss == LossKind::kHinge ? "hinge" : "logistic") << '\n';
  out << "reg\t" << format_double(model.reg) << '\n';
  out << "interpolation\t" << format_double(model.interpolation) << '\n';
  out << "bias\t" << format_double(model.bias) << '\n';
  for (std::size_t w = 0; w < model.weights.size(); ++w) {
    if (model.weights[w] != 0.0) out << w << '\t' << format_double(model.weights[w]) << '\n';
  }
}

namespace {

// Reads `key<TAB>value...` header lines and `index<TAB>value` rows.
struct DumpReader {
  std::ifstream in;
  std::filesystem::path path;
  std::size_t line_no = 0;

  explicit DumpReader(const std::filesystem::path& p) : in(p), path(p) {
    if (!in) throw Error("cannot read model: " + p.string());
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    if (!std::getline(in, line)) return false;
    ++line_no;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  }

  std::vector<std::string> expect(const std::string& key, std::size_t values) {
    std::vector<std::string> fields;
    if (!next(fields) || fields.size() != values + 1 || fields[0] != key) fail("expected '" + key + "'");
    return fields;
  }
};

}  // namespace

MnbModel load_mnb(const std::filesystem::path& path) {
  DumpReader r(path);
  if (r.expect("kind", 1)[1] != "mnb") r.fail("not an mnb model");
  MnbModel model;
  model.smoothing = std::stod(r.expect("smoothing", 1)[1]);
  const auto prior = r.expect("log_prior", 2);
  model.log_prior = {std::stod(prior[1]), std::stod(prior[2])};
  std::vector<std::string> fields;
  int current = -1;
  while (r.next(fields)) {
    if (fields.size() == 2 && fields[0] == "class") {
      current = std::stoi(fields[1]);
      if (current != 0 && current != 1) r.fail("bad class");
      continue;
    }
    if (current < 0 || fields.size() != 2) r.fail("malformed row");
    const auto w = std::stoul(fields[0]);
    if (w != model.log_prob[current].size()) r.fail("rows must be dense and ordered");
    model.log_prob[current].push_back(std::stod(fields[1]));
  }
  if (model.log_prob[0].size() != model.log_prob[1].size()) r.fail("class tables differ in size");
  return model;
}

LinearModel load_linear(const std::filesystem::path& path) {
  DumpReader r(path);
  if (r.expect("kind", 1)[1] != "linear") r.fail("not a linear model");
  LinearModel model;
  const auto loss = r.expect("loss", 1)[1];
  if (loss != "hinge" && loss != "logistic") r.fail("unknown loss " + loss);
  model.loss = loss == "hinge" ? LossKind::kHinge : LossKind::kLogistic;
  model.reg = std::stod(r.expect("reg", 1)[1]);
  model.interpolation = std::stod(r.expect("interpolation", 1)[1]);
  model.bias = std::stod(r.expect("bias", 1)[1]);
  std::vector<std::string> fields;
  while (r.next(fields)) {
    if (fields.size() != 2) r.fail("malformed row");
    const auto w = std::stoul(fields[0]);
    if (w >= model.weights.size()) model.weights.resize(w + 1, 0.0);
    model.weights[w] = std::stod(fields[1]);
  }
  return model;
}

}  // namespace tbcnn::baselines
