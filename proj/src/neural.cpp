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

#include "tbcnn/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "tbcnn/corpus.hpp"
#include "tbcnn/simd/kernels.hpp"

namespace tbcnn::nn {

void ConvSpec::validate(std::size_t length) const {
  if (region_sizes.empty()) throw Error("conv: no region sizes");
  if (filters_per_size < 1) throw Error("conv: filters_per_size must be >= 1");
  for (const auto h : region_sizes) {
    if (h < 1 || h > length) {
      throw Error("conv: region size " + std::to_string(h) + " outside [1, " +
                  std::to_string(length) + "]");
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("train: dropout_rate must be in [0, 1)");
  if (!(learning_rate >= 0.0)) throw Error("train: learning_rate must be >= 0");
}

// ---- layer primitives -------------------------------------------------------

std::vector<double> conv1d_forward(const Matrix& input, const Matrix& filter, double bias) {
  if (filter.cols != input.cols) throw Error("conv1d: filter width does not match input width");
  if (filter.rows > input.rows || filter.rows == 0) {
    throw Error("conv1d: region size " + std::to_string(filter.rows) + " exceeds input length " +
                std::to_string(input.rows));
  }
  std::vector<double> out(input.rows - filter.rows + 1);
  simd::active().conv1d_valid(input.data.data(), input.rows, input.cols, filter.data.data(),
                              filter.rows, bias, out.data());
  return out;
}

std::vector<double> relu(std::span<const double> values) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [](double v) { return v > 0.0 ? v : 0.0; });
  return out;
}

PoolResult max_pool_1(std::span<const double> feature_map) {
  if (feature_map.empty()) throw Error("max_pool_1: empty feature map");
  PoolResult best{feature_map[0], 0};
  for (std::size_t i = 1; i < feature_map.size(); ++i) {
    if (feature_map[i] > best.value) best = {feature_map[i], i};
  }
  return best;
}

std::vector<double> dropout(std::span<const double> values, double rate, bool training, Rng& rng) {
  std::vector<double> out(values.begin(), values.end());
  if (!training) return out;
  const double scale = 1.0 / (1.0 - rate);
  for (auto& v : out) v = rng.uniform01() >= rate ? v * scale : 0.0;
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    out[c] = std::exp(scores[c] - top);
    total += out[c];
  }
  for (auto& p : out) p /= total;
  return out;
}

std::vector<double> dense_softmax(std::span<const double> pooled, const Matrix& weights) {
  if (weights.cols != pooled.size()) throw Error("dense: weight width does not match pooled size");
  std::vector<double> scores(weights.rows);
  for (std::size_t c = 0; c < weights.rows; ++c) {
    scores[c] = simd::active().dot(weights.row(c).data(), pooled.data(), pooled.size());
  }
  return softmax(scores);
}

double cross_entropy(std::span<const double> probs, int gold) {
  return -std::log(std::max(probs[static_cast<std::size_t>(gold)], kProbabilityFloor));
}

// ---- model ------------------------------------------------------------------

CnnModel::CnnModel(ConvSpec spec, Matrix embedding, Matrix topic_vectors, std::size_t num_classes,
                   std::uint64_t init_seed, double init_range)
    : spec_(std::move(spec)), init_seed_(init_seed), topic_vectors_(std::move(topic_vectors)) {
  if (embedding.rows < 1 || embedding.cols < 1) throw Error("cnn: empty embedding table");
  if (topic_vectors_.rows > 0 && topic_vectors_.cols != embedding.cols) {
    throw Error("cnn: topic vectors must have the embedding dimension");
  }
  if (num_classes < 2) throw Error("cnn: need at least two classes");
  spec_.validate(std::numeric_limits<std::size_t>::max());
  std::fill(embedding.row(0).begin(), embedding.row(0).end(), 0.0);
  const std::size_t d = embedding.cols + topic_vectors_.cols;
  params_.push_back(std::move(embedding));
  names_.emplace_back("embedding");
  Rng rng(init_seed);
  for (std::size_t r = 0; r < spec_.region_sizes.size(); ++r) {
    const std::size_t h = spec_.region_sizes[r];
    Matrix filters(spec_.filters_per_size, h * d);
    for (auto& w : filters.data) w = rng.uniform(-init_range, init_range);
    const std::string prefix = "conv" + std::to_string(r) + "_h" + std::to_string(h);
    params_.push_back(std::move(filters));
    names_.push_back(prefix + ".weight");
    params_.emplace_back(1, spec_.filters_per_size, 0.0);
    names_.push_back(prefix + ".bias");
  }
  Matrix dense(num_classes, pooled_size());
  for (auto& w : dense.data) w = rng.uniform(-init_range, init_range);
  params_.push_back(std::move(dense));
  names_.emplace_back("dense.weight");
}

std::size_t CnnModel::conv_parameter_count() const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < spec_.region_sizes.size(); ++r) {
    n += filters(r).data.size() + biases(r).data.size();
  }
  return n;
}

bool CnnModel::operator==(const CnnModel& other) const {
  return spec_.region_sizes == other.spec_.region_sizes &&
         spec_.filters_per_size == other.spec_.filters_per_size &&
         init_seed_ == other.init_seed_ && topic_vectors_ == other.topic_vectors_ &&
         params_ == other.params_ && names_ == other.names_;
}

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'B', 'C', 'N', 'N', 'C', 'K', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_u64(in);
  if (n > (1u << 20)) throw Error("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("checkpoint: truncated file");
  return s;
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  write_string(out, name);
  write_u64(out, m.rows);
  write_u64(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

std::pair<std::string, Matrix> read_matrix(std::istream& in) {
  std::string name = read_string(in);
  const auto rows = read_u64(in);
  const auto cols = read_u64(in);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw Error("checkpoint: implausible shape");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) throw Error("checkpoint: truncated tensor " + name);
  return {std::move(name), std::move(m)};
}

}  // namespace

void CnnModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  std::ostringstream sizes;
  for (std::size_t i = 0; i < spec_.region_sizes.size(); ++i) {
    sizes << (i ? "," : "") << spec_.region_sizes[i];
  }
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"region_sizes", sizes.str()},
      {"filters_per_size", std::to_string(spec_.filters_per_size)},
      {"word_dim", std::to_string(word_dim())},
      {"input_width", std::to_string(input_width())},
      {"num_classes", std::to_string(num_classes())},
      {"init_seed", std::to_string(init_seed_)},
  };
  write_u64(out, meta.size());
  for (const auto& [k, v] : meta) {
    write_string(out, k);
    write_string(out, v);
  }
  write_u64(out, params_.size() + 1);
  write_matrix(out, "topic_vectors", topic_vectors_);
  for (std::size_t i = 0; i < params_.size(); ++i) write_matrix(out, names_[i], params_[i]);
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

CnnModel CnnModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint: " + path.string());
  char magic[sizeof kCheckpointMagic] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error("not a tbcnn checkpoint: " + path.string());
  }
  std::map<std::string, std::string> meta;
  const auto num_meta = read_u64(in);
  for (std::uint64_t i = 0; i < num_meta; ++i) {
    auto key = read_string(in);
    meta[key] = read_string(in);
  }
  auto field = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw Error("checkpoint: missing field " + key);
    return it->second;
  };
  CnnModel model;
  model.spec_.region_sizes.clear();
  std::istringstream sizes(field("region_sizes"));
  for (std::string tok; std::getline(sizes, tok, ',');) model.spec_.region_sizes.push_back(std::stoul(tok));
  model.spec_.filters_per_size = std::stoul(field("filters_per_size"));
  model.init_seed_ = std::stoull(field("init_seed"));
  const auto num_tensors = read_u64(in);
  for (std::uint64_t i = 0; i < num_tensors; ++i) {
    auto [name, m] = read_matrix(in);
    if (i == 0) {
      if (name != "topic_vectors") throw Error("checkpoint: expected topic_vectors first");
      model.topic_vectors_ = std::move(m);
    } else {
      model.names_.push_back(std::move(name));
      model.params_.push_back(std::move(m));
    }
  }
  const std::size_t expected = 2 + 2 * model.spec_.region_sizes.size();
  if (model.params_.size() != expected) throw Error("checkpoint: wrong number of tensors");
  if (model.input_width() != std::stoul(field("input_width")) ||
      model.num_classes() != std::stoul(field("num_classes"))) {
    throw Error("checkpoint: tensor shapes disagree with metadata");
  }
  const std::size_t d = model.input_width();
  for (std::size_t r = 0; r < model.spec_.region_sizes.size(); ++r) {
    if (model.filters(r).rows != model.spec_.filters_per_size ||
        model.filters(r).cols != model.spec_.region_sizes[r] * d ||
        model.biases(r).cols != model.spec_.filters_per_size) {
      throw Error("checkpoint: filter bank " + std::to_string(r) + " has the wrong shape");
    }
  }
  if (model.dense().cols != model.pooled_size()) throw Error("checkpoint: dense weights have the wrong shape");
  return model;
}

// ---- forward / backward -----------------------------------------------------

namespace {

struct Workspace {
  std::vector<double> input;
  std::vector<double> feature;
  std::vector<double> pooled;
  std::vector<std::size_t> argmax;
  std::vector<double> mask;
  std::vector<double> dropped;
  std::vector<double> scores;
  std::vector<double> probs;
  std::vector<double> d_pooled;
  std::vector<double> d_input;
};

// Forward over ws.input (rows x d). Fills pooled/argmax/mask/dropped/probs.
void forward(const CnnModel& model, std::size_t rows, bool training, double rate, Rng* rng,
             Workspace& ws) {
  const auto& kernels = simd::active();
  const auto& spec = model.spec();
  const std::size_t d = model.input_width();
  const std::size_t F = spec.filters_per_size;
  const std::size_t P = model.pooled_size();
  ws.pooled.resize(P);
  ws.argmax.resize(P);
  for (std::size_t r = 0; r < spec.region_sizes.size(); ++r) {
    const std::size_t h = spec.region_sizes[r];
    if (h > rows) {
      throw Error("cnn: region size " + std::to_string(h) + " exceeds input length " +
                  std::to_string(rows));
    }
    const std::size_t n = rows - h + 1;
    ws.feature.resize(n);
    const Matrix& bank = model.filters(r);
    const Matrix& bias = model.biases(r);
    for (std::size_t f = 0; f < F; ++f) {
      kernels.conv1d_valid(ws.input.data(), rows, d, bank.row(f).data(), h, bias.data[f],
                           ws.feature.data());
      // relu then 1-max: a non-positive maximum pools to 0 at index 0.
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (ws.feature[i] > ws.feature[best]) best = i;
      }
      const std::size_t j = r * F + f;
      if (ws.feature[best] > 0.0) {
        ws.pooled[j] = ws.feature[best];
        ws.argmax[j] = best;
      } else {
        ws.pooled[j] = 0.0;
        ws.argmax[j] = 0;
      }
    }
  }
  ws.mask.assign(P, 1.0);
  if (training) {
    const double scale = 1.0 / (1.0 - rate);
    for (auto& m : ws.mask) m = rng->uniform01() >= rate ? scale : 0.0;
  }
  ws.dropped.resize(P);
  for (std::size_t j = 0; j < P; ++j) ws.dropped[j] = ws.pooled[j] * ws.mask[j];
  const Matrix& dense = model.dense();
  ws.scores.resize(dense.rows);
  for (std::size_t c = 0; c < dense.rows; ++c) {
    ws.scores[c] = kernels.dot(dense.row(c).data(), ws.dropped.data(), P);
  }
  ws.probs = softmax(ws.scores);
}

void load_example(const CnnModel& model, const Example& ex, Workspace& ws) {
  const std::size_t d = model.input_width();
  ws.input.resize(ex.indices.size() * d);
  std::span<const double> topic_row;
  if (model.uses_topics()) {
    if (ex.topic >= model.topic_vectors().rows) {
      throw Error("cnn: example topic " + std::to_string(ex.topic) + " out of range");
    }
    topic_row = model.topic_vectors().row(ex.topic);
  }
  for (const auto idx : ex.indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= model.embedding().rows) {
      throw Error("cnn: word index " + std::to_string(idx) + " outside the embedding table");
    }
  }
  embed::fuse_into(ex.indices, model.embedding(), topic_row, ws.input);
}

int argmax_label(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return static_cast<int>(best);
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data.begin(), m.data.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Gradients compute_gradients(const CnnModel& model, std::span<const Example> batch,
                            const TrainConfig& config, Rng& dropout_rng) {
  if (batch.empty()) throw Error("compute_gradients: empty batch");
  const auto& kernels = simd::active();
  const auto& params = model.parameters();
  Gradients grads;
  grads.tensors.reserve(params.size());
  for (const auto& p : params) grads.tensors.emplace_back(p.rows, p.cols, 0.0);

  const auto& spec = model.spec();
  const std::size_t d = model.input_width();
  const std::size_t y = model.word_dim();
  const std::size_t F = spec.filters_per_size;
  const std::size_t P = model.pooled_size();
  const double scale = 1.0 / static_cast<double>(batch.size());
  const Matrix& dense = model.dense();
  Matrix& d_dense = grads.tensors.back();
  Matrix& d_embedding = grads.tensors.front();

  Workspace ws;
  std::vector<double> d_scores(dense.rows);
  for (const auto& ex : batch) {
    load_example(model, ex, ws);
    const std::size_t rows = ex.indices.size();
    forward(model, rows, true, config.dropout_rate, &dropout_rng, ws);
    grads.loss += cross_entropy(ws.probs, ex.label) * scale;
    if (argmax_label(ws.probs) == ex.label) ++grads.correct;

    // softmax + cross-entropy
    for (std::size_t c = 0; c < dense.rows; ++c) {
      d_scores[c] = (ws.probs[c] - (static_cast<int>(c) == ex.label ? 1.0 : 0.0)) * scale;
    }
    // dense
    ws.d_pooled.assign(P, 0.0);
    for (std::size_t c = 0; c < dense.rows; ++c) {
      kernels.axpy(d_scores[c], ws.dropped.data(), d_dense.row(c).data(), P);
      kernels.axpy(d_scores[c], dense.row(c).data(), ws.d_pooled.data(), P);
    }
    // dropout, relu, 1-max routing, convolution
    if (config.fine_tune_embeddings) ws.d_input.assign(rows * d, 0.0);
    for (std::size_t r = 0; r < spec.region_sizes.size(); ++r) {
      const std::size_t span = spec.region_sizes[r] * d;
      const Matrix& bank = model.filters(r);
      Matrix& d_bank = grads.tensors[1 + 2 * r];
      Matrix& d_bias = grads.tensors[2 + 2 * r];
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t j = r * F + f;
        if (ws.pooled[j] <= 0.0) continue;  // relu inactive at the maximum
        const double g = ws.d_pooled[j] * ws.mask[j];
        if (g == 0.0) continue;
        const double* window = ws.input.data() + ws.argmax[j] * d;
        kernels.axpy(g, window, d_bank.row(f).data(), span);
        d_bias.data[f] += g;
        if (config.fine_tune_embeddings) {
          kernels.axpy(g, bank.row(f).data(), ws.d_input.data() + ws.argmax[j] * d, span);
        }
      }
    }
    if (config.fine_tune_embeddings) {
      for (std::size_t i = 0; i < rows; ++i) {
        const auto idx = ex.indices[i];
        if (idx == corpus::Vocabulary::kPadIndex) continue;
        kernels.axpy(1.0, ws.d_input.data() + i * d, d_embedding.row(static_cast<std::size_t>(idx)).data(), y);
      }
    }
  }
  if (!std::isfinite(grads.loss)) throw Error("non-finite loss");
  for (std::size_t i = 0; i < grads.tensors.size(); ++i) {
    if (!all_finite(grads.tensors[i])) {
      throw Error("non-finite gradient in " + model.parameter_names()[i]);
    }
  }
  return grads;
}

double batch_loss(const CnnModel& model, std::span<const Example> batch, const TrainConfig& config,
                  Rng& dropout_rng) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  Workspace ws;
  double loss = 0.0;
  for (const auto& ex : batch) {
    load_example(model, ex, ws);
    forward(model, ex.indices.size(), true, config.dropout_rate, &dropout_rng, ws);
    loss += cross_entropy(ws.probs, ex.label);
  }
  return loss / static_cast<double>(batch.size());
}

Optimizer::Optimizer(const CnnModel& model, const TrainConfig& config) : config_(config) {
  if (config_.optimizer == OptimizerKind::kAdam) {
    for (const auto& p : model.parameters()) {
      first_moment_.emplace_back(p.rows, p.cols, 0.0);
      second_moment_.emplace_back(p.rows, p.cols, 0.0);
    }
  }
}

void Optimizer::step(CnnModel& model, const Gradients& grads) {
  auto& params = model.parameters();
  if (grads.tensors.size() != params.size()) throw Error("optimizer: gradient set does not match model");
  ++steps_;
  const auto& kernels = simd::active();
  const std::size_t first = config_.fine_tune_embeddings ? 0 : 1;
  if (config_.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = first; i < params.size(); ++i) {
      kernels.axpy(-config_.learning_rate, grads.tensors[i].data.data(), params[i].data.data(),
                   params[i].data.size());
    }
  } else {
    const double bias1 = 1.0 - std::pow(config_.adam_beta1, static_cast<double>(steps_));
    const double bias2 = 1.0 - std::pow(config_.adam_beta2, static_cast<double>(steps_));
    for (std::size_t i = first; i < params.size(); ++i) {
      kernels.adam_update(params[i].data.data(), grads.tensors[i].data.data(),
                          first_moment_[i].data.data(), second_moment_[i].data.data(),
                          params[i].data.size(), config_.learning_rate, config_.adam_beta1,
                          config_.adam_beta2, config_.adam_epsilon, bias1, bias2);
    }
  }
  // The pad row is never updated.
  auto pad = params[0].row(corpus::Vocabulary::kPadIndex);
  std::fill(pad.begin(), pad.end(), 0.0);
  for (std::size_t i = first; i < params.size(); ++i) {
    if (!all_finite(params[i])) throw Error("non-finite parameter in " + model.parameter_names()[i]);
  }
}

std::vector<EpochStats> train(CnnModel& model, std::span<const Example> examples,
                              const TrainConfig& config) {
  config.validate();
  std::vector<EpochStats> history;
  if (config.epochs == 0) return history;
  if (examples.empty()) throw Error("train: no training examples");
  Optimizer optimizer(model, config);
  Rng shuffle_rng(config.shuffle_seed);
  Rng dropout_rng(config.dropout_seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      ++batch_no;
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      try {
        const Gradients grads = compute_gradients(model, batch, config, dropout_rng);
        optimizer.step(model, grads);
        loss_sum += grads.loss * static_cast<double>(batch.size());
        correct += grads.correct;
      } catch (const Error& e) {
        throw Error("train: epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) +
                    ": " + e.what());
      }
    }
    const double n = static_cast<double>(examples.size());
    history.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
  }
  return history;
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochStats> history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write training log: " + path.string());
  out << "epoch\tloss\ttrain_acc\n";
  char buf[96];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", e.epoch, e.loss, e.accuracy);
    out << buf;
  }
}

Prediction predict(const CnnModel& model, const Example& example) {
  Workspace ws;
  load_example(model, example, ws);
  forward(model, example.indices.size(), false, 0.0, nullptr, ws);
  return {argmax_label(ws.probs), ws.probs};
}

Prediction predict(const CnnModel& model, const embed::FusedInput& input) {
  if (input.matrix.cols != model.input_width()) {
    throw Error("predict: input has " + std::to_string(input.matrix.cols) + " columns, model expects " +
                std::to_string(model.input_width()));
  }
  Workspace ws;
  ws.input = input.matrix.data;
  forward(model, input.matrix.rows, false, 0.0, nullptr, ws);
  return {argmax_label(ws.probs), ws.probs};
}

}  // namespace tbcnn::nn
