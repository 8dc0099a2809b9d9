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

#include "tbcnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "tbcnn/embedding.hpp"

namespace tbcnn::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

void write_scalar(const fs::path& path, double value) { open_out(path) << format_g17(value) << '\n'; }

double read_scalar(const fs::path& path) {
  auto in = open_in(path);
  std::string text;
  in >> text;
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw Error(path.string() + ": expected a number");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

double parse_double(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw Error(where + ": bad number '" + text + "'");
  return value;
}

std::string canonical_system(const std::string& name) {
  if (name == "bow_svm") return "bow-svm";
  if (std::find(kAllSystems.begin(), kAllSystems.end(), name) == kAllSystems.end()) {
    throw Error("unknown system '" + name + "'");
  }
  return name;
}

const char* kReportHeader = "system\taccuracy\tprecision\trecall\tf1\tflags\tseconds";

std::string flags_field(const Metrics& m) {
  std::string flags;
  if (m.precision_undefined) flags = "precision_undefined";
  if (m.recall_undefined) flags += flags.empty() ? "recall_undefined" : ",recall_undefined";
  return flags.empty() ? "-" : flags;
}

std::string report_row(const SystemResult& r) {
  const Metrics& m = r.metrics;
  return r.system + '\t' + format_g17(m.accuracy) + '\t' + format_g17(m.precision) + '\t' +
         format_g17(m.recall) + '\t' + format_g17(m.f1) + '\t' + flags_field(m) + '\t' +
         format_g17(r.seconds);
}

SystemResult parse_report_row(const std::string& line, const std::string& where) {
  const auto f = split_tabs(line);
  if (f.size() != 7) throw Error(where + ": expected 7 fields, found " + std::to_string(f.size()));
  SystemResult r;
  r.system = f[0];
  r.metrics.accuracy = parse_double(f[1], where);
  r.metrics.precision = parse_double(f[2], where);
  r.metrics.recall = parse_double(f[3], where);
  r.metrics.f1 = parse_double(f[4], where);
  if (f[5] != "-") {
    std::stringstream flags(f[5]);
    std::string flag;
    while (std::getline(flags, flag, ',')) {
      if (flag == "precision_undefined") {
        r.metrics.precision_undefined = true;
      } else if (flag == "recall_undefined") {
        r.metrics.recall_undefined = true;
      } else {
        throw Error(where + ": unknown flag '" + flag + "'");
      }
    }
  }
  r.seconds = parse_double(f[6], where);
  return r;
}

// ---- config <-> json ----

const char* optimizer_name(nn::OptimizerKind kind) {
  return kind == nn::OptimizerKind::kAdam ? "adam" : "sgd";
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset.string();
  j["output"] = c.output.string();
  j["seed"] = c.seed;
  j["corpus"] = {{"max_length", c.max_length},
                 {"min_count", c.min_count},
                 {"max_vocab", c.max_vocab},
                 {"train_limit", c.train_limit},
                 {"test_limit", c.test_limit}};
  j["lda"] = {{"k", c.lda_k ? json(*c.lda_k) : json(nullptr)},
              {"alpha", c.lda.alpha ? json(*c.lda.alpha) : json(nullptr)},
              {"beta", c.lda.beta},
              {"iterations", c.lda.iterations},
              {"burn_in", c.lda.burn_in},
              {"sweep_k", c.sweep_k},
              {"fold_in_sweeps", c.fold_in_sweeps}};
  j["embedding"] = {{"path", c.embeddings.string()}, {"dim", c.embedding_dim}, {"keywords", c.keywords}};
  j["cnn"] = {{"region_sizes", c.conv.region_sizes},
              {"filters", c.conv.filters_per_size},
              {"batch_size", c.train.batch_size},
              {"epochs", c.train.epochs},
              {"learning_rate", c.train.learning_rate},
              {"dropout", c.train.dropout_rate},
              {"optimizer", optimizer_name(c.train.optimizer)},
              {"adam_beta1", c.train.adam_beta1},
              {"adam_beta2", c.train.adam_beta2},
              {"adam_epsilon", c.train.adam_epsilon},
              {"fine_tune_embeddings", c.train.fine_tune_embeddings}};
  j["baselines"] = {
      {"mnb", {{"smoothing", c.mnb_smoothing}, {"ngram", c.mnb_ngram}, {"binary", c.mnb_binary}}},
      {"svm",
       {{"ngram", c.svm_ngram}, {"regs", c.svm_regs}, {"epochs", c.svm_epochs}, {"holdout", c.svm_holdout}}},
      {"nbsvm",
       {{"ngram", c.nbsvm_ngram},
        {"smoothing", c.nbsvm_smoothing},
        {"interpolation", c.nbsvm_interpolation},
        {"reg", c.nbsvm_reg}}}};
  j["systems"] = c.systems;
  return j;
}

// Every key in `patch` must exist in `schema`; objects recurse. A null in
// the schema (an optional left unset) accepts any value.
void check_keys(const json& schema, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) return;
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw Error("config: unknown key '" + path + "'");
    if (schema[key].is_object()) {
      if (!value.is_object()) throw Error("config: '" + path + "' must be an object");
      check_keys(schema[key], value, path);
    }
  }
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("config: bad value for '" + (section.empty() ? "" : section + ".") + key + "'");
  }
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.dataset = get_as<std::string>(j, "dataset", "");
  c.output = get_as<std::string>(j, "output", "");
  c.seed = get_as<std::uint64_t>(j, "seed", "");

  const json& co = j.at("corpus");
  c.max_length = get_as<std::size_t>(co, "max_length", "corpus");
  c.min_count = get_as<std::size_t>(co, "min_count", "corpus");
  c.max_vocab = get_as<std::size_t>(co, "max_vocab", "corpus");
  c.train_limit = get_as<std::size_t>(co, "train_limit", "corpus");
  c.test_limit = get_as<std::size_t>(co, "test_limit", "corpus");

  const json& l = j.at("lda");
  if (l.at("k").is_null()) {
    c.lda_k.reset();
  } else {
    c.lda_k = get_as<std::size_t>(l, "k", "lda");
  }
  if (l.at("alpha").is_null()) {
    c.lda.alpha.reset();
  } else {
    c.lda.alpha = get_as<double>(l, "alpha", "lda");
  }
  c.lda.beta = get_as<double>(l, "beta", "lda");
  c.lda.iterations = get_as<std::size_t>(l, "iterations", "lda");
  c.lda.burn_in = get_as<std::size_t>(l, "burn_in", "lda");
  c.sweep_k = get_as<std::vector<std::size_t>>(l, "sweep_k", "lda");
  c.fold_in_sweeps = get_as<std::size_t>(l, "fold_in_sweeps", "lda");

  const json& e = j.at("embedding");
  c.embeddings = get_as<std::string>(e, "path", "embedding");
  c.embedding_dim = get_as<std::size_t>(e, "dim", "embedding");
  c.keywords = get_as<std::size_t>(e, "keywords", "embedding");

  const json& n = j.at("cnn");
  c.conv.region_sizes = get_as<std::vector<std::size_t>>(n, "region_sizes", "cnn");
  c.conv.filters_per_size = get_as<std::size_t>(n, "filters", "cnn");
  c.train.batch_size = get_as<std::size_t>(n, "batch_size", "cnn");
  c.train.epochs = get_as<std::size_t>(n, "epochs", "cnn");
  c.train.learning_rate = get_as<double>(n, "learning_rate", "cnn");
  c.train.dropout_rate = get_as<double>(n, "dropout", "cnn");
  const auto opt = get_as<std::string>(n, "optimizer", "cnn");
  if (opt == "adam") {
    c.train.optimizer = nn::OptimizerKind::kAdam;
  } else if (opt == "sgd") {
    c.train.optimizer = nn::OptimizerKind::kSgd;
  } else {
    throw Error("config: cnn.optimizer must be \"adam\" or \"sgd\"");
  }
  c.train.adam_beta1 = get_as<double>(n, "adam_beta1", "cnn");
  c.train.adam_beta2 = get_as<double>(n, "adam_beta2", "cnn");
  c.train.adam_epsilon = get_as<double>(n, "adam_epsilon", "cnn");
  c.train.fine_tune_embeddings = get_as<bool>(n, "fine_tune_embeddings", "cnn");

  const json& b = j.at("baselines");
  c.mnb_smoothing = get_as<double>(b.at("mnb"), "smoothing", "baselines.mnb");
  c.mnb_ngram = get_as<std::size_t>(b.at("mnb"), "ngram", "baselines.mnb");
  c.mnb_binary = get_as<bool>(b.at("mnb"), "binary", "baselines.mnb");
  c.svm_ngram = get_as<std::size_t>(b.at("svm"), "ngram", "baselines.svm");
  c.svm_regs = get_as<std::vector<double>>(b.at("svm"), "regs", "baselines.svm");
  c.svm_epochs = get_as<std::size_t>(b.at("svm"), "epochs", "baselines.svm");
  c.svm_holdout = get_as<double>(b.at("svm"), "holdout", "baselines.svm");
  c.nbsvm_ngram = get_as<std::size_t>(b.at("nbsvm"), "ngram", "baselines.nbsvm");
  c.nbsvm_smoothing = get_as<double>(b.at("nbsvm"), "smoothing", "baselines.nbsvm");
  c.nbsvm_interpolation = get_as<double>(b.at("nbsvm"), "interpolation", "baselines.nbsvm");
  c.nbsvm_reg = get_as<double>(b.at("nbsvm"), "reg", "baselines.nbsvm");

  c.systems.clear();
  for (const auto& s : get_as<std::vector<std::string>>(j, "systems", "")) {
    c.systems.push_back(canonical_system(s));
  }
  return c;
}

ExperimentConfig merge(const ExperimentConfig& base, const json& patch) {
  json j = to_json(base);
  check_keys(j, patch, "");
  j.merge_patch(patch);
  // merge_patch deletes keys patched with null; restore them as explicit nulls.
  for (const char* key : {"k", "alpha"}) {
    if (!j["lda"].contains(key)) j["lda"][key] = nullptr;
  }
  return from_json(j);
}

// ---- subsampling and topics ----

std::vector<corpus::LabeledDocument> subsample(std::vector<corpus::LabeledDocument> docs,
                                               std::size_t limit, std::uint64_t seed) {
  if (limit > 0 && limit < docs.size()) {
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(limit);
    std::sort(order.begin(), order.end());
    std::vector<corpus::LabeledDocument> kept;
    kept.reserve(limit);
    for (std::size_t i : order) kept.push_back(std::move(docs[i]));
    docs = std::move(kept);
  }
  for (std::size_t i = 0; i < docs.size(); ++i) docs[i].doc_id = static_cast<std::int64_t>(i);
  return docs;
}

// Every in-vocabulary token of the full document, not only the encoded
// prefix, so the topic model sees whole reviews.
std::vector<std::int32_t> bag_of(const corpus::LabeledDocument& doc, const corpus::Vocabulary& vocab) {
  std::vector<std::int32_t> words;
  words.reserve(doc.tokens.size());
  for (const auto& token : doc.tokens) {
    if (auto idx = vocab.find(token)) words.push_back(*idx);
  }
  return words;
}

void write_topics(const fs::path& path, std::span<const std::size_t> topics) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < topics.size(); ++i) out << i << '\t' << topics[i] << '\n';
}

std::vector<std::size_t> read_topics(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::size_t> topics;
  std::size_t index = 0;
  std::size_t topic = 0;
  while (in >> index >> topic) {
    if (index != topics.size()) throw Error(path.string() + ": rows out of order");
    topics.push_back(topic);
  }
  return topics;
}

std::vector<nn::Example> make_examples(std::span<const corpus::PaddedDocument> docs,
                                       std::span<const std::size_t> topics) {
  std::vector<nn::Example> examples;
  examples.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    examples.push_back({docs[i].indices, topics.empty() ? 0 : topics[i], docs[i].label});
  }
  return examples;
}

std::vector<int> gold_labels(std::span<const corpus::PaddedDocument> docs) {
  std::vector<int> gold;
  gold.reserve(docs.size());
  for (const auto& d : docs) gold.push_back(d.label);
  return gold;
}

}  // namespace

// ---- metrics ----------------------------------------------------------------

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size()) {
    throw Error("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw Error("compute_metrics: no examples");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] == corpus::kPositive;
    const bool g = gold[i] == corpus::kPositive;
    correct += predictions[i] == gold[i];
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  Metrics m;
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
  if (tp + fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::string display_name(const std::string& system) {
  if (system == "mnb") return "MNB";
  if (system == "bow-svm") return "BoW+SVM";
  if (system == "nbsvm") return "NBSVM";
  if (system == "textcnn") return "TextCNN";
  if (system == "tbcnn") return "TB-CNN";
  return system;
}

std::string format_report_table(const MetricsReport& report) {
  std::size_t name_width = std::string("Methods").size();
  for (const auto& r : report.rows) name_width = std::max(name_width, display_name(r.system).size());
  std::string text;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %9s  %6s  %8s  %9s\n", static_cast<int>(name_width),
                "Methods", "Accuracy", "Precision", "Recall", "F1-score", "Time(s)");
  text += buf;
  for (const auto& r : report.rows) {
    const Metrics& m = r.metrics;
    std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %9.2f  %6.2f  %8.2f  %9.1f\n",
                  static_cast<int>(name_width), display_name(r.system).c_str(), m.accuracy,
                  m.precision, m.recall, m.f1, r.seconds);
    text += buf;
  }
  return text;
}

void emit_report(const MetricsReport& report, const fs::path& dir) {
  if (report.rows.empty()) throw Error("emit_report: empty report");
  open_out(dir / "report.txt") << format_report_table(report);
  auto tsv = open_out(dir / "report.tsv");
  tsv << kReportHeader << '\n';
  for (const auto& r : report.rows) tsv << report_row(r) << '\n';
  if (!tsv) throw Error("cannot write " + (dir / "report.tsv").string());
}

MetricsReport read_report_tsv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw Error(path.string() + ": missing report header");
  }
  MetricsReport report;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    report.rows.push_back(parse_report_row(line, path.string() + ":" + std::to_string(lineno)));
  }
  return report;
}

// ---- configuration ----------------------------------------------------------

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw Error("config: dataset path is not set");
  if (!fs::exists(dataset)) throw Error("config: dataset " + dataset.string() + " does not exist");
  if (!embeddings.empty() && !fs::exists(embeddings)) {
    throw Error("config: embedding file " + embeddings.string() + " does not exist");
  }
  if (max_length == 0) throw Error("config: corpus.max_length must be positive");
  if (max_vocab < 2) throw Error("config: corpus.max_vocab must be at least 2");
  if (systems.empty()) throw Error("config: no systems selected");
  for (const auto& s : systems) canonical_system(s);
  conv.validate(max_length);
  train.validate();
  if (lda_k) {
    topic::LdaConfig probe = lda;
    probe.k = *lda_k;
    probe.validate();
  } else {
    if (sweep_k.empty()) throw Error("config: lda.k is null and lda.sweep_k is empty");
    for (std::size_t k : sweep_k) {
      topic::LdaConfig probe = lda;
      probe.k = k;
      probe.validate();
    }
  }
  if (embedding_dim == 0) throw Error("config: embedding.dim must be positive");
  if (keywords == 0) throw Error("config: embedding.keywords must be positive");
  if (mnb_smoothing <= 0.0 || nbsvm_smoothing <= 0.0) throw Error("config: smoothing must be positive");
  for (std::size_t n : {mnb_ngram, svm_ngram, nbsvm_ngram}) {
    if (n < 1 || n > 2) throw Error("config: ngram must be 1 or 2");
  }
  if (svm_regs.empty()) throw Error("config: baselines.svm.regs is empty");
  for (double r : svm_regs) {
    if (!(r > 0.0)) throw Error("config: baselines.svm.regs must be positive");
  }
  if (!(nbsvm_reg > 0.0)) throw Error("config: baselines.nbsvm.reg must be positive");
  if (!(svm_holdout > 0.0 && svm_holdout < 1.0)) throw Error("config: baselines.svm.holdout must be in (0, 1)");
  if (!(nbsvm_interpolation >= 0.0 && nbsvm_interpolation <= 1.0)) {
    throw Error("config: baselines.nbsvm.interpolation must be in [0, 1]");
  }
}

ExperimentConfig load_config(const fs::path& path) {
  auto in = open_in(path);
  json patch;
  try {
    patch = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  if (!patch.is_object()) throw Error(path.string() + ": top level must be an object");
  return merge(ExperimentConfig{}, patch);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  json current = to_json(config);
  json::json_pointer pointer;
  for (const auto& p : parts) pointer /= p;
  if (!current.contains(pointer)) throw Error("config: unknown key '" + key + "'");
  current[pointer] = value;
  config = from_json(current);
}

std::string dump_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

// ---- pipeline ---------------------------------------------------------------

StageSeeds StageSeeds::from_master(std::uint64_t master) {
  return {derive_seed(master, "subsample"),   derive_seed(master, "lda"),
          derive_seed(master, "foldin"),      derive_seed(master, "embedding"),
          derive_seed(master, "cnn.init"),    derive_seed(master, "cnn.shuffle"),
          derive_seed(master, "cnn.dropout"), derive_seed(master, "linear")};
}

void mark_stale(const fs::path& dir, const std::string& stage, const std::string& cause) {
  try {
    open_out(dir / "STALE") << stage << '\t' << cause << '\n';
  } catch (const std::exception&) {
    // The original failure is the one worth reporting.
  }
}

void clear_stale(const fs::path& dir) {
  std::error_code ec;
  fs::remove(dir / "STALE", ec);
}

Experiment::Experiment(ExperimentConfig config)
    : config_(std::move(config)), seeds_(StageSeeds::from_master(config_.seed)) {
  for (auto& s : config_.systems) s = canonical_system(s);
  config_.lda.seed = seeds_.lda;
  config_.train.shuffle_seed = seeds_.cnn_shuffle;
  config_.train.dropout_seed = seeds_.cnn_dropout;
}

fs::path Experiment::system_dir(const std::string& system) const { return config_.output / system; }

PreparedData Experiment::prepare() const {
  PreparedData data;
  data.raw = corpus::load_dataset(config_.dataset);
  data.raw.train = subsample(std::move(data.raw.train), config_.train_limit,
                             derive_seed(seeds_.subsample, "train"));
  data.raw.test = subsample(std::move(data.raw.test), config_.test_limit,
                            derive_seed(seeds_.subsample, "test"));
  if (data.raw.train.empty() || data.raw.test.empty()) throw Error("prepare: empty split");

  data.vocab = corpus::build_vocabulary(data.raw.train, config_.min_count, config_.max_vocab);
  for (const auto& d : data.raw.train) {
    data.train.push_back(corpus::encode(d, data.vocab, config_.max_length));
    data.empty_train += data.train.back().true_length == 0;
  }
  for (const auto& d : data.raw.test) {
    data.test.push_back(corpus::encode(d, data.vocab, config_.max_length));
    data.empty_test += data.test.back().true_length == 0;
  }

  fs::create_directories(config_.output);
  data.vocab.save(config_.output / "vocab.tsv");
  corpus::save_encoded(config_.output / "train.enc", data.train);
  corpus::save_encoded(config_.output / "test.enc", data.test);
  std::size_t truncated = 0;
  for (const auto& d : data.raw.train) truncated += d.tokens.size() > config_.max_length;
  auto stats = open_out(config_.output / "prepare_stats.tsv");
  stats << "train_docs\t" << data.train.size() << '\n'
        << "test_docs\t" << data.test.size() << '\n'
        << "vocab_size\t" << data.vocab.size() << '\n'
        << "empty_train\t" << data.empty_train << '\n'
        << "empty_test\t" << data.empty_test << '\n'
        << "train_over_length\t" << truncated << '\n';
  if (data.empty_train + data.empty_test > 0) {
    std::cerr << "warning: " << data.empty_train << " train and " << data.empty_test
              << " test documents have no in-vocabulary tokens\n";
  }
  return data;
}

PreparedData Experiment::load_prepared() const {
  const fs::path vocab_path = config_.output / "vocab.tsv";
  if (!fs::exists(vocab_path)) throw Error("no prepared data in " + config_.output.string() + "; run prepare");
  PreparedData data;
  data.raw = corpus::load_dataset(config_.dataset);
  data.raw.train = subsample(std::move(data.raw.train), config_.train_limit,
                             derive_seed(seeds_.subsample, "train"));
  data.raw.test = subsample(std::move(data.raw.test), config_.test_limit,
                            derive_seed(seeds_.subsample, "test"));
  data.vocab = corpus::Vocabulary::load(vocab_path);
  data.train = corpus::load_encoded(config_.output / "train.enc");
  data.test = corpus::load_encoded(config_.output / "test.enc");
  if (data.train.size() != data.raw.train.size() || data.test.size() != data.raw.test.size()) {
    throw Error("prepared data in " + config_.output.string() +
                " does not match the dataset and config; rerun prepare");
  }
  for (const auto& d : data.train) data.empty_train += d.true_length == 0;
  for (const auto& d : data.test) data.empty_test += d.true_length == 0;
  return data;
}

TopicData Experiment::fit_topics(const PreparedData& data, bool force_sweep) const {
  const auto start = Clock::now();
  topic::BagCorpus bags;
  bags.vocab_size = data.vocab.size();
  std::vector<std::size_t> lda_index(data.raw.train.size(), SIZE_MAX);
  for (std::size_t i = 0; i < data.raw.train.size(); ++i) {
    auto words = bag_of(data.raw.train[i], data.vocab);
    if (words.empty()) continue;
    lda_index[i] = bags.docs.size();
    bags.docs.push_back(std::move(words));
  }
  if (bags.docs.empty()) throw Error("lda: no training document has in-vocabulary tokens");

  std::optional<topic::SweepResult> sweep;
  std::size_t k = config_.lda_k.value_or(0);
  if (force_sweep || !config_.lda_k) {
    sweep = topic::sweep_topics(bags, config_.sweep_k, config_.lda);
    topic::write_sweep_report(config_.output / "lda_sweep.tsv", *sweep);
    if (!config_.lda_k) k = sweep->best_k;
  }
  topic::LdaConfig lda = config_.lda;
  lda.k = k;
  topic::TopicModel model = topic::fit_lda(bags, lda);

  TopicData out{std::move(model), {}, {}, std::move(sweep), 0.0};
  out.train_topics.resize(data.raw.train.size());
  for (std::size_t i = 0; i < data.raw.train.size(); ++i) {
    if (lda_index[i] != SIZE_MAX) {
      out.train_topics[i] = topic::dominant_topic(out.model, lda_index[i]);
    } else {
      // No tokens: fold-in returns the uniform prior, whose argmax is topic 0.
      out.train_topics[i] = topic::argmax(topic::fold_in(out.model, {}, 0, 0));
    }
  }
  out.test_topics.resize(data.raw.test.size());
  for (std::size_t i = 0; i < data.raw.test.size(); ++i) {
    const auto words = bag_of(data.raw.test[i], data.vocab);
    const auto theta = topic::fold_in(out.model, words, config_.fold_in_sweeps,
                                      derive_seed(seeds_.fold_in, "test/" + std::to_string(i)));
    out.test_topics[i] = topic::argmax(theta);
  }
  out.seconds = seconds_since(start);

  out.model.save(config_.output / "lda_model.txt");
  write_topics(config_.output / "topics_train.tsv", out.train_topics);
  write_topics(config_.output / "topics_test.tsv", out.test_topics);
  write_scalar(config_.output / "lda_seconds.txt", out.seconds);
  return out;
}

TopicData Experiment::load_topics() const {
  const fs::path model_path = config_.output / "lda_model.txt";
  if (!fs::exists(model_path)) throw Error("no topic model in " + config_.output.string() + "; run lda");
  TopicData out{topic::TopicModel::load(model_path), read_topics(config_.output / "topics_train.tsv"),
                read_topics(config_.output / "topics_test.tsv"), std::nullopt,
                read_scalar(config_.output / "lda_seconds.txt")};
  return out;
}

embed::EmbeddingMatrix Experiment::load_embedding_matrix(const corpus::Vocabulary& vocab) const {
  if (config_.embeddings.empty()) {
    return embed::random_embeddings(vocab.size(), config_.embedding_dim, seeds_.embedding);
  }
  auto emb = embed::load_embeddings(config_.embeddings, vocab, seeds_.embedding);
  if (emb.dim() != config_.embedding_dim) {
    throw Error("embedding file " + config_.embeddings.string() + " has dimension " +
                std::to_string(emb.dim()) + ", config says " + std::to_string(config_.embedding_dim));
  }
  return emb;
}

void Experiment::train_system(const std::string& name, const PreparedData& data,
                              const TopicData* topics) const {
  const std::string system = canonical_system(name);
  const fs::path dir = system_dir(system);
  fs::create_directories(dir);
  const auto start = Clock::now();

  if (system == "mnb") {
    baselines::FeatureSpace space(data.raw.train, {config_.mnb_ngram, config_.mnb_binary});
    const auto model = baselines::train_mnb(space.transform(data.raw.train), config_.mnb_smoothing);
    baselines::save_mnb(dir / "model.txt", model);
  } else if (system == "bow-svm") {
    baselines::FeatureSpace space(data.raw.train, {config_.svm_ngram, false});
    baselines::LinearConfig lc;
    lc.loss = baselines::LossKind::kHinge;
    lc.epochs = config_.svm_epochs;
    lc.seed = derive_seed(seeds_.linear, "bow-svm");
    const auto model = baselines::tune_and_train_linear(space.transform(data.raw.train), lc,
                                                        config_.svm_regs, config_.svm_holdout);
    baselines::save_linear(dir / "model.txt", model);
  } else if (system == "nbsvm") {
    baselines::FeatureSpace space(data.raw.train, {config_.nbsvm_ngram, true});
    const auto counts = space.transform(data.raw.train);
    const auto ratio = baselines::nb_log_count_ratio(counts, config_.nbsvm_smoothing);
    baselines::LinearConfig lc;
    lc.loss = baselines::LossKind::kHinge;
    lc.reg = config_.nbsvm_reg;
    lc.epochs = config_.svm_epochs;
    lc.seed = derive_seed(seeds_.linear, "nbsvm");
    lc.interpolation = config_.nbsvm_interpolation;
    auto model = baselines::train_linear(baselines::scale_features(counts, ratio), lc);
    // Fold r into the weights so the saved model scores binary features directly.
    model.weights.resize(ratio.size(), 0.0);
    for (std::size_t i = 0; i < ratio.size(); ++i) model.weights[i] *= ratio[i];
    baselines::save_linear(dir / "model.txt", model);
  } else {
    const bool with_topics = system == "tbcnn";
    if (with_topics && topics == nullptr) throw Error("tbcnn needs a fitted topic model");
    const auto emb = load_embedding_matrix(data.vocab);
    Matrix topic_vectors;
    if (with_topics) {
      auto table = embed::build_topic_vectors(topics->model, emb, config_.keywords);
      embed::save_topic_vectors(dir / "topic_vectors.tsv", table);
      topic_vectors = std::move(table.vectors);
    }
    nn::CnnModel model(config_.conv, emb.vectors, std::move(topic_vectors), 2, seeds_.cnn_init);
    const auto examples =
        make_examples(data.train, with_topics ? std::span<const std::size_t>(topics->train_topics)
                                              : std::span<const std::size_t>());
    const auto history = nn::train(model, examples, config_.train);
    nn::write_training_log(dir / "training_log.tsv", history);
    model.save(dir / "model.ckpt");
  }
  write_scalar(dir / "fit_seconds.txt", seconds_since(start));
}

SystemResult Experiment::evaluate_system(const std::string& name, const PreparedData& data,
                                         const TopicData* topics) const {
  const std::string system = canonical_system(name);
  const fs::path dir = system_dir(system);
  const double fit_seconds = read_scalar(dir / "fit_seconds.txt");
  const auto start = Clock::now();

  std::vector<int> predictions;
  predictions.reserve(data.test.size());
  if (system == "mnb") {
    baselines::FeatureSpace space(data.raw.train, {config_.mnb_ngram, config_.mnb_binary});
    const auto model = baselines::load_mnb(dir / "model.txt");
    for (const auto& doc : space.transform(data.raw.test).docs) {
      predictions.push_back(baselines::predict_mnb(model, doc));
    }
  } else if (system == "bow-svm" || system == "nbsvm") {
    const baselines::FeatureOptions options =
        system == "nbsvm" ? baselines::FeatureOptions{config_.nbsvm_ngram, true}
                          : baselines::FeatureOptions{config_.svm_ngram, false};
    baselines::FeatureSpace space(data.raw.train, options);
    const auto model = baselines::load_linear(dir / "model.txt");
    for (const auto& doc : space.transform(data.raw.test).docs) {
      predictions.push_back(baselines::predict_linear(model, doc));
    }
  } else {
    const bool with_topics = system == "tbcnn";
    if (with_topics && topics == nullptr) throw Error("tbcnn needs a fitted topic model");
    const auto model = nn::CnnModel::load(dir / "model.ckpt");
    const auto examples =
        make_examples(data.test, with_topics ? std::span<const std::size_t>(topics->test_topics)
                                             : std::span<const std::size_t>());
    for (const auto& ex : examples) predictions.push_back(nn::predict(model, ex).label);
  }

  SystemResult result;
  result.system = system;
  result.metrics = compute_metrics(predictions, gold_labels(data.test));
  result.seconds = fit_seconds + seconds_since(start);
  // Topic inference is part of generating the TB-CNN model.
  if (system == "tbcnn") result.seconds += topics->seconds;

  auto pred_out = open_out(dir / "predictions.tsv");
  pred_out << "doc_id\tgold\tpredicted\n";
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    pred_out << data.test[i].doc_id << '\t' << data.test[i].label << '\t' << predictions[i] << '\n';
  }
  auto metrics_out = open_out(dir / "metrics.tsv");
  metrics_out << kReportHeader << '\n' << report_row(result) << '\n';
  if (result.metrics.precision_undefined || result.metrics.recall_undefined) {
    std::cerr << "warning: " << system << ": " << flags_field(result.metrics) << '\n';
  }
  return result;
}

MetricsReport Experiment::report() const {
  MetricsReport report;
  for (const auto& system : config_.systems) {
    const fs::path path = system_dir(system) / "metrics.tsv";
    if (!fs::exists(path)) throw Error("no metrics for " + system + "; run evaluate");
    const auto part = read_report_tsv(path);
    if (part.rows.size() != 1 || part.rows[0].system != system) {
      throw Error(path.string() + ": expected one row for " + system);
    }
    report.rows.push_back(part.rows[0]);
  }
  emit_report(report, config_.output);
  return report;
}

MetricsReport Experiment::run_all() const {
  std::string stage = "validate";
  try {
    config_.validate();
    fs::create_directories(config_.output);
    clear_stale(config_.output);
    open_out(config_.output / "config.json") << dump_config(config_);

    stage = "prepare";
    const PreparedData data = prepare();

    std::optional<TopicData> topics;
    const bool need_topics =
        std::find(config_.systems.begin(), config_.systems.end(), "tbcnn") != config_.systems.end();
    if (need_topics) {
      stage = "lda";
      topics = fit_topics(data);
    }
    for (const auto& system : config_.systems) {
      const TopicData* t = topics ? &*topics : nullptr;
      stage = "train " + system;
      train_system(system, data, t);
      stage = "evaluate " + system;
      evaluate_system(system, data, t);
    }
    stage = "report";
    return report();
  } catch (const std::exception& e) {
    mark_stale(config_.output, stage, e.what());
    throw Error(stage + ": " + e.what());
  }
}

MetricsReport run_experiment(const ExperimentConfig& config) { return Experiment(config).run_all(); }

}  // namespace tbcnn::harness
