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

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tbcnn/harness.hpp"

namespace tbcnn::harness {
namespace {

using testing::Gen;
using testing::TempDir;
using testing::read_file;
using testing::write_file;

// ---- metrics ----

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> y = {1, 0, 1, 1, 0};
  const auto m = compute_metrics(y, y);
  EXPECT_EQ(m.accuracy, 100.0);
  EXPECT_EQ(m.precision, 100.0);
  EXPECT_EQ(m.recall, 100.0);
  EXPECT_EQ(m.f1, 100.0);
  EXPECT_FALSE(m.precision_undefined || m.recall_undefined);
}

TEST(Metrics, OneOfEachCell) {
  const auto m = compute_metrics(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 1, 0});
  EXPECT_EQ(m.accuracy, 50.0);
  EXPECT_EQ(m.precision, 50.0);
  EXPECT_EQ(m.recall, 50.0);
  EXPECT_EQ(m.f1, 50.0);
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
  const auto m = compute_metrics(std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 1});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_TRUE(m.precision_undefined);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_FALSE(m.recall_undefined);
  EXPECT_EQ(m.f1, 0.0);
  const auto n = compute_metrics(std::vector<int>{1, 0}, std::vector<int>{0, 0});
  EXPECT_TRUE(n.recall_undefined);
  EXPECT_FALSE(n.precision_undefined);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(compute_metrics(std::vector<int>{1}, std::vector<int>{1, 0}), Error);
  EXPECT_THROW(compute_metrics(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(Metrics, MatchHandBuiltConfusionMatrix) {
  Gen gen(81);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = gen.size(1, 40);
    std::vector<int> p(n), g(n);
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = gen.label();
      g[i] = gen.label();
      (p[i] ? (g[i] ? tp : fp) : (g[i] ? fn : tn)) += 1;
    }
    const auto m = compute_metrics(p, g);
    ASSERT_NEAR(m.accuracy, 100 * (tp + tn) / n, 1e-9);
    ASSERT_EQ(m.precision_undefined, tp + fp == 0);
    ASSERT_EQ(m.recall_undefined, tp + fn == 0);
    const double prec = tp + fp ? 100 * tp / (tp + fp) : 0.0;
    const double rec = tp + fn ? 100 * tp / (tp + fn) : 0.0;
    ASSERT_NEAR(m.precision, prec, 1e-9);
    ASSERT_NEAR(m.recall, rec, 1e-9);
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 100.0);
    }
    if (prec > 0 && rec > 0) {
      ASSERT_NEAR(m.f1, 2 * prec * rec / (prec + rec), 1e-9);
    }
  }
}

// ---- reports ----

MetricsReport sample_report() {
  MetricsReport r;
  r.rows.push_back({"mnb", compute_metrics(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 0}), 0.125});
  r.rows.push_back({"tbcnn", compute_metrics(std::vector<int>{0, 0}, std::vector<int>{1, 0}), 12.5});
  r.rows.push_back({"bow-svm", {100.0 / 3.0, 0.1, 0.2, 0.3, false, false}, 1e-3});
  return r;
}

TEST(Report, TsvRoundTripIsExact) {
  TempDir dir("report");
  const auto report = sample_report();
  emit_report(report, dir.path());
  EXPECT_EQ(read_report_tsv(dir / "report.tsv"), report);
  const std::string tsv = read_file(dir / "report.tsv");
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "system\taccuracy\tprecision\trecall\tf1\tflags\tseconds");
  EXPECT_NE(tsv.find("precision_undefined"), std::string::npos);
}

TEST(Report, TableLayout) {
  MetricsReport one;
  one.rows.push_back(sample_report().rows[0]);
  const std::string table = format_report_table(one);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);
  EXPECT_EQ(table.rfind("MNB", table.find('\n') + 1), table.find('\n') + 1);
  const std::string full = format_report_table(sample_report());
  const std::string header = full.substr(0, full.find('\n'));
  const auto a = header.find("Accuracy"), p = header.find("Precision"), r = header.find("Recall"),
             f = header.find("F1-score"), t = header.find("Time(s)");
  EXPECT_LT(a, p);
  EXPECT_LT(p, r);
  EXPECT_LT(r, f);
  EXPECT_LT(f, t);
  EXPECT_LT(full.find("MNB"), full.find("TB-CNN"));
  EXPECT_LT(full.find("TB-CNN"), full.find("BoW+SVM"));
}

TEST(Report, RejectsMalformedInput) {
  TempDir dir("badreport");
  write_file(dir / "a.tsv", "wrong header\n");
  EXPECT_THROW(read_report_tsv(dir / "a.tsv"), Error);
  write_file(dir / "b.tsv", "system\taccuracy\tprecision\trecall\tf1\tflags\tseconds\nmnb\t1\t2\n");
  EXPECT_THROW(read_report_tsv(dir / "b.tsv"), Error);
  EXPECT_THROW(emit_report(MetricsReport{}, dir.path()), Error);
}

// ---- config ----

TEST(Config, DefaultsAndOverrides) {
  ExperimentConfig c;
  EXPECT_EQ(c.max_length, 200u);
  EXPECT_EQ(c.lda_k, 16u);
  EXPECT_EQ(c.keywords, 20u);
  apply_override(c, "lda.k=null");
  EXPECT_FALSE(c.lda_k.has_value());
  apply_override(c, "cnn.optimizer=sgd");
  EXPECT_EQ(c.train.optimizer, nn::OptimizerKind::kSgd);
  apply_override(c, "baselines.nbsvm.interpolation=0.5");
  EXPECT_EQ(c.nbsvm_interpolation, 0.5);
  apply_override(c, "systems=[\"mnb\",\"bow_svm\"]");
  EXPECT_EQ(c.systems, (std::vector<std::string>{"mnb", "bow-svm"}));
  EXPECT_THROW(apply_override(c, "lda.nope=1"), Error);
  EXPECT_THROW(apply_override(c, "no_equals"), Error);
  EXPECT_THROW(apply_override(c, "systems=[\"svm\"]"), Error);
}

TEST(Config, FileRoundTripAndUnknownKeys) {
  TempDir dir("config");
  ExperimentConfig c;
  c.dataset = "/data/x";
  c.seed = 42;
  c.lda_k.reset();
  c.conv.region_sizes = {2, 3};
  write_file(dir / "c.json", dump_config(c));
  const auto back = load_config(dir / "c.json");
  EXPECT_EQ(dump_config(back), dump_config(c));
  write_file(dir / "partial.json", "// comment\n{\"seed\": 7, \"cnn\": {\"filters\": 10}}\n");
  const auto partial = load_config(dir / "partial.json");
  EXPECT_EQ(partial.seed, 7u);
  EXPECT_EQ(partial.conv.filters_per_size, 10u);
  EXPECT_EQ(partial.train.epochs, 10u);
  write_file(dir / "bad.json", "{\"cnn\": {\"filterz\": 10}}");
  try {
    load_config(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("cnn.filterz"), std::string::npos);
  }
}

TEST(Config, CheckedInDefaultMatchesBuiltInDefaults) {
  const auto loaded = load_config(std::filesystem::path(TBCNN_SOURCE_DIR) / "configs" / "default.json");
  ExperimentConfig expected;
  expected.dataset = loaded.dataset;
  expected.embeddings = loaded.embeddings;
  EXPECT_EQ(dump_config(loaded), dump_config(expected));
}

TEST(Config, ValidationChecksPathsAndShapes) {
  TempDir dir("validate");
  ExperimentConfig c;
  EXPECT_THROW(c.validate(), Error);
  c.dataset = dir.path();
  EXPECT_NO_THROW(c.validate());
  c.embeddings = dir / "missing.bin";
  EXPECT_THROW(c.validate(), Error);
  c.embeddings.clear();
  c.max_length = 5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Seeds, EveryStageChangesWithTheMaster) {
  const auto a = StageSeeds::from_master(1);
  const auto b = StageSeeds::from_master(2);
  const auto a2 = StageSeeds::from_master(1);
  const std::uint64_t sa[] = {a.subsample, a.lda, a.fold_in, a.embedding, a.cnn_init, a.cnn_shuffle, a.cnn_dropout, a.linear};
  const std::uint64_t sb[] = {b.subsample, b.lda, b.fold_in, b.embedding, b.cnn_init, b.cnn_shuffle, b.cnn_dropout, b.linear};
  const std::uint64_t s2[] = {a2.subsample, a2.lda, a2.fold_in, a2.embedding, a2.cnn_init, a2.cnn_shuffle, a2.cnn_dropout, a2.linear};
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NE(sa[i], sb[i]);
    EXPECT_EQ(sa[i], s2[i]);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(sa[i], sa[j]);
  }
}

// ---- pipeline ----

ExperimentConfig small_config(const TempDir& dir) {
  write_file(dir / "data" / "train.tsv", "");
  testing::write_synthetic_tsv(dir / "data" / "train.tsv", 40, 12, 3, 1);
  testing::write_synthetic_tsv(dir / "data" / "test.tsv", 20, 12, 3, 2);
  ExperimentConfig c;
  c.dataset = dir / "data";
  c.output = dir / "out";
  c.max_length = 16;
  c.min_count = 1;
  c.lda_k = 3;
  c.lda.iterations = 30;
  c.lda.burn_in = 10;
  c.fold_in_sweeps = 10;
  c.embedding_dim = 8;
  c.keywords = 3;
  c.conv.region_sizes = {2, 3};
  c.conv.filters_per_size = 4;
  c.train.epochs = 2;
  c.train.batch_size = 10;
  return c;
}

TEST(Pipeline, MnbOnlyOnTwoDocToyCorpus) {
  TempDir dir("twodoc");
  write_file(dir / "data" / "train.tsv", "pos\tgood\nneg\tbad\n");
  write_file(dir / "data" / "test.tsv", "pos\tgood\nneg\tbad\n");
  ExperimentConfig c;
  c.dataset = dir / "data";
  c.output = dir / "out";
  c.min_count = 1;
  c.systems = {"mnb"};
  const auto report = run_experiment(c);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].system, "mnb");
  EXPECT_EQ(report.rows[0].metrics, compute_metrics(std::vector<int>{1, 0}, std::vector<int>{1, 0}));
  EXPECT_EQ(read_report_tsv(dir / "out" / "report.tsv").rows[0].metrics, report.rows[0].metrics);
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "lda_model.txt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "STALE"));
}

TEST(Pipeline, AllSystemsWriteArtifactsInConfigOrder) {
  TempDir dir("allsys");
  auto c = small_config(dir);
  c.systems = {"tbcnn", "mnb", "textcnn", "nbsvm", "bow_svm"};
  const auto report = run_experiment(c);
  ASSERT_EQ(report.rows.size(), 5u);
  const std::vector<std::string> order = {"tbcnn", "mnb", "textcnn", "nbsvm", "bow-svm"};
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(report.rows[i].system, order[i]);
  for (const char* f : {"report.txt", "report.tsv", "config.json", "vocab.tsv", "train.enc", "test.enc",
                        "lda_model.txt", "topics_train.tsv", "topics_test.tsv", "tbcnn/model.ckpt",
                        "tbcnn/training_log.tsv", "textcnn/model.ckpt", "mnb/model.txt", "nbsvm/model.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / f)) << f;
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "lda_sweep.tsv"));
  // The two CNNs share the encoded corpus and init seed, so their word
  // embeddings start equal; only the topic channel differs.
  const auto tb = nn::CnnModel::load(dir / "out" / "tbcnn" / "model.ckpt");
  const auto tx = nn::CnnModel::load(dir / "out" / "textcnn" / "model.ckpt");
  EXPECT_EQ(tb.init_seed(), tx.init_seed());
  EXPECT_TRUE(tb.uses_topics());
  EXPECT_FALSE(tx.uses_topics());
  EXPECT_EQ(tb.input_width(), 2 * tx.input_width());
  EXPECT_GT(report.rows[0].seconds, 0.0);
}

TEST(Pipeline, SweepRunsWhenKIsUnset) {
  TempDir dir("sweep");
  auto c = small_config(dir);
  c.lda_k.reset();
  c.sweep_k = {2, 3};
  c.systems = {"tbcnn"};
  run_experiment(c);
  const std::string sweep = read_file(dir / "out" / "lda_sweep.tsv");
  EXPECT_EQ(sweep.substr(0, sweep.find('\n')), "k\tperplexity");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 3);
}

TEST(Pipeline, FailureMarksStaleWithStage) {
  TempDir dir("stale");
  write_file(dir / "data" / "readme.txt", "not a dataset");
  ExperimentConfig c;
  c.dataset = dir / "data";
  c.output = dir / "out";
  c.systems = {"mnb"};
  try {
    run_experiment(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("prepare: ", 0), 0u) << e.what();
  }
  const std::string stale = read_file(dir / "out" / "STALE");
  EXPECT_EQ(stale.rfind("prepare\t", 0), 0u) << stale;

  // A later successful run clears the marker.
  write_file(dir / "data" / "train.tsv", "pos\tgood\nneg\tbad\n");
  write_file(dir / "data" / "test.tsv", "pos\tgood\n");
  c.min_count = 1;
  run_experiment(c);
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "STALE"));
}

// ---- CLI ----

std::string strip_last_column(const std::string& tsv) {
  std::istringstream in(tsv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind('\t')) + '\n';
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TBCNN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

TEST(Cli, RunAllTwiceIsDeterministic) {
  TempDir dir("cli");
  const auto c = small_config(dir);
  write_file(dir / "config.json", dump_config(c));
  const std::string base = "--config " + (dir / "config.json").string() + " ";
  ASSERT_EQ(run_cli(base + "--out " + (dir / "a").string() + " run-all"), 0);
  ASSERT_EQ(run_cli(base + "--out " + (dir / "b").string() + " run-all"), 0);
  EXPECT_EQ(strip_last_column(read_file(dir / "a" / "report.tsv")),
            strip_last_column(read_file(dir / "b" / "report.tsv")));
  ASSERT_EQ(run_cli(base + "--seed 2 --out " + (dir / "c").string() + " run-all"), 0);
  EXPECT_NE(read_file(dir / "a" / "train.enc"), std::string());
  EXPECT_NE(read_file(dir / "a" / "lda_model.txt"), read_file(dir / "c" / "lda_model.txt"));
}

TEST(Cli, StagesComposeLikeRunAll) {
  TempDir dir("stages");
  auto c = small_config(dir);
  c.systems = {"mnb", "textcnn"};
  write_file(dir / "config.json", dump_config(c));
  const std::string base = "--config " + (dir / "config.json").string() + " --out " + (dir / "s").string() + " ";
  ASSERT_EQ(run_cli(base + "prepare"), 0);
  ASSERT_EQ(run_cli(base + "train --system mnb"), 0);
  ASSERT_EQ(run_cli(base + "train --system textcnn"), 0);
  ASSERT_EQ(run_cli(base + "evaluate"), 0);
  ASSERT_EQ(run_cli(base + "report"), 0);
  ASSERT_EQ(run_cli("--config " + (dir / "config.json").string() + " --out " + (dir / "r").string() + " run-all"), 0);
  EXPECT_EQ(strip_last_column(read_file(dir / "s" / "report.tsv")),
            strip_last_column(read_file(dir / "r" / "report.tsv")));
  EXPECT_NE(run_cli(base + "train --system svm"), 0);
  EXPECT_NE(run_cli(base + "--set cnn.nope=1 report"), 0);
}

}  // namespace
}  // namespace tbcnn::harness
