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

// Command-line driver for the sentiment pipeline.
//
//   tbcnn [global flags] prepare | lda [--sweep] | train --system S |
//         evaluate [--system S ...] | report | run-all | show-config

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tbcnn/harness.hpp"
#include "tbcnn/simd/kernels.hpp"

namespace {

namespace h = tbcnn::harness;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dataset;
  std::string embeddings;
  std::vector<std::string> overrides;
  std::string simd;
};

h::ExperimentConfig resolve(const GlobalFlags& g) {
  h::ExperimentConfig config = g.config.empty() ? h::ExperimentConfig{} : h::load_config(g.config);
  for (const auto& o : g.overrides) h::apply_override(config, o);
  if (g.seed) config.seed = *g.seed;
  if (!g.out.empty()) config.output = g.out;
  if (!g.dataset.empty()) config.dataset = g.dataset;
  if (!g.embeddings.empty()) config.embeddings = g.embeddings;
  return config;
}

// Runs one stage, flagging the output directory stale if it throws.
int run_stage(const h::Experiment& exp, const std::string& stage, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    h::mark_stale(exp.config().output, stage, e.what());
    std::cerr << "error: " << stage << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic-augmented CNN sentiment classification and baselines"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--dataset", g.dataset, "Dataset root (IMDB layout or train.tsv/test.tsv)");
  app.add_option("--embeddings", g.embeddings, "word2vec file (.bin binary, otherwise text)");
  app.add_option("--set", g.overrides, "Config override section.key=value (repeatable)");
  app.add_option("--simd", g.simd, "Kernel variant")->check(CLI::IsMember({"scalar", "avx2"}));

  auto* prepare = app.add_subcommand("prepare", "Tokenize, build vocabulary, encode");
  bool sweep = false;
  auto* lda = app.add_subcommand("lda", "Fit the topic model and assign document topics");
  lda->add_flag("--sweep", sweep, "Write the perplexity sweep over lda.sweep_k first");
  std::string train_system;
  auto* train = app.add_subcommand("train", "Train one system");
  train->add_option("--system", train_system, "mnb | bow-svm | nbsvm | textcnn | tbcnn")->required();
  std::vector<std::string> eval_systems;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate trained systems on the test split");
  evaluate->add_option("--system", eval_systems, "Systems to evaluate (default: config systems)");
  auto* report = app.add_subcommand("report", "Collect metrics into report.txt and report.tsv");
  auto* run_all = app.add_subcommand("run-all", "Run every stage for every configured system");
  auto* show = app.add_subcommand("show-config", "Print the effective config as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (g.simd == "scalar") tbcnn::simd::set_isa(tbcnn::simd::Isa::kScalar);
    if (g.simd == "avx2") tbcnn::simd::set_isa(tbcnn::simd::Isa::kAvx2);

    const h::Experiment exp(resolve(g));
    if (show->parsed()) {
      std::cout << h::dump_config(exp.config());
      return 0;
    }
    if (run_all->parsed()) {
      const auto result = exp.run_all();
      std::cout << h::format_report_table(result);
      return 0;
    }
    exp.config().validate();
    if (prepare->parsed()) {
      return run_stage(exp, "prepare", [&] {
        h::clear_stale(exp.config().output);
        const auto data = exp.prepare();
        std::cout << "train " << data.train.size() << ", test " << data.test.size() << ", vocabulary "
                  << data.vocab.size() << '\n';
      });
    }
    if (lda->parsed()) {
      return run_stage(exp, "lda", [&] {
        const auto data = exp.load_prepared();
        const auto topics = exp.fit_topics(data, sweep);
        std::cout << "k = " << topics.model.num_topics() << " (" << topics.seconds << " s)\n";
      });
    }
    if (train->parsed()) {
      return run_stage(exp, "train " + train_system, [&] {
        const auto data = exp.load_prepared();
        std::optional<h::TopicData> topics;
        if (train_system == "tbcnn") topics = exp.load_topics();
        exp.train_system(train_system, data, topics ? &*topics : nullptr);
      });
    }
    if (evaluate->parsed()) {
      if (eval_systems.empty()) eval_systems = exp.config().systems;
      return run_stage(exp, "evaluate", [&] {
        const auto data = exp.load_prepared();
        std::optional<h::TopicData> topics;
        for (const auto& s : eval_systems) {
          if (s == "tbcnn" && !topics) topics = exp.load_topics();
          const auto r = exp.evaluate_system(s, data, topics ? &*topics : nullptr);
          std::cout << h::display_name(r.system) << ": accuracy " << r.metrics.accuracy << '\n';
        }
      });
    }
    if (report->parsed()) {
      return run_stage(exp, "report", [&] { std::cout << h::format_report_table(exp.report()); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
