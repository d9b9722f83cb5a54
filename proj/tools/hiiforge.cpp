// Copyright 2026 The hiiforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hiiforge/pipeline/commands.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hiiforge;
using namespace hiiforge::pipeline;

struct GlobalOptions {
  std::string config;
  std::optional<std::string> dataset_root;
  std::optional<std::string> detector_url;
  std::vector<std::string> vlm_urls;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  std::optional<std::string> log_file;
  bool quiet = false;
};

// File, then environment, then flags.
PipelineConfig resolve_config(const GlobalOptions& g, const std::set<std::string>& models) {
  PipelineConfig cfg;
  if (!g.config.empty()) {
    cfg = load_config(g.config);
  }
  apply_env(cfg, process_env, models);
  if (g.dataset_root) cfg.dataset_root = *g.dataset_root;
  if (g.detector_url) cfg.detector_url = *g.detector_url;
  for (const auto& spec : g.vlm_urls) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--vlm-url expects NAME=URL, got '" + spec + "'");
    cfg.vlm_urls[spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  if (g.seed) cfg.seed = cfg.filter.seed = cfg.prefs.seed = cfg.bench.seed = *g.seed;
  if (g.parallelism) cfg.parallelism = *g.parallelism;
  if (g.log_file) cfg.log_file = fs::absolute(*g.log_file).string();
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hiiforge: hallucination-inducing image synthesis, MOH benchmark, preference pairs and DPO losses"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("-c,--config", g.config, "Pipeline config (JSON)");
  app.add_option("--dataset-root", g.dataset_root, "Override dataset_root");
  app.add_option("--detector-url", g.detector_url, "Override detector_url (http://... or mock://fixture.json)");
  app.add_option("--vlm-url", g.vlm_urls, "Override a model URL as NAME=URL (repeatable)");
  app.add_option("--seed", g.seed, "Override every stage seed");
  app.add_option("--parallelism", g.parallelism, "Override parallelism");
  app.add_option("--log-file", g.log_file, "Append structured JSON events here");
  app.add_flag("-q,--quiet", g.quiet, "No human-readable summary on stderr");

  std::string images, masked, model, out, items, task = "both", scenes, outcomes, csv, hii, batch;
  std::string objective = "dpo";
  std::vector<std::string> hii_files;
  std::optional<int> samples;
  int top_k = 5;
  double beta = 0.1;
  bool dedup = false;

  auto* synth = app.add_subcommand("synth", "Detect entities and iteratively mask them");
  synth->add_option("--images", images, "ImageRecord JSONL")->required();
  synth->add_option("-o,--out", out, "MaskedImage JSONL to write")->required();

  auto* filt = app.add_subcommand("filter", "Keep masked images that make MODEL hallucinate");
  filt->add_option("--masked", masked, "MaskedImage JSONL")->required();
  filt->add_option("-m,--model", model, "Model name from vlm_urls")->required();
  filt->add_option("-o,--out", out, "HiiRecord JSONL to write")->required();

  auto* inter = app.add_subcommand("intersect", "Build benchmark items from HIIs shared by all models");
  inter->add_option("--hii", hii_files, "HiiRecord JSONL per model (two or more)")->required();
  inter->add_option("--scenes", scenes, "Scene label JSONL keyed by parent image_id")->required();
  inter->add_option("-o,--out", out, "MohItem JSONL to write")->required();

  auto* bench_cmd = app.add_subcommand("bench", "Run the discriminative and/or generative probes");
  bench_cmd->add_option("--items", items, "MohItem JSONL")->required();
  bench_cmd->add_option("-m,--model", model, "Model name from vlm_urls")->required();
  bench_cmd->add_option("--task", task, "d, g or both")->check(CLI::IsMember({"d", "g", "both"}));
  bench_cmd->add_option("-o,--out", out, "Report JSON to write")->required();
  bench_cmd->add_option("--outcomes", outcomes, "Per-item outcome JSONL (default: next to the report)");
  bench_cmd->add_option("--csv", csv, "Per-scene co-occurrence CSV");
  bench_cmd->add_option("--samples", samples, "Sampled descriptions per item (default 1 greedy)");

  auto* prefs_cmd = app.add_subcommand("prefs", "Build shared-prefix preference pairs");
  prefs_cmd->add_option("--hii", hii, "HiiRecord JSONL")->required();
  prefs_cmd->add_option("-o,--out", out, "PreferencePair JSONL to write")->required();
  prefs_cmd->add_option("-m,--model", model, "Use this model instead of each record's target_model");
  prefs_cmd->add_flag("--dedup", dedup, "Drop repeated rejected sentences per HII");

  auto* stats = app.add_subcommand("stats", "Scene / masked-class co-occurrence from bench outcomes");
  stats->add_option("--outcomes", outcomes, "Outcome JSONL from bench")->required();
  stats->add_option("--top-k", top_k, "Classes per scene");
  stats->add_option("-o,--out", out, "JSON to write")->required();
  stats->add_option("--csv", csv, "CSV to write");

  auto* loss = app.add_subcommand("loss", "Evaluate a DPO-family loss on precomputed log-probabilities");
  loss->add_option("--batch", batch, "LossSample JSONL")->required();
  loss->add_option("--objective", objective, "dpo, hii-dpo or vca")
      ->check(CLI::IsMember({"dpo", "hii-dpo", "vca"}));
  loss->add_option("--beta", beta, "Inverse temperature beta (> 0)");
  loss->add_option("-o,--out", out, "Report JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFatal;
  }

  EventLog log(g.quiet ? nullptr : &std::cerr);
  PipelineConfig cfg;
  const bool needs_config = !stats->parsed() && !loss->parsed() && !inter->parsed();
  try {
    std::set<std::string> models;
    if (!model.empty()) models.insert(model);
    cfg = resolve_config(g, models);
    if (cfg.log_file) log.open(cfg.resolve(*cfg.log_file));
    if (needs_config && g.config.empty()) throw ConfigError("--config is required for this command");
  } catch (const Error& e) {
    log.error("config_error", {{"message", e.what()}});
    return kExitFatal;
  }

  if (synth->parsed()) return cmd_synth(cfg, images, out, log);
  if (filt->parsed()) return cmd_filter(cfg, masked, model, out, log);
  if (inter->parsed()) {
    std::vector<fs::path> paths(hii_files.begin(), hii_files.end());
    return cmd_intersect(paths, scenes, out, log);
  }
  if (bench_cmd->parsed()) {
    if (samples) cfg.bench.samples = *samples;
    BenchOutputs outputs{out, std::nullopt, std::nullopt};
    if (!outcomes.empty()) outputs.outcomes = outcomes;
    if (!csv.empty()) outputs.csv = csv;
    bench::Task t;
    try {
      t = bench::parse_task(task);
      cfg.validate();
    } catch (const Error& e) {
      log.error("config_error", {{"message", e.what()}});
      return kExitFatal;
    }
    return cmd_bench(cfg, items, model, t, outputs, log);
  }
  if (prefs_cmd->parsed()) {
    if (dedup) cfg.prefs.dedup = true;
    return cmd_prefs(cfg, hii, out, model.empty() ? std::nullopt : std::optional<std::string>(model), log);
  }
  if (stats->parsed()) {
    return cmd_stats(outcomes, top_k, out, csv.empty() ? std::nullopt : std::optional<fs::path>(csv), log);
  }
  if (loss->parsed()) {
    math::Objective o;
    try {
      o = math::parse_objective(objective);
    } catch (const Error& e) {
      log.error("config_error", {{"message", e.what()}});
      return kExitFatal;
    }
    return cmd_loss(batch, o, beta,
                    out.empty() ? std::nullopt : std::optional<fs::path>(out), std::cout, log);
  }
  return kExitFatal;
}
