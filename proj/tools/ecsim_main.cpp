// Copyright 2026 The ecsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "ecsim/fusion.hpp"
#include "ecsim/harness.hpp"
#include "ecsim/textio.hpp"

namespace {

struct GlobalOptions {
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

ecsim::ExperimentConfig load_with_overrides(const std::string& path,
                                            const GlobalOptions& opts) {
  ecsim::ExperimentConfig cfg = ecsim::load_config(path);
  if (opts.seed_set) cfg.seeds = {opts.seed};
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ecsim::Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_run(const std::string& config_path, const GlobalOptions& opts) {
  const auto cfg = load_with_overrides(config_path, opts);
  const auto result = ecsim::run_experiment(cfg);
  ecsim::export_results(result, cfg, cfg.out_dir);

  if (!opts.quiet) {
    std::cout << "strategy  seed  avg_miou  avg_cur  avg_latency_s\n";
    for (const auto& cell : result.cells) {
      if (!cell.ok) continue;
      std::cout << cell.strategy << "  " << cell.seed << "  "
                << ecsim::format_fixed(cell.report.aggregate.miou, 4) << "  "
                << ecsim::format_fixed(cell.report.aggregate.cur, 4) << "  "
                << ecsim::format_fixed(cell.report.aggregate.avg_latency_s, 3)
                << "\n";
    }
    std::cout << "results written to " << cfg.out_dir << "\n";
  }

  int failures = 0;
  for (const auto& cell : result.cells) {
    if (!cell.ok) {
      ++failures;
      std::cerr << "cell " << cell.strategy << "_" << cell.seed
                << " failed: " << cell.error << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const GlobalOptions& opts) {
  const auto cfg = load_with_overrides(config_path, opts);
  if (cfg.deltas.empty()) throw ecsim::Error("sweep: no deltas in config");
  const auto points = ecsim::sweep_delta(cfg, cfg.deltas);
  std::filesystem::create_directories(cfg.out_dir);
  const auto csv = ecsim::sweep_csv(points);
  {
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "sweep.csv",
                      std::ios::binary);
    if (!out) throw ecsim::Error("cannot write sweep.csv");
    out << csv;
  }
  {
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "config.echo.txt",
                      std::ios::binary);
    if (!out) throw ecsim::Error("cannot write config.echo.txt");
    out << ecsim::echo_config(cfg);
  }
  if (!opts.quiet) std::cout << csv;
  return 0;
}

int cmd_fuse(const std::string& pred_path, const std::string& masks_path) {
  const auto pred = ecsim::prob_map_from_text(read_file(pred_path));
  const auto masks = ecsim::region_masks_from_text(read_file(masks_path));
  const auto fused = ecsim::assisted_inference(pred, masks);
  std::cout << ecsim::to_text(fused.semantic);
  return 0;
}

int cmd_validate(const std::string& config_path, const GlobalOptions& opts) {
  const auto cfg = load_with_overrides(config_path, opts);
  cfg.validate();
  if (!opts.quiet) {
    std::cout << "config OK: " << cfg.strategies.size() << " strategies x "
              << cfg.seeds.size() << " seeds, "
              << cfg.stream.tasks.size() << " tasks\n";
    std::cout << "latency: d1 = " << ecsim::format_fixed(cfg.latency.d1, 3)
              << " s, d0 = " << ecsim::format_fixed(cfg.latency.d0, 3)
              << " s\n";
    if (cfg.latency.delay_max) {
      const double bound =
          cfg.latency.uncorrected_budget_bound
              ? ecsim::min_edge_fraction_uncorrected(
                    cfg.latency.d0, cfg.latency.d1, *cfg.latency.delay_max)
              : ecsim::min_edge_fraction(
                    cfg.latency.d0, cfg.latency.d1,
                    ecsim::LatencyBudget{*cfg.latency.delay_max});
      std::cout << "budget " << ecsim::format_fixed(*cfg.latency.delay_max, 3)
                << " s needs edge fraction >= "
                << ecsim::format_fixed(bound, 4) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edge-cloud co-inference simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // accept the global flags after the subcommand too

  GlobalOptions opts;
  app.add_option("--out", opts.out_dir, "override the output directory");
  app.add_option("--seed", opts.seed, "run a single seed instead of the list")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  app.add_flag("--quiet", opts.quiet, "suppress progress output");

  std::string config_path, pred_path, masks_path;

  auto* run = app.add_subcommand("run", "run the experiment matrix");
  run->add_option("config", config_path, "experiment config file")->required();

  auto* sweep = app.add_subcommand("sweep", "threshold sweep, frozen models");
  sweep->add_option("config", config_path, "experiment config file")
      ->required();

  auto* fuse = app.add_subcommand(
      "fuse", "relabel region masks with a prediction's class votes");
  fuse->add_option("pred", pred_path, "probability map file (PM)")->required();
  fuse->add_option("masks", masks_path, "region mask set file (RM)")
      ->required();

  auto* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("config", config_path, "experiment config file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, opts);
    if (sweep->parsed()) return cmd_sweep(config_path, opts);
    if (fuse->parsed()) return cmd_fuse(pred_path, masks_path);
    if (validate->parsed()) return cmd_validate(config_path, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
