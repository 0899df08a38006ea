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

#ifndef ECSIM_HARNESS_HPP_
#define ECSIM_HARNESS_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecsim/orchestrator.hpp"

namespace ecsim {

struct StreamConfig {
  int classes = 4;
  int height = 16;
  int width = 16;
  double region_scale = 0.5;
  double noise_stddev = 30.0;
  // One RGB mean per class; empty selects the built-in palette.
  std::vector<Eigen::Vector3d> palette;
  std::vector<TaskSpec> tasks;
};

struct ModelSetupConfig {
  std::string edge_kind = "trainable";  // trainable | oracle
  double edge_correct_rate = 0.95;
  double edge_temperature = 0.25;
  double cloud_boundary_rate = 0.0;
};

struct GateConfig {
  int hidden_dim = 16;
  Scorer scorer = Scorer::kLearned;
  double delta = 0.75;
  double mess_pixel_threshold = 0.5;
};

struct OrchSetupConfig {
  int maxsize = 32;
  int maxtime = 1000;
  bool adaptive = true;
  bool keep_trace = true;
};

struct LatencyConfig {
  std::string preset = "cloud-robotics";  // empty = explicit d1/d0 below
  double d1 = 1.12;
  double d0 = 5.11;
  double bandwidth_mbps = 4.0;
  std::optional<double> delay_max;
  bool uncorrected_budget_bound = false;

  double bandwidth_bytes_per_s() const { return bandwidth_mbps * 1e6 / 8.0; }
};

struct PretrainConfig {
  int samples = 80;
  int epochs = 300;       // model pretraining steps
  int gate_epochs = 2000; // the gate is tiny; it takes many more steps
  double learning_rate = 0.5;
};

struct ExperimentConfig {
  StreamConfig stream;
  ModelSetupConfig models;
  GateConfig gate;
  TrainConfig train;
  OrchSetupConfig orch;
  LatencyConfig latency;
  PretrainConfig pretrain;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<double> deltas;  // sweep points
  std::string out_dir = "out";

  void validate() const;
};

/// Known latency presets: cloud-robotics, cityscapes, ade20k, synthia.
/// Returns (d1, d0) pairs.
std::optional<std::pair<double, double>> latency_preset(std::string_view name);

/// The 5-task drifting default: 16x16 grids, 4 classes, 300 samples per
/// task, trainable edge model against a contour oracle.
ExperimentConfig default_experiment();

/// Line-oriented `[section]` / `key = value` text. `#` starts a comment.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse(echo_config(c)) reproduces c exactly.
std::string echo_config(const ExperimentConfig& cfg);

/// Everything a single run needs, fully pretrained and seeded.
struct CellSetup {
  std::shared_ptr<EdgeModel> edge;
  Gate gate{16};
  std::shared_ptr<const CloudMaskModel> cloud;
  std::vector<StreamSample> stream;
  LatencyModel latency;
};

/// Builds models, generates the stream, and pretrains edge and gate on the
/// first task's distribution. Deterministic per (cfg, seed) and independent
/// of the strategy, so every strategy starts from identical state.
CellSetup prepare_cell(const ExperimentConfig& cfg, std::uint64_t seed);

/// Applies a strategy's scorer/threshold/update switches on top of the
/// config. Known strategies: laecips, dcsb, mess, sm, spp, edge, cloud.
OrchestratorConfig strategy_orchestrator_config(const ExperimentConfig& cfg,
                                                const std::string& strategy);

RunReport run_cell(const ExperimentConfig& cfg, const std::string& strategy,
                   std::uint64_t seed);

struct CellResult {
  std::string strategy;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunReport report;
};

struct ExperimentResult {
  std::vector<CellResult> cells;

  bool all_ok() const;
  /// Mean aggregate collaboration mIoU of one strategy across seeds.
  double mean_miou(const std::string& strategy) const;
};

/// Runs every (strategy, seed) cell; a failing cell is recorded and the
/// remaining cells still run.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepPoint {
  double delta = 0.0;
  double cur = 0.0;
  double miou = 0.0;
};

/// One frozen-model run per threshold, all from the same pretrained state.
std::vector<SweepPoint> sweep_delta(const ExperimentConfig& cfg,
                                    std::span<const double> deltas);

std::string sweep_csv(std::span<const SweepPoint> points);

/// Writes `<strategy>_<seed>.csv` (+ `_trace.csv` when retained) per cell,
/// `summary.csv`, and `config.echo.txt`. Reruns overwrite with identical
/// bytes. With no cells, only the config echo is written.
void export_results(const ExperimentResult& result,
                    const ExperimentConfig& cfg,
                    const std::filesystem::path& dir);

std::string summary_csv(const ExperimentResult& result,
                        const ExperimentConfig& cfg);

}  // namespace ecsim

#endif  // ECSIM_HARNESS_HPP_
