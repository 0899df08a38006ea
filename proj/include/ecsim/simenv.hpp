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

#ifndef ECSIM_SIMENV_HPP_
#define ECSIM_SIMENV_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "ecsim/gating.hpp"
#include "ecsim/tensor.hpp"

namespace ecsim {

/// Appearance of one class in generated images.
struct ClassAppearance {
  Eigen::Vector3d mean_intensity;  // per channel, in [0, 255]
  double noise_stddev = 30.0;
};

/// One segment of the stream: sample count plus the class frequencies that
/// drive every label draw inside it.
struct TaskSpec {
  int length = 0;
  Eigen::VectorXd class_frequencies;  // nonnegative, sums to 1 within 1e-6
};

/// Drifting synthetic stream: class frequencies change stepwise at task
/// boundaries, appearances stay fixed.
struct StreamSpec {
  int class_count = 0;
  int height = 0;
  int width = 0;
  std::vector<TaskSpec> tasks;
  std::vector<ClassAppearance> appearances;  // one per class
  double region_scale = 0.5;  // region extent as a fraction of the grid
  std::uint64_t seed = 0;

  void validate() const;
};

/// Evenly spread default palette for `class_count` classes.
std::vector<ClassAppearance> default_appearances(int class_count,
                                                 double noise_stddev = 30.0);

struct StreamSample {
  Image image;
  SemanticMask truth;
  int task_index = 0;
};

/// Seeded scene generator: a background label plus a few axis-aligned
/// regions, labels drawn from the task frequencies, channel intensities from
/// the class appearances. Deterministic per (spec, spec.seed).
std::vector<StreamSample> generate_stream(const StreamSpec& spec);

/// Two-path latency model. The cloud path still pays the edge inference
/// first: d0 = t_e + upload/bw + t_c + download/bw, d1 = t_e.
class LatencyModel {
 public:
  using UploadBytesFn = std::function<double(const Image&)>;
  using DownloadBytesFn = std::function<double(int height, int width)>;

  LatencyModel(double edge_compute_s, double cloud_compute_s,
               double bandwidth_bytes_per_s);

  /// Replaces the default payload sizes (3*H*W bytes up, H*W bytes down).
  void set_payload_model(UploadBytesFn upload, DownloadBytesFn download);

  double edge_compute_s() const { return edge_compute_s_; }
  double cloud_compute_s() const { return cloud_compute_s_; }
  double bandwidth_bytes_per_s() const { return bandwidth_; }

  double d1() const { return edge_compute_s_; }
  double d0(const Image& img) const;
  /// Cloud-path latency under the default constant payload sizes.
  double d0_nominal(int height, int width) const;

  /// Chooses t_c so that the nominal cloud path hits `target_d0` on a
  /// height x width grid; t_e = target_d1.
  static LatencyModel calibrated(double target_d1, double target_d0,
                                 double bandwidth_bytes_per_s, int height,
                                 int width);

 private:
  double edge_compute_s_;
  double cloud_compute_s_;
  double bandwidth_;
  UploadBytesFn upload_bytes_;
  DownloadBytesFn download_bytes_;
};

struct LatencyBudget {
  double delay_max = 0.0;
};

/// Latency charged to one sample under the routing decision.
double sample_latency(Decision decision, const LatencyModel& lm,
                      const Image& img);

/// Mean latency of a stream with cloud fraction `cur`:
/// (1 - cur) * d1 + cur * d0.
double expected_latency(double cur, double d0, double d1);

/// Smallest edge fraction e with (1-e)*d0 + e*d1 <= delay_max, clamped to
/// [0, 1]. Throws InfeasibleError when even the all-edge mix misses the
/// budget (delay_max < d1).
double min_edge_fraction(double d0, double d1, double delay_max);
double min_edge_fraction(double d0, double d1, LatencyBudget budget);

/// Uncorrected variant of the budget bound with denominator
/// (delay_max - d1). Exceeds 1 for typical constants; kept for comparison
/// behind the `uncorrected_budget_bound` config flag. Returned raw.
double min_edge_fraction_uncorrected(double d0, double d1, double delay_max);

}  // namespace ecsim

#endif  // ECSIM_SIMENV_HPP_
