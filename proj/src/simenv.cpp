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

#include "ecsim/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ecsim/rng.hpp"

namespace ecsim {

void StreamSpec::validate() const {
  if (class_count < 1) throw Error("StreamSpec: class_count must be >= 1");
  if (height < 1 || width < 1) throw Error("StreamSpec: grid too small");
  if (tasks.empty()) throw Error("StreamSpec: no tasks");
  if (appearances.size() != static_cast<std::size_t>(class_count)) {
    throw Error("StreamSpec: one appearance per class required");
  }
  if (region_scale <= 0.0 || region_scale > 1.0) {
    throw Error("StreamSpec: region_scale outside (0, 1]");
  }
  for (const TaskSpec& task : tasks) {
    if (task.length < 1) throw Error("StreamSpec: task length must be >= 1");
    if (task.class_frequencies.size() != class_count) {
      throw Error("StreamSpec: frequency vector length mismatch");
    }
    if ((task.class_frequencies.array() < 0.0).any()) {
      throw Error("StreamSpec: negative class frequency");
    }
    if (std::abs(task.class_frequencies.sum() - 1.0) > 1e-6) {
      throw Error("StreamSpec: class frequencies must sum to 1");
    }
  }
}

std::vector<ClassAppearance> default_appearances(int class_count,
                                                 double noise_stddev) {
  // Corners of the intensity cube first, then evenly spaced gray ramps.
  static const double palette[][3] = {
      {40, 40, 40},   {215, 60, 60},  {60, 200, 60},  {60, 60, 215},
      {210, 210, 60}, {60, 210, 210}, {210, 60, 210}, {160, 160, 160},
  };
  constexpr int palette_size = 8;
  std::vector<ClassAppearance> out;
  out.reserve(class_count);
  for (int c = 0; c < class_count; ++c) {
    ClassAppearance a;
    if (c < palette_size) {
      a.mean_intensity << palette[c][0], palette[c][1], palette[c][2];
    } else {
      const double v = 20.0 + (215.0 * (c - palette_size)) /
                                  std::max(1, class_count - palette_size);
      a.mean_intensity << v, 255.0 - v, v;
    }
    a.noise_stddev = noise_stddev;
    out.push_back(a);
  }
  return out;
}

namespace {

int draw_class(const Eigen::VectorXd& frequencies, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (Eigen::Index c = 0; c < frequencies.size(); ++c) {
    acc += frequencies(c);
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(frequencies.size()) - 1;
}

}  // namespace

std::vector<StreamSample> generate_stream(const StreamSpec& spec) {
  spec.validate();
  std::vector<StreamSample> out;
  Rng rng(mix_seed(spec.seed, 0x57));

  const int h = spec.height, w = spec.width;
  const int max_region_h = std::max(1, static_cast<int>(std::lround(spec.region_scale * h)));
  const int max_region_w = std::max(1, static_cast<int>(std::lround(spec.region_scale * w)));

  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    const TaskSpec& task = spec.tasks[t];
    for (int i = 0; i < task.length; ++i) {
      LabelGrid labels =
          LabelGrid::Constant(h, w, draw_class(task.class_frequencies, rng));
      const int regions = rng.uniform_int(2, 5);
      for (int k = 0; k < regions; ++k) {
        const int rh = rng.uniform_int(1, max_region_h);
        const int rw = rng.uniform_int(1, max_region_w);
        const int r0 = rng.uniform_int(0, h - rh);
        const int c0 = rng.uniform_int(0, w - rw);
        labels.block(r0, c0, rh, rw)
            .setConstant(draw_class(task.class_frequencies, rng));
      }

      std::array<Grid, Image::kChannels> channels;
      for (auto& ch : channels) ch.resize(h, w);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const ClassAppearance& app =
              spec.appearances[static_cast<std::size_t>(labels(r, c))];
          for (int ch = 0; ch < Image::kChannels; ++ch) {
            const double v =
                std::lround(rng.normal(app.mean_intensity(ch), app.noise_stddev));
            channels[static_cast<std::size_t>(ch)](r, c) =
                std::clamp(v, 0.0, 255.0);
          }
        }
      }
      out.push_back(StreamSample{
          Image(std::move(channels)),
          SemanticMask(std::move(labels), spec.class_count),
          static_cast<int>(t)});
    }
  }
  return out;
}

LatencyModel::LatencyModel(double edge_compute_s, double cloud_compute_s,
                           double bandwidth_bytes_per_s)
    : edge_compute_s_(edge_compute_s),
      cloud_compute_s_(cloud_compute_s),
      bandwidth_(bandwidth_bytes_per_s),
      upload_bytes_([](const Image& img) {
        return 3.0 * img.height() * img.width();
      }),
      download_bytes_([](int height, int width) {
        return static_cast<double>(height) * width;
      }) {
  if (edge_compute_s_ <= 0.0 || cloud_compute_s_ < 0.0 || bandwidth_ <= 0.0) {
    throw Error("LatencyModel: nonpositive component");
  }
}

void LatencyModel::set_payload_model(UploadBytesFn upload,
                                     DownloadBytesFn download) {
  upload_bytes_ = std::move(upload);
  download_bytes_ = std::move(download);
}

double LatencyModel::d0(const Image& img) const {
  return edge_compute_s_ + upload_bytes_(img) / bandwidth_ + cloud_compute_s_ +
         download_bytes_(img.height(), img.width()) / bandwidth_;
}

double LatencyModel::d0_nominal(int height, int width) const {
  const double up = 3.0 * height * width;
  const double down = static_cast<double>(height) * width;
  return edge_compute_s_ + (up + down) / bandwidth_ + cloud_compute_s_;
}

LatencyModel LatencyModel::calibrated(double target_d1, double target_d0,
                                      double bandwidth_bytes_per_s, int height,
                                      int width) {
  const double transfer =
      4.0 * height * width / bandwidth_bytes_per_s;  // up + down
  const double cloud_compute = target_d0 - target_d1 - transfer;
  if (cloud_compute <= 0.0) {
    throw Error("LatencyModel: targets leave no cloud compute time");
  }
  LatencyModel lm(target_d1, cloud_compute, bandwidth_bytes_per_s);
  if (lm.d0_nominal(height, width) <= lm.d1()) {
    throw Error("LatencyModel: d0 must exceed d1");
  }
  return lm;
}

double sample_latency(Decision decision, const LatencyModel& lm,
                      const Image& img) {
  return decision == Decision::kEdge ? lm.d1() : lm.d0(img);
}

double expected_latency(double cur, double d0, double d1) {
  return (1.0 - cur) * d1 + cur * d0;
}

double min_edge_fraction(double d0, double d1, double delay_max) {
  if (!(d0 > d1) || d1 <= 0.0) throw Error("min_edge_fraction: need d0 > d1 > 0");
  if (delay_max < d1) {
    throw InfeasibleError("latency budget below the all-edge latency");
  }
  return std::clamp((d0 - delay_max) / (d0 - d1), 0.0, 1.0);
}

double min_edge_fraction(double d0, double d1, LatencyBudget budget) {
  return min_edge_fraction(d0, d1, budget.delay_max);
}

double min_edge_fraction_uncorrected(double d0, double d1, double delay_max) {
  return (d0 - delay_max) / (delay_max - d1);
}

}  // namespace ecsim
