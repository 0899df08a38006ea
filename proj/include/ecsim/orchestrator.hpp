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

#ifndef ECSIM_ORCHESTRATOR_HPP_
#define ECSIM_ORCHESTRATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ecsim/adapt.hpp"
#include "ecsim/gating.hpp"
#include "ecsim/metrics.hpp"
#include "ecsim/models.hpp"
#include "ecsim/simenv.hpp"

namespace ecsim {

enum class WireKind : std::uint8_t {
  kUploadImage = 0x01,
  kMaskResult = 0x02,
  kModelUpdate = 0x03,
};

/// One edge<->cloud frame: 4-byte little-endian payload length, 1-byte kind,
/// then the carried object in text tensor form.
struct WireMessage {
  WireKind kind = WireKind::kUploadImage;
  std::string payload;

  bool operator==(const WireMessage&) const = default;
};

std::vector<std::byte> wire_encode(const WireMessage& msg);

/// Throws WireFormatError on truncated headers, length mismatches, and
/// unknown kinds. Never mutates anything.
WireMessage wire_decode(std::span<const std::byte> frame);

/// Cloud half of the exchange: decodes an upload, runs the mask model, and
/// returns an encoded mask result.
class CloudNode {
 public:
  explicit CloudNode(std::shared_ptr<const CloudMaskModel> model);

  std::vector<std::byte> handle_upload(std::span<const std::byte> frame,
                                       const SemanticMask* truth) const;

  const CloudMaskModel& model() const { return *model_; }

 private:
  std::shared_ptr<const CloudMaskModel> model_;
};

struct OrchestratorConfig {
  int maxsize = 32;    // train when the buffer grows past this
  int maxtime = 1000;  // ... or this many samples have passed since a flush
  GatePolicy policy;
  TrainConfig train;
  bool adaptive_updates = true;  // off reproduces the frozen-model baseline
  bool keep_trace = true;
  bool shadow_diagnostics = true;  // fused IoU for edge-kept samples

  void validate() const;
};

struct InferenceOutcome {
  Decision decision = Decision::kEdge;
  double confidence = 0.0;
  SemanticMask output;
  double latency_s = 0.0;
  std::optional<double> iou_edge;
  std::optional<double> iou_fused;
};

struct UpdateReport {
  bool fired = false;    // a trigger went off
  bool trained = false;  // ... and the buffer had content
  double edge_loss_before = 0.0;
  double gate_loss_before = 0.0;
};

/// Runs the per-sample collaboration loop: edge inference, gating, cloud
/// round-trip with fusion, replay-buffer accumulation, and trigger-driven
/// continual updates. Single-threaded and deterministic.
class Orchestrator {
 public:
  Orchestrator(OrchestratorConfig config, LatencyModel latency,
               std::shared_ptr<EdgeModel> edge, Gate gate,
               std::shared_ptr<const CloudMaskModel> cloud);

  InferenceOutcome process_sample(const Image& img,
                                  const SemanticMask* truth = nullptr);

  /// Fires the continual-training round when a trigger condition holds.
  UpdateReport maybe_update();

  /// Processes a stream in order, interleaving update checks. Per-sample
  /// failures are rethrown with the sample index attached.
  RunReport run_stream(std::span<const StreamSample> stream);

  const Gate& gate() const { return gate_; }
  const EdgeModel& edge() const { return *edge_; }
  const LatencyModel& latency() const { return latency_; }
  std::size_t buffer_size() const { return buffer_.size(); }
  int update_rounds() const { return update_rounds_; }
  int samples_since_flush() const { return samples_since_flush_; }

 private:
  double confidence_for(const ProbMap& pred) const;

  OrchestratorConfig config_;
  LatencyModel latency_;
  std::shared_ptr<EdgeModel> edge_;
  Gate gate_;
  CloudNode cloud_;
  ReplayBuffer buffer_;
  // Ground truths of buffered samples; oracle edge models need them again
  // when the gate trains on refreshed predictions.
  std::vector<std::optional<SemanticMask>> buffered_truths_;
  int samples_since_flush_ = 0;
  int update_rounds_ = 0;
};

}  // namespace ecsim

#endif  // ECSIM_ORCHESTRATOR_HPP_
