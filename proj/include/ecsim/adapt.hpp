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

#ifndef ECSIM_ADAPT_HPP_
#define ECSIM_ADAPT_HPP_

#include <span>
#include <utility>
#include <vector>

#include "ecsim/gating.hpp"
#include "ecsim/models.hpp"
#include "ecsim/tensor.hpp"

namespace ecsim {

struct TrainConfig {
  double learning_rate = 0.001;
  double beta = 0.1;   // weight of the -log(confidence) regularizer
  int epochs = 50;     // full-batch gradient steps per training round
  double log_clamp = 1e-6;

  void validate() const;
};

/// FIFO store of (input, pseudo-label) pairs consumed by training rounds.
/// `capacity_hint` is bookkeeping for reserve only; the owner decides when
/// to flush.
class ReplayBuffer {
 public:
  using Entry = std::pair<Image, SemanticMask>;

  explicit ReplayBuffer(std::size_t capacity_hint = 0);

  void append(Image img, SemanticMask pseudo_label);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t capacity_hint() const { return capacity_hint_; }

 private:
  std::vector<Entry> entries_;
  std::size_t capacity_hint_;
};

/// Mean over pixels of -ln(predicted probability of the pseudo-label class),
/// with the probability clamped below at `log_clamp`.
double loss_f(const ProbMap& pred, const SemanticMask& pseudo,
              double log_clamp = 1e-6);

/// Batch-mean loss_f of the model on `batch` and its exact gradient with
/// respect to the model weights.
struct EdgeLossGradient {
  double loss = 0.0;
  Eigen::MatrixXd gradient;  // class_count x feature dim
};
EdgeLossGradient edge_loss_gradient(
    const TrainableEdgeModel& model,
    std::span<const ReplayBuffer::Entry> batch, double log_clamp = 1e-6);

struct UpdateStats {
  double mean_loss_before = 0.0;  // the reported (pre-step) loss
  double mean_loss_after = 0.0;
  int steps = 0;
};

/// `cfg.epochs` full-batch gradient-descent steps on the batch-mean loss_f.
UpdateStats update_f(TrainableEdgeModel& model,
                     std::span<const ReplayBuffer::Entry> batch,
                     const TrainConfig& cfg);

/// confidence * sample_loss - beta * ln(confidence), with the confidence
/// clamped into [log_clamp, 1 - log_clamp] first.
double loss_h(double confidence, double sample_loss, double beta,
              double log_clamp = 1e-6);

struct GateSample {
  GateFeatures features;
  double sample_loss = 0.0;
};

/// Batch-mean loss_h and its gradient with respect to the gate parameters,
/// in (hidden weights, hidden bias, output weights, output bias) order.
struct GateLossGradient {
  double loss = 0.0;
  Eigen::MatrixXd d_w1;
  Eigen::VectorXd d_b1;
  Eigen::VectorXd d_w2;
  double d_b2 = 0.0;
};
GateLossGradient gate_loss_gradient(const Gate& gate,
                                    std::span<const GateSample> batch,
                                    double beta, double log_clamp = 1e-6);

/// `cfg.epochs` full-batch gradient-descent steps on the batch-mean loss_h.
UpdateStats update_h(Gate& gate, std::span<const GateSample> batch,
                     const TrainConfig& cfg);

/// Empirical mean of confidence * pseudo-label loss + beta * -ln(confidence)
/// over a sample set. Reporting only; drives no updates.
struct ScoredSample {
  Image image;
  SemanticMask truth;
};
double objective_value(std::span<const ScoredSample> samples,
                       const EdgeModel& edge, const CloudMaskModel& cloud,
                       const Gate& gate, const TrainConfig& cfg);

}  // namespace ecsim

#endif  // ECSIM_ADAPT_HPP_
