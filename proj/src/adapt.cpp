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

#include "ecsim/adapt.hpp"

#include <algorithm>
#include <cmath>

#include "ecsim/fusion.hpp"

namespace ecsim {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw Error("TrainConfig: learning_rate <= 0");
  if (beta <= 0.0) throw Error("TrainConfig: beta <= 0");
  if (epochs < 1) throw Error("TrainConfig: epochs < 1");
  if (log_clamp <= 0.0 || log_clamp >= 1e-3) {
    throw Error("TrainConfig: log_clamp outside (0, 1e-3)");
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_hint)
    : capacity_hint_(capacity_hint) {
  entries_.reserve(capacity_hint);
}

void ReplayBuffer::append(Image img, SemanticMask pseudo_label) {
  if (img.height() != pseudo_label.height() ||
      img.width() != pseudo_label.width()) {
    throw Error("ReplayBuffer: image and pseudo-label sizes disagree");
  }
  if (!entries_.empty()) {
    const auto& first = entries_.front().first;
    if (img.height() != first.height() || img.width() != first.width()) {
      throw Error("ReplayBuffer: entry dimensions disagree with buffer");
    }
  }
  entries_.emplace_back(std::move(img), std::move(pseudo_label));
}

double loss_f(const ProbMap& pred, const SemanticMask& pseudo,
              double log_clamp) {
  if (pred.height() != pseudo.height() || pred.width() != pseudo.width() ||
      pred.class_count() != pseudo.class_count()) {
    throw Error("loss_f: prediction and pseudo-label disagree on shape");
  }
  double sum = 0.0;
  for (int r = 0; r < pred.height(); ++r) {
    for (int c = 0; c < pred.width(); ++c) {
      const double p = std::max(pred.prob(pseudo.label(r, c), r, c), log_clamp);
      sum -= std::log(p);
    }
  }
  return sum / pred.pixel_count();
}

namespace {

// Softmax of the model's logits on one image; bypasses ProbMap so the
// gradient sees the raw softmax outputs.
Eigen::MatrixXd forward_softmax(const TrainableEdgeModel& model,
                                const Eigen::MatrixXd& feats) {
  Eigen::MatrixXd logits = model.weights() * feats;
  for (Eigen::Index p = 0; p < logits.cols(); ++p) {
    auto col = logits.col(p);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
  return logits;
}

}  // namespace

EdgeLossGradient edge_loss_gradient(const TrainableEdgeModel& model,
                                    std::span<const ReplayBuffer::Entry> batch,
                                    double log_clamp) {
  if (batch.empty()) throw Error("edge_loss_gradient: empty batch");
  EdgeLossGradient out;
  out.gradient = Eigen::MatrixXd::Zero(model.class_count(),
                                       TrainableEdgeModel::kFeatureDim);
  for (const auto& [img, pseudo] : batch) {
    if (pseudo.class_count() != model.class_count()) {
      throw Error("edge_loss_gradient: class counts disagree");
    }
    const Eigen::MatrixXd feats = TrainableEdgeModel::pixel_features(img);
    Eigen::MatrixXd probs = forward_softmax(model, feats);
    const double pixels = static_cast<double>(probs.cols());

    double sample_loss = 0.0;
    for (int r = 0; r < img.height(); ++r) {
      for (int c = 0; c < img.width(); ++c) {
        const Eigen::Index px =
            static_cast<Eigen::Index>(r) * img.width() + c;
        const int y = pseudo.label(r, c);
        sample_loss -= std::log(std::max(probs(y, px), log_clamp));
        probs(y, px) -= 1.0;  // softmax cross-entropy residual
      }
    }
    out.loss += sample_loss / pixels;
    out.gradient += (probs * feats.transpose()) / pixels;
  }
  out.loss /= static_cast<double>(batch.size());
  out.gradient /= static_cast<double>(batch.size());
  return out;
}

UpdateStats update_f(TrainableEdgeModel& model,
                     std::span<const ReplayBuffer::Entry> batch,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (batch.empty()) throw Error("update_f: empty batch");
  UpdateStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EdgeLossGradient g = edge_loss_gradient(model, batch, cfg.log_clamp);
    if (epoch == 0) stats.mean_loss_before = g.loss;
    model.set_weights(model.weights() - cfg.learning_rate * g.gradient);
    ++stats.steps;
  }
  stats.mean_loss_after =
      edge_loss_gradient(model, batch, cfg.log_clamp).loss;
  return stats;
}

double loss_h(double confidence, double sample_loss, double beta,
              double log_clamp) {
  const double c = std::clamp(confidence, log_clamp, 1.0 - log_clamp);
  return c * sample_loss - beta * std::log(c);
}

GateLossGradient gate_loss_gradient(const Gate& gate,
                                    std::span<const GateSample> batch,
                                    double beta, double log_clamp) {
  if (batch.empty()) throw Error("gate_loss_gradient: empty batch");
  GateLossGradient out;
  out.d_w1 = Eigen::MatrixXd::Zero(gate.hidden_dim(), Gate::kInputDim);
  out.d_b1 = Eigen::VectorXd::Zero(gate.hidden_dim());
  out.d_w2 = Eigen::VectorXd::Zero(gate.hidden_dim());

  for (const GateSample& sample : batch) {
    const Eigen::Matrix<double, 6, 1> x = sample.features.vector();
    const Eigen::VectorXd a1 =
        ((gate.hidden_weights() * x) + gate.hidden_bias()).array().tanh();
    const double z2 = gate.output_weights().dot(a1) + gate.output_bias();
    const double c = 1.0 / (1.0 + std::exp(-z2));
    out.loss += loss_h(c, sample.sample_loss, beta, log_clamp);

    // The loss is flat where the confidence clamp binds.
    double dl_dc = 0.0;
    if (c > log_clamp && c < 1.0 - log_clamp) {
      dl_dc = sample.sample_loss - beta / c;
    }
    const double dz2 = dl_dc * c * (1.0 - c);
    out.d_w2 += dz2 * a1;
    out.d_b2 += dz2;
    const Eigen::VectorXd dz1 =
        (gate.output_weights() * dz2).cwiseProduct(
            (1.0 - a1.array().square()).matrix());
    out.d_w1 += dz1 * x.transpose();
    out.d_b1 += dz1;
  }
  const double n = static_cast<double>(batch.size());
  out.loss /= n;
  out.d_w1 /= n;
  out.d_b1 /= n;
  out.d_w2 /= n;
  out.d_b2 /= n;
  return out;
}

UpdateStats update_h(Gate& gate, std::span<const GateSample> batch,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (batch.empty()) throw Error("update_h: empty batch");
  UpdateStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const GateLossGradient g =
        gate_loss_gradient(gate, batch, cfg.beta, cfg.log_clamp);
    if (epoch == 0) stats.mean_loss_before = g.loss;
    gate.set_parameters(gate.hidden_weights() - cfg.learning_rate * g.d_w1,
                        gate.hidden_bias() - cfg.learning_rate * g.d_b1,
                        gate.output_weights() - cfg.learning_rate * g.d_w2,
                        gate.output_bias() - cfg.learning_rate * g.d_b2);
    ++stats.steps;
  }
  stats.mean_loss_after =
      gate_loss_gradient(gate, batch, cfg.beta, cfg.log_clamp).loss;
  return stats;
}

double objective_value(std::span<const ScoredSample> samples,
                       const EdgeModel& edge, const CloudMaskModel& cloud,
                       const Gate& gate, const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw Error("objective_value: empty sample set");
  double sum = 0.0;
  for (const ScoredSample& s : samples) {
    const ProbMap pred = edge.infer(s.image, &s.truth);
    const RegionMaskSet masks = cloud.infer(s.image, &s.truth);
    const FusionResult fused = assisted_inference(pred, masks);
    const double l = loss_f(pred, fused.semantic, cfg.log_clamp);
    const double c = gate.score(extract_features(pred));
    sum += loss_h(c, l, cfg.beta, cfg.log_clamp);
  }
  return sum / static_cast<double>(samples.size());
}

}  // namespace ecsim
