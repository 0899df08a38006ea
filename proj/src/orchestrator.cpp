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

#include "ecsim/orchestrator.hpp"

#include <cstring>
#include <string>
#include <utility>

#include "ecsim/fusion.hpp"

namespace ecsim {

std::vector<std::byte> wire_encode(const WireMessage& msg) {
  const std::uint32_t len = static_cast<std::uint32_t>(msg.payload.size());
  std::vector<std::byte> frame(5 + msg.payload.size());
  frame[0] = static_cast<std::byte>(len & 0xff);
  frame[1] = static_cast<std::byte>((len >> 8) & 0xff);
  frame[2] = static_cast<std::byte>((len >> 16) & 0xff);
  frame[3] = static_cast<std::byte>((len >> 24) & 0xff);
  frame[4] = static_cast<std::byte>(msg.kind);
  if (!msg.payload.empty()) {
    std::memcpy(frame.data() + 5, msg.payload.data(), msg.payload.size());
  }
  return frame;
}

WireMessage wire_decode(std::span<const std::byte> frame) {
  if (frame.size() < 5) throw WireFormatError("frame shorter than header");
  const std::uint32_t len = static_cast<std::uint32_t>(frame[0]) |
                            (static_cast<std::uint32_t>(frame[1]) << 8) |
                            (static_cast<std::uint32_t>(frame[2]) << 16) |
                            (static_cast<std::uint32_t>(frame[3]) << 24);
  if (len != frame.size() - 5) {
    throw WireFormatError("declared length disagrees with payload size");
  }
  const auto kind = static_cast<std::uint8_t>(frame[4]);
  if (kind < 0x01 || kind > 0x03) {
    throw WireFormatError("unknown message kind");
  }
  WireMessage msg;
  msg.kind = static_cast<WireKind>(kind);
  msg.payload.assign(reinterpret_cast<const char*>(frame.data() + 5), len);
  return msg;
}

CloudNode::CloudNode(std::shared_ptr<const CloudMaskModel> model)
    : model_(std::move(model)) {
  if (!model_) throw Error("CloudNode: null model");
}

std::vector<std::byte> CloudNode::handle_upload(
    std::span<const std::byte> frame, const SemanticMask* truth) const {
  const WireMessage msg = wire_decode(frame);
  if (msg.kind != WireKind::kUploadImage) {
    throw WireFormatError("cloud node expects an upload frame");
  }
  const Image img = image_from_text(msg.payload);
  const RegionMaskSet masks = model_->infer(img, truth);
  return wire_encode(WireMessage{WireKind::kMaskResult, to_text(masks)});
}

void OrchestratorConfig::validate() const {
  if (maxsize < 1) throw Error("OrchestratorConfig: maxsize must be >= 1");
  if (maxtime < 1) throw Error("OrchestratorConfig: maxtime must be >= 1");
  if (policy.delta < 0.0 || policy.delta > 1.0) {
    throw Error("OrchestratorConfig: delta outside [0, 1]");
  }
  if (policy.mess_pixel_threshold < 0.0 || policy.mess_pixel_threshold > 1.0) {
    throw Error("OrchestratorConfig: mess_pixel_threshold outside [0, 1]");
  }
  train.validate();
}

Orchestrator::Orchestrator(OrchestratorConfig config, LatencyModel latency,
                           std::shared_ptr<EdgeModel> edge, Gate gate,
                           std::shared_ptr<const CloudMaskModel> cloud)
    : config_(config),
      latency_(std::move(latency)),
      edge_(std::move(edge)),
      gate_(std::move(gate)),
      cloud_(std::move(cloud)),
      buffer_(static_cast<std::size_t>(config.maxsize) + 1) {
  config_.validate();
  if (!edge_) throw Error("Orchestrator: null edge model");
}

double Orchestrator::confidence_for(const ProbMap& pred) const {
  switch (config_.policy.scorer) {
    case Scorer::kLearned:
      return gate_.score(extract_features(pred));
    case Scorer::kMess:
      return score_mess(pred, config_.policy.mess_pixel_threshold);
    case Scorer::kSm:
      return score_sm(pred);
    case Scorer::kSpp:
      return score_spp(pred);
  }
  throw Error("Orchestrator: unknown scorer");
}

InferenceOutcome Orchestrator::process_sample(const Image& img,
                                              const SemanticMask* truth) {
  const ProbMap pred = edge_->infer(img, truth);
  const double confidence = confidence_for(pred);
  const Decision decision = decide(confidence, config_.policy);
  SemanticMask edge_labels = argmax_labels(pred);

  std::optional<double> iou_edge, iou_fused;
  if (truth != nullptr) iou_edge = mean_iou(edge_labels, *truth);

  SemanticMask output = edge_labels;
  if (decision == Decision::kCloud) {
    RegionMaskSet masks(img.height(), img.width());
    try {
      const auto upload =
          wire_encode(WireMessage{WireKind::kUploadImage, to_text(img)});
      const auto reply = cloud_.handle_upload(upload, truth);
      const WireMessage msg = wire_decode(reply);
      if (msg.kind != WireKind::kMaskResult) {
        throw WireFormatError("expected a mask result frame");
      }
      masks = region_masks_from_text(msg.payload);
    } catch (const WireFormatError& e) {
      throw TransportError(std::string("cloud round trip failed: ") +
                           e.what());
    } catch (const ParseError& e) {
      throw TransportError(std::string("cloud payload malformed: ") +
                           e.what());
    }
    const FusionResult fused = assisted_inference(pred, masks);
    output = fused.semantic;
    if (truth != nullptr) iou_fused = mean_iou(fused.semantic, *truth);
    buffer_.append(img, fused.semantic);
    buffered_truths_.emplace_back(truth != nullptr
                                      ? std::optional<SemanticMask>(*truth)
                                      : std::nullopt);
  } else if (truth != nullptr && config_.shadow_diagnostics) {
    // What the cloud path would have produced; evaluation only.
    const RegionMaskSet masks = cloud_.model().infer(img, truth);
    iou_fused = mean_iou(assisted_inference(pred, masks).semantic, *truth);
  }

  ++samples_since_flush_;
  return InferenceOutcome{decision,
                          confidence,
                          std::move(output),
                          sample_latency(decision, latency_, img),
                          iou_edge,
                          iou_fused};
}

UpdateReport Orchestrator::maybe_update() {
  UpdateReport report;
  if (!config_.adaptive_updates) return report;
  const bool size_trigger =
      buffer_.size() > static_cast<std::size_t>(config_.maxsize);
  const bool time_trigger = samples_since_flush_ > config_.maxtime;
  if (!size_trigger && !time_trigger) return report;

  report.fired = true;
  samples_since_flush_ = 0;
  if (buffer_.empty()) return report;
  report.trained = true;

  if (auto* trainable = dynamic_cast<TrainableEdgeModel*>(edge_.get())) {
    const UpdateStats stats =
        update_f(*trainable, buffer_.entries(), config_.train);
    report.edge_loss_before = stats.mean_loss_before;
    // The retrained weights reach the edge copy through the same framing the
    // network path would use.
    const WireMessage push{WireKind::kModelUpdate, to_text(*trainable)};
    const WireMessage received = wire_decode(wire_encode(push));
    trainable->set_weights(edge_model_from_text(received.payload).weights());
  }

  if (config_.policy.scorer == Scorer::kLearned) {
    std::vector<GateSample> batch;
    batch.reserve(buffer_.size());
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
      const auto& [img, pseudo] = buffer_.entries()[i];
      const SemanticMask* truth =
          buffered_truths_[i] ? &*buffered_truths_[i] : nullptr;
      const ProbMap pred = edge_->infer(img, truth);
      batch.push_back(GateSample{extract_features(pred),
                                 loss_f(pred, pseudo, config_.train.log_clamp)});
    }
    const UpdateStats stats = update_h(gate_, batch, config_.train);
    report.gate_loss_before = stats.mean_loss_before;
  }

  buffer_.clear();
  buffered_truths_.clear();
  ++update_rounds_;
  return report;
}

RunReport Orchestrator::run_stream(std::span<const StreamSample> stream) {
  std::vector<TraceRow> trace;
  trace.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const StreamSample& sample = stream[i];
    InferenceOutcome outcome = [&] {
      try {
        return process_sample(sample.image, &sample.truth);
      } catch (const Error& e) {
        throw Error("sample " + std::to_string(i) + ": " + e.what());
      }
    }();

    TraceRow row;
    row.sample = static_cast<int>(i);
    row.task = sample.task_index;
    row.decision = outcome.decision;
    row.confidence = outcome.confidence;
    row.iou_edge = outcome.iou_edge.value_or(0.0);
    // Without shadow diagnostics an edge-kept sample has no fused output;
    // fall back to the edge IoU (gap 0, never counted hard).
    row.iou_fused = outcome.iou_fused.value_or(row.iou_edge);
    row.latency_s = outcome.latency_s;
    trace.push_back(row);

    maybe_update();
  }
  return build_report(std::move(trace), config_.keep_trace);
}

}  // namespace ecsim
