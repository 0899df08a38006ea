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

#ifndef ECSIM_METRICS_HPP_
#define ECSIM_METRICS_HPP_

#include <span>
#include <string>
#include <vector>

#include "ecsim/gating.hpp"
#include "ecsim/tensor.hpp"

namespace ecsim {

struct ClassIoU {
  bool present = false;  // class occurs in prediction or truth
  double iou = 0.0;
};

/// Per-class intersection over union. Classes absent from both masks are
/// flagged not-present and excluded from mean_iou.
std::vector<ClassIoU> iou_per_class(const SemanticMask& pred,
                                    const SemanticMask& truth);

/// Mean IoU over the classes present in either mask.
double mean_iou(const SemanticMask& pred, const SemanticMask& truth);

/// A sample counts as hard when the fused output beats the edge output by at
/// least 0.1 IoU.
bool hard_input_truth(double iou_fused, double iou_edge);

/// One processed sample as the evaluator sees it.
struct TraceRow {
  int sample = 0;
  int task = 0;
  Decision decision = Decision::kEdge;
  double confidence = 0.0;
  double iou_edge = 0.0;   // mean IoU of the edge output vs truth
  double iou_fused = 0.0;  // mean IoU of the fused output vs truth
  double latency_s = 0.0;
};

/// Mean IoU of whichever output each sample actually emitted.
double collab_miou(std::span<const TraceRow> trace);

/// Fraction of samples routed to the cloud.
double cur(std::span<const TraceRow> trace);

double avg_latency(std::span<const TraceRow> trace);

/// Rank AUC of "low confidence predicts hard" against hard_input_truth;
/// ties count half. Requires both hard and easy samples in the trace.
double gate_auc(std::span<const TraceRow> trace);

struct TaskRecord {
  int task = 0;  // -1 for the whole-stream aggregate
  int samples = 0;
  double miou = 0.0;
  double cur = 0.0;
  double avg_latency_s = 0.0;
};

struct RunReport {
  std::vector<TaskRecord> per_task;
  TaskRecord aggregate;
  std::vector<TraceRow> trace;  // empty unless trace retention is on
};

/// Groups a trace into per-task records plus the aggregate.
RunReport build_report(std::vector<TraceRow> trace, bool keep_trace);

/// CSV with header `task,samples,miou,cur,avg_latency_s`; per-task rows
/// then an `all` aggregate row.
std::string report_csv(const RunReport& report);

/// CSV with header
/// `sample,decision,confidence,iou_edge,iou_fused,latency_s,hard_truth`.
std::string trace_csv(std::span<const TraceRow> trace);

/// Structured text mirror of the CSV report (JSON shaped).
std::string report_structured_text(const RunReport& report);

}  // namespace ecsim

#endif  // ECSIM_METRICS_HPP_
