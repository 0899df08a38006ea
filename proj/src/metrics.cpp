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

#include "ecsim/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "ecsim/textio.hpp"

namespace ecsim {

std::vector<ClassIoU> iou_per_class(const SemanticMask& pred,
                                    const SemanticMask& truth) {
  if (pred.height() != truth.height() || pred.width() != truth.width() ||
      pred.class_count() != truth.class_count()) {
    throw Error("iou_per_class: masks disagree on shape");
  }
  const int m = pred.class_count();
  std::vector<long> intersection(m, 0), unions(m, 0);
  for (int r = 0; r < pred.height(); ++r) {
    for (int c = 0; c < pred.width(); ++c) {
      const int a = pred.label(r, c), b = truth.label(r, c);
      if (a == b) {
        ++intersection[a];
        ++unions[a];
      } else {
        ++unions[a];
        ++unions[b];
      }
    }
  }
  std::vector<ClassIoU> out(m);
  for (int cls = 0; cls < m; ++cls) {
    if (unions[cls] > 0) {
      out[cls].present = true;
      out[cls].iou = static_cast<double>(intersection[cls]) / unions[cls];
    }
  }
  return out;
}

double mean_iou(const SemanticMask& pred, const SemanticMask& truth) {
  const auto per_class = iou_per_class(pred, truth);
  double sum = 0.0;
  int present = 0;
  for (const ClassIoU& c : per_class) {
    if (c.present) {
      sum += c.iou;
      ++present;
    }
  }
  return sum / present;  // at least one class is always present
}

bool hard_input_truth(double iou_fused, double iou_edge) {
  // Inclusive at the 0.1 boundary; the slack absorbs decimal rounding so
  // e.g. (0.7, 0.6) counts as hard.
  return iou_fused - iou_edge >= 0.1 - 1e-12;
}

namespace {

double emitted_iou(const TraceRow& row) {
  return row.decision == Decision::kEdge ? row.iou_edge : row.iou_fused;
}

void require_nonempty(std::span<const TraceRow> trace, const char* who) {
  if (trace.empty()) throw Error(std::string(who) + ": empty trace");
}

}  // namespace

double collab_miou(std::span<const TraceRow> trace) {
  require_nonempty(trace, "collab_miou");
  double sum = 0.0;
  for (const TraceRow& row : trace) sum += emitted_iou(row);
  return sum / static_cast<double>(trace.size());
}

double cur(std::span<const TraceRow> trace) {
  require_nonempty(trace, "cur");
  const auto cloud = std::count_if(
      trace.begin(), trace.end(),
      [](const TraceRow& r) { return r.decision == Decision::kCloud; });
  return static_cast<double>(cloud) / static_cast<double>(trace.size());
}

double avg_latency(std::span<const TraceRow> trace) {
  require_nonempty(trace, "avg_latency");
  double sum = 0.0;
  for (const TraceRow& row : trace) sum += row.latency_s;
  return sum / static_cast<double>(trace.size());
}

double gate_auc(std::span<const TraceRow> trace) {
  require_nonempty(trace, "gate_auc");
  struct Scored {
    double confidence;
    bool hard;
  };
  std::vector<Scored> scored;
  scored.reserve(trace.size());
  for (const TraceRow& row : trace) {
    scored.push_back({row.confidence,
                      hard_input_truth(row.iou_fused, row.iou_edge)});
  }
  const auto hard_count =
      std::count_if(scored.begin(), scored.end(),
                    [](const Scored& s) { return s.hard; });
  const auto easy_count = static_cast<long>(scored.size()) - hard_count;
  if (hard_count == 0 || easy_count == 0) {
    throw Error("gate_auc: trace must contain both hard and easy samples");
  }

  // Mann-Whitney with average ranks; easy samples should rank above hard
  // ones in ascending confidence order.
  std::sort(scored.begin(), scored.end(),
            [](const Scored& a, const Scored& b) {
              return a.confidence < b.confidence;
            });
  double easy_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < scored.size()) {
    std::size_t j = i;
    while (j < scored.size() &&
           scored[j].confidence == scored[i].confidence) {
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (!scored[k].hard) easy_rank_sum += avg_rank;
    }
    i = j;
  }
  const double u = easy_rank_sum -
                   static_cast<double>(easy_count) * (easy_count + 1) / 2.0;
  return u / (static_cast<double>(hard_count) * easy_count);
}

RunReport build_report(std::vector<TraceRow> trace, bool keep_trace) {
  RunReport report;
  if (trace.empty()) {
    report.aggregate.task = -1;
    return report;
  }

  std::map<int, std::vector<TraceRow>> by_task;
  for (const TraceRow& row : trace) by_task[row.task].push_back(row);

  const auto record = [](int task, std::span<const TraceRow> rows) {
    TaskRecord rec;
    rec.task = task;
    rec.samples = static_cast<int>(rows.size());
    rec.miou = collab_miou(rows);
    rec.cur = cur(rows);
    rec.avg_latency_s = avg_latency(rows);
    return rec;
  };

  for (const auto& [task, rows] : by_task) {
    report.per_task.push_back(record(task, rows));
  }
  report.aggregate = record(-1, trace);
  if (keep_trace) report.trace = std::move(trace);
  return report;
}

namespace {

void append_record_csv(std::string& out, const TaskRecord& rec) {
  out += rec.task < 0 ? "all" : std::to_string(rec.task);
  out += ',';
  out += std::to_string(rec.samples);
  out += ',';
  out += format_fixed(rec.miou);
  out += ',';
  out += format_fixed(rec.cur);
  out += ',';
  out += format_fixed(rec.avg_latency_s);
  out += '\n';
}

}  // namespace

std::string report_csv(const RunReport& report) {
  std::string out = "task,samples,miou,cur,avg_latency_s\n";
  for (const TaskRecord& rec : report.per_task) append_record_csv(out, rec);
  if (report.aggregate.samples > 0) append_record_csv(out, report.aggregate);
  return out;
}

namespace {

void append_record_json(std::string& out, const TaskRecord& rec,
                        const char* indent) {
  out += indent;
  out += "{\"task\": ";
  out += rec.task < 0 ? std::string("\"all\"") : std::to_string(rec.task);
  out += ", \"samples\": " + std::to_string(rec.samples);
  out += ", \"miou\": " + format_fixed(rec.miou);
  out += ", \"cur\": " + format_fixed(rec.cur);
  out += ", \"avg_latency_s\": " + format_fixed(rec.avg_latency_s);
  out += "}";
}

}  // namespace

std::string report_structured_text(const RunReport& report) {
  std::string out = "{\n  \"per_task\": [\n";
  for (std::size_t i = 0; i < report.per_task.size(); ++i) {
    append_record_json(out, report.per_task[i], "    ");
    if (i + 1 < report.per_task.size()) out += ',';
    out += '\n';
  }
  out += "  ],\n  \"aggregate\": ";
  append_record_json(out, report.aggregate, "");
  out += "\n}\n";
  return out;
}

std::string trace_csv(std::span<const TraceRow> trace) {
  std::string out =
      "sample,decision,confidence,iou_edge,iou_fused,latency_s,hard_truth\n";
  for (const TraceRow& row : trace) {
    out += std::to_string(row.sample);
    out += ',';
    out += decision_name(row.decision);
    out += ',';
    out += format_fixed(row.confidence);
    out += ',';
    out += format_fixed(row.iou_edge);
    out += ',';
    out += format_fixed(row.iou_fused);
    out += ',';
    out += format_fixed(row.latency_s);
    out += ',';
    out += hard_input_truth(row.iou_fused, row.iou_edge) ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace ecsim
