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

#include "ecsim/gating.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ecsim/rng.hpp"
#include "ecsim/textio.hpp"

namespace ecsim {

GateFeatures extract_features(const ProbMap& pred) {
  if (pred.class_count() < 2) {
    throw Error("extract_features: needs at least two classes");
  }
  const Grid top1 = top1_map(pred);
  const Grid margin = top2_margin_map(pred);
  const double pixels = static_cast<double>(pred.pixel_count());
  const double log_m = std::log(static_cast<double>(pred.class_count()));

  double entropy_sum = 0.0;
  for (Eigen::Index px = 0; px < pred.matrix().cols(); ++px) {
    double h = 0.0;
    for (Eigen::Index cls = 0; cls < pred.matrix().rows(); ++cls) {
      const double p = pred.matrix()(cls, px);
      if (p > 0.0) h -= p * std::log(p);
    }
    entropy_sum += h / log_m;
  }

  GateFeatures f;
  f.mean_top1 = top1.mean();
  f.mean_margin = margin.mean();
  f.mean_norm_entropy = std::clamp(entropy_sum / pixels, 0.0, 1.0);
  f.frac_top1_50 = (top1 >= 0.5).count() / pixels;
  f.frac_top1_70 = (top1 >= 0.7).count() / pixels;
  f.frac_top1_90 = (top1 >= 0.9).count() / pixels;
  return f;
}

Gate::Gate(int hidden_dim)
    : hidden_dim_(hidden_dim),
      w1_(Eigen::MatrixXd::Zero(hidden_dim, kInputDim)),
      b1_(Eigen::VectorXd::Zero(hidden_dim)),
      w2_(Eigen::VectorXd::Zero(hidden_dim)),
      b2_(0.0) {
  if (hidden_dim < 1) throw Error("Gate: hidden_dim must be >= 1");
}

Gate Gate::random_init(int hidden_dim, std::uint64_t seed) {
  Gate g(hidden_dim);
  Rng rng(seed);
  const auto draw = [&rng] { return rng.uniform(-0.1, 0.1); };
  for (int i = 0; i < hidden_dim; ++i) {
    for (int j = 0; j < kInputDim; ++j) g.w1_(i, j) = draw();
  }
  for (int i = 0; i < hidden_dim; ++i) g.b1_(i) = draw();
  for (int i = 0; i < hidden_dim; ++i) g.w2_(i) = draw();
  g.b2_ = draw();
  return g;
}

double Gate::score(const GateFeatures& features) const {
  const Eigen::VectorXd hidden =
      ((w1_ * features.vector()) + b1_).array().tanh();
  const double z = w2_.dot(hidden) + b2_;
  return 1.0 / (1.0 + std::exp(-z));
}

void Gate::set_parameters(Eigen::MatrixXd w1, Eigen::VectorXd b1,
                          Eigen::VectorXd w2, double b2) {
  if (w1.rows() != hidden_dim_ || w1.cols() != kInputDim ||
      b1.size() != hidden_dim_ || w2.size() != hidden_dim_) {
    throw Error("Gate: parameter shape mismatch");
  }
  w1_ = std::move(w1);
  b1_ = std::move(b1);
  w2_ = std::move(w2);
  b2_ = b2;
}

bool Gate::operator==(const Gate& other) const {
  return hidden_dim_ == other.hidden_dim_ && w1_ == other.w1_ &&
         b1_ == other.b1_ && w2_ == other.w2_ && b2_ == other.b2_;
}

std::string to_text(const Gate& gate) {
  std::string out = "GW " + std::to_string(gate.hidden_dim());
  long idx = 0;
  const auto put = [&out, &idx](double v) {
    out += (idx++ % 8 == 0) ? '\n' : ' ';
    out += format_double(v);
  };
  for (int i = 0; i < gate.hidden_dim(); ++i) {
    for (int j = 0; j < Gate::kInputDim; ++j) put(gate.hidden_weights()(i, j));
  }
  for (int i = 0; i < gate.hidden_dim(); ++i) put(gate.hidden_bias()(i));
  for (int i = 0; i < gate.hidden_dim(); ++i) put(gate.output_weights()(i));
  put(gate.output_bias());
  out += '\n';
  return out;
}

Gate gate_from_text(std::string_view text) {
  TokenStream ts(text);
  if (ts.next_token() != "GW") throw ParseError("expected 'GW' header");
  const long long hidden = ts.next_int();
  if (hidden < 1 || hidden > 4096) throw ParseError("hidden_dim out of range");
  const int h = static_cast<int>(hidden);
  Eigen::MatrixXd w1(h, Gate::kInputDim);
  Eigen::VectorXd b1(h), w2(h);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < Gate::kInputDim; ++j) w1(i, j) = ts.next_double();
  }
  for (int i = 0; i < h; ++i) b1(i) = ts.next_double();
  for (int i = 0; i < h; ++i) w2(i) = ts.next_double();
  const double b2 = ts.next_double();
  if (!ts.done()) throw ParseError("Gate: trailing tokens in payload");
  Gate g(h);
  g.set_parameters(std::move(w1), std::move(b1), std::move(w2), b2);
  return g;
}

double score_mess(const ProbMap& pred, double thre_pix) {
  const Grid top1 = top1_map(pred);
  return (top1 >= thre_pix).count() /
         static_cast<double>(pred.pixel_count());
}

double score_sm(const ProbMap& pred) { return top2_margin_map(pred).mean(); }

double score_spp(const ProbMap& pred) { return top1_map(pred).mean(); }

Decision decide(double confidence, const GatePolicy& policy) {
  return confidence > policy.delta ? Decision::kEdge : Decision::kCloud;
}

const char* scorer_name(Scorer s) {
  switch (s) {
    case Scorer::kLearned: return "learned";
    case Scorer::kMess: return "mess";
    case Scorer::kSm: return "sm";
    case Scorer::kSpp: return "spp";
  }
  return "unknown";
}

const char* decision_name(Decision d) {
  return d == Decision::kEdge ? "EDGE" : "CLOUD";
}

}  // namespace ecsim
