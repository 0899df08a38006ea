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

#ifndef ECSIM_GATING_HPP_
#define ECSIM_GATING_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "ecsim/tensor.hpp"

namespace ecsim {

/// Fixed 6-value summary of a prediction, the gate's input. All values lie
/// in [0, 1], so the gate is independent of grid size and class count.
struct GateFeatures {
  double mean_top1 = 0.0;
  double mean_margin = 0.0;
  double mean_norm_entropy = 0.0;  // entropy / ln(class_count)
  double frac_top1_50 = 0.0;
  double frac_top1_70 = 0.0;
  double frac_top1_90 = 0.0;

  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << mean_top1, mean_margin, mean_norm_entropy, frac_top1_50, frac_top1_70,
        frac_top1_90;
    return v;
  }
};

GateFeatures extract_features(const ProbMap& pred);

/// One-hidden-layer scorer: 6 -> hidden_dim (tanh) -> 1 (sigmoid). Output is
/// strictly inside (0, 1).
class Gate {
 public:
  static constexpr int kInputDim = 6;

  explicit Gate(int hidden_dim = 16);  // zero weights

  /// Weights drawn uniformly from [-0.1, 0.1].
  static Gate random_init(int hidden_dim, std::uint64_t seed);

  double score(const GateFeatures& features) const;

  int hidden_dim() const { return hidden_dim_; }
  int parameter_count() const {
    return hidden_dim_ * kInputDim + hidden_dim_ + hidden_dim_ + 1;
  }

  const Eigen::MatrixXd& hidden_weights() const { return w1_; }
  const Eigen::VectorXd& hidden_bias() const { return b1_; }
  const Eigen::VectorXd& output_weights() const { return w2_; }
  double output_bias() const { return b2_; }
  void set_parameters(Eigen::MatrixXd w1, Eigen::VectorXd b1,
                      Eigen::VectorXd w2, double b2);

  bool operator==(const Gate& other) const;

 private:
  int hidden_dim_;
  Eigen::MatrixXd w1_;  // hidden_dim x 6
  Eigen::VectorXd b1_;  // hidden_dim
  Eigen::VectorXd w2_;  // hidden_dim
  double b2_;
};

/// Serializes as `GW <hidden_dim>` followed by the hidden weights (row by
/// row), hidden bias, output weights, output bias.
std::string to_text(const Gate& gate);
Gate gate_from_text(std::string_view text);

enum class Scorer { kLearned, kMess, kSm, kSpp };
enum class Decision { kEdge, kCloud };

struct GatePolicy {
  Scorer scorer = Scorer::kLearned;
  double delta = 0.75;
  double mess_pixel_threshold = 0.5;
};

/// Fraction of pixels whose top-1 probability reaches `thre_pix`.
double score_mess(const ProbMap& pred, double thre_pix);

/// Mean top1 - top2 margin over pixels. Requires at least two classes.
double score_sm(const ProbMap& pred);

/// Mean top-1 probability over pixels.
double score_spp(const ProbMap& pred);

/// Keep on the edge iff confidence exceeds the threshold; ties upload.
Decision decide(double confidence, const GatePolicy& policy);

const char* scorer_name(Scorer s);
const char* decision_name(Decision d);

}  // namespace ecsim

#endif  // ECSIM_GATING_HPP_
