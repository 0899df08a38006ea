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

#ifndef ECSIM_MODELS_HPP_
#define ECSIM_MODELS_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ecsim/tensor.hpp"

namespace ecsim {

/// Small segmentation model living on the edge node. Oracle implementations
/// peek at the ground truth; real/trainable ones ignore it.
class EdgeModel {
 public:
  virtual ~EdgeModel() = default;
  virtual ProbMap infer(const Image& img,
                        const SemanticMask* truth = nullptr) const = 0;
  virtual bool trainable() const { return false; }
};

/// Region-mask model living on the cloud node (masks carry no labels).
class CloudMaskModel {
 public:
  virtual ~CloudMaskModel() = default;
  virtual RegionMaskSet infer(const Image& img,
                              const SemanticMask* truth = nullptr) const = 0;
};

/// Per-pixel multinomial logistic classifier over a 6-value pixel feature:
/// the three channel intensities scaled to [0,1], the normalized row and
/// column, and a constant 1 for the bias.
class TrainableEdgeModel final : public EdgeModel {
 public:
  static constexpr int kFeatureDim = 6;

  explicit TrainableEdgeModel(int class_count);  // zero weights

  /// Feature matrix, kFeatureDim x (H*W), column per pixel in row-major
  /// pixel order.
  static Eigen::MatrixXd pixel_features(const Image& img);

  ProbMap infer(const Image& img,
                const SemanticMask* truth = nullptr) const override;
  bool trainable() const override { return true; }

  int class_count() const { return class_count_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  void set_weights(Eigen::MatrixXd w);

  bool operator==(const TrainableEdgeModel& other) const {
    return class_count_ == other.class_count_ && weights_ == other.weights_;
  }

 private:
  int class_count_;
  Eigen::MatrixXd weights_;  // class_count x kFeatureDim
};

/// Serializes as `EW <class_count>` followed by the weight rows.
std::string to_text(const TrainableEdgeModel& m);
TrainableEdgeModel edge_model_from_text(std::string_view text);

/// Controllable-difficulty edge model: at each pixel the peaked class is the
/// true one with probability `correct_rate`, otherwise a seeded wrong class;
/// the peak height is set by `temperature`. Output is a pure function of
/// (image, truth, seed).
class OracleEdgeModel final : public EdgeModel {
 public:
  OracleEdgeModel(double correct_rate, double temperature, std::uint64_t seed);

  ProbMap infer(const Image& img,
                const SemanticMask* truth = nullptr) const override;

  double correct_rate() const { return correct_rate_; }
  double temperature() const { return temperature_; }

 private:
  double correct_rate_;
  double temperature_;
  std::uint64_t seed_;
};

/// Contour oracle standing in for an unlabeled large segmentation model:
/// emits the 4-connected components of the ground-truth labels, optionally
/// perturbed at region boundaries with per-pixel probability `boundary_rate`,
/// sorted by area descending. Pure function of (image, truth, seed).
class OracleCloudModel final : public CloudMaskModel {
 public:
  OracleCloudModel(double boundary_rate, std::uint64_t seed);

  RegionMaskSet infer(const Image& img,
                      const SemanticMask* truth = nullptr) const override;

  double boundary_rate() const { return boundary_rate_; }

 private:
  double boundary_rate_;
  std::uint64_t seed_;
};

/// 4-connected components of equal-label regions, in row-major discovery
/// order.
std::vector<MaskGrid> connected_components(const LabelGrid& labels);

}  // namespace ecsim

#endif  // ECSIM_MODELS_HPP_
