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

#ifndef ECSIM_FUSION_HPP_
#define ECSIM_FUSION_HPP_

#include <vector>

#include "ecsim/tensor.hpp"

namespace ecsim {

/// Aggregate class scores of one region and the class they elect.
struct RegionVote {
  Eigen::VectorXd scores;
  int chosen_class = 0;
};

struct FusionResult {
  SemanticMask semantic;
  std::vector<RegionVote> votes;  // one per input mask, in list order
};

/// Sum of per-class probability mass over the masked pixels.
Eigen::VectorXd region_scores(const Eigen::MatrixXd& probs,
                              const MaskGrid& mask);

/// Relabels each region mask with the class that collects the largest
/// probability mass from `pred` inside it, over an initial per-pixel argmax
/// labeling. Masks apply in list order, so later masks overwrite earlier
/// ones where they overlap. An empty mask list passes the argmax through.
FusionResult assisted_inference(const ProbMap& pred,
                                const RegionMaskSet& masks);

}  // namespace ecsim

#endif  // ECSIM_FUSION_HPP_
