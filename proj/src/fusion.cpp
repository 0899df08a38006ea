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

#include "ecsim/fusion.hpp"

namespace ecsim {

Eigen::VectorXd region_scores(const Eigen::MatrixXd& probs,
                              const MaskGrid& mask) {
  const int width = static_cast<int>(mask.cols());
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(probs.rows());
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < width; ++c) {
      if (mask(r, c)) scores += probs.col(r * width + c);
    }
  }
  return scores;
}

FusionResult assisted_inference(const ProbMap& pred,
                                const RegionMaskSet& masks) {
  if (pred.height() != masks.height() || pred.width() != masks.width()) {
    throw Error("assisted_inference: prediction and masks disagree on size");
  }
  LabelGrid labels = argmax_labels(pred).labels();
  std::vector<RegionVote> votes;
  votes.reserve(masks.size());
  for (const MaskGrid& mask : masks.masks()) {
    RegionVote vote;
    vote.scores = region_scores(pred.matrix(), mask);
    vote.chosen_class = argmax_index(vote.scores);
    labels = mask.select(vote.chosen_class, labels);
    votes.push_back(std::move(vote));
  }
  return FusionResult{SemanticMask(std::move(labels), pred.class_count()),
                      std::move(votes)};
}

}  // namespace ecsim
