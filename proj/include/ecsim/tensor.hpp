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

#ifndef ECSIM_TENSOR_HPP_
#define ECSIM_TENSOR_HPP_

#include <Eigen/Dense>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "ecsim/error.hpp"

namespace ecsim {

using Grid = Eigen::ArrayXXd;   // H x W scalar field
using LabelGrid = Eigen::ArrayXXi;  // H x W class indices
using MaskGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Index of the largest coefficient; ties break to the lowest index.
int argmax_index(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Per-pixel probability tolerance shared by constructors and checks.
inline constexpr double kProbSumTolerance = 1e-6;

/// RGB raster with intensities in [0, 255]. Immutable after construction.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image(int height, int width);  // zero-filled
  Image(std::array<Grid, kChannels> channels);

  int height() const { return height_; }
  int width() const { return width_; }
  double value(int channel, int row, int col) const {
    return channels_[static_cast<std::size_t>(channel)](row, col);
  }
  const Grid& channel(int c) const {
    return channels_[static_cast<std::size_t>(c)];
  }

  bool operator==(const Image& other) const;

 private:
  int height_;
  int width_;
  std::array<Grid, kChannels> channels_;
};

/// Per-pixel class labels in {0, ..., class_count-1}.
class SemanticMask {
 public:
  SemanticMask(LabelGrid labels, int class_count);

  int height() const { return static_cast<int>(labels_.rows()); }
  int width() const { return static_cast<int>(labels_.cols()); }
  int class_count() const { return class_count_; }
  int label(int row, int col) const { return labels_(row, col); }
  const LabelGrid& labels() const { return labels_; }

  bool operator==(const SemanticMask& other) const;

 private:
  LabelGrid labels_;
  int class_count_;
};

/// Per-class per-pixel probabilities. Stored as a class_count x (H*W) matrix
/// whose column r*W + c holds the distribution for pixel (r, c); every column
/// sums to 1. Construction renormalizes sums within kProbSumTolerance of 1
/// and rejects anything worse.
class ProbMap {
 public:
  ProbMap(int class_count, int height, int width, Eigen::MatrixXd probs);

  int class_count() const { return class_count_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int pixel_count() const { return height_ * width_; }
  int pixel_index(int row, int col) const { return row * width_ + col; }

  double prob(int cls, int row, int col) const {
    return probs_(cls, pixel_index(row, col));
  }
  const Eigen::MatrixXd& matrix() const { return probs_; }

  bool operator==(const ProbMap& other) const;

 private:
  int class_count_;
  int height_;
  int width_;
  Eigen::MatrixXd probs_;
};

/// Ordered list of nonempty binary region masks over one grid. Order is the
/// application order downstream; an empty list is valid.
class RegionMaskSet {
 public:
  RegionMaskSet(int height, int width);

  void add(MaskGrid mask);  // rejects dimension mismatch and empty masks

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return masks_.size(); }
  bool empty() const { return masks_.empty(); }
  const MaskGrid& mask(std::size_t i) const { return masks_[i]; }
  const std::vector<MaskGrid>& masks() const { return masks_; }

  bool operator==(const RegionMaskSet& other) const;

 private:
  int height_;
  int width_;
  std::vector<MaskGrid> masks_;
};

/// Label of the most probable class at every pixel.
SemanticMask argmax_labels(const ProbMap& p);

/// Largest class probability at every pixel.
Grid top1_map(const ProbMap& p);

/// Difference between the largest and second-largest class probability at
/// every pixel. Requires at least two classes.
Grid top2_margin_map(const ProbMap& p);

// Text tensor format. One header line (`PM`/`SM`/`RM`/`IM` plus dimensions)
// followed by whitespace-separated values in storage order: class-major then
// row-major for ProbMap, row-major labels for SemanticMask, mask-by-mask 0/1
// grids for RegionMaskSet, channel-major for Image.
std::string to_text(const ProbMap& p);
std::string to_text(const SemanticMask& m);
std::string to_text(const RegionMaskSet& r);
std::string to_text(const Image& img);

ProbMap prob_map_from_text(std::string_view text);
SemanticMask semantic_mask_from_text(std::string_view text);
RegionMaskSet region_masks_from_text(std::string_view text);
Image image_from_text(std::string_view text);

}  // namespace ecsim

#endif  // ECSIM_TENSOR_HPP_
