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

#include "ecsim/models.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ecsim/rng.hpp"
#include "ecsim/textio.hpp"

namespace ecsim {

namespace {

// Column-wise stable softmax, in place.
void softmax_columns(Eigen::MatrixXd& logits) {
  for (Eigen::Index p = 0; p < logits.cols(); ++p) {
    auto col = logits.col(p);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
}

std::uint64_t content_hash(const SemanticMask& truth, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  const auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  mix(static_cast<std::uint64_t>(truth.height()));
  mix(static_cast<std::uint64_t>(truth.width()));
  for (int r = 0; r < truth.height(); ++r) {
    for (int c = 0; c < truth.width(); ++c) {
      mix(static_cast<std::uint64_t>(truth.label(r, c)) + 0x9e37ULL);
    }
  }
  return h;
}

const SemanticMask& require_truth(const SemanticMask* truth, const Image& img,
                                  const char* who) {
  if (truth == nullptr) {
    throw Error(std::string(who) + ": ground truth required");
  }
  if (truth->height() != img.height() || truth->width() != img.width()) {
    throw Error(std::string(who) + ": truth and image sizes disagree");
  }
  return *truth;
}

}  // namespace

TrainableEdgeModel::TrainableEdgeModel(int class_count)
    : class_count_(class_count),
      weights_(Eigen::MatrixXd::Zero(class_count, kFeatureDim)) {
  if (class_count < 1) {
    throw Error("TrainableEdgeModel: class_count must be >= 1");
  }
}

Eigen::MatrixXd TrainableEdgeModel::pixel_features(const Image& img) {
  const int h = img.height(), w = img.width();
  Eigen::MatrixXd feats(kFeatureDim, static_cast<Eigen::Index>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Eigen::Index px = static_cast<Eigen::Index>(r) * w + c;
      feats(0, px) = img.value(0, r, c) / 255.0;
      feats(1, px) = img.value(1, r, c) / 255.0;
      feats(2, px) = img.value(2, r, c) / 255.0;
      feats(3, px) = h > 1 ? static_cast<double>(r) / (h - 1) : 0.0;
      feats(4, px) = w > 1 ? static_cast<double>(c) / (w - 1) : 0.0;
      feats(5, px) = 1.0;
    }
  }
  return feats;
}

ProbMap TrainableEdgeModel::infer(const Image& img,
                                  const SemanticMask*) const {
  Eigen::MatrixXd logits = weights_ * pixel_features(img);
  softmax_columns(logits);
  return ProbMap(class_count_, img.height(), img.width(), std::move(logits));
}

void TrainableEdgeModel::set_weights(Eigen::MatrixXd w) {
  if (w.rows() != class_count_ || w.cols() != kFeatureDim) {
    throw Error("TrainableEdgeModel: weight shape mismatch");
  }
  weights_ = std::move(w);
}

std::string to_text(const TrainableEdgeModel& m) {
  std::string out = "EW " + std::to_string(m.class_count());
  long idx = 0;
  for (int cls = 0; cls < m.class_count(); ++cls) {
    for (int j = 0; j < TrainableEdgeModel::kFeatureDim; ++j) {
      out += (idx++ % 6 == 0) ? '\n' : ' ';
      out += format_double(m.weights()(cls, j));
    }
  }
  out += '\n';
  return out;
}

TrainableEdgeModel edge_model_from_text(std::string_view text) {
  TokenStream ts(text);
  if (ts.next_token() != "EW") throw ParseError("expected 'EW' header");
  const long long m = ts.next_int();
  if (m < 1 || m > 4096) throw ParseError("class count out of range");
  TrainableEdgeModel model(static_cast<int>(m));
  Eigen::MatrixXd w(m, TrainableEdgeModel::kFeatureDim);
  for (Eigen::Index cls = 0; cls < w.rows(); ++cls) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(cls, j) = ts.next_double();
  }
  if (!ts.done()) throw ParseError("edge weights: trailing tokens");
  model.set_weights(std::move(w));
  return model;
}

OracleEdgeModel::OracleEdgeModel(double correct_rate, double temperature,
                                 std::uint64_t seed)
    : correct_rate_(correct_rate), temperature_(temperature), seed_(seed) {
  if (correct_rate < 0.0 || correct_rate > 1.0) {
    throw Error("OracleEdgeModel: correct_rate outside [0, 1]");
  }
  if (temperature <= 0.0) {
    throw Error("OracleEdgeModel: temperature must be positive");
  }
}

ProbMap OracleEdgeModel::infer(const Image& img,
                               const SemanticMask* truth_ptr) const {
  const SemanticMask& truth = require_truth(truth_ptr, img, "OracleEdgeModel");
  const int m = truth.class_count();
  const int h = truth.height(), w = truth.width();
  Rng rng(content_hash(truth, mix_seed(seed_, 0x0e)));

  // Peaked distribution: chosen class 1/denom, the rest off/denom.
  const double off = std::exp(-1.0 / temperature_);
  const double denom = 1.0 + (m - 1) * off;

  Eigen::MatrixXd probs(m, static_cast<Eigen::Index>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int true_cls = truth.label(r, c);
      int chosen = true_cls;
      if (rng.uniform01() >= correct_rate_ && m > 1) {
        const int other = rng.uniform_int(0, m - 2);
        chosen = other >= true_cls ? other + 1 : other;
      }
      const Eigen::Index px = static_cast<Eigen::Index>(r) * w + c;
      probs.col(px).setConstant(off / denom);
      probs(chosen, px) = 1.0 / denom;
    }
  }
  return ProbMap(m, h, w, std::move(probs));
}

std::vector<MaskGrid> connected_components(const LabelGrid& labels) {
  const int h = static_cast<int>(labels.rows());
  const int w = static_cast<int>(labels.cols());
  MaskGrid visited = MaskGrid::Constant(h, w, false);
  std::vector<MaskGrid> components;
  std::vector<std::pair<int, int>> stack;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (visited(r0, c0)) continue;
      const int label = labels(r0, c0);
      MaskGrid mask = MaskGrid::Constant(h, w, false);
      stack.assign(1, {r0, c0});
      visited(r0, c0) = true;
      while (!stack.empty()) {
        const auto [r, c] = stack.back();
        stack.pop_back();
        mask(r, c) = true;
        constexpr int dr[] = {-1, 1, 0, 0};
        constexpr int dc[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int nr = r + dr[k], nc = c + dc[k];
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          if (visited(nr, nc) || labels(nr, nc) != label) continue;
          visited(nr, nc) = true;
          stack.push_back({nr, nc});
        }
      }
      components.push_back(std::move(mask));
    }
  }
  return components;
}

OracleCloudModel::OracleCloudModel(double boundary_rate, std::uint64_t seed)
    : boundary_rate_(boundary_rate), seed_(seed) {
  if (boundary_rate < 0.0 || boundary_rate > 1.0) {
    throw Error("OracleCloudModel: boundary_rate outside [0, 1]");
  }
}

RegionMaskSet OracleCloudModel::infer(const Image& img,
                                      const SemanticMask* truth_ptr) const {
  const SemanticMask& truth =
      require_truth(truth_ptr, img, "OracleCloudModel");
  const int h = truth.height(), w = truth.width();
  std::vector<MaskGrid> masks = connected_components(truth.labels());

  if (boundary_rate_ > 0.0) {
    Rng rng(content_hash(truth, mix_seed(seed_, 0x0c)));
    constexpr int dr[] = {-1, 1, 0, 0};
    constexpr int dc[] = {0, 0, -1, 1};
    for (MaskGrid& mask : masks) {
      MaskGrid perturbed = mask;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          if (!mask(r, c)) continue;
          bool boundary = false;
          for (int k = 0; k < 4 && !boundary; ++k) {
            const int nr = r + dr[k], nc = c + dc[k];
            boundary = nr >= 0 && nr < h && nc >= 0 && nc < w && !mask(nr, nc);
          }
          if (!boundary || rng.uniform01() >= boundary_rate_) continue;
          if (rng.uniform01() < 0.5) {
            perturbed(r, c) = false;  // erode
          } else {
            for (int k = 0; k < 4; ++k) {  // dilate
              const int nr = r + dr[k], nc = c + dc[k];
              if (nr >= 0 && nr < h && nc >= 0 && nc < w && !mask(nr, nc)) {
                perturbed(nr, nc) = true;
              }
            }
          }
        }
      }
      mask = std::move(perturbed);
    }
    std::erase_if(masks, [](const MaskGrid& m) { return !m.any(); });
  }

  // Area descending; equal areas keep discovery (scan) order.
  std::stable_sort(masks.begin(), masks.end(),
                   [](const MaskGrid& a, const MaskGrid& b) {
                     return a.count() > b.count();
                   });

  RegionMaskSet out(h, w);
  for (auto& m : masks) out.add(std::move(m));
  return out;
}

}  // namespace ecsim
