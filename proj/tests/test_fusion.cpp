#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "ecsim/fusion.hpp"
#include "ecsim/models.hpp"
#include "ecsim/rng.hpp"
#include "oracles.hpp"

using namespace ecsim;

namespace {

ProbMap two_class_map(std::initializer_list<double> class0, int h, int w) {
  Eigen::MatrixXd probs(2, static_cast<Eigen::Index>(h) * w);
  Eigen::Index px = 0;
  for (const double p0 : class0) {
    probs(0, px) = p0;
    probs(1, px) = 1.0 - p0;
    ++px;
  }
  return ProbMap(2, h, w, std::move(probs));
}

MaskGrid row_mask(int h, int w, int row) {
  MaskGrid m = MaskGrid::Constant(h, w, false);
  m.row(row).setConstant(true);
  return m;
}

}  // namespace

TEST_CASE("empty mask list passes the argmax through") {
  const ProbMap pred = two_class_map({0.9, 0.2, 0.4, 0.1}, 2, 2);
  const FusionResult fused = assisted_inference(pred, RegionMaskSet(2, 2));
  CHECK(fused.semantic == argmax_labels(pred));
  CHECK(fused.votes.empty());
}

TEST_CASE("one mask relabels its region with the aggregate vote") {
  const ProbMap pred = two_class_map({0.9, 0.2, 0.4, 0.1}, 2, 2);
  RegionMaskSet masks(2, 2);
  masks.add(row_mask(2, 2, 0));

  const FusionResult fused = assisted_inference(pred, masks);
  CHECK(fused.votes.size() == 1);
  CHECK(fused.votes[0].scores(0) == doctest::Approx(1.1));
  CHECK(fused.votes[0].scores(1) == doctest::Approx(0.9));
  CHECK(fused.votes[0].chosen_class == 0);
  // Row 0 takes the vote, row 1 keeps its per-pixel argmax.
  CHECK(fused.semantic.label(0, 0) == 0);
  CHECK(fused.semantic.label(0, 1) == 0);
  CHECK(fused.semantic.label(1, 0) == 1);
  CHECK(fused.semantic.label(1, 1) == 1);
}

TEST_CASE("one-hot prediction with matching masks is a fixed point") {
  LabelGrid truth(2, 3);
  truth << 0, 0, 1, 2, 2, 1;
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(3, 6);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) probs(truth(r, c), r * 3 + c) = 1.0;
  }
  const ProbMap pred(3, 2, 3, std::move(probs));

  RegionMaskSet masks(2, 3);
  for (auto& component : connected_components(truth)) {
    masks.add(std::move(component));
  }
  const FusionResult fused = assisted_inference(pred, masks);
  CHECK(fused.semantic == argmax_labels(pred));
  CHECK((fused.semantic.labels() == truth).all());
}

TEST_CASE("matches the straight-line reference on random instances") {
  Rng rng(2024);
  for (int i = 0; i < 300; ++i) {
    const int m = rng.uniform_int(2, 5);
    const int h = rng.uniform_int(1, 8);
    const int w = rng.uniform_int(1, 8);
    const ProbMap pred = testing::random_prob_map(m, h, w, rng);
    const RegionMaskSet masks =
        testing::random_masks(h, w, rng.uniform_int(0, 6), rng);
    const FusionResult fused = assisted_inference(pred, masks);
    REQUIRE((fused.semantic.labels() ==
             testing::straight_line_fusion(pred, masks))
                .all());
  }
}

TEST_CASE("pixels outside every mask keep the argmax label") {
  Rng rng(5);
  const ProbMap pred = testing::random_prob_map(4, 6, 6, rng);
  const RegionMaskSet masks = testing::random_masks(6, 6, 3, rng);
  const FusionResult fused = assisted_inference(pred, masks);
  const SemanticMask plain = argmax_labels(pred);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      bool covered = false;
      for (const auto& mask : masks.masks()) covered = covered || mask(r, c);
      if (!covered) CHECK(fused.semantic.label(r, c) == plain.label(r, c));
    }
  }
}

TEST_CASE("disjoint masks commute") {
  Rng rng(6);
  const ProbMap pred = testing::random_prob_map(3, 4, 4, rng);
  RegionMaskSet forward(4, 4);
  RegionMaskSet backward(4, 4);
  for (int row : {0, 1, 2, 3}) forward.add(row_mask(4, 4, row));
  for (int row : {3, 2, 1, 0}) backward.add(row_mask(4, 4, row));
  CHECK(assisted_inference(pred, forward).semantic ==
        assisted_inference(pred, backward).semantic);
}

TEST_CASE("overlapping masks: the later one wins") {
  const ProbMap pred = two_class_map({0.9, 0.9, 0.1, 0.1}, 2, 2);
  RegionMaskSet masks(2, 2);
  masks.add(MaskGrid::Constant(2, 2, true));  // whole grid votes class 0
  masks.add(row_mask(2, 2, 1));               // bottom row votes class 1
  const FusionResult fused = assisted_inference(pred, masks);
  CHECK(fused.votes[0].chosen_class == 0);
  CHECK(fused.votes[1].chosen_class == 1);
  CHECK(fused.semantic.label(0, 0) == 0);
  CHECK(fused.semantic.label(1, 0) == 1);
  CHECK(fused.semantic.label(1, 1) == 1);
}

TEST_CASE("region votes are scale invariant") {
  Rng rng(7);
  const ProbMap pred = testing::random_prob_map(4, 5, 5, rng);
  const RegionMaskSet masks = testing::random_masks(5, 5, 2, rng);
  for (const auto& mask : masks.masks()) {
    const Eigen::VectorXd base = region_scores(pred.matrix(), mask);
    const Eigen::VectorXd scaled = region_scores(3.7 * pred.matrix(), mask);
    CHECK(argmax_index(base) == argmax_index(scaled));
  }
}

TEST_CASE("truth components plus correct votes reconstruct the truth") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    LabelGrid truth(5, 5);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) truth(r, c) = rng.uniform_int(0, 2);
    }
    // Noisy prediction that still leans toward the truth at every pixel, so
    // every region vote is correct.
    Eigen::MatrixXd probs(3, 25);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) {
        Eigen::Vector3d p(rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3),
                          rng.uniform(0.05, 0.3));
        p(truth(r, c)) += 0.6;
        probs.col(r * 5 + c) = p / p.sum();
      }
    }
    const ProbMap pred(3, 5, 5, std::move(probs));
    RegionMaskSet masks(5, 5);
    for (auto& component : connected_components(truth)) {
      masks.add(std::move(component));
    }
    const FusionResult fused = assisted_inference(pred, masks);
    REQUIRE((fused.semantic.labels() == truth).all());
  }
}

TEST_CASE("dimension mismatch is rejected") {
  const ProbMap pred = two_class_map({0.9, 0.2, 0.4, 0.1}, 2, 2);
  CHECK_THROWS_AS(assisted_inference(pred, RegionMaskSet(3, 2)), Error);
}
