#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ecsim/adapt.hpp"
#include "ecsim/rng.hpp"
#include "oracles.hpp"

using namespace ecsim;

namespace {

Image random_image(int h, int w, Rng& rng) {
  std::array<Grid, 3> ch;
  for (auto& c : ch) {
    c.resize(h, w);
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) c(r, col) = rng.uniform_int(0, 255);
    }
  }
  return Image(std::move(ch));
}

SemanticMask random_mask(int h, int w, int m, Rng& rng) {
  LabelGrid g(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) g(r, c) = rng.uniform_int(0, m - 1);
  }
  return SemanticMask(std::move(g), m);
}

TrainableEdgeModel random_model(int m, Rng& rng, double scale = 1.0) {
  TrainableEdgeModel model(m);
  Eigen::MatrixXd w(m, TrainableEdgeModel::kFeatureDim);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-scale, scale);
  model.set_weights(w);
  return model;
}

Gate random_gate(int hidden, Rng& rng) {
  return Gate::random_init(hidden, rng.next_u64());
}

GateFeatures random_features(Rng& rng) {
  GateFeatures f;
  f.mean_top1 = rng.uniform01();
  f.mean_margin = rng.uniform01();
  f.mean_norm_entropy = rng.uniform01();
  f.frac_top1_50 = rng.uniform01();
  f.frac_top1_70 = rng.uniform01();
  f.frac_top1_90 = rng.uniform01();
  return f;
}

}  // namespace

TEST_CASE("pseudo-label loss values") {
  SUBCASE("agreement costs nothing") {
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(3, 4);
    probs.row(1).setOnes();
    const ProbMap pred(3, 2, 2, std::move(probs));
    const SemanticMask pseudo(LabelGrid::Constant(2, 2, 1), 3);
    CHECK(loss_f(pred, pseudo) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("uniform prediction costs ln M") {
    const ProbMap pred(4, 2, 2, Eigen::MatrixXd::Constant(4, 4, 0.25));
    const SemanticMask pseudo(LabelGrid::Zero(2, 2), 4);
    CHECK(loss_f(pred, pseudo) == doctest::Approx(std::log(4.0)));
  }
  SUBCASE("two-pixel average of logs") {
    Eigen::MatrixXd probs(4, 2);
    probs.col(0) << 0.5, 0.5 / 3, 0.5 / 3, 0.5 / 3;
    probs.col(1) << 0.25, 0.25, 0.25, 0.25;
    const ProbMap pred(4, 1, 2, std::move(probs));
    const SemanticMask pseudo(LabelGrid::Zero(1, 2), 4);
    CHECK(loss_f(pred, pseudo) ==
          doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0));
  }
  SUBCASE("shape mismatch is rejected") {
    const ProbMap pred(2, 1, 2, Eigen::MatrixXd::Constant(2, 2, 0.5));
    CHECK_THROWS_AS(loss_f(pred, SemanticMask(LabelGrid::Zero(2, 2), 2)),
                    Error);
  }
  SUBCASE("never negative") {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
      const auto pred = testing::random_prob_map(3, 3, 3, rng);
      CHECK(loss_f(pred, random_mask(3, 3, 3, rng)) >= 0.0);
    }
  }
}

TEST_CASE("edge update") {
  Rng rng(2);

  SUBCASE("zero steps leave weights untouched via eta -> 0 limit") {
    TrainableEdgeModel model = random_model(3, rng);
    const Eigen::MatrixXd before = model.weights();
    TrainConfig cfg;
    cfg.learning_rate = 1e-30;  // vanishing step
    cfg.epochs = 3;
    std::vector<ReplayBuffer::Entry> batch;
    batch.emplace_back(random_image(3, 3, rng), random_mask(3, 3, 3, rng));
    update_f(model, batch, cfg);
    CHECK((model.weights() - before).cwiseAbs().maxCoeff() < 1e-20);
  }

  SUBCASE("analytic gradient matches central finite differences") {
    for (int instance = 0; instance < 25; ++instance) {
      const int m = rng.uniform_int(2, 4);
      TrainableEdgeModel model = random_model(m, rng);
      std::vector<ReplayBuffer::Entry> batch;
      const int n = rng.uniform_int(1, 3);
      for (int b = 0; b < n; ++b) {
        batch.emplace_back(random_image(4, 4, rng), random_mask(4, 4, m, rng));
      }
      const EdgeLossGradient analytic = edge_loss_gradient(model, batch);
      for (int probe = 0; probe < 4; ++probe) {
        const int row = rng.uniform_int(0, m - 1);
        const int col = rng.uniform_int(0, 5);
        const double fd = testing::central_difference(
            [&](double v) {
              TrainableEdgeModel probe_model = model;
              Eigen::MatrixXd w = model.weights();
              w(row, col) = v;
              probe_model.set_weights(w);
              return edge_loss_gradient(probe_model, batch).loss;
            },
            model.weights()(row, col));
        REQUIRE(testing::relative_error(analytic.gradient(row, col), fd) <
                1e-4);
      }
    }
  }

  SUBCASE("small steps never increase the convex batch loss") {
    TrainConfig cfg;
    cfg.learning_rate = 1e-5;
    cfg.epochs = 1;
    for (int i = 0; i < 10; ++i) {
      TrainableEdgeModel model = random_model(3, rng);
      std::vector<ReplayBuffer::Entry> batch;
      batch.emplace_back(random_image(4, 4, rng), random_mask(4, 4, 3, rng));
      const UpdateStats stats = update_f(model, batch, cfg);
      CHECK(stats.mean_loss_after <= stats.mean_loss_before + 1e-12);
    }
  }

  SUBCASE("separable task converges") {
    // Two classes keyed to channel 0 low/high; flat images are separable in
    // the channel features.
    std::vector<ReplayBuffer::Entry> batch;
    for (int i = 0; i < 6; ++i) {
      const bool bright = i % 2 == 0;
      std::array<Grid, 3> ch = {
          Grid::Constant(4, 4, bright ? 230.0 : 20.0),
          Grid::Constant(4, 4, 128.0), Grid::Constant(4, 4, 128.0)};
      batch.emplace_back(Image(std::move(ch)),
                         SemanticMask(LabelGrid::Constant(4, 4, bright), 2));
    }
    TrainableEdgeModel model(2);
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 200;
    const UpdateStats stats = update_f(model, batch, cfg);
    CHECK(stats.mean_loss_after < 0.5 * stats.mean_loss_before);
  }

  SUBCASE("empty batch is rejected") {
    TrainableEdgeModel model(2);
    CHECK_THROWS_AS(update_f(model, {}, TrainConfig{}), Error);
  }
}

TEST_CASE("gate loss values") {
  CHECK(loss_h(1.0 - 1e-6, 0.8, 0.1) == doctest::Approx(0.8).epsilon(1e-5));
  CHECK(loss_h(0.5, 0.8, 0.1) ==
        doctest::Approx(0.4 + 0.1 * std::log(2.0)));
  // Degenerate no-regularizer case: loss collapses to confidence * loss.
  CHECK(loss_h(0.25, 0.8, 0.0) == doctest::Approx(0.2));

  SUBCASE("strictly convex with minimizer min(1, beta/loss)") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      const double beta = rng.uniform(0.05, 0.5);
      const double l = rng.uniform(0.01, 2.0);
      const double found = testing::golden_section_min(
          [&](double c) { return loss_h(c, l, beta); }, 1e-6, 1.0 - 1e-6);
      const double expected = std::min(1.0 - 1e-6, beta / l);
      CHECK(found == doctest::Approx(expected).epsilon(1e-3));
    }
  }
}

TEST_CASE("gate update") {
  Rng rng(4);

  SUBCASE("vanishing learning rate freezes the gate") {
    Gate gate = random_gate(8, rng);
    const Gate before = gate;
    TrainConfig cfg;
    cfg.learning_rate = 1e-30;
    cfg.epochs = 2;
    std::vector<GateSample> batch = {{random_features(rng), 0.4}};
    update_h(gate, batch, cfg);
    CHECK((gate.hidden_weights() - before.hidden_weights())
              .cwiseAbs()
              .maxCoeff() < 1e-20);
  }

  SUBCASE("analytic gradient matches central finite differences") {
    for (int instance = 0; instance < 25; ++instance) {
      Gate gate = random_gate(rng.uniform_int(2, 8), rng);
      std::vector<GateSample> batch;
      const int n = rng.uniform_int(1, 4);
      for (int b = 0; b < n; ++b) {
        batch.push_back({random_features(rng), rng.uniform(0.0, 2.0)});
      }
      const double beta = 0.1;
      const GateLossGradient analytic = gate_loss_gradient(gate, batch, beta);

      const auto loss_with = [&](const Gate& g) {
        return gate_loss_gradient(g, batch, beta).loss;
      };
      const int i = rng.uniform_int(0, gate.hidden_dim() - 1);
      const int j = rng.uniform_int(0, Gate::kInputDim - 1);

      const double fd_w1 = testing::central_difference(
          [&](double v) {
            Gate g = gate;
            Eigen::MatrixXd w1 = g.hidden_weights();
            w1(i, j) = v;
            g.set_parameters(w1, g.hidden_bias(), g.output_weights(),
                             g.output_bias());
            return loss_with(g);
          },
          gate.hidden_weights()(i, j));
      REQUIRE(testing::relative_error(analytic.d_w1(i, j), fd_w1) < 1e-4);

      const double fd_b2 = testing::central_difference(
          [&](double v) {
            Gate g = gate;
            g.set_parameters(g.hidden_weights(), g.hidden_bias(),
                             g.output_weights(), v);
            return loss_with(g);
          },
          gate.output_bias());
      REQUIRE(testing::relative_error(analytic.d_b2, fd_b2) < 1e-4);
    }
  }

  SUBCASE("zero-loss batches push confidences up") {
    Gate gate = random_gate(16, rng);
    std::vector<GateSample> batch;
    for (int i = 0; i < 5; ++i) batch.push_back({random_features(rng), 0.0});
    std::vector<double> before;
    for (const auto& s : batch) before.push_back(gate.score(s.features));
    TrainConfig cfg;
    cfg.epochs = 1;
    update_h(gate, batch, cfg);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(gate.score(batch[i].features) > before[i]);
    }
  }

  SUBCASE("empty batch is rejected") {
    Gate gate(4);
    CHECK_THROWS_AS(update_h(gate, {}, TrainConfig{}), Error);
  }
}

TEST_CASE("replay buffer bookkeeping") {
  Rng rng(5);
  ReplayBuffer buffer(4);
  CHECK(buffer.empty());
  buffer.append(random_image(2, 2, rng), random_mask(2, 2, 2, rng));
  buffer.append(random_image(2, 2, rng), random_mask(2, 2, 2, rng));
  CHECK(buffer.size() == 2);
  CHECK_THROWS_AS(buffer.append(random_image(3, 3, rng),
                                random_mask(2, 2, 2, rng)),
                  Error);  // image/pseudo mismatch
  CHECK_THROWS_AS(buffer.append(random_image(3, 3, rng),
                                random_mask(3, 3, 2, rng)),
                  Error);  // disagrees with existing entries
  buffer.clear();
  CHECK(buffer.empty());
}

TEST_CASE("objective value") {
  Rng rng(6);
  TrainConfig cfg;

  SUBCASE("confident gate on zero-loss samples scores nearly nothing") {
    const SemanticMask truth(LabelGrid::Zero(3, 3), 2);
    std::vector<ScoredSample> samples;
    samples.push_back({random_image(3, 3, rng), truth});
    const OracleEdgeModel edge(1.0, 0.005, 3);
    const OracleCloudModel cloud(0.0, 4);
    Gate confident(4);  // zero weights except a large output bias
    confident.set_parameters(Eigen::MatrixXd::Zero(4, 6),
                             Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4),
                             20.0);
    CHECK(objective_value(samples, edge, cloud, confident, cfg) ==
          doctest::Approx(0.0).epsilon(1e-3));
    CHECK(objective_value(samples, edge, cloud, confident, cfg) < 1e-3);
  }

  SUBCASE("single sample equals the gate loss") {
    // A constant-truth sample with an ideal edge oracle: loss is ~0, so the
    // objective reduces to the regularizer at the gate's confidence.
    const SemanticMask truth(LabelGrid::Zero(3, 3), 2);
    std::vector<ScoredSample> samples;
    samples.push_back({random_image(3, 3, rng), truth});
    const OracleEdgeModel edge(1.0, 0.01, 3);
    const OracleCloudModel cloud(0.0, 4);
    const Gate gate(8);  // constant 0.5
    const double obj = objective_value(samples, edge, cloud, gate, cfg);
    const ProbMap pred = edge.infer(samples[0].image, &truth);
    const double expected = loss_h(0.5, loss_f(pred, truth), cfg.beta);
    CHECK(obj == doctest::Approx(expected).epsilon(1e-9));
  }

  SUBCASE("sample order does not matter") {
    std::vector<ScoredSample> samples;
    for (int i = 0; i < 4; ++i) {
      samples.push_back({random_image(3, 3, rng), random_mask(3, 3, 2, rng)});
    }
    const OracleEdgeModel edge(0.8, 0.3, 5);
    const OracleCloudModel cloud(0.0, 6);
    const Gate gate = random_gate(8, rng);
    const double forward = objective_value(samples, edge, cloud, gate, cfg);
    std::reverse(samples.begin(), samples.end());
    CHECK(objective_value(samples, edge, cloud, gate, cfg) ==
          doctest::Approx(forward).epsilon(1e-12));
  }

  SUBCASE("empty set is rejected") {
    const OracleEdgeModel edge(1.0, 0.1, 1);
    const OracleCloudModel cloud(0.0, 2);
    CHECK_THROWS_AS(objective_value({}, edge, cloud, Gate(4), cfg), Error);
  }
}
