#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "ecsim/orchestrator.hpp"
#include "ecsim/rng.hpp"

using namespace ecsim;

namespace {

StreamSpec test_spec(int samples, std::uint64_t seed, int classes = 3) {
  StreamSpec spec;
  spec.class_count = classes;
  spec.height = 8;
  spec.width = 8;
  spec.appearances = default_appearances(classes);
  TaskSpec task;
  task.length = samples;
  task.class_frequencies = Eigen::VectorXd::Constant(classes, 1.0 / classes);
  spec.tasks = {task};
  spec.seed = seed;
  return spec;
}

OrchestratorConfig base_config() {
  OrchestratorConfig cfg;
  cfg.maxsize = 8;
  cfg.maxtime = 1000;
  return cfg;
}

LatencyModel test_latency() {
  return LatencyModel::calibrated(1.12, 5.11, 500000.0, 8, 8);
}

Orchestrator oracle_orchestrator(OrchestratorConfig cfg, double rho,
                                 double pi = 0.0, int classes = 3) {
  (void)classes;
  return Orchestrator(cfg, test_latency(),
                      std::make_shared<OracleEdgeModel>(rho, 0.01, 21),
                      Gate::random_init(16, 7),
                      std::make_shared<const OracleCloudModel>(pi, 22));
}

}  // namespace

TEST_CASE("wire frames round trip for all kinds") {
  for (const WireKind kind :
       {WireKind::kUploadImage, WireKind::kMaskResult, WireKind::kModelUpdate}) {
    const WireMessage msg{kind, "PM 2 1 1\n0.5 0.5\n"};
    CHECK(wire_decode(wire_encode(msg)) == msg);
  }
  const WireMessage empty{WireKind::kUploadImage, ""};
  CHECK(wire_decode(wire_encode(empty)) == empty);
}

TEST_CASE("malformed frames are rejected") {
  const WireMessage msg{WireKind::kMaskResult, "RM 0 2 2\n"};
  const std::vector<std::byte> good = wire_encode(msg);

  SUBCASE("truncated header") {
    CHECK_THROWS_AS(wire_decode(std::span(good).first(4)), WireFormatError);
  }
  SUBCASE("truncated payload") {
    CHECK_THROWS_AS(wire_decode(std::span(good).first(good.size() - 1)),
                    WireFormatError);
  }
  SUBCASE("wrong declared length") {
    auto bad = good;
    bad[0] = static_cast<std::byte>(250);
    CHECK_THROWS_AS(wire_decode(bad), WireFormatError);
  }
  SUBCASE("unknown kind") {
    auto bad = good;
    bad[4] = static_cast<std::byte>(0x7f);
    CHECK_THROWS_AS(wire_decode(bad), WireFormatError);
  }
  SUBCASE("random fuzz never crashes or accepts bad lengths") {
    Rng rng(33);
    int rejected = 0;
    for (int i = 0; i < 2000; ++i) {
      std::vector<std::byte> frame(rng.uniform_int(0, 64));
      for (auto& b : frame) {
        b = static_cast<std::byte>(rng.uniform_int(0, 255));
      }
      try {
        const WireMessage decoded = wire_decode(frame);
        // Rare acceptance is fine, but only when the frame is coherent.
        CHECK(decoded.payload.size() == frame.size() - 5);
      } catch (const WireFormatError&) {
        ++rejected;
      }
    }
    CHECK(rejected > 1900);  // nearly all random frames are malformed
  }
}

TEST_CASE("cloud node answers uploads and rejects junk") {
  const auto cloud = std::make_shared<const OracleCloudModel>(0.0, 5);
  const CloudNode node(cloud);
  const StreamSample sample = generate_stream(test_spec(1, 44)).front();

  const auto upload =
      wire_encode(WireMessage{WireKind::kUploadImage, to_text(sample.image)});
  const auto reply = node.handle_upload(upload, &sample.truth);
  const WireMessage msg = wire_decode(reply);
  CHECK(msg.kind == WireKind::kMaskResult);
  const RegionMaskSet masks = region_masks_from_text(msg.payload);
  CHECK(masks.height() == 8);

  CHECK_THROWS_AS(node.handle_upload(std::vector<std::byte>(3), nullptr),
                  WireFormatError);
  const auto wrong_kind =
      wire_encode(WireMessage{WireKind::kModelUpdate, "EW 1\n0 0 0 0 0 0\n"});
  CHECK_THROWS_AS(node.handle_upload(wrong_kind, nullptr), WireFormatError);
}

TEST_CASE("threshold limits") {
  const auto stream = generate_stream(test_spec(20, 55));

  SUBCASE("delta 0 keeps everything on the edge") {
    OrchestratorConfig cfg = base_config();
    cfg.policy.delta = 0.0;
    Orchestrator orch = oracle_orchestrator(cfg, 0.9);
    const RunReport report = orch.run_stream(stream);
    CHECK(report.aggregate.cur == 0.0);
    CHECK(orch.buffer_size() == 0);
    CHECK(report.aggregate.avg_latency_s == doctest::Approx(1.12));
  }
  SUBCASE("delta 1 uploads everything") {
    OrchestratorConfig cfg = base_config();
    cfg.policy.delta = 1.0;
    cfg.adaptive_updates = false;  // keep the buffer observable
    Orchestrator orch = oracle_orchestrator(cfg, 0.9);
    const RunReport report = orch.run_stream(stream);
    CHECK(report.aggregate.cur == 1.0);
    CHECK(orch.buffer_size() == stream.size());
    CHECK(report.aggregate.avg_latency_s == doctest::Approx(5.11));
  }
}

TEST_CASE("ideal oracles reproduce the truth on both paths") {
  const auto stream = generate_stream(test_spec(30, 66));
  OrchestratorConfig cfg = base_config();
  cfg.policy.delta = 0.5;
  Orchestrator orch = oracle_orchestrator(cfg, 1.0, 0.0);
  for (const StreamSample& s : stream) {
    const InferenceOutcome out = orch.process_sample(s.image, &s.truth);
    REQUIRE((out.output.labels() == s.truth.labels()).all());
    REQUIRE(*out.iou_edge == doctest::Approx(1.0));
  }
}

TEST_CASE("update triggers") {
  const auto stream = generate_stream(test_spec(30, 77));

  SUBCASE("buffer growth past maxsize trains and flushes") {
    OrchestratorConfig cfg = base_config();
    cfg.maxsize = 2;
    cfg.policy.delta = 1.0;  // all cloud
    Orchestrator orch(cfg, test_latency(),
                      std::make_shared<TrainableEdgeModel>(3), Gate(16),
                      std::make_shared<const OracleCloudModel>(0.0, 1));
    for (int i = 0; i < 2; ++i) {
      orch.process_sample(stream[static_cast<std::size_t>(i)].image,
                          &stream[static_cast<std::size_t>(i)].truth);
      CHECK_FALSE(orch.maybe_update().fired);
    }
    orch.process_sample(stream[2].image, &stream[2].truth);
    CHECK(orch.buffer_size() == 3);
    const UpdateReport report = orch.maybe_update();
    CHECK(report.fired);
    CHECK(report.trained);
    CHECK(orch.buffer_size() == 0);
    CHECK(orch.update_rounds() == 1);
  }

  SUBCASE("maxtime with an empty buffer only resets the interval") {
    OrchestratorConfig cfg = base_config();
    cfg.maxtime = 3;
    cfg.policy.delta = 0.0;  // all edge, buffer stays empty
    Orchestrator orch = oracle_orchestrator(cfg, 0.9);
    for (int i = 0; i < 4; ++i) {
      orch.process_sample(stream[static_cast<std::size_t>(i)].image,
                          &stream[static_cast<std::size_t>(i)].truth);
    }
    CHECK(orch.samples_since_flush() == 4);
    const UpdateReport report = orch.maybe_update();
    CHECK(report.fired);
    CHECK_FALSE(report.trained);
    CHECK(orch.samples_since_flush() == 0);
    CHECK(orch.update_rounds() == 0);
  }

  SUBCASE("frozen runs never touch the model") {
    OrchestratorConfig cfg = base_config();
    cfg.adaptive_updates = false;
    cfg.policy.delta = 1.0;
    auto edge = std::make_shared<TrainableEdgeModel>(3);
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(3, 6, 0.25);
    edge->set_weights(w);
    Orchestrator orch(cfg, test_latency(), edge, Gate::random_init(16, 3),
                      std::make_shared<const OracleCloudModel>(0.0, 2));
    orch.run_stream(stream);
    CHECK(edge->weights() == w);
  }

  SUBCASE("training updates the weights through the model-update frame") {
    OrchestratorConfig cfg = base_config();
    cfg.maxsize = 4;
    cfg.policy.delta = 1.0;
    auto edge = std::make_shared<TrainableEdgeModel>(3);
    Orchestrator orch(cfg, test_latency(), edge, Gate::random_init(16, 3),
                      std::make_shared<const OracleCloudModel>(0.0, 2));
    const Gate gate_before = orch.gate();
    orch.run_stream(stream);
    CHECK(orch.update_rounds() > 0);
    CHECK(edge->weights().cwiseAbs().maxCoeff() > 0.0);
    CHECK_FALSE(orch.gate() == gate_before);
  }
}

TEST_CASE("replay buffer membership") {
  const auto stream = generate_stream(test_spec(40, 88));
  OrchestratorConfig cfg = base_config();
  cfg.maxsize = 1000;  // never flush
  cfg.maxtime = 1000;
  cfg.policy.delta = 0.6;
  Orchestrator orch = oracle_orchestrator(cfg, 0.85);
  int cloud = 0;
  for (const StreamSample& s : stream) {
    const InferenceOutcome out = orch.process_sample(s.image, &s.truth);
    if (out.decision == Decision::kCloud) ++cloud;
    orch.maybe_update();
  }
  CHECK(cloud > 0);
  CHECK(orch.buffer_size() == static_cast<std::size_t>(cloud));
}

TEST_CASE("run_stream reporting") {
  SUBCASE("empty stream gives an empty report") {
    Orchestrator orch = oracle_orchestrator(base_config(), 0.9);
    const RunReport report = orch.run_stream({});
    CHECK(report.per_task.empty());
    CHECK(report.aggregate.samples == 0);
    CHECK(orch.update_rounds() == 0);
  }

  SUBCASE("identical configurations give bit-identical traces") {
    const auto stream = generate_stream(test_spec(25, 99));
    const auto run = [&stream] {
      OrchestratorConfig cfg = base_config();
      cfg.maxsize = 4;
      cfg.policy.delta = 0.55;
      Orchestrator orch(cfg, test_latency(),
                        std::make_shared<OracleEdgeModel>(0.8, 0.3, 5),
                        Gate::random_init(16, 6),
                        std::make_shared<const OracleCloudModel>(0.1, 7));
      return orch.run_stream(stream);
    };
    CHECK(trace_csv(run().trace) == trace_csv(run().trace));
  }

  SUBCASE("reported CUR and latency satisfy the identities") {
    const auto stream = generate_stream(test_spec(50, 111));
    OrchestratorConfig cfg = base_config();
    cfg.maxsize = 6;
    cfg.policy.delta = 0.6;
    Orchestrator orch = oracle_orchestrator(cfg, 0.85);
    const RunReport report = orch.run_stream(stream);
    int cloud = 0;
    for (const TraceRow& row : report.trace) {
      if (row.decision == Decision::kCloud) ++cloud;
    }
    CHECK(report.aggregate.cur ==
          doctest::Approx(static_cast<double>(cloud) / stream.size())
              .epsilon(1e-12));
    const LatencyModel lm = test_latency();
    CHECK(report.aggregate.avg_latency_s ==
          doctest::Approx(expected_latency(report.aggregate.cur,
                                           lm.d0_nominal(8, 8), lm.d1()))
              .epsilon(1e-12));
  }

  SUBCASE("per-sample failures carry the sample index") {
    struct WrongSizeCloud final : CloudMaskModel {
      RegionMaskSet infer(const Image&, const SemanticMask*) const override {
        RegionMaskSet masks(3, 3);  // wrong dimensions for an 8x8 stream
        masks.add(MaskGrid::Constant(3, 3, true));
        return masks;
      }
    };
    OrchestratorConfig cfg = base_config();
    cfg.policy.delta = 1.0;
    Orchestrator orch(cfg, test_latency(),
                      std::make_shared<OracleEdgeModel>(0.9, 0.3, 5),
                      Gate::random_init(16, 6),
                      std::make_shared<const WrongSizeCloud>());
    const auto stream = generate_stream(test_spec(3, 123));
    CHECK_THROWS_WITH_AS(orch.run_stream(stream),
                         doctest::Contains("sample 0"), Error);
  }
}
