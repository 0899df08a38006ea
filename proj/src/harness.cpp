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

#include "ecsim/harness.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "ecsim/rng.hpp"
#include "ecsim/textio.hpp"

namespace ecsim {

namespace {

constexpr std::uint64_t kSaltStream = 0x11;
constexpr std::uint64_t kSaltPretrain = 0x22;
constexpr std::uint64_t kSaltGateInit = 0x33;
constexpr std::uint64_t kSaltEdgeOracle = 0x44;
constexpr std::uint64_t kSaltCloudOracle = 0x55;

StreamSpec make_stream_spec(const ExperimentConfig& cfg, std::uint64_t seed) {
  StreamSpec spec;
  spec.class_count = cfg.stream.classes;
  spec.height = cfg.stream.height;
  spec.width = cfg.stream.width;
  spec.tasks = cfg.stream.tasks;
  spec.appearances =
      default_appearances(cfg.stream.classes, cfg.stream.noise_stddev);
  for (std::size_t c = 0; c < cfg.stream.palette.size(); ++c) {
    spec.appearances[c].mean_intensity = cfg.stream.palette[c];
  }
  spec.region_scale = cfg.stream.region_scale;
  spec.seed = seed;
  return spec;
}

Scorer scorer_from_name(std::string_view name) {
  if (name == "learned") return Scorer::kLearned;
  if (name == "mess") return Scorer::kMess;
  if (name == "sm") return Scorer::kSm;
  if (name == "spp") return Scorer::kSpp;
  throw ParseError("unknown scorer '" + std::string(name) + "'");
}

bool bool_from_text(std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ParseError("expected on/off, got '" + std::string(v) + "'");
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t pos = s.find(sep, start);
    const auto piece = trim(s.substr(
        start, pos == std::string_view::npos ? std::string_view::npos
                                             : pos - start));
    if (!piece.empty()) out.push_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double double_from_text(std::string_view v) {
  TokenStream ts(v);
  const double x = ts.next_double();
  if (!ts.done()) throw ParseError("trailing characters after number");
  return x;
}

long long int_from_text(std::string_view v) {
  TokenStream ts(v);
  const long long x = ts.next_int();
  if (!ts.done()) throw ParseError("trailing characters after integer");
  return x;
}

std::vector<TaskSpec> tasks_from_text(std::string_view v) {
  std::vector<TaskSpec> out;
  for (const std::string& chunk : split(v, ';')) {
    const std::size_t colon = chunk.find(':');
    if (colon == std::string::npos) {
      throw ParseError("task must look like 'length:f0,f1,...'");
    }
    TaskSpec task;
    task.length = static_cast<int>(int_from_text(trim(chunk.substr(0, colon))));
    const auto freqs = split(chunk.substr(colon + 1), ',');
    task.class_frequencies.resize(static_cast<Eigen::Index>(freqs.size()));
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      task.class_frequencies(static_cast<Eigen::Index>(i)) =
          double_from_text(freqs[i]);
    }
    out.push_back(std::move(task));
  }
  return out;
}

std::string tasks_to_text(const std::vector<TaskSpec>& tasks) {
  std::string out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (t > 0) out += "; ";
    out += std::to_string(tasks[t].length);
    out += ':';
    for (Eigen::Index i = 0; i < tasks[t].class_frequencies.size(); ++i) {
      if (i > 0) out += ',';
      out += format_double(tasks[t].class_frequencies(i));
    }
  }
  return out;
}

}  // namespace

std::optional<std::pair<double, double>> latency_preset(
    std::string_view name) {
  if (name == "cloud-robotics") return std::pair{1.12, 5.11};
  if (name == "cityscapes") return std::pair{1.09, 5.83};
  if (name == "ade20k") return std::pair{1.05, 4.88};
  if (name == "synthia") return std::pair{1.06, 5.07};
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  if (stream.classes < 2) throw Error("config: need at least two classes");
  if (!stream.palette.empty() &&
      stream.palette.size() != static_cast<std::size_t>(stream.classes)) {
    throw Error("config: palette needs one entry per class");
  }
  if (stream.tasks.empty()) throw Error("config: no tasks");
  make_stream_spec(*this, 0).validate();
  if (models.edge_kind != "trainable" && models.edge_kind != "oracle") {
    throw Error("config: edge must be 'trainable' or 'oracle'");
  }
  if (models.edge_correct_rate < 0.0 || models.edge_correct_rate > 1.0) {
    throw Error("config: edge_correct_rate outside [0, 1]");
  }
  if (models.edge_temperature <= 0.0) {
    throw Error("config: edge_temperature must be positive");
  }
  if (models.cloud_boundary_rate < 0.0 || models.cloud_boundary_rate > 1.0) {
    throw Error("config: cloud_boundary_rate outside [0, 1]");
  }
  if (gate.hidden_dim < 1) throw Error("config: hidden_dim must be >= 1");
  if (gate.delta < 0.0 || gate.delta > 1.0) {
    throw Error("config: delta outside [0, 1]");
  }
  train.validate();
  if (orch.maxsize < 1 || orch.maxtime < 1) {
    throw Error("config: maxsize and maxtime must be >= 1");
  }
  if (!latency.preset.empty() && !latency_preset(latency.preset)) {
    throw Error("config: unknown latency preset '" + latency.preset + "'");
  }
  if (latency.d0 <= latency.d1 || latency.d1 <= 0.0) {
    throw Error("config: need d0 > d1 > 0");
  }
  if (latency.bandwidth_mbps <= 0.0) {
    throw Error("config: bandwidth must be positive");
  }
  if (pretrain.samples < 1 || pretrain.epochs < 0 || pretrain.gate_epochs < 0) {
    throw Error("config: bad pretrain block");
  }
  if (pretrain.learning_rate <= 0.0) {
    throw Error("config: pretrain learning_rate must be positive");
  }
  if (seeds.empty()) throw Error("config: seeds list is empty");
  for (const double d : deltas) {
    if (d < 0.0 || d > 1.0) throw Error("config: sweep delta outside [0, 1]");
  }
  for (const std::string& s : strategies) {
    strategy_orchestrator_config(*this, s);  // throws on unknown names
  }
}

// Calibrated so that the drifting tasks leave a pretrained model clearly
// behind a continually trained one while region votes stay reliable.
ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.stream.classes = 4;
  cfg.stream.height = 16;
  cfg.stream.width = 16;
  cfg.stream.region_scale = 0.75;
  cfg.stream.noise_stddev = 18.0;
  const auto task = [](int length, std::initializer_list<double> freqs) {
    TaskSpec t;
    t.length = length;
    t.class_frequencies.resize(static_cast<Eigen::Index>(freqs.size()));
    Eigen::Index i = 0;
    for (const double f : freqs) t.class_frequencies(i++) = f;
    return t;
  };
  cfg.stream.tasks = {
      task(300, {0.58, 0.26, 0.10, 0.06}),
      task(300, {0.45, 0.30, 0.15, 0.10}),
      task(300, {0.20, 0.25, 0.35, 0.20}),
      task(300, {0.06, 0.10, 0.40, 0.44}),
      task(300, {0.03, 0.05, 0.45, 0.47}),
  };
  cfg.models.cloud_boundary_rate = 0.08;
  cfg.gate.mess_pixel_threshold = 0.8;
  cfg.train.learning_rate = 0.02;
  cfg.train.beta = 0.2;
  cfg.pretrain.samples = 200;
  cfg.pretrain.epochs = 250;
  cfg.pretrain.gate_epochs = 2000;
  cfg.pretrain.learning_rate = 0.5;
  cfg.strategies = {"laecips", "dcsb", "mess", "sm", "spp", "edge", "cloud"};
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.deltas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0};
  return cfg;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg = default_experiment();
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError("unterminated section");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));

      if (section == "stream") {
        if (key == "classes") cfg.stream.classes = static_cast<int>(int_from_text(value));
        else if (key == "height") cfg.stream.height = static_cast<int>(int_from_text(value));
        else if (key == "width") cfg.stream.width = static_cast<int>(int_from_text(value));
        else if (key == "region_scale") cfg.stream.region_scale = double_from_text(value);
        else if (key == "noise_stddev") cfg.stream.noise_stddev = double_from_text(value);
        else if (key == "palette") {
          cfg.stream.palette.clear();
          for (const std::string& triple : split(value, ';')) {
            const auto parts = split(triple, ',');
            if (parts.size() != 3) throw ParseError("palette entries are r,g,b");
            cfg.stream.palette.emplace_back(double_from_text(parts[0]),
                                            double_from_text(parts[1]),
                                            double_from_text(parts[2]));
          }
        }
        else if (key == "tasks") cfg.stream.tasks = tasks_from_text(value);
        else throw ParseError("unknown key '" + key + "'");
      } else if (section == "models") {
        if (key == "edge") cfg.models.edge_kind = value;
        else if (key == "edge_correct_rate") cfg.models.edge_correct_rate = double_from_text(value);
        else if (key == "edge_temperature") cfg.models.edge_temperature = double_from_text(value);
        else if (key == "cloud_boundary_rate") cfg.models.cloud_boundary_rate = double_from_text(value);
        else throw ParseError("unknown key '" + key + "'");
      } else if (section == "gate") {
        if (key == "hidden_dim") cfg.gate.hidden_dim = static_cast<int>(int_from_text(value));
        else if (key == "scorer") cfg.gate.scorer = scorer_from_name(value);
        else if (key == "delta") cfg.gate.delta = double_from_text(value);
        else if (key == "mess_pixel_threshold") cfg.gate.mess_pixel_threshold = double_from_text(value);
        else throw ParseError("unknown key '" + key + "'");
      } else if (section == "train") {
        if (key == "learning_rate") cfg.train.learning_rate = double_from_text(value);
        else if (key == "beta") cfg.train.beta = double_from_text(value);
        else if (key == "epochs") cfg.train.epochs = static_cast<int>(int_from_text(value));
        else throw ParseError("unknown key '" + key + "'");
      } else if (section == "orchestrator") {
        if (key == "maxsize") cfg.orch.maxsize = static_cast<int>(int_from_text(value));
        else if (key == "maxtime") cfg.orch.maxtime = static_cast<int>(int_from_text(value));
        else if (key == "adaptive") cfg.orch.adaptive = bool_from_text(value);
        else if (key == "keep_trace") cfg.orch.keep_trace = bool_from_text(value);
        else throw ParseError("unknown key '" + key + "'");
      } else if (section == "latency") {
        if (key == "preset") {
          cfg.latency.preset = value == "none" ? "" : value;
          if (const auto p = latency_preset(cfg.latency.preset)) {
            cfg.latency.d1 = p->first;
            cfg.latency.d0 = p->second;
          }
        } else if (key == "d1") cfg.latency.d1 = double_from_text(value);
        else if (key == "d0") cfg.latency.d0 = double_from_text(value);
        else if (key == "bandwidth_mbps") cfg.latency.bandwidth_mbps = double_from_text(value);
        else if (key == "delay_max") cfg.latency.delay_max = double_from_text(value);
        else if (key == "uncorrected_budget_bound") cfg.latency.uncorrected_budget_bound = bool_from_text(value);
        else throw ParseError("unknown key '" + key + "'");
      } else if (section == "pretrain") {
        if (key == "samples") cfg.pretrain.samples = static_cast<int>(int_from_text(value));
        else if (key == "epochs") cfg.pretrain.epochs = static_cast<int>(int_from_text(value));
        else if (key == "gate_epochs") cfg.pretrain.gate_epochs = static_cast<int>(int_from_text(value));
        else if (key == "learning_rate") cfg.pretrain.learning_rate = double_from_text(value);
        else throw ParseError("unknown key '" + key + "'");
      } else if (section == "experiment") {
        if (key == "strategies") cfg.strategies = split(value, ',');
        else if (key == "seeds") {
          cfg.seeds.clear();
          for (const std::string& s : split(value, ',')) {
            cfg.seeds.push_back(static_cast<std::uint64_t>(int_from_text(s)));
          }
        } else if (key == "deltas") {
          cfg.deltas.clear();
          for (const std::string& s : split(value, ',')) {
            cfg.deltas.push_back(double_from_text(s));
          }
        } else if (key == "out_dir") cfg.out_dir = value;
        else throw ParseError("unknown key '" + key + "'");
      } else {
        throw ParseError("unknown section '" + section + "'");
      }
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::string out;
  const auto kv = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  const auto num = [](double v) { return format_double(v); };

  out += "[stream]\n";
  kv("classes", std::to_string(cfg.stream.classes));
  kv("height", std::to_string(cfg.stream.height));
  kv("width", std::to_string(cfg.stream.width));
  kv("region_scale", num(cfg.stream.region_scale));
  kv("noise_stddev", num(cfg.stream.noise_stddev));
  if (!cfg.stream.palette.empty()) {
    std::string palette;
    for (std::size_t c = 0; c < cfg.stream.palette.size(); ++c) {
      if (c > 0) palette += "; ";
      palette += num(cfg.stream.palette[c](0)) + "," +
                 num(cfg.stream.palette[c](1)) + "," +
                 num(cfg.stream.palette[c](2));
    }
    kv("palette", palette);
  }
  kv("tasks", tasks_to_text(cfg.stream.tasks));

  out += "\n[models]\n";
  kv("edge", cfg.models.edge_kind);
  kv("edge_correct_rate", num(cfg.models.edge_correct_rate));
  kv("edge_temperature", num(cfg.models.edge_temperature));
  kv("cloud_boundary_rate", num(cfg.models.cloud_boundary_rate));

  out += "\n[gate]\n";
  kv("hidden_dim", std::to_string(cfg.gate.hidden_dim));
  kv("scorer", scorer_name(cfg.gate.scorer));
  kv("delta", num(cfg.gate.delta));
  kv("mess_pixel_threshold", num(cfg.gate.mess_pixel_threshold));

  out += "\n[train]\n";
  kv("learning_rate", num(cfg.train.learning_rate));
  kv("beta", num(cfg.train.beta));
  kv("epochs", std::to_string(cfg.train.epochs));

  out += "\n[orchestrator]\n";
  kv("maxsize", std::to_string(cfg.orch.maxsize));
  kv("maxtime", std::to_string(cfg.orch.maxtime));
  kv("adaptive", cfg.orch.adaptive ? "on" : "off");
  kv("keep_trace", cfg.orch.keep_trace ? "on" : "off");

  out += "\n[latency]\n";
  kv("preset", cfg.latency.preset.empty() ? "none" : cfg.latency.preset);
  kv("d1", num(cfg.latency.d1));
  kv("d0", num(cfg.latency.d0));
  kv("bandwidth_mbps", num(cfg.latency.bandwidth_mbps));
  if (cfg.latency.delay_max) kv("delay_max", num(*cfg.latency.delay_max));
  kv("uncorrected_budget_bound",
     cfg.latency.uncorrected_budget_bound ? "on" : "off");

  out += "\n[pretrain]\n";
  kv("samples", std::to_string(cfg.pretrain.samples));
  kv("epochs", std::to_string(cfg.pretrain.epochs));
  kv("gate_epochs", std::to_string(cfg.pretrain.gate_epochs));
  kv("learning_rate", num(cfg.pretrain.learning_rate));

  out += "\n[experiment]\n";
  std::string strategies;
  for (std::size_t i = 0; i < cfg.strategies.size(); ++i) {
    if (i > 0) strategies += ", ";
    strategies += cfg.strategies[i];
  }
  kv("strategies", strategies);
  std::string seeds;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i > 0) seeds += ", ";
    seeds += std::to_string(cfg.seeds[i]);
  }
  kv("seeds", seeds);
  std::string deltas;
  for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
    if (i > 0) deltas += ", ";
    deltas += num(cfg.deltas[i]);
  }
  kv("deltas", deltas);
  kv("out_dir", cfg.out_dir);
  return out;
}

CellSetup prepare_cell(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const StreamSpec spec = make_stream_spec(cfg, mix_seed(seed, kSaltStream));

  std::shared_ptr<EdgeModel> edge;
  if (cfg.models.edge_kind == "trainable") {
    edge = std::make_shared<TrainableEdgeModel>(cfg.stream.classes);
  } else {
    edge = std::make_shared<OracleEdgeModel>(cfg.models.edge_correct_rate,
                                             cfg.models.edge_temperature,
                                             mix_seed(seed, kSaltEdgeOracle));
  }
  auto cloud = std::make_shared<const OracleCloudModel>(
      cfg.models.cloud_boundary_rate, mix_seed(seed, kSaltCloudOracle));

  // Pretraining runs on the first task's distribution with the true labels.
  StreamSpec pre_spec = spec;
  pre_spec.tasks = {TaskSpec{cfg.pretrain.samples,
                             cfg.stream.tasks.front().class_frequencies}};
  pre_spec.seed = mix_seed(seed, kSaltPretrain);
  const std::vector<StreamSample> pre = generate_stream(pre_spec);

  TrainConfig pre_train = cfg.train;
  pre_train.learning_rate = cfg.pretrain.learning_rate;
  pre_train.epochs = std::max(1, cfg.pretrain.epochs);

  // The gate pretrains on (features, loss) pairs recorded against the true
  // labels at several model maturities, so it sees hard and easy samples
  // even though the final model handles the first task well.
  std::vector<GateSample> gate_batch;
  const auto record_gate_samples = [&] {
    for (const StreamSample& s : pre) {
      const ProbMap pred = edge->infer(s.image, &s.truth);
      gate_batch.push_back(GateSample{
          extract_features(pred), loss_f(pred, s.truth, cfg.train.log_clamp)});
    }
  };

  if (cfg.pretrain.epochs > 0) {
    if (auto* trainable = dynamic_cast<TrainableEdgeModel*>(edge.get())) {
      std::vector<ReplayBuffer::Entry> batch;
      batch.reserve(pre.size());
      for (const StreamSample& s : pre) batch.emplace_back(s.image, s.truth);
      TrainConfig phase = pre_train;
      phase.epochs = std::max(1, pre_train.epochs / 2);
      update_f(*trainable, batch, phase);
      record_gate_samples();  // mid-training snapshot
      phase.epochs = std::max(1, pre_train.epochs - phase.epochs);
      update_f(*trainable, batch, phase);
    }
  }
  record_gate_samples();

  Gate gate =
      Gate::random_init(cfg.gate.hidden_dim, mix_seed(seed, kSaltGateInit));
  if (cfg.pretrain.gate_epochs > 0) {
    TrainConfig gate_train = pre_train;
    gate_train.epochs = cfg.pretrain.gate_epochs;
    update_h(gate, gate_batch, gate_train);
  }

  return CellSetup{std::move(edge), std::move(gate), std::move(cloud),
                   generate_stream(spec),
                   LatencyModel::calibrated(
                       cfg.latency.d1, cfg.latency.d0,
                       cfg.latency.bandwidth_bytes_per_s(), cfg.stream.height,
                       cfg.stream.width)};
}

OrchestratorConfig strategy_orchestrator_config(const ExperimentConfig& cfg,
                                                const std::string& strategy) {
  OrchestratorConfig oc;
  oc.maxsize = cfg.orch.maxsize;
  oc.maxtime = cfg.orch.maxtime;
  oc.train = cfg.train;
  oc.keep_trace = cfg.orch.keep_trace;
  oc.policy.delta = cfg.gate.delta;
  oc.policy.mess_pixel_threshold = cfg.gate.mess_pixel_threshold;
  oc.policy.scorer = Scorer::kLearned;

  if (strategy == "laecips") {
    oc.adaptive_updates = true;
  } else if (strategy == "dcsb") {
    oc.adaptive_updates = false;
  } else if (strategy == "mess" || strategy == "sm" || strategy == "spp") {
    oc.policy.scorer = scorer_from_name(strategy);
    oc.adaptive_updates = cfg.orch.adaptive;
  } else if (strategy == "edge") {
    oc.policy.delta = 0.0;  // every confidence wins; nothing uploads
    oc.adaptive_updates = false;
  } else if (strategy == "cloud") {
    oc.policy.delta = 1.0;  // nothing wins; everything uploads
    oc.adaptive_updates = false;
  } else {
    throw Error("unknown strategy '" + strategy + "'");
  }
  return oc;
}

RunReport run_cell(const ExperimentConfig& cfg, const std::string& strategy,
                   std::uint64_t seed) {
  CellSetup setup = prepare_cell(cfg, seed);
  Orchestrator orch(strategy_orchestrator_config(cfg, strategy),
                    setup.latency, setup.edge, std::move(setup.gate),
                    setup.cloud);
  return orch.run_stream(setup.stream);
}

bool ExperimentResult::all_ok() const {
  return std::all_of(cells.begin(), cells.end(),
                     [](const CellResult& c) { return c.ok; });
}

double ExperimentResult::mean_miou(const std::string& strategy) const {
  double sum = 0.0;
  int n = 0;
  for (const CellResult& cell : cells) {
    if (cell.ok && cell.strategy == strategy) {
      sum += cell.report.aggregate.miou;
      ++n;
    }
  }
  if (n == 0) throw Error("no successful cells for strategy " + strategy);
  return sum / n;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  for (const std::string& strategy : cfg.strategies) {
    for (const std::uint64_t seed : cfg.seeds) {
      CellResult cell;
      cell.strategy = strategy;
      cell.seed = seed;
      try {
        cell.report = run_cell(cfg, strategy, seed);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

std::vector<SweepPoint> sweep_delta(const ExperimentConfig& cfg,
                                    std::span<const double> deltas) {
  cfg.validate();
  CellSetup setup = prepare_cell(cfg, cfg.seeds.front());

  OrchestratorConfig oc;
  oc.maxsize = cfg.orch.maxsize;
  oc.maxtime = cfg.orch.maxtime;
  oc.train = cfg.train;
  oc.policy.scorer = cfg.gate.scorer;
  oc.policy.delta = cfg.gate.delta;
  oc.policy.mess_pixel_threshold = cfg.gate.mess_pixel_threshold;
  oc.keep_trace = false;

  // Let the system adapt online once; the sweep then reruns the stream with
  // that state frozen, one threshold per run.
  Gate gate = setup.gate;
  if (cfg.orch.adaptive) {
    oc.adaptive_updates = true;
    Orchestrator online(oc, setup.latency, setup.edge, gate, setup.cloud);
    online.run_stream(setup.stream);
    gate = online.gate();
  }

  oc.adaptive_updates = false;
  std::vector<SweepPoint> points;
  points.reserve(deltas.size());
  for (const double delta : deltas) {
    oc.policy.delta = delta;
    Orchestrator orch(oc, setup.latency, setup.edge, gate, setup.cloud);
    const RunReport report = orch.run_stream(setup.stream);
    points.push_back(SweepPoint{delta, report.aggregate.cur,
                                report.aggregate.miou});
  }
  return points;
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "delta,cur,miou\n";
  for (const SweepPoint& p : points) {
    out += format_fixed(p.delta);
    out += ',';
    out += format_fixed(p.cur);
    out += ',';
    out += format_fixed(p.miou);
    out += '\n';
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

std::string summary_csv(const ExperimentResult& result,
                        const ExperimentConfig& cfg) {
  std::string out = "strategy,seed";
  const std::size_t task_count = cfg.stream.tasks.size();
  for (std::size_t t = 0; t < task_count; ++t) {
    out += ",task" + std::to_string(t) + "_miou";
    out += ",task" + std::to_string(t) + "_cur";
  }
  out += ",avg_miou,avg_cur,avg_latency_s\n";

  for (const CellResult& cell : result.cells) {
    if (!cell.ok) continue;
    out += cell.strategy;
    out += ',';
    out += std::to_string(cell.seed);
    for (std::size_t t = 0; t < task_count; ++t) {
      const auto it = std::find_if(
          cell.report.per_task.begin(), cell.report.per_task.end(),
          [t](const TaskRecord& r) { return r.task == static_cast<int>(t); });
      if (it == cell.report.per_task.end()) {
        out += ",,";
      } else {
        out += ',';
        out += format_fixed(it->miou);
        out += ',';
        out += format_fixed(it->cur);
      }
    }
    out += ',';
    out += format_fixed(cell.report.aggregate.miou);
    out += ',';
    out += format_fixed(cell.report.aggregate.cur);
    out += ',';
    out += format_fixed(cell.report.aggregate.avg_latency_s);
    out += '\n';
  }
  return out;
}

void export_results(const ExperimentResult& result,
                    const ExperimentConfig& cfg,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "config.echo.txt", echo_config(cfg));
  if (result.cells.empty()) return;

  for (const CellResult& cell : result.cells) {
    if (!cell.ok) continue;
    const std::string stem = cell.strategy + "_" + std::to_string(cell.seed);
    write_file(dir / (stem + ".csv"), report_csv(cell.report));
    write_file(dir / (stem + ".json"), report_structured_text(cell.report));
    if (!cell.report.trace.empty()) {
      write_file(dir / (stem + "_trace.csv"), trace_csv(cell.report.trace));
    }
  }
  write_file(dir / "summary.csv", summary_csv(result, cfg));
}

}  // namespace ecsim
