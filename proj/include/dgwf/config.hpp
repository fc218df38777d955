// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "dgwf/core.hpp"
#include "dgwf/scene.hpp"
#include "dgwf/solvers.hpp"
#include "dgwf/theory.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dgwf {

using Json = nlohmann::ordered_json;

struct ScattererSpec {
  std::size_t row = 0;
  std::size_t col = 0;
  double re = 0.0;
  double im = 0.0;
};

struct SceneConfig {
  std::size_t grid_rows = 12;
  std::size_t grid_cols = 12;
  double voxel_spacing = 2.4;
  std::vector<ScattererSpec> scatterers = {
      {3, 3, 0.1, 0.0}, {3, 8, 0.1, 0.0}, {8, 5, 0.1, 0.0}, {6, 6, 0.1, 0.0}, {9, 9, 0.1, 0.0}};
  double circle_radius = 100.0;
  std::vector<double> tx_position = {0.0, 0.0, 5.0e5};
};

struct WaveformConfig {
  double center_frequency = 12e9;
  double bandwidth = 60e6;
  std::size_t num_samples = 64;
  double tx_gain_db = 100.0;
  double rx_gain_db = 100.0;
};

struct GraphConfig {
  std::size_t num_agents = 35;
  /// "small_world" or "complete".
  std::string topology = "small_world";
  double connection_prob = 0.1;
  std::size_t base_degree = 4;
  std::uint64_t seed = 1;
};

struct SolverBlock {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double tau0 = 3300.0;
  double eta_cap = 0.01;
  std::size_t t_max = 4000;
  double mse_threshold = 1e-5;
  /// Stop a run once the MSE threshold is reached and the consensus error is
  /// at most stop_consensus.
  bool stop_at_threshold = false;
  double stop_consensus = std::numeric_limits<double>::infinity();
  std::size_t record_stride = 0;
  std::size_t threads = 1;
};

struct NoiseConfig {
  /// Empty means noiseless.
  std::optional<double> snr_db = 50.0;
};

struct SweepConfig {
  /// "connection_prob" or "num_agents".
  std::string parameter = "connection_prob";
  std::vector<double> values = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t seeds_per_point = 3;
  /// Worker threads across sweep runs; output does not depend on it.
  std::size_t parallel_runs = 1;
};

struct TheoryConfig {
  std::size_t grid_rows = 4;
  std::size_t grid_cols = 4;
  double voxel_spacing = 2.4;
  std::vector<ScattererSpec> scatterers = {{1, 1, 1.0, 0.0}, {2, 3, 1.0, 0.0}, {3, 0, 1.0, 0.0}};
  std::size_t num_agents = 16;
  std::size_t num_samples = 16;
  double bandwidth = 1.2e9;
  /// Fixed RIC value; empty means "estimate and clamp".
  std::optional<double> delta1;
  std::size_t ric_trials = 500;
  std::size_t samples = 500;
  double relative_radius = 0.1;
  std::size_t lipschitz_pairs = 1000;
  /// tau = tau_factor * ||x0||^2.
  double tau_factor = 4.0;
  double split = 0.5;
  std::uint64_t seed = 7;
};

struct OutputConfig {
  std::string out_dir = "results";
  bool plots = true;
};

struct ExperimentConfig {
  SceneConfig scene;
  WaveformConfig waveform;
  GraphConfig graph;
  SolverBlock solver;
  NoiseConfig noise;
  SweepConfig sweep;
  TheoryConfig theory;
  OutputConfig output;

  void validate() const;
};

namespace detail {

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (ok.count(it.key()) == 0) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline Json scatterers_to_json(const std::vector<ScattererSpec>& v) {
  Json arr = Json::array();
  for (const auto& s : v) arr.push_back({{"row", s.row}, {"col", s.col}, {"re", s.re}, {"im", s.im}});
  return arr;
}

inline std::vector<ScattererSpec> scatterers_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<ScattererSpec> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string w = where + "[" + std::to_string(k) + "]";
    check_keys(j[k], w, {"row", "col", "re", "im"});
    ScattererSpec s;
    read(j[k], "row", s.row, w);
    read(j[k], "col", s.col, w);
    read(j[k], "re", s.re, w);
    read(j[k], "im", s.im, w);
    out.push_back(s);
  }
  return out;
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["scene"] = {{"grid_rows", c.scene.grid_rows},
                {"grid_cols", c.scene.grid_cols},
                {"voxel_spacing", c.scene.voxel_spacing},
                {"scatterers", detail::scatterers_to_json(c.scene.scatterers)},
                {"circle_radius", c.scene.circle_radius},
                {"tx_position", c.scene.tx_position}};
  j["waveform"] = {{"center_frequency", c.waveform.center_frequency},
                   {"bandwidth", c.waveform.bandwidth},
                   {"num_samples", c.waveform.num_samples},
                   {"tx_gain_db", c.waveform.tx_gain_db},
                   {"rx_gain_db", c.waveform.rx_gain_db}};
  j["graph"] = {{"num_agents", c.graph.num_agents},
                {"topology", c.graph.topology},
                {"connection_prob", c.graph.connection_prob},
                {"base_degree", c.graph.base_degree},
                {"seed", c.graph.seed}};
  Json solver = {{"lambda1", c.solver.lambda1},
                 {"lambda2", c.solver.lambda2},
                 {"tau0", c.solver.tau0},
                 {"eta_cap", c.solver.eta_cap},
                 {"t_max", c.solver.t_max},
                 {"mse_threshold", c.solver.mse_threshold},
                 {"stop_at_threshold", c.solver.stop_at_threshold}};
  if (std::isfinite(c.solver.stop_consensus))
    solver["stop_consensus"] = c.solver.stop_consensus;
  else
    solver["stop_consensus"] = "none";
  solver["record_stride"] = c.solver.record_stride;
  solver["threads"] = c.solver.threads;
  j["solver"] = solver;
  if (c.noise.snr_db)
    j["noise"] = {{"snr_db", *c.noise.snr_db}};
  else
    j["noise"] = {{"snr_db", "none"}};
  j["sweep"] = {{"parameter", c.sweep.parameter},
                {"values", c.sweep.values},
                {"seeds_per_point", c.sweep.seeds_per_point},
                {"parallel_runs", c.sweep.parallel_runs}};
  Json theory = {{"grid_rows", c.theory.grid_rows},
                 {"grid_cols", c.theory.grid_cols},
                 {"voxel_spacing", c.theory.voxel_spacing},
                 {"scatterers", detail::scatterers_to_json(c.theory.scatterers)},
                 {"num_agents", c.theory.num_agents},
                 {"num_samples", c.theory.num_samples},
                 {"bandwidth", c.theory.bandwidth}};
  if (c.theory.delta1)
    theory["delta1"] = *c.theory.delta1;
  else
    theory["delta1"] = "estimate";
  theory["ric_trials"] = c.theory.ric_trials;
  theory["samples"] = c.theory.samples;
  theory["relative_radius"] = c.theory.relative_radius;
  theory["lipschitz_pairs"] = c.theory.lipschitz_pairs;
  theory["tau_factor"] = c.theory.tau_factor;
  theory["split"] = c.theory.split;
  theory["seed"] = c.theory.seed;
  j["theory"] = theory;
  j["output"] = {{"out_dir", c.output.out_dir}, {"plots", c.output.plots}};
  return j;
}

/// Parses a configuration tree; absent keys keep their defaults, unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::check_keys;
  using detail::read;
  ExperimentConfig c;
  check_keys(j, "config", {"scene", "waveform", "graph", "solver", "noise", "sweep", "theory", "output"});

  if (j.contains("scene")) {
    const auto& s = j["scene"];
    check_keys(s, "scene",
               {"grid_rows", "grid_cols", "voxel_spacing", "scatterers", "circle_radius", "tx_position"});
    read(s, "grid_rows", c.scene.grid_rows, "scene");
    read(s, "grid_cols", c.scene.grid_cols, "scene");
    read(s, "voxel_spacing", c.scene.voxel_spacing, "scene");
    if (s.contains("scatterers")) c.scene.scatterers = detail::scatterers_from_json(s["scatterers"], "scene.scatterers");
    read(s, "circle_radius", c.scene.circle_radius, "scene");
    read(s, "tx_position", c.scene.tx_position, "scene");
  }
  if (j.contains("waveform")) {
    const auto& w = j["waveform"];
    check_keys(w, "waveform", {"center_frequency", "bandwidth", "num_samples", "tx_gain_db", "rx_gain_db"});
    read(w, "center_frequency", c.waveform.center_frequency, "waveform");
    read(w, "bandwidth", c.waveform.bandwidth, "waveform");
    read(w, "num_samples", c.waveform.num_samples, "waveform");
    read(w, "tx_gain_db", c.waveform.tx_gain_db, "waveform");
    read(w, "rx_gain_db", c.waveform.rx_gain_db, "waveform");
  }
  if (j.contains("graph")) {
    const auto& g = j["graph"];
    check_keys(g, "graph", {"num_agents", "topology", "connection_prob", "base_degree", "seed"});
    read(g, "num_agents", c.graph.num_agents, "graph");
    read(g, "topology", c.graph.topology, "graph");
    read(g, "connection_prob", c.graph.connection_prob, "graph");
    read(g, "base_degree", c.graph.base_degree, "graph");
    read(g, "seed", c.graph.seed, "graph");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    check_keys(s, "solver",
               {"lambda1", "lambda2", "tau0", "eta_cap", "t_max", "mse_threshold", "stop_at_threshold",
                "stop_consensus", "record_stride", "threads"});
    read(s, "lambda1", c.solver.lambda1, "solver");
    read(s, "lambda2", c.solver.lambda2, "solver");
    read(s, "tau0", c.solver.tau0, "solver");
    read(s, "eta_cap", c.solver.eta_cap, "solver");
    read(s, "t_max", c.solver.t_max, "solver");
    read(s, "mse_threshold", c.solver.mse_threshold, "solver");
    read(s, "stop_at_threshold", c.solver.stop_at_threshold, "solver");
    if (s.contains("stop_consensus")) {
      if (s["stop_consensus"].is_string()) {
        if (s["stop_consensus"].get<std::string>() != "none")
          throw ConfigError("solver.stop_consensus: expected a number or \"none\"");
        c.solver.stop_consensus = std::numeric_limits<double>::infinity();
      } else {
        read(s, "stop_consensus", c.solver.stop_consensus, "solver");
      }
    }
    read(s, "record_stride", c.solver.record_stride, "solver");
    read(s, "threads", c.solver.threads, "solver");
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    check_keys(n, "noise", {"snr_db"});
    if (n.contains("snr_db")) {
      if (n["snr_db"].is_string()) {
        if (n["snr_db"].get<std::string>() != "none") throw ConfigError("noise.snr_db: expected a number or \"none\"");
        c.noise.snr_db.reset();
      } else {
        double v = 0.0;
        read(n, "snr_db", v, "noise");
        c.noise.snr_db = v;
      }
    }
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, "sweep", {"parameter", "values", "seeds_per_point", "parallel_runs"});
    read(s, "parameter", c.sweep.parameter, "sweep");
    read(s, "values", c.sweep.values, "sweep");
    read(s, "seeds_per_point", c.sweep.seeds_per_point, "sweep");
    read(s, "parallel_runs", c.sweep.parallel_runs, "sweep");
  }
  if (j.contains("theory")) {
    const auto& t = j["theory"];
    check_keys(t, "theory",
               {"grid_rows", "grid_cols", "voxel_spacing", "scatterers", "num_agents", "num_samples", "bandwidth",
                "delta1", "ric_trials", "samples", "relative_radius", "lipschitz_pairs", "tau_factor", "split",
                "seed"});
    read(t, "grid_rows", c.theory.grid_rows, "theory");
    read(t, "grid_cols", c.theory.grid_cols, "theory");
    read(t, "voxel_spacing", c.theory.voxel_spacing, "theory");
    if (t.contains("scatterers"))
      c.theory.scatterers = detail::scatterers_from_json(t["scatterers"], "theory.scatterers");
    read(t, "num_agents", c.theory.num_agents, "theory");
    read(t, "num_samples", c.theory.num_samples, "theory");
    read(t, "bandwidth", c.theory.bandwidth, "theory");
    if (t.contains("delta1")) {
      if (t["delta1"].is_string()) {
        if (t["delta1"].get<std::string>() != "estimate")
          throw ConfigError("theory.delta1: expected a number or \"estimate\"");
        c.theory.delta1.reset();
      } else {
        double v = 0.0;
        read(t, "delta1", v, "theory");
        c.theory.delta1 = v;
      }
    }
    read(t, "ric_trials", c.theory.ric_trials, "theory");
    read(t, "samples", c.theory.samples, "theory");
    read(t, "relative_radius", c.theory.relative_radius, "theory");
    read(t, "lipschitz_pairs", c.theory.lipschitz_pairs, "theory");
    read(t, "tau_factor", c.theory.tau_factor, "theory");
    read(t, "split", c.theory.split, "theory");
    read(t, "seed", c.theory.seed, "theory");
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    check_keys(o, "output", {"out_dir", "plots"});
    read(o, "out_dir", c.output.out_dir, "output");
    read(o, "plots", c.output.plots, "output");
  }
  c.validate();
  return c;
}

inline void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(scene.grid_rows > 0 && scene.grid_cols > 0, "scene: grid must be non-empty");
  need(scene.voxel_spacing > 0.0, "scene.voxel_spacing must be positive");
  need(scene.circle_radius > 0.0, "scene.circle_radius must be positive");
  need(scene.tx_position.size() == 3, "scene.tx_position must have three coordinates");
  for (const auto& s : scene.scatterers)
    need(s.row < scene.grid_rows && s.col < scene.grid_cols, "scene.scatterers: position outside the grid");
  need(waveform.center_frequency > 0.0, "waveform.center_frequency must be positive");
  need(waveform.bandwidth >= 0.0, "waveform.bandwidth must be nonnegative");
  need(waveform.num_samples >= 1, "waveform.num_samples must be >= 1");
  need(graph.num_agents >= 2, "graph.num_agents must be >= 2");
  need(graph.topology == "small_world" || graph.topology == "complete",
       "graph.topology must be \"small_world\" or \"complete\"");
  need(graph.connection_prob >= 0.0 && graph.connection_prob <= 1.0, "graph.connection_prob must lie in [0, 1]");
  need(graph.base_degree >= 2 && graph.base_degree % 2 == 0, "graph.base_degree must be even and >= 2");
  need(solver.lambda1 > 0.0 && solver.lambda2 > 0.0, "solver.lambda1 and solver.lambda2 must be positive");
  need(solver.tau0 > 0.0 && solver.eta_cap > 0.0, "solver.tau0 and solver.eta_cap must be positive");
  need(solver.mse_threshold > 0.0, "solver.mse_threshold must be positive");
  need(solver.stop_consensus >= 0.0, "solver.stop_consensus must be nonnegative");
  need(solver.threads >= 1, "solver.threads must be >= 1");
  need(sweep.parameter == "connection_prob" || sweep.parameter == "num_agents",
       "sweep.parameter must be \"connection_prob\" or \"num_agents\"");
  need(!sweep.values.empty(), "sweep.values must be non-empty");
  need(sweep.seeds_per_point >= 1, "sweep.seeds_per_point must be >= 1");
  need(sweep.parallel_runs >= 1, "sweep.parallel_runs must be >= 1");
  for (double v : sweep.values) {
    if (sweep.parameter == "connection_prob")
      need(v >= 0.0 && v <= 1.0, "sweep.values: connection probabilities must lie in [0, 1]");
    else
      need(v >= 2.0 && v == std::floor(v), "sweep.values: agent counts must be integers >= 2");
  }
  need(theory.grid_rows > 0 && theory.grid_cols > 0, "theory: grid must be non-empty");
  need(theory.num_agents >= 2 && theory.num_samples >= 1, "theory: need >= 2 agents and >= 1 sample");
  for (const auto& s : theory.scatterers)
    need(s.row < theory.grid_rows && s.col < theory.grid_cols, "theory.scatterers: position outside the grid");
  need(!theory.delta1 || (*theory.delta1 >= 0.0 && *theory.delta1 <= kMaxRic), "theory.delta1 must lie in [0, 0.214]");
  need(theory.ric_trials >= 1 && theory.samples >= 1 && theory.lipschitz_pairs >= 1, "theory: counts must be >= 1");
  need(theory.relative_radius > 0.0 && theory.tau_factor > 0.0, "theory: radius and tau_factor must be positive");
  need(theory.split > 0.0 && theory.split < 1.0, "theory.split must lie in (0, 1)");
  need(!output.out_dir.empty(), "output.out_dir must be non-empty");
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

inline std::string default_config_text() { return to_json(ExperimentConfig{}).dump(2) + "\n"; }

// Conversions into the library types.

inline GridShape grid_shape(const SceneConfig& s) { return {s.grid_rows, s.grid_cols}; }

inline Point3 tx_point(const SceneConfig& s) { return {s.tx_position[0], s.tx_position[1], s.tx_position[2]}; }

inline WaveformSpec waveform_spec(const WaveformConfig& w) {
  WaveformSpec spec;
  spec.center_frequency = w.center_frequency;
  spec.bandwidth = w.bandwidth;
  spec.num_samples = w.num_samples;
  spec.tx_gain_db = w.tx_gain_db;
  spec.rx_gain_db = w.rx_gain_db;
  return spec;
}

inline std::vector<PointScatterer> point_scatterers(const std::vector<ScattererSpec>& v) {
  std::vector<PointScatterer> out;
  for (const auto& s : v) out.push_back({s.row, s.col, Complex{s.re, s.im}});
  return out;
}

inline SolverConfig solver_config(const SolverBlock& b) {
  SolverConfig cfg;
  cfg.lambda1 = b.lambda1;
  cfg.lambda2 = b.lambda2;
  cfg.tau0 = b.tau0;
  cfg.eta_cap = b.eta_cap;
  cfg.t_max = b.t_max;
  cfg.mse_threshold = b.mse_threshold;
  cfg.record_stride = b.record_stride;
  cfg.threads = b.threads;
  if (b.stop_at_threshold) {
    cfg.stop_mse = b.mse_threshold;
    cfg.stop_consensus = b.stop_consensus;
  }
  return cfg;
}

}  // namespace dgwf
