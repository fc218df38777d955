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

#include "dgwf/config.hpp"
#include "dgwf/graph.hpp"
#include "dgwf/metrics.hpp"
#include "dgwf/plot.hpp"
#include "dgwf/problem.hpp"
#include "dgwf/random.hpp"
#include "dgwf/scene.hpp"
#include "dgwf/solvers.hpp"
#include "dgwf/theory.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dgwf {

// ---------------------------------------------------------------------------
// Small utilities
// ---------------------------------------------------------------------------

/// Progress messages; a null stream silences them.
struct Logger {
  std::ostream* os = nullptr;
  std::mutex* mu = nullptr;

  template <typename... Args>
  void operator()(const Args&... args) const {
    if (os == nullptr) return;
    std::ostringstream line;
    (line << ... << args);
    line << '\n';
    if (mu != nullptr) {
      std::lock_guard<std::mutex> lock(*mu);
      *os << line.str() << std::flush;
    } else {
      *os << line.str() << std::flush;
    }
  }
};

/// Shortest round-trip decimal formatting used for every CSV number.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string short_num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  return os;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  const double a = v[n / 2 - 1], b = v[n / 2];
  if (std::isinf(a) || std::isinf(b)) return b;
  return 0.5 * (a + b);
}

/// Median absolute deviation (unscaled).
inline double median_abs_deviation(const std::vector<double>& v) {
  const double m = median(v);
  if (!std::isfinite(m)) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - m));
  return median(dev);
}

/// Estimate multiplied by exp(-i theta*) so that it lines up with the truth.
inline CVector align_to(const CVector& estimate, const CVector& truth) {
  return estimate * std::polar(1.0, -alignment_phase(estimate, truth));
}

/// Reflectivity dump: header "row,col,re,im".
inline void write_image_csv(const CVector& values, GridShape shape, const std::filesystem::path& path) {
  require_dims(static_cast<std::size_t>(values.size()) == shape.size(), "write_image_csv: size mismatch");
  auto os = open_output(path);
  os << "row,col,re,im\n";
  for (std::size_t r = 0; r < shape.rows; ++r)
    for (std::size_t c = 0; c < shape.cols; ++c) {
      const Complex z = values(static_cast<Eigen::Index>(r * shape.cols + c));
      os << r << ',' << c << ',' << num(z.real()) << ',' << num(z.imag()) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

/// Per-run seeds fanned out from one run seed.
struct RunSeeds {
  std::uint64_t run = 0;
  std::uint64_t graph = 0;
  std::uint64_t noise = 0;
  std::uint64_t init = 0;

  static RunSeeds from(std::uint64_t run_seed) {
    return {run_seed, derive_seed(run_seed, Stream::Graph), derive_seed(run_seed, Stream::Noise),
            derive_seed(run_seed, Stream::Init)};
  }
};

/// Seed of replicate r in a sweep. Replicates share their seed across sweep
/// values, so neighbouring points see common random draws.
inline std::uint64_t replicate_seed(std::uint64_t master, std::size_t replicate) {
  return derive_seed(master, Stream::Trials, replicate);
}

struct Instance {
  SceneGeometry geometry;
  ReflectivityImage truth;
  InterferometricProblem problem;
  RunSeeds seeds;
};

inline AgentGraph make_graph(const std::string& topology, std::size_t n, double p, std::size_t base_degree,
                             std::uint64_t seed) {
  if (topology == "complete") return complete_graph(n);
  if (topology == "small_world") return small_world(n, p, base_degree, seed);
  throw ConfigError("unknown topology " + topology);
}

/// Builds geometry, scene, graph, and (optionally noisy) measurements.
inline Instance build_instance(const ExperimentConfig& cfg, std::size_t num_agents, double connection_prob,
                               const std::string& topology, const RunSeeds& seeds) {
  const GridShape shape = grid_shape(cfg.scene);
  SceneGeometry geom =
      make_circular_geometry(shape, cfg.scene.voxel_spacing, num_agents, cfg.scene.circle_radius, tx_point(cfg.scene));
  auto sampling = build_all_sampling(geom, waveform_spec(cfg.waveform));
  ReflectivityImage truth = point_scatterer_scene(shape, cfg.scene.voxel_spacing, point_scatterers(cfg.scene.scatterers));
  AgentGraph graph = make_graph(topology, num_agents, connection_prob, cfg.graph.base_degree, seeds.graph);
  MeasurementSet m = synthesize_measurements(sampling, truth.values, graph);
  if (cfg.noise.snr_db) m = add_noise(m, *cfg.noise.snr_db, seeds.noise);
  InterferometricProblem problem(std::move(sampling), std::move(m), std::move(graph));
  return Instance{std::move(geom), std::move(truth), std::move(problem), seeds};
}

inline Instance build_instance(const ExperimentConfig& cfg, const RunSeeds& seeds) {
  return build_instance(cfg, cfg.graph.num_agents, cfg.graph.connection_prob, cfg.graph.topology, seeds);
}

inline SpectralInit initialize(const Instance& inst) {
  PowerIterationOptions opt;
  opt.seed = inst.seeds.init;
  return spectral_initialize(inst.problem, opt);
}

// ---------------------------------------------------------------------------
// Solver runs
// ---------------------------------------------------------------------------

struct SolverRun {
  std::string run_id;
  /// "dgwf", "gwf", or "gwf_cg".
  std::string solver;
  IterationTrace trace;
  bool diverged = false;
  std::size_t diverged_at = 0;
  double wall_seconds = 0.0;

  std::optional<std::size_t> threshold() const { return diverged ? std::nullopt : trace.threshold_iteration; }
  double final_mse() const {
    return diverged || trace.records.empty() ? std::numeric_limits<double>::infinity() : trace.last().mse;
  }
  double final_consensus() const {
    return diverged || trace.records.empty() ? std::numeric_limits<double>::infinity() : trace.last().consensus_error;
  }
};

/// Runs one solver; divergence is recorded instead of propagated.
inline SolverRun run_solver(const std::string& solver, const InterferometricProblem& p, const CVector& x0,
                            const SolverConfig& scfg, const CVector& truth, std::string run_id) {
  SolverRun out;
  out.run_id = std::move(run_id);
  out.solver = solver;
  const auto start = std::chrono::steady_clock::now();
  try {
    out.trace = solver == "dgwf" ? run_dgwf(p, x0, scfg, &truth) : run_gwf(p, x0, scfg, &truth);
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.diverged_at = e.iteration();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Trace rows: run_id,seed,sweep_value,iteration,mse,consensus_error,eta.
inline void write_run_trace(const SolverRun& run, std::uint64_t seed, const std::string& sweep_value,
                            const std::filesystem::path& path) {
  auto os = open_output(path);
  os << "run_id,seed,sweep_value,iteration,mse,consensus_error,eta\n";
  for (const auto& r : run.trace.records)
    os << run.run_id << ',' << seed << ',' << sweep_value << ',' << r.t << ',' << num(r.mse) << ','
       << num(r.consensus_error) << ',' << num(r.eta) << '\n';
}

inline std::string threshold_text(const std::optional<std::size_t>& t) {
  return t ? std::to_string(*t) : std::string("not_reached");
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateResult {
  SpectralInit init;
  double init_mse = 0.0;
  SolverRun dgwf;
  SolverRun gwf;
};

/// One DGWF run and one GWF run on the configured instance. Everything except
/// timing.csv is a deterministic function of the configuration.
inline SimulateResult simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                               const Logger& log = {}) {
  const RunSeeds seeds = RunSeeds::from(cfg.graph.seed);
  const Instance inst = build_instance(cfg, seeds);
  log("simulate: N=", inst.problem.num_agents(), " K=", inst.problem.num_voxels(), " S=",
      inst.problem.num_samples(), " edges=", inst.problem.graph().num_edges());
  SimulateResult res;
  res.init = initialize(inst);
  if (res.init.clamped) log("warning: leading eigenvalue of the backprojection is negative; x0 set to zero");
  res.init_mse = mse_aligned(res.init.x0, inst.truth.values);
  log("spectral init: lambda0=", res.init.eigenvalue, " mse=", res.init_mse);

  const SolverConfig scfg = solver_config(cfg.solver);
  res.dgwf = run_solver("dgwf", inst.problem, res.init.x0, scfg, inst.truth.values, "dgwf");
  if (res.dgwf.diverged) throw DivergenceError(res.dgwf.diverged_at);
  log("dgwf: iterations=", res.dgwf.trace.iterations_run, " threshold=", threshold_text(res.dgwf.threshold()),
      " final mse=", res.dgwf.final_mse(), " consensus=", res.dgwf.final_consensus());
  res.gwf = run_solver("gwf", inst.problem, res.init.x0, scfg, inst.truth.values, "gwf");
  if (res.gwf.diverged) throw DivergenceError(res.gwf.diverged_at);
  log("gwf: iterations=", res.gwf.trace.iterations_run, " threshold=", threshold_text(res.gwf.threshold()),
      " final mse=", res.gwf.final_mse());

  std::filesystem::create_directories(out_dir);
  for (const SolverRun* run : {&res.dgwf, &res.gwf})
    write_run_trace(*run, seeds.run, "", out_dir / ("trace_" + run->solver + ".csv"));
  {
    auto os = open_output(out_dir / "summary.csv");
    os << "run_id,seed,num_agents,connection_prob,iterations_run,threshold_iteration,final_mse,final_consensus_error\n";
    for (const SolverRun* run : {&res.dgwf, &res.gwf})
      os << run->run_id << ',' << seeds.run << ',' << inst.problem.num_agents() << ','
         << num(cfg.graph.connection_prob) << ',' << run->trace.iterations_run << ','
         << threshold_text(run->threshold()) << ',' << num(run->final_mse()) << ',' << num(run->final_consensus())
         << '\n';
  }
  {
    auto os = open_output(out_dir / "timing.csv");
    os << "run_id,wall_time_s\n";
    for (const SolverRun* run : {&res.dgwf, &res.gwf}) os << run->run_id << ',' << num(run->wall_seconds) << '\n';
  }
  const GridShape shape = inst.truth.grid_shape;
  write_image_csv(inst.truth.values, shape, out_dir / "truth.csv");
  write_image_csv(align_to(res.init.x0, inst.truth.values), shape, out_dir / "reconstruction_init.csv");
  write_image_csv(align_to(res.dgwf.trace.final_estimate(), inst.truth.values), shape,
                  out_dir / "reconstruction_dgwf.csv");
  write_image_csv(align_to(res.gwf.trace.final_estimate(), inst.truth.values), shape,
                  out_dir / "reconstruction_gwf.csv");
  write_edge_list(inst.problem.graph(), (out_dir / "graph.edges").string());

  if (cfg.output.plots) {
    plot::Figure mse{"Aligned MSE", "iteration", "MSE", true, {}};
    plot::Figure cons{"Consensus error (DGWF)", "iteration", "consensus error", true, {}};
    for (const SolverRun* run : {&res.dgwf, &res.gwf}) {
      plot::Series s{run->solver, {}, {}};
      for (const auto& r : run->trace.records) {
        s.x.push_back(static_cast<double>(r.t));
        s.y.push_back(r.mse);
      }
      mse.series.push_back(std::move(s));
    }
    plot::Series c{"dgwf", {}, {}};
    for (const auto& r : res.dgwf.trace.records) {
      c.x.push_back(static_cast<double>(r.t));
      c.y.push_back(r.consensus_error);
    }
    cons.series.push_back(std::move(c));
    if (!plot::write_svg(mse, (out_dir / "mse.svg").string())) log("warning: could not write mse.svg");
    if (!plot::write_svg(cons, (out_dir / "consensus.svg").string())) log("warning: could not write consensus.svg");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  double value = 0.0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::string solver;
  std::optional<std::size_t> iterations;
  std::size_t iterations_run = 0;
  double final_mse = 0.0;
  double final_consensus = 0.0;
  bool diverged = false;
  double wall_seconds = 0.0;
};

/// Per (value, solver) aggregate over replicates. Runs that never reach the
/// threshold count as +inf iterations.
struct SweepPoint {
  double value = 0.0;
  std::string solver;
  double median_iterations = 0.0;
  double mad_iterations = 0.0;
  double median_final_mse = 0.0;
  double mad_final_mse = 0.0;
  std::size_t reached = 0;
  std::size_t runs = 0;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepRow> rows;
  std::vector<SweepPoint> points;

  const SweepPoint& point(double value, const std::string& solver) const {
    for (const auto& p : points)
      if (p.value == value && p.solver == solver) return p;
    throw OutOfRange("no sweep point for " + solver + " at " + num(value));
  }
};

namespace detail {

template <typename Fn>
void run_jobs(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < count; k = next++) fn(k);
  };
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline SweepRow to_row(const SolverRun& run, double value, std::size_t replicate, std::uint64_t seed) {
  SweepRow r;
  r.value = value;
  r.replicate = replicate;
  r.seed = seed;
  r.solver = run.solver;
  r.iterations = run.threshold();
  r.iterations_run = run.trace.iterations_run;
  r.final_mse = run.final_mse();
  r.final_consensus = run.final_consensus();
  r.diverged = run.diverged;
  r.wall_seconds = run.wall_seconds;
  return r;
}

inline std::vector<SweepPoint> aggregate(const std::vector<SweepRow>& rows, const std::vector<double>& values,
                                         const std::vector<std::string>& solvers) {
  std::vector<SweepPoint> out;
  for (double v : values)
    for (const auto& s : solvers) {
      std::vector<double> its, mses;
      SweepPoint p;
      p.value = v;
      p.solver = s;
      for (const auto& r : rows) {
        if (r.value != v || r.solver != s) continue;
        its.push_back(r.iterations ? static_cast<double>(*r.iterations) : std::numeric_limits<double>::infinity());
        mses.push_back(r.final_mse);
        p.reached += r.iterations ? 1 : 0;
        ++p.runs;
      }
      if (p.runs == 0) continue;
      p.median_iterations = median(its);
      p.mad_iterations = median_abs_deviation(its);
      p.median_final_mse = median(mses);
      p.mad_final_mse = median_abs_deviation(mses);
      out.push_back(p);
    }
  return out;
}

inline void write_sweep_csvs(const SweepResult& res, const std::filesystem::path& out_dir, const std::string& stem) {
  {
    auto os = open_output(out_dir / (stem + "_summary.csv"));
    os << "parameter,value,replicate,seed,solver,iterations_to_threshold,iterations_run,final_mse,"
          "final_consensus_error,diverged\n";
    for (const auto& r : res.rows)
      os << res.parameter << ',' << num(r.value) << ',' << r.replicate << ',' << r.seed << ',' << r.solver << ','
         << threshold_text(r.iterations) << ',' << r.iterations_run << ',' << num(r.final_mse) << ','
         << num(r.final_consensus) << ',' << (r.diverged ? 1 : 0) << '\n';
  }
  {
    auto os = open_output(out_dir / (stem + "_medians.csv"));
    os << "parameter,value,solver,runs,reached,median_iterations,mad_iterations,median_final_mse,mad_final_mse\n";
    for (const auto& p : res.points)
      os << res.parameter << ',' << num(p.value) << ',' << p.solver << ',' << p.runs << ',' << p.reached << ','
         << num(p.median_iterations) << ',' << num(p.mad_iterations) << ',' << num(p.median_final_mse) << ','
         << num(p.mad_final_mse) << '\n';
  }
  {
    auto os = open_output(out_dir / (stem + "_timing.csv"));
    os << "value,replicate,solver,wall_time_s\n";
    for (const auto& r : res.rows)
      os << num(r.value) << ',' << r.replicate << ',' << r.solver << ',' << num(r.wall_seconds) << '\n';
  }
}

inline plot::Figure sweep_figure(const SweepResult& res, const std::vector<std::string>& solvers, bool iterations,
                                 std::string title, std::string x_label) {
  plot::Figure fig{std::move(title), std::move(x_label), iterations ? "median iterations to threshold" : "median final MSE",
                   !iterations, {}};
  for (const auto& s : solvers) {
    plot::Series series{s, {}, {}};
    for (const auto& p : res.points)
      if (p.solver == s) {
        series.x.push_back(p.value);
        series.y.push_back(iterations ? p.median_iterations : p.median_final_mse);
      }
    fig.series.push_back(std::move(series));
  }
  return fig;
}

inline std::string run_file(const std::string& parameter, double value, std::size_t replicate,
                            const std::string& solver) {
  return parameter + "_" + short_num(value) + "_rep" + std::to_string(replicate) + "_" + solver + ".csv";
}

}  // namespace detail

/// Connectivity sweep: for every connection probability and replicate, DGWF and
/// GWF on the small-world graph plus GWF on the complete graph. The complete
/// graph does not depend on the probability, so it is solved once per
/// replicate and reported at every value.
inline SweepResult sweep_connectivity(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                      const Logger& log = {}) {
  if (cfg.sweep.parameter != "connection_prob")
    throw ConfigError("sweep-connectivity needs sweep.parameter = \"connection_prob\"");
  const auto& values = cfg.sweep.values;
  const std::size_t reps = cfg.sweep.seeds_per_point;
  const SolverConfig scfg = solver_config(cfg.solver);
  const std::size_t n = cfg.graph.num_agents;

  // Job k < reps: complete-graph GWF for replicate k; then (value, replicate) pairs.
  const std::size_t jobs = reps + values.size() * reps;
  std::vector<std::vector<SolverRun>> results(jobs);
  std::vector<std::string> errors(jobs);
  detail::run_jobs(jobs, cfg.sweep.parallel_runs, [&](std::size_t k) {
    try {
      if (k < reps) {
        const RunSeeds seeds = RunSeeds::from(replicate_seed(cfg.graph.seed, k));
        const Instance inst = build_instance(cfg, n, 1.0, "complete", seeds);
        const SpectralInit init = initialize(inst);
        results[k].push_back(run_solver("gwf", inst.problem, init.x0, scfg, inst.truth.values, "gwf_cg"));
        results[k].back().solver = "gwf_cg";
        log("gwf_cg rep ", k, ": ", threshold_text(results[k].back().threshold()));
        return;
      }
      const std::size_t vi = (k - reps) / reps, r = (k - reps) % reps;
      const RunSeeds seeds = RunSeeds::from(replicate_seed(cfg.graph.seed, r));
      const Instance inst = build_instance(cfg, n, values[vi], "small_world", seeds);
      const SpectralInit init = initialize(inst);
      for (const char* solver : {"dgwf", "gwf"}) {
        results[k].push_back(run_solver(solver, inst.problem, init.x0, scfg, inst.truth.values, solver));
        log(solver, " p=", values[vi], " rep ", r, ": ", threshold_text(results[k].back().threshold()));
      }
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw Error("sweep-connectivity: " + e);

  SweepResult res;
  res.parameter = "connection_prob";
  for (std::size_t vi = 0; vi < values.size(); ++vi)
    for (std::size_t r = 0; r < reps; ++r) {
      const std::uint64_t seed = replicate_seed(cfg.graph.seed, r);
      for (const auto& run : results[reps + vi * reps + r]) {
        res.rows.push_back(detail::to_row(run, values[vi], r, seed));
        write_run_trace(run, seed, num(values[vi]), out_dir / "runs" / detail::run_file(res.parameter, values[vi], r, run.solver));
      }
      res.rows.push_back(detail::to_row(results[r].front(), values[vi], r, seed));
    }
  for (std::size_t r = 0; r < reps; ++r)
    write_run_trace(results[r].front(), replicate_seed(cfg.graph.seed, r), "",
                    out_dir / "runs" / ("complete_rep" + std::to_string(r) + "_gwf_cg.csv"));
  const std::vector<std::string> solvers = {"dgwf", "gwf", "gwf_cg"};
  res.points = detail::aggregate(res.rows, values, solvers);
  detail::write_sweep_csvs(res, out_dir, "connectivity");
  if (cfg.output.plots &&
      !plot::write_svg(detail::sweep_figure(res, solvers, true, "Iterations to MSE threshold", "connection probability"),
                       (out_dir / "connectivity.svg").string()))
    log("warning: could not write connectivity.svg");
  return res;
}

/// Receiver-count sweep: geometry, graph, and data are rebuilt for every N.
inline SweepResult sweep_receivers(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                   const Logger& log = {}) {
  if (cfg.sweep.parameter != "num_agents") throw ConfigError("sweep-receivers needs sweep.parameter = \"num_agents\"");
  const auto& values = cfg.sweep.values;
  const std::size_t reps = cfg.sweep.seeds_per_point;
  const SolverConfig scfg = solver_config(cfg.solver);

  const std::size_t jobs = values.size() * reps;
  std::vector<std::vector<SolverRun>> results(jobs);
  std::vector<std::string> errors(jobs);
  detail::run_jobs(jobs, cfg.sweep.parallel_runs, [&](std::size_t k) {
    try {
      const std::size_t vi = k / reps, r = k % reps;
      const auto n = static_cast<std::size_t>(values[vi]);
      const RunSeeds seeds = RunSeeds::from(replicate_seed(cfg.graph.seed, r));
      const Instance inst = build_instance(cfg, n, cfg.graph.connection_prob, cfg.graph.topology, seeds);
      const SpectralInit init = initialize(inst);
      for (const char* solver : {"dgwf", "gwf"}) {
        results[k].push_back(run_solver(solver, inst.problem, init.x0, scfg, inst.truth.values, solver));
        log(solver, " N=", n, " rep ", r, ": final mse ", results[k].back().final_mse());
      }
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw Error("sweep-receivers: " + e);

  SweepResult res;
  res.parameter = "num_agents";
  for (std::size_t vi = 0; vi < values.size(); ++vi)
    for (std::size_t r = 0; r < reps; ++r) {
      const std::uint64_t seed = replicate_seed(cfg.graph.seed, r);
      for (const auto& run : results[vi * reps + r]) {
        res.rows.push_back(detail::to_row(run, values[vi], r, seed));
        write_run_trace(run, seed, num(values[vi]), out_dir / "runs" / detail::run_file(res.parameter, values[vi], r, run.solver));
      }
    }
  const std::vector<std::string> solvers = {"dgwf", "gwf"};
  res.points = detail::aggregate(res.rows, values, solvers);
  detail::write_sweep_csvs(res, out_dir, "receivers");
  if (cfg.output.plots &&
      !plot::write_svg(detail::sweep_figure(res, solvers, false, "Final MSE after the iteration budget", "receivers N"),
                       (out_dir / "receivers.svg").string()))
    log("warning: could not write receivers.svg");
  return res;
}

// ---------------------------------------------------------------------------
// Theory report
// ---------------------------------------------------------------------------

struct TheoryInstance {
  ReflectivityImage truth;
  InterferometricProblem problem;
  /// Factor applied to |F(X)|^2 / |X|_F^2 (via a^s -> scale^(1/4) a^s).
  double operator_scale = 1.0;
  RicEstimate raw_ric;
};

/// Noiseless downscaled instance on the complete graph. Sampling vectors are
/// rescaled so that the sampled rank-1 energy ratios are centred on 1, the
/// scale at which the estimated restricted isometry constant is smallest.
inline TheoryInstance build_theory_instance(const ExperimentConfig& cfg) {
  const auto& t = cfg.theory;
  const GridShape shape{t.grid_rows, t.grid_cols};
  SceneGeometry geom = make_circular_geometry(shape, t.voxel_spacing, t.num_agents, cfg.scene.circle_radius,
                                              tx_point(cfg.scene));
  WaveformSpec w = waveform_spec(cfg.waveform);
  w.num_samples = t.num_samples;
  w.bandwidth = t.bandwidth;
  auto sampling = build_all_sampling(geom, w);
  ReflectivityImage truth = point_scatterer_scene(shape, t.voxel_spacing, point_scatterers(t.scatterers));
  AgentGraph graph = complete_graph(t.num_agents);

  const InterferometricProblem raw = make_problem(sampling, truth.values, graph);
  const RicEstimate est = estimate_ric_rank1(lifted_operator(raw), t.ric_trials, t.seed);
  const double scale = 2.0 / (est.min_ratio + est.max_ratio);
  const double amp = std::pow(scale, 0.25);
  for (auto& a : sampling) a.rows *= amp;
  InterferometricProblem problem = make_problem(std::move(sampling), truth.values, std::move(graph));
  return TheoryInstance{std::move(truth), std::move(problem), scale, est};
}

struct TheoryReport {
  std::size_t K = 0;
  std::size_t num_agents = 0;
  double operator_scale = 1.0;
  RicEstimate ric;
  double delta_hat = 0.0;
  double delta_used = 0.0;
  bool delta_clamped = false;
  bool delta_from_config = false;
  RicConstants constants;
  double norm_xstar = 0.0;
  double norm_x0 = 0.0;
  double tau = 0.0;
  double lipschitz = 0.0;
  LipschitzReport lipschitz_check;
  CheckReport rc;
  CheckReport rc_halved_alpha;
  double pl_mu = 0.0;
  CheckReport pl;
};

inline std::vector<std::pair<std::string, std::string>> report_items(const TheoryReport& r) {
  return {{"K", std::to_string(r.K)},
          {"num_agents", std::to_string(r.num_agents)},
          {"operator_scale", num(r.operator_scale)},
          {"ric_trials", std::to_string(r.ric.trials)},
          {"ric_min_ratio", num(r.ric.min_ratio)},
          {"ric_max_ratio", num(r.ric.max_ratio)},
          {"delta1_estimate", num(r.delta_hat)},
          {"delta1_used", num(r.delta_used)},
          {"delta1_clamped", r.delta_clamped ? "1" : "0"},
          {"delta1_from_config", r.delta_from_config ? "1" : "0"},
          {"epsilon", num(r.constants.epsilon)},
          {"delta2", num(r.constants.delta2)},
          {"c", num(r.constants.c)},
          {"h", num(r.constants.h)},
          {"norm_xstar", num(r.norm_xstar)},
          {"alpha", num(r.constants.alpha)},
          {"beta", num(r.constants.beta)},
          {"norm_x0", num(r.norm_x0)},
          {"tau", num(r.tau)},
          {"lipschitz_bound", num(r.lipschitz)},
          {"lipschitz_pairs", std::to_string(r.lipschitz_check.pairs)},
          {"lipschitz_max_ratio", num(r.lipschitz_check.max_ratio)},
          {"lipschitz_violations", std::to_string(r.lipschitz_check.violations)},
          {"rc_samples", std::to_string(r.rc.samples)},
          {"rc_violations", std::to_string(r.rc.violations)},
          {"rc_worst_margin", num(r.rc.worst_margin)},
          {"rc_halved_alpha_violations", std::to_string(r.rc_halved_alpha.violations)},
          {"rc_halved_alpha_worst_margin", num(r.rc_halved_alpha.worst_margin)},
          {"pl_mu", num(r.pl_mu)},
          {"pl_samples", std::to_string(r.pl.samples)},
          {"pl_violations", std::to_string(r.pl.violations)},
          {"pl_worst_margin", num(r.pl.worst_margin)}};
}

/// Constants, Lipschitz bound with its Monte Carlo check, and sampled RC / PL
/// checks on the downscaled instance. Written to theory_report.csv.
inline TheoryReport theory_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                  const Logger& log = {}) {
  const auto& t = cfg.theory;
  const TheoryInstance inst = build_theory_instance(cfg);
  TheoryReport rep;
  rep.K = inst.problem.num_voxels();
  rep.num_agents = inst.problem.num_agents();
  rep.operator_scale = inst.operator_scale;
  rep.ric = estimate_ric_rank1(lifted_operator(inst.problem), t.ric_trials, t.seed);
  rep.delta_hat = rep.ric.delta_lower;
  if (t.delta1) {
    rep.delta_used = *t.delta1;
    rep.delta_from_config = true;
  } else {
    rep.delta_used = std::min(rep.delta_hat, kMaxRic);
    rep.delta_clamped = rep.delta_hat > kMaxRic;
  }
  const RVector xstar = to_real(inst.truth.values);
  rep.norm_xstar = xstar.norm();
  rep.constants = ric_constants(rep.delta_used, rep.norm_xstar, t.split);
  log("theory: K=", rep.K, " delta1 estimate=", rep.delta_hat, " used=", rep.delta_used, " h=", rep.constants.h);

  PowerIterationOptions popt;
  popt.seed = derive_seed(t.seed, Stream::Init);
  rep.norm_x0 = spectral_initialize(inst.problem, popt).x0.norm();
  rep.tau = t.tau_factor * rep.norm_x0 * rep.norm_x0;
  const RealLift lift = real_lift_global(inst.problem);
  const RealFunction f = make_real_function(lift);
  rep.lipschitz = lipschitz_bound(lift, rep.tau);
  rep.lipschitz_check = check_lipschitz(f, 2 * rep.K, rep.tau, rep.lipschitz, t.lipschitz_pairs, t.seed);
  log("lipschitz: bound=", rep.lipschitz, " max observed=", rep.lipschitz_check.max_ratio,
      " violations=", rep.lipschitz_check.violations);

  SampleOptions opt;
  opt.samples = t.samples;
  opt.relative_radius = t.relative_radius;
  opt.seed = t.seed;
  rep.rc = check_rc(f, xstar, rep.constants.alpha, rep.constants.beta, opt);
  rep.rc_halved_alpha = check_rc(f, xstar, 0.5 * rep.constants.alpha, rep.constants.beta, opt);
  rep.pl_mu = pl_constant(rep.constants.beta, rep.lipschitz);
  rep.pl = check_pl(f, 0.0, rep.pl_mu, xstar, opt);
  log("rc violations=", rep.rc.violations, " (halved alpha: ", rep.rc_halved_alpha.violations,
      ") pl violations=", rep.pl.violations);

  auto os = open_output(out_dir / "theory_report.csv");
  os << "quantity,value\n";
  for (const auto& [k, v] : report_items(rep)) os << k << ',' << v << '\n';
  return rep;
}

// ---------------------------------------------------------------------------
// init-only
// ---------------------------------------------------------------------------

struct InitReport {
  SpectralInit init;
  double mse = 0.0;
  double relative_error = 0.0;
  double norm_truth = 0.0;
};

inline InitReport init_report(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                              const Logger& log = {}) {
  const Instance inst = build_instance(cfg, RunSeeds::from(cfg.graph.seed));
  InitReport rep;
  rep.init = initialize(inst);
  if (rep.init.clamped) log("warning: leading eigenvalue of the backprojection is negative; x0 set to zero");
  const CVector aligned = align_to(rep.init.x0, inst.truth.values);
  rep.mse = mse_aligned(rep.init.x0, inst.truth.values);
  rep.norm_truth = inst.truth.values.norm();
  rep.relative_error = rep.norm_truth > 0.0 ? (aligned - inst.truth.values).norm() / rep.norm_truth
                                            : std::numeric_limits<double>::quiet_NaN();
  log("init: lambda0=", rep.init.eigenvalue, " |x0|=", rep.init.x0.norm(), " |rho|=", rep.norm_truth,
      " mse=", rep.mse, " relative error=", rep.relative_error);
  auto os = open_output(out_dir / "init_report.csv");
  os << "quantity,value\n"
     << "eigenvalue," << num(rep.init.eigenvalue) << '\n'
     << "power_iterations," << rep.init.iterations << '\n'
     << "clamped," << (rep.init.clamped ? 1 : 0) << '\n'
     << "norm_x0," << num(rep.init.x0.norm()) << '\n'
     << "norm_truth," << num(rep.norm_truth) << '\n'
     << "mse," << num(rep.mse) << '\n'
     << "relative_error," << num(rep.relative_error) << '\n';
  write_image_csv(aligned, inst.truth.grid_shape, out_dir / "reconstruction_init.csv");
  write_image_csv(inst.truth.values, inst.truth.grid_shape, out_dir / "truth.csv");
  return rep;
}

}  // namespace dgwf
