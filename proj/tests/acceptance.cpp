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

// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
// Usage: dgwf_acceptance [--out-dir DIR] [criterion numbers...]

#include "dgwf/dgwf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace dgwf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string iters(const std::optional<std::size_t>& t) { return t ? std::to_string(*t) : "not reached"; }

ExperimentConfig noiseless_config() {
  ExperimentConfig cfg;
  cfg.noise.snr_db.reset();
  return cfg;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

CVector random_in_ball(std::size_t K, double radius, Rng& rng) {
  const RVector r = detail::sample_ball(RVector::Zero(static_cast<Eigen::Index>(2 * K)), radius, rng);
  return from_real(r);
}

struct TheoryFixture {
  TheoryInstance inst;
  RealLift lift;
  double tau = 0.0;
};

TheoryFixture theory_fixture() {
  const ExperimentConfig cfg;
  TheoryFixture fx{build_theory_instance(cfg), {}, 0.0};
  PowerIterationOptions popt;
  popt.seed = derive_seed(cfg.theory.seed, Stream::Init);
  const double n0 = spectral_initialize(fx.inst.problem, popt).x0.norm();
  fx.tau = cfg.theory.tau_factor * n0 * n0;
  fx.lift = real_lift_global(fx.inst.problem);
  return fx;
}

// 1. Finite-difference gradient check and constant complex/real gradient ratio.
Outcome criterion1() {
  const TheoryFixture fx = theory_fixture();
  const auto& p = fx.inst.problem;
  const std::size_t K = p.num_voxels();
  Rng rng = make_rng(101, Stream::Trials);
  double worst_fd = 0.0;
  double worst_fit = 0.0;
  std::vector<double> ratios;
  for (int k = 0; k < 50; ++k) {
    const CVector x = random_in_ball(K, std::sqrt(fx.tau), rng);
    const RVector xt = to_real(x);
    const RVector g = real_gradient(xt, fx.lift);
    const double h = 1e-6 * (1.0 + xt.norm());
    RVector fd(xt.size());
    for (Eigen::Index c = 0; c < xt.size(); ++c) {
      RVector a = xt, b = xt;
      a(c) += h;
      b(c) -= h;
      fd(c) = (real_objective(a, fx.lift) - real_objective(b, fx.lift)) / (2.0 * h);
    }
    worst_fd = std::max(worst_fd, (fd - g).norm() / g.norm());
    const CVector mapped = from_real(g);
    const CVector wg = global_wirtinger_gradient(p, x);
    const double c = std::real(wg.dot(mapped)) / wg.squaredNorm();
    ratios.push_back(c);
    worst_fit = std::max(worst_fit, (mapped - c * wg).norm() / mapped.norm());
  }
  double mean = 0.0;
  for (double c : ratios) mean += c;
  mean /= static_cast<double>(ratios.size());
  double var = 0.0;
  for (double c : ratios) var += (c - mean) * (c - mean);
  var /= static_cast<double>(ratios.size());
  const bool pass = worst_fd <= 1e-6 && var <= 1e-10 && mean > 0.0 && worst_fit <= 1e-10;
  return {pass, "max FD rel err " + fmt(worst_fd) + ", ratio mean " + fmt(mean) + " var " + fmt(var) +
                    ", max residual of fit " + fmt(worst_fit)};
}

// 2. Complex and real objectives agree.
Outcome criterion2() {
  const TheoryFixture fx = theory_fixture();
  const auto& p = fx.inst.problem;
  Rng rng = make_rng(102, Stream::Trials);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const CVector x = random_in_ball(p.num_voxels(), std::sqrt(fx.tau), rng);
    const double fc = global_objective(p, x);
    const double fr = real_objective(to_real(x), fx.lift);
    worst = std::max(worst, std::abs(fc - fr) / std::abs(fc));
  }
  return {worst <= 1e-12, "max relative difference " + fmt(worst) + " over 100 points"};
}

// 3. Per-agent rounds equal stacked iterations; dual sum stays zero.
Outcome criterion3() {
  const ExperimentConfig cfg = noiseless_config();
  const Instance inst = build_instance(cfg, RunSeeds::from(cfg.graph.seed));
  const auto& p = inst.problem;
  const CVector x0 = initialize(inst).x0;
  const SolverConfig scfg = solver_config(cfg.solver);
  const double nx0 = x0.norm();
  const auto N = p.num_agents();
  std::vector<AgentState> states = broadcast_init(x0, N);
  CVector xs = stack_states(states), vs = stack_states(states, true);
  double worst = 0.0, worst_dual = 0.0;
  const auto K = static_cast<Eigen::Index>(p.num_voxels());
  for (std::size_t t = 0; t < 100; ++t) {
    states = dgwf_step(p, states, scfg, t, nx0);
    std::tie(xs, vs) = stacked_step(p, xs, vs, scfg, t, nx0);
    worst = std::max({worst, (stack_states(states) - xs).cwiseAbs().maxCoeff(),
                      (stack_states(states, true) - vs).cwiseAbs().maxCoeff()});
    CVector sum = CVector::Zero(K);
    for (const auto& s : states) sum += s.v;
    worst_dual = std::max(worst_dual, sum.norm());
  }
  const double scale = x0.cwiseAbs().maxCoeff();
  const bool pass = worst <= 1e-12 * std::max(1.0, scale) && worst_dual <= 1e-10 * static_cast<double>(N);
  return {pass, "max coordinate difference " + fmt(worst) + " (max |x0_k| " + fmt(scale) + "), max ||sum v|| " +
                    fmt(worst_dual)};
}

struct FullScaleRun {
  IterationTrace dgwf;
  IterationTrace gwf;
  bool done = false;
};

FullScaleRun& full_scale_run() {
  static FullScaleRun run;
  if (run.done) return run;
  const ExperimentConfig cfg = noiseless_config();
  const Instance inst = build_instance(cfg, RunSeeds::from(cfg.graph.seed));
  const CVector x0 = initialize(inst).x0;
  SolverConfig scfg = solver_config(cfg.solver);
  scfg.t_max = 100000;
  scfg.stop_mse = 1e-5;
  scfg.stop_consensus = 1e-6;
  scfg.track_lyapunov = true;
  scfg.threads = worker_count();
  run.dgwf = run_dgwf(inst.problem, x0, scfg, &inst.truth.values);
  scfg.track_lyapunov = false;
  scfg.stop_consensus = std::numeric_limits<double>::infinity();
  run.gwf = run_gwf(inst.problem, x0, scfg, &inst.truth.values);
  run.done = true;
  return run;
}

// 4. Noiseless full-size convergence of DGWF and GWF.
Outcome criterion4() {
  const auto& r = full_scale_run();
  const auto td = r.dgwf.threshold_iteration;
  const auto tg = r.gwf.threshold_iteration;
  const double cons = r.dgwf.last().consensus_error;
  const bool pass = td && *td <= 100000 && cons <= 1e-6 && tg && *tg < *td;
  return {pass, "DGWF reaches 1e-5 at " + iters(td) + " (final MSE " + fmt(r.dgwf.last().mse) + ", consensus " +
                    fmt(cons) + " at t=" + std::to_string(r.dgwf.iterations_run) + "); GWF at " + iters(tg)};
}

// 9. Log-linear decay of the Lyapunov quantity over the second half before the threshold.
Outcome criterion9() {
  const auto& r = full_scale_run();
  if (!r.dgwf.threshold_iteration) return {false, "threshold not reached"};
  const double T = static_cast<double>(*r.dgwf.threshold_iteration);
  std::vector<double> ts, ys;
  for (const auto& rec : r.dgwf.records) {
    const double t = static_cast<double>(rec.t);
    if (t >= T / 2.0 && t <= T && rec.lyapunov > 0.0) {
      ts.push_back(t);
      ys.push_back(std::log(rec.lyapunov));
    }
  }
  const double n = static_cast<double>(ts.size());
  if (n < 3) return {false, "too few records"};
  double mt = 0, my = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    mt += ts[k];
    my += ys[k];
  }
  mt /= n;
  my /= n;
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    stt += (ts[k] - mt) * (ts[k] - mt);
    sty += (ts[k] - mt) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double slope = sty / stt;
  const double r2 = sty * sty / (stt * syy);
  return {slope < 0.0 && r2 >= 0.9, "slope " + fmt(slope) + ", R^2 " + fmt(r2) + " over " +
                                        std::to_string(ts.size()) + " records in [" + fmt(T / 2) + ", " + fmt(T) +
                                        "]"};
}

const SweepPoint* find_point(const SweepResult& res, double v, const std::string& s) {
  for (const auto& p : res.points)
    if (p.value == v && p.solver == s) return &p;
  return nullptr;
}

// 5. Iterations to threshold versus connection probability.
Outcome criterion5(const fs::path& out) {
  ExperimentConfig cfg = noiseless_config();
  cfg.solver.t_max = 100000;
  cfg.solver.stop_at_threshold = true;
  cfg.sweep.parameter = "connection_prob";
  cfg.sweep.parallel_runs = worker_count();
  const SweepResult res = sweep_connectivity(cfg, out / "connectivity");
  const auto& values = cfg.sweep.values;
  bool monotone = true, cg_fastest = true, all_reached = true;
  std::ostringstream detail;
  detail << "DGWF median(MAD):";
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto* d = find_point(res, values[k], "dgwf");
    const auto* g = find_point(res, values[k], "gwf");
    const auto* c = find_point(res, values[k], "gwf_cg");
    if (!d || !g || !c) return {false, "missing sweep point"};
    all_reached = all_reached && d->reached == d->runs && g->reached == g->runs && c->reached == c->runs;
    detail << ' ' << fmt(d->median_iterations) << '(' << fmt(d->mad_iterations) << ')';
    if (!(c->median_iterations <= d->median_iterations && c->median_iterations <= g->median_iterations))
      cg_fastest = false;
    if (k > 0) {
      const auto* prev = find_point(res, values[k - 1], "dgwf");
      if (d->median_iterations > prev->median_iterations + std::max(prev->mad_iterations, d->mad_iterations))
        monotone = false;
    }
  }
  const double m01 = find_point(res, 0.1, "dgwf")->median_iterations;
  const double m04 = find_point(res, 0.4, "dgwf")->median_iterations;
  const double m10 = find_point(res, 1.0, "dgwf")->median_iterations;
  const double change = std::abs(m04 - m10) / m01;
  detail << "; |m(0.4)-m(1.0)|/m(0.1) = " << fmt(change) << "; GWF_cg median " << fmt(find_point(res, 0.1, "gwf_cg")->median_iterations)
         << "; nonincreasing " << (monotone ? "yes" : "no") << ", GWF_cg fastest " << (cg_fastest ? "yes" : "no");
  return {all_reached && monotone && change <= 0.2 && cg_fastest, detail.str()};
}

// 6. Final MSE versus number of receivers at 50 dB.
Outcome criterion6(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.sweep.parameter = "num_agents";
  cfg.sweep.values = {5, 10, 15, 20, 25, 30, 35, 40};
  cfg.sweep.parallel_runs = worker_count();
  const SweepResult res = sweep_receivers(cfg, out / "receivers");
  std::ostringstream detail;
  detail << "DGWF median final MSE:";
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double v : cfg.sweep.values) {
    const auto* d = find_point(res, v, "dgwf");
    if (!d) return {false, "missing sweep point"};
    detail << " N=" << v << ':' << fmt(d->median_final_mse);
    if (!(d->median_final_mse <= prev)) monotone = false;
    prev = d->median_final_mse;
  }
  const double m15 = find_point(res, 15, "dgwf")->median_final_mse;
  const double m30 = find_point(res, 30, "dgwf")->median_final_mse;
  const double m40 = find_point(res, 40, "dgwf")->median_final_mse;
  detail << "; MSE(15)/MSE(40) = " << fmt(m15 / m40) << ", MSE(30)/MSE(40) = " << fmt(m30 / m40)
         << "; nonincreasing " << (monotone ? "yes" : "no");
  return {monotone && m15 >= 10.0 * m40 && m30 <= 10.0 * m40, detail.str()};
}

// 7. Closed-form constants.
Outcome criterion7() {
  const auto z = ric_constants(0.0);
  const bool zero = z.epsilon == 0.0 && z.delta2 == 0.0 && z.c == 2.0 && z.h == 2.0;
  const auto r = ric_constants(0.214);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::abs(b); };
  const bool frozen = close(r.epsilon, 0.458602031776325351) && close(r.delta2, 0.814519161426071137) &&
                      close(r.c, 4.35355200951831663) && close(r.h, 0.154785564188420828);
  bool decreasing = true;
  double prev = ric_constants(0.0).h;
  for (int k = 1; k < 100; ++k) {
    const double h = ric_constants(0.214 * k / 99.0).h;
    if (!(h < prev)) decreasing = false;
    prev = h;
  }
  return {zero && frozen && decreasing, std::string("zero point ") + (zero ? "exact" : "wrong") + ", frozen values " +
                                            (frozen ? "match" : "differ") + ", h strictly decreasing " +
                                            (decreasing ? "yes" : "no") + " (h(0.214) = " + fmt(r.h) + ")"};
}

TheoryReport& theory_run(const fs::path& out) {
  static std::optional<TheoryReport> rep;
  if (!rep) rep = theory_report(ExperimentConfig{}, out / "theory");
  return *rep;
}

// 8. Sampled Lipschitz check on the reduced scene.
Outcome criterion8(const fs::path& out) {
  const auto& r = theory_run(out);
  return {r.lipschitz_check.pairs == 1000 && r.lipschitz_check.violations == 0,
          std::to_string(r.lipschitz_check.violations) + " violations over " + std::to_string(r.lipschitz_check.pairs) +
              " pairs; bound " + fmt(r.lipschitz) + ", largest observed ratio " + fmt(r.lipschitz_check.max_ratio)};
}

// 10. Sampled RC and PL checks with a halved-alpha negative control.
Outcome criterion10(const fs::path& out) {
  const auto& r = theory_run(out);
  const bool pass = r.rc.violations == 0 && r.pl.violations == 0 && r.rc_halved_alpha.violations > 0;
  return {pass, "delta1 estimate " + fmt(r.delta_hat) + " used " + fmt(r.delta_used) + "; RC violations " +
                    std::to_string(r.rc.violations) + "/" + std::to_string(r.rc.samples) + ", PL violations " +
                    std::to_string(r.pl.violations) + "/" + std::to_string(r.pl.samples) +
                    ", halved-alpha RC violations " + std::to_string(r.rc_halved_alpha.violations) +
                    " (worst margin " + fmt(r.rc_halved_alpha.worst_margin) + ")"};
}

// 11. simulate is byte-for-byte reproducible.
Outcome criterion11(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.output.plots = false;
  const fs::path a = out / "determinism" / "a", b = out / "determinism" / "b";
  fs::remove_all(a);
  fs::remove_all(b);
  simulate(cfg, a);
  simulate(cfg, b);
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".csv" || e.path().filename() == "timing.csv") continue;
    auto slurp = [](const fs::path& p) {
      std::ifstream is(p, std::ios::binary);
      std::ostringstream ss;
      ss << is.rdbuf();
      return ss.str();
    };
    ++compared;
    if (!fs::exists(b / e.path().filename()) || slurp(e.path()) != slurp(b / e.path().filename())) ++differing;
  }
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " CSV files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = fs::current_path() / "acceptance_output";
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--out-dir" && k + 1 < argc) {
      out = argv[++k];
    } else {
      selected.insert(std::stoi(a));
    }
  }
  fs::create_directories(out);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"gradient correctness", criterion1}},
      {2, {"objective equivalence", criterion2}},
      {3, {"update-rule oracle", criterion3}},
      {4, {"full-size convergence", criterion4}},
      {5, {"connectivity trend", [&] { return criterion5(out); }}},
      {6, {"receiver trend", [&] { return criterion6(out); }}},
      {7, {"theory constants", criterion7}},
      {8, {"Lipschitz bound", [&] { return criterion8(out); }}},
      {9, {"geometric decay", criterion9}},
      {10, {"RC/PL sampled checks", [&] { return criterion10(out); }}},
      {11, {"determinism", [&] { return criterion11(out); }}},
  };

  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, entry.first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
