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
#include "dgwf/metrics.hpp"
#include "dgwf/problem.hpp"
#include "dgwf/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dgwf {

// ---------------------------------------------------------------------------
// Spectral initialization
// ---------------------------------------------------------------------------

/// Lifted backprojection
///   X = (1/N) sum_i w_i sum_{j in N_i} sum_s [ d_ij^s a_i^s (a_j^s)^H + conj(d_ij^s) a_j^s (a_i^s)^H ]
/// with w_i = 1 / (2 |N_i| S). Hermitian by construction.
inline CMatrix lifted_backprojection(const InterferometricProblem& p) {
  const auto K = static_cast<Eigen::Index>(p.num_voxels());
  CMatrix X = CMatrix::Zero(K, K);
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    const double w = p.local_weight(i);
    const CMatrix& Ai = p.sampling(i).rows;
    for (auto j : p.graph().neighbors(i)) {
      const CMatrix& Aj = p.sampling(j).rows;
      const CVector d = p.measurements().pair(i, j);
      // sum_s d_s a_i^s (a_j^s)^H = A_i^T diag(d) conj(A_j)
      const CMatrix M = Ai.transpose() * d.asDiagonal() * Aj.conjugate();
      X.noalias() += w * M;
      X.noalias() += w * M.adjoint();
    }
  }
  return X / static_cast<double>(p.num_agents());
}

struct EigenPair {
  double value = 0.0;
  CVector vector;
  std::size_t iterations = 0;
};

struct PowerIterationOptions {
  double tolerance = 1e-10;
  std::size_t max_iters = 5000;
  std::uint64_t seed = 0x5eed;
};

/// Largest (algebraic) eigenpair of a Hermitian matrix by shifted power
/// iteration. The shift ||H||_F makes H + shift*I positive semidefinite, so the
/// dominant eigenvalue of the shifted matrix is the largest eigenvalue of H.
/// Stops when the Rayleigh quotient changes by at most tolerance (relative).
inline EigenPair leading_eigenpair(const CMatrix& H, const PowerIterationOptions& opt = {}) {
  require_dims(H.rows() == H.cols(), "leading_eigenpair: matrix must be square");
  const auto K = H.rows();
  if (K == 0) throw InvalidArgument("leading_eigenpair: empty matrix");
  const double shift = H.norm();
  if (shift == 0.0) {
    EigenPair ep;
    ep.vector = CVector::Zero(K);
    ep.vector(0) = 1.0;
    return ep;
  }
  Rng rng(opt.seed);
  CVector v(K);
  for (Eigen::Index k = 0; k < K; ++k) v(k) = Complex{standard_normal(rng), standard_normal(rng)};
  v.normalize();
  double lambda = std::real(v.dot(H * v));
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= opt.max_iters; ++it) {
    CVector hv = H * v;
    CVector next = hv + shift * v;
    const double nrm = next.norm();
    if (nrm == 0.0) throw ConvergenceError("power iteration collapsed to zero", residual);
    v = next / nrm;
    const double updated = std::real(v.dot(H * v));
    residual = std::abs(updated - lambda) / std::max(std::abs(updated), std::numeric_limits<double>::min());
    lambda = updated;
    if (residual <= opt.tolerance) return {lambda, v, it};
  }
  throw ConvergenceError("power iteration did not converge in " + std::to_string(opt.max_iters) + " iterations",
                         residual);
}

struct SpectralInit {
  CVector x0;
  double eigenvalue = 0.0;
  /// Set when the leading eigenvalue was negative and x0 was clamped to zero.
  bool clamped = false;
  std::size_t iterations = 0;
};

/// x0 = sqrt(lambda0) v0 from the leading eigenpair of the lifted backprojection.
inline SpectralInit spectral_initialize(const InterferometricProblem& p, const PowerIterationOptions& opt = {}) {
  if (p.measurements().empty()) throw EmptyMeasurements("spectral_initialize: no measurements");
  if (!p.graph().is_connected()) throw GraphError("spectral_initialize: graph must be connected");
  const CMatrix X = lifted_backprojection(p);
  const EigenPair ep = leading_eigenpair(X, opt);
  SpectralInit out;
  out.eigenvalue = ep.value;
  out.iterations = ep.iterations;
  if (ep.value <= 0.0) {
    out.clamped = ep.value < 0.0;
    out.x0 = CVector::Zero(X.rows());
    return out;
  }
  out.x0 = std::sqrt(ep.value) * ep.vector;
  return out;
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

/// eta_t = min(1 - exp(-t / tau0), cap).
inline double step_schedule(double t, double tau0, double cap) {
  require(tau0 > 0.0 && cap > 0.0, "step_schedule: tau0 and cap must be positive");
  return std::min(1.0 - std::exp(-t / tau0), cap);
}

struct SolverConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double tau0 = 3300.0;
  double eta_cap = 0.01;
  std::size_t t_max = 4000;

  /// Record every `record_stride` iterations; 0 selects the automatic policy
  /// (every iteration up to 10^4 iterations, logarithmic thinning beyond).
  std::size_t record_stride = 0;
  /// Iteration at which the aligned MSE first drops to this value is always recorded.
  double mse_threshold = 1e-5;
  /// Stop once MSE <= stop_mse and consensus error <= stop_consensus (disabled when NaN).
  double stop_mse = std::numeric_limits<double>::quiet_NaN();
  double stop_consensus = std::numeric_limits<double>::infinity();
  /// Also record ||x - mean||^2 + N (f(mean) - f_star) (costs one objective evaluation per record).
  bool track_lyapunov = false;
  double f_star = 0.0;
  /// Worker threads for the per-agent updates; results do not depend on it.
  std::size_t threads = 1;

  void validate() const {
    require(lambda1 >= 0.0 && lambda2 >= 0.0, "lambda1 and lambda2 must be nonnegative");
    require(tau0 > 0.0, "tau0 must be positive");
    require(eta_cap > 0.0, "eta cap must be positive");
    require(threads >= 1, "threads must be >= 1");
  }

  double eta(std::size_t t) const { return step_schedule(static_cast<double>(t), tau0, eta_cap); }
};

struct AgentState {
  std::size_t agent_id = 0;
  CVector x;
  CVector v;
};

inline std::vector<AgentState> broadcast_init(const CVector& x0, std::size_t num_agents) {
  std::vector<AgentState> states(num_agents);
  for (std::size_t i = 0; i < num_agents; ++i) states[i] = {i, x0, CVector::Zero(x0.size())};
  return states;
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline void check_normalizer(double norm_x0) {
  if (!(norm_x0 > 0.0) || !std::isfinite(norm_x0))
    throw InvalidArgument("step normalizer ||x0|| must be positive and finite");
}

}  // namespace detail

/// One synchronous DGWF round. Every agent reads only the time-t snapshot:
///   x_i <- x_i - (eta_t/||x0||) (lambda1 sum_j L_ij x_j + lambda2 v_i + grad f_i(x_i))
///   v_i <- v_i + (eta_t/||x0||) lambda2 sum_j L_ij x_j
inline std::vector<AgentState> dgwf_step(const InterferometricProblem& p, const std::vector<AgentState>& states,
                                         const SolverConfig& cfg, std::size_t t, double norm_x0) {
  detail::check_normalizer(norm_x0);
  require_dims(states.size() == p.num_agents(), "dgwf_step: one state per agent");
  const double mu = cfg.eta(t) / norm_x0;
  std::vector<AgentState> next(states.size());
  detail::parallel_for(states.size(), cfg.threads, [&](std::size_t i) {
    const auto& xi = states[i].x;
    CVector lap = static_cast<double>(p.graph().degree(i)) * xi;
    for (auto j : p.graph().neighbors(i)) lap -= states[j].x;
    const CVector grad = local_wirtinger_gradient(p, i, xi);
    next[i].agent_id = i;
    next[i].x = xi - mu * (cfg.lambda1 * lap + cfg.lambda2 * states[i].v + grad);
    next[i].v = states[i].v + (mu * cfg.lambda2) * lap;
  });
  return next;
}

/// Stacked form of the same update on col(x_1..x_N), col(v_1..v_N), applying
/// L (x) I_K through the dense Laplacian. Used to cross-check dgwf_step.
inline std::pair<CVector, CVector> stacked_step(const InterferometricProblem& p, const CVector& x, const CVector& v,
                                                const SolverConfig& cfg, std::size_t t, double norm_x0) {
  detail::check_normalizer(norm_x0);
  const auto K = static_cast<Eigen::Index>(p.num_voxels());
  const auto N = static_cast<Eigen::Index>(p.num_agents());
  require_dims(x.size() == N * K && v.size() == N * K, "stacked_step: vectors must have N*K entries");
  const double mu = cfg.eta(t) / norm_x0;
  const CVector lx = laplacian_apply(p.graph(), x, p.num_voxels());
  CVector grad(N * K);
  for (Eigen::Index i = 0; i < N; ++i)
    grad.segment(i * K, K) = local_wirtinger_gradient(p, static_cast<std::size_t>(i), x.segment(i * K, K));
  CVector xn = x - mu * (cfg.lambda1 * lx + cfg.lambda2 * v + grad);
  CVector vn = v + (mu * cfg.lambda2) * lx;
  return {std::move(xn), std::move(vn)};
}

inline CVector stack_states(const std::vector<AgentState>& states, bool dual = false) {
  if (states.empty()) return {};
  const auto K = (dual ? states.front().v : states.front().x).size();
  CVector out(K * static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i)
    out.segment(static_cast<Eigen::Index>(i) * K, K) = dual ? states[i].v : states[i].x;
  return out;
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct TraceRecord {
  std::size_t t = 0;
  double mse = std::numeric_limits<double>::quiet_NaN();
  double consensus_error = 0.0;
  double eta = 0.0;
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
};

struct IterationTrace {
  std::vector<TraceRecord> records;
  /// First iteration with mse <= mse_threshold, if reached.
  std::optional<std::size_t> threshold_iteration;
  double mse_threshold = 0.0;
  std::size_t iterations_run = 0;
  /// Final per-agent iterates (a single entry for centralized runs).
  std::vector<CVector> final_iterates;

  CVector final_estimate() const { return mean_of(final_iterates); }
  const TraceRecord& last() const { return records.back(); }
};

/// Whether iteration t is kept under the given stride (0 = automatic).
inline bool should_record(std::size_t t, std::size_t t_max, std::size_t stride) {
  if (t == 0 || t == t_max) return true;
  if (stride > 0) return t % stride == 0;
  if (t_max <= 10000) return true;
  // Keep <= ~1000 records per decade.
  std::size_t step = 1;
  for (std::size_t bound = 1000; t >= bound; bound *= 10) step *= 10;
  return t % step == 0;
}

/// First recorded iteration whose MSE is at or below threshold.
inline std::optional<std::size_t> iterations_to_threshold(const IterationTrace& trace, double threshold) {
  for (const auto& r : trace.records)
    if (r.mse <= threshold) return r.t;
  return std::nullopt;
}

inline void write_trace_csv(const IterationTrace& trace, std::ostream& os) {
  os << "t,mse,consensus_error,eta\n" << std::setprecision(17);
  for (const auto& r : trace.records) os << r.t << ',' << r.mse << ',' << r.consensus_error << ',' << r.eta << '\n';
}

inline void write_trace_csv(const IterationTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_trace_csv(trace, os);
}

using DgwfCallback = std::function<void(std::size_t t, const std::vector<AgentState>&, const TraceRecord&)>;
using GwfCallback = std::function<void(std::size_t t, const CVector&, const TraceRecord&)>;

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

namespace detail {

inline double mean_mse(const std::vector<AgentState>& states, const CVector* truth) {
  if (truth == nullptr) return std::numeric_limits<double>::quiet_NaN();
  double m = 0.0;
  for (const auto& s : states) m += mse_aligned(s.x, *truth);
  return m / static_cast<double>(states.size());
}

inline bool stop_reached(const SolverConfig& cfg, double mse, double consensus) {
  return !std::isnan(cfg.stop_mse) && mse <= cfg.stop_mse && consensus <= cfg.stop_consensus;
}

}  // namespace detail

/// Distributed Generalized Wirtinger Flow. All agents start from the broadcast
/// x0 with zero duals. `truth` (optional) enables the aligned-MSE metric; the
/// reported MSE is the mean of the agents' individual aligned MSEs.
inline IterationTrace run_dgwf(const InterferometricProblem& p, const CVector& x0, const SolverConfig& cfg,
                               const CVector* truth = nullptr, const DgwfCallback& callback = {}) {
  cfg.validate();
  require_dims(static_cast<std::size_t>(x0.size()) == p.num_voxels(), "run_dgwf: x0 must have K entries");
  const double norm_x0 = x0.norm();
  detail::check_normalizer(norm_x0);
  if (truth) require_dims(truth->size() == x0.size(), "run_dgwf: truth must have K entries");

  IterationTrace trace;
  trace.mse_threshold = cfg.mse_threshold;
  auto states = broadcast_init(x0, p.num_agents());
  const double n = static_cast<double>(p.num_agents());

  auto observe = [&](std::size_t t) -> bool {
    for (const auto& s : states)
      if (!s.x.allFinite() || !s.v.allFinite()) throw DivergenceError(t);
    std::vector<CVector> xs;
    xs.reserve(states.size());
    for (const auto& s : states) xs.push_back(s.x);
    TraceRecord rec;
    rec.t = t;
    rec.mse = detail::mean_mse(states, truth);
    rec.consensus_error = consensus_error(xs);
    rec.eta = cfg.eta(t);
    const bool crossed = !trace.threshold_iteration && rec.mse <= cfg.mse_threshold;
    if (crossed) trace.threshold_iteration = t;
    const bool stop = detail::stop_reached(cfg, rec.mse, rec.consensus_error);
    if (crossed || stop || should_record(t, cfg.t_max, cfg.record_stride)) {
      if (cfg.track_lyapunov) rec.lyapunov = rec.consensus_error + n * (global_objective(p, mean_of(xs)) - cfg.f_star);
      trace.records.push_back(rec);
    }
    if (callback) callback(t, states, rec);
    return stop;
  };

  std::size_t t = 0;
  bool stop = observe(0);
  while (!stop && t < cfg.t_max) {
    states = dgwf_step(p, states, cfg, t, norm_x0);
    ++t;
    stop = observe(t);
  }
  trace.iterations_run = t;
  trace.final_iterates.reserve(states.size());
  for (auto& s : states) trace.final_iterates.push_back(std::move(s.x));
  return trace;
}

/// Centralized GWF on the same edge-restricted data:
///   x <- x - (eta_t/||x0||) (1/N) sum_i grad f_i(x).
inline IterationTrace run_gwf(const InterferometricProblem& p, const CVector& x0, const SolverConfig& cfg,
                              const CVector* truth = nullptr, const GwfCallback& callback = {}) {
  cfg.validate();
  require_dims(static_cast<std::size_t>(x0.size()) == p.num_voxels(), "run_gwf: x0 must have K entries");
  const double norm_x0 = x0.norm();
  detail::check_normalizer(norm_x0);
  if (truth) require_dims(truth->size() == x0.size(), "run_gwf: truth must have K entries");

  IterationTrace trace;
  trace.mse_threshold = cfg.mse_threshold;
  CVector x = x0;
  const double n = static_cast<double>(p.num_agents());

  auto observe = [&](std::size_t t) -> bool {
    if (!x.allFinite()) throw DivergenceError(t);
    TraceRecord rec;
    rec.t = t;
    rec.mse = truth ? mse_aligned(x, *truth) : std::numeric_limits<double>::quiet_NaN();
    rec.consensus_error = 0.0;
    rec.eta = cfg.eta(t);
    const bool crossed = !trace.threshold_iteration && rec.mse <= cfg.mse_threshold;
    if (crossed) trace.threshold_iteration = t;
    const bool stop = detail::stop_reached(cfg, rec.mse, 0.0);
    if (crossed || stop || should_record(t, cfg.t_max, cfg.record_stride)) {
      if (cfg.track_lyapunov) rec.lyapunov = n * (global_objective(p, x) - cfg.f_star);
      trace.records.push_back(rec);
    }
    if (callback) callback(t, x, rec);
    return stop;
  };

  std::size_t t = 0;
  bool stop = observe(0);
  while (!stop && t < cfg.t_max) {
    const double mu = cfg.eta(t) / norm_x0;
    x -= mu * global_wirtinger_gradient(p, x);
    ++t;
    stop = observe(t);
  }
  trace.iterations_run = t;
  trace.final_iterates = {x};
  return trace;
}

}  // namespace dgwf
