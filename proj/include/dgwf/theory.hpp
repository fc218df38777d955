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
#include "dgwf/problem.hpp"
#include "dgwf/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

namespace dgwf {

// ---------------------------------------------------------------------------
// Real-valued reformulation
// ---------------------------------------------------------------------------

/// [Re(x); Im(x)].
inline RVector to_real(const CVector& x) {
  RVector out(2 * x.size());
  out << x.real(), x.imag();
  return out;
}

inline CVector from_real(const RVector& xt) {
  require_dims(xt.size() % 2 == 0, "from_real: length must be even");
  const auto K = xt.size() / 2;
  CVector out(K);
  out.real() = xt.head(K);
  out.imag() = xt.tail(K);
  return out;
}

/// Real blocks for one sampling pair (a_i, a_j):
///   A1 = Re(a_i) Re(a_j)^T + Im(a_i) Im(a_j)^T
///   A2 = Re(a_i) Im(a_j)^T - Im(a_i) Re(a_j)^T
///   AR = [A1 A2; -A2 A1],  AI = [A2 -A1; A1 A2]
/// so that, with xt = [Re x; Im x],
///   xt^T AR xt = Re(<a_i, x> conj(<a_j, x>)),  xt^T AI xt = Im(<a_i, x> conj(<a_j, x>)).
struct RealBlocks {
  RMatrix A1;
  RMatrix A2;
  RMatrix AR;
  RMatrix AI;
};

inline RealBlocks realify(const CVector& ai, const CVector& aj) {
  require_dims(ai.size() == aj.size(), "realify: sampling vectors differ in length");
  const RVector ar = ai.real(), aim = ai.imag(), br = aj.real(), bim = aj.imag();
  RealBlocks b;
  b.A1 = ar * br.transpose() + aim * bim.transpose();
  b.A2 = ar * bim.transpose() - aim * br.transpose();
  const auto K = ai.size();
  b.AR.resize(2 * K, 2 * K);
  b.AR << b.A1, b.A2, -b.A2, b.A1;
  b.AI.resize(2 * K, 2 * K);
  b.AI << b.A2, -b.A1, b.A1, b.A2;
  return b;
}

/// One squared-residual term: weight * ((dR - xt'AR xt)^2 + (dI - xt'AI xt)^2).
struct RealTerm {
  RMatrix AR;
  RMatrix AI;
  double dR = 0.0;
  double dI = 0.0;
  double weight = 0.0;
};

/// A collection of real terms over xt in R^{2K}.
struct RealLift {
  std::size_t K = 0;
  std::vector<RealTerm> terms;

  void add(const CVector& ai, const CVector& aj, Complex d, double weight) {
    if (K == 0) K = static_cast<std::size_t>(ai.size());
    require_dims(static_cast<std::size_t>(ai.size()) == K, "RealLift: inconsistent K");
    auto b = realify(ai, aj);
    terms.push_back({std::move(b.AR), std::move(b.AI), d.real(), d.imag(), weight});
  }
};

/// Terms of a single sensing pair with the 1/(2S) normalisation.
inline RealLift real_lift_pair(const SamplingMatrix& ai, const SamplingMatrix& aj, const CVector& d) {
  require_dims(ai.num_samples() == aj.num_samples() && static_cast<std::size_t>(d.size()) == ai.num_samples(),
               "real_lift_pair: sample counts differ");
  RealLift lift;
  const double w = 1.0 / (2.0 * static_cast<double>(ai.num_samples()));
  for (Eigen::Index s = 0; s < d.size(); ++s)
    lift.add(ai.rows.row(s).transpose(), aj.rows.row(s).transpose(), d(s), w);
  return lift;
}

/// Terms reproducing f_i of the complex problem.
inline RealLift real_lift_local(const InterferometricProblem& p, std::size_t i) {
  RealLift lift;
  lift.K = p.num_voxels();
  const double w = p.local_weight(i);
  for (auto j : p.graph().neighbors(i)) {
    const CVector d = p.measurements().pair(i, j);
    for (Eigen::Index s = 0; s < d.size(); ++s)
      lift.add(p.sampling(i).rows.row(s).transpose(), p.sampling(j).rows.row(s).transpose(), d(s), w);
  }
  return lift;
}

/// Terms reproducing f = (1/N) sum_i f_i.
inline RealLift real_lift_global(const InterferometricProblem& p) {
  RealLift lift;
  lift.K = p.num_voxels();
  const double n = static_cast<double>(p.num_agents());
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    const double w = p.local_weight(i) / n;
    for (auto j : p.graph().neighbors(i)) {
      const CVector d = p.measurements().pair(i, j);
      for (Eigen::Index s = 0; s < d.size(); ++s)
        lift.add(p.sampling(i).rows.row(s).transpose(), p.sampling(j).rows.row(s).transpose(), d(s), w);
    }
  }
  return lift;
}

inline double real_objective(const RVector& xt, const RealLift& lift) {
  require_dims(static_cast<std::size_t>(xt.size()) == 2 * lift.K, "real_objective: xt must have 2K entries");
  double f = 0.0;
  for (const auto& t : lift.terms) {
    const double rr = t.dR - xt.dot(t.AR * xt);
    const double ri = t.dI - xt.dot(t.AI * xt);
    f += t.weight * (rr * rr + ri * ri);
  }
  return f;
}

/// Exact gradient: sum w * (-2 (dR - q_R)(AR + AR^T) xt - 2 (dI - q_I)(AI + AI^T) xt).
inline RVector real_gradient(const RVector& xt, const RealLift& lift) {
  require_dims(static_cast<std::size_t>(xt.size()) == 2 * lift.K, "real_gradient: xt must have 2K entries");
  RVector g = RVector::Zero(xt.size());
  for (const auto& t : lift.terms) {
    const RVector ar = t.AR * xt, art = t.AR.transpose() * xt;
    const RVector ai = t.AI * xt, ait = t.AI.transpose() * xt;
    const double rr = t.dR - xt.dot(ar);
    const double ri = t.dI - xt.dot(ai);
    g.noalias() -= (2.0 * t.weight * rr) * (ar + art);
    g.noalias() -= (2.0 * t.weight * ri) * (ai + ait);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Lipschitz bound
// ---------------------------------------------------------------------------

/// Largest singular value via power iteration on A^T A.
inline double spectral_norm(const RMatrix& A, double tolerance = 1e-10, std::size_t max_iters = 10000) {
  if (A.size() == 0) return 0.0;
  RVector v = RVector::Constant(A.cols(), 1.0 / std::sqrt(static_cast<double>(A.cols())));
  // A deterministic, generic start avoids orthogonality to the top singular vector.
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += 1e-3 * std::sin(1.0 + static_cast<double>(k));
  v.normalize();
  double sigma2 = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    RVector w = A.transpose() * (A * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / nw;
    if (std::abs(next - sigma2) <= tolerance * std::abs(next)) return std::sqrt(next);
    sigma2 = next;
  }
  throw ConvergenceError("spectral_norm: power iteration did not converge", 0.0);
}

/// Gradient Lipschitz constant on {||xt||^2 <= tau}: for per-term weights w
/// (w = 1/(2S) for a single pair), sum 2w (dR s_R + dI s_I + 3 tau (s_R^2 + s_I^2)),
/// with s = sigma_max of the real blocks. Data enter with their sign.
inline double lipschitz_bound(const RealLift& lift, double tau) {
  require(tau > 0.0, "lipschitz_bound: tau must be positive");
  double L = 0.0;
  for (const auto& t : lift.terms) {
    const double sr = spectral_norm(t.AR);
    const double si = spectral_norm(t.AI);
    L += 2.0 * t.weight * (t.dR * sr + t.dI * si + 3.0 * tau * (sr * sr + si * si));
  }
  return L;
}

// ---------------------------------------------------------------------------
// RIC-derived constants
// ---------------------------------------------------------------------------

inline constexpr double kMaxRic = 0.214;

struct RicConstants {
  double delta1 = 0.0;
  double epsilon = 0.0;
  double delta2 = 0.0;
  double c = 0.0;
  double h = 0.0;
  /// Admissible RC parameters for the supplied ||x*|| (zero when not requested).
  double alpha = 0.0;
  double beta = 0.0;
};

/// epsilon^2 = (2 + d1)(1 - sqrt(1 - d1/(1 + d1))) + d1^2/8
/// delta2    = sqrt(2)(2 + eps) d1 / sqrt((1 - eps)(2 - eps))
/// c         = (2 + eps)(1 + eps)(1 + d1)
/// h         = (1 - delta2)(1 - eps)(2 - eps)
///
/// When norm_xstar > 0, (alpha, beta) are returned in the ordering of the RC
/// inequality checked by check_rc (alpha scales the gradient term, beta the
/// distance term). The admissibility inequality is applied with the distance
/// parameter in its first slot and the gradient parameter in its second:
///   1/(beta ||x*||^2) = split * h,  c^2 ||x*||^2 / alpha = (1 - split) * h.
inline RicConstants ric_constants(double delta1, double norm_xstar = 0.0, double split = 0.5) {
  if (!(delta1 >= 0.0) || delta1 > kMaxRic)
    throw OutOfRange("ric_constants: delta1 must lie in [0, 0.214]");
  require(split > 0.0 && split < 1.0, "ric_constants: split must lie in (0, 1)");
  RicConstants r;
  r.delta1 = delta1;
  const double e2 = (2.0 + delta1) * (1.0 - std::sqrt(1.0 - delta1 / (1.0 + delta1))) + delta1 * delta1 / 8.0;
  r.epsilon = std::sqrt(e2);
  r.delta2 = std::sqrt(2.0) * (2.0 + r.epsilon) * delta1 / std::sqrt((1.0 - r.epsilon) * (2.0 - r.epsilon));
  r.c = (2.0 + r.epsilon) * (1.0 + r.epsilon) * (1.0 + delta1);
  r.h = (1.0 - r.delta2) * (1.0 - r.epsilon) * (2.0 - r.epsilon);
  if (norm_xstar > 0.0) {
    const double n2 = norm_xstar * norm_xstar;
    r.alpha = r.c * r.c * n2 / ((1.0 - split) * r.h);
    r.beta = 1.0 / (split * r.h * n2);
  }
  return r;
}

/// PL constant implied by RC(alpha, beta) and an L_f-Lipschitz gradient.
inline double pl_constant(double beta, double lipschitz) {
  require(beta > 0.0 && lipschitz > 0.0, "pl_constant: beta and L_f must be positive");
  return 1.0 / (beta * beta * lipschitz);
}

// ---------------------------------------------------------------------------
// Lifted operator and empirical RIC
// ---------------------------------------------------------------------------

/// Linear map on K x K matrices with rows F(X)_m = sqrt(w_m) a_m^H X b_m.
struct LiftedOperator {
  std::size_t K = 0;
  std::vector<CVector> left;
  std::vector<CVector> right;
  std::vector<double> weight;

  std::size_t rows() const noexcept { return left.size(); }

  void add(const CVector& a, const CVector& b, double w) {
    if (K == 0) K = static_cast<std::size_t>(a.size());
    require_dims(static_cast<std::size_t>(a.size()) == K && static_cast<std::size_t>(b.size()) == K,
                 "LiftedOperator: inconsistent K");
    left.push_back(a);
    right.push_back(b);
    weight.push_back(w);
  }

  CVector apply(const CMatrix& X) const {
    CVector out(static_cast<Eigen::Index>(rows()));
    for (std::size_t m = 0; m < rows(); ++m)
      out(static_cast<Eigen::Index>(m)) = std::sqrt(weight[m]) * left[m].dot(X * right[m]);
    return out;
  }

  /// ||F(w w^H)||^2 without forming the matrix.
  double rank1_energy(const CVector& w) const {
    double e = 0.0;
    for (std::size_t m = 0; m < rows(); ++m) {
      const Complex l = left[m].dot(w);   // a^H w
      const Complex r = right[m].dot(w);  // b^H w
      e += weight[m] * std::norm(l) * std::norm(r);
    }
    return e;
  }
};

/// Operator whose residual norm reproduces the global objective:
/// f(x) = (1/2) ||F(x x^H) - d||^2 with rows a_i^s, a_j^s over directed edges.
inline LiftedOperator lifted_operator(const InterferometricProblem& p) {
  LiftedOperator F;
  F.K = p.num_voxels();
  const double n = static_cast<double>(p.num_agents());
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    const double w = 2.0 * p.local_weight(i) / n;
    for (auto j : p.graph().neighbors(i))
      for (std::size_t s = 0; s < p.num_samples(); ++s)
        F.add(p.sampling(i).rows.row(static_cast<Eigen::Index>(s)).transpose(),
              p.sampling(j).rows.row(static_cast<Eigen::Index>(s)).transpose(), w);
  }
  return F;
}

struct RicEstimate {
  /// max |ratio - 1| over trials; a lower bound on the rank-1 RIC.
  double delta_lower = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  std::size_t trials = 0;
};

/// Monte Carlo over rank-1 PSD X = w w^H, w uniform on the sphere with a random
/// scale. Sampling can only exhibit violations, so the result bounds the RIC from below.
inline RicEstimate estimate_ric_rank1(const LiftedOperator& F, std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, "estimate_ric_rank1: need at least one trial");
  require(F.K > 0, "estimate_ric_rank1: empty operator");
  RicEstimate est;
  est.trials = trials;
  const auto K = static_cast<Eigen::Index>(F.K);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, Stream::Trials, t);
    CVector w(K);
    for (Eigen::Index k = 0; k < K; ++k) w(k) = complex_normal(rng, 1.0);
    w *= (0.5 + 1.5 * uniform01(rng)) / w.norm();
    const double fro2 = std::pow(w.squaredNorm(), 2);  // ||w w^H||_F^2 = ||w||^4
    const double ratio = F.rank1_energy(w) / fro2;
    est.min_ratio = std::min(est.min_ratio, ratio);
    est.max_ratio = std::max(est.max_ratio, ratio);
    est.delta_lower = std::max(est.delta_lower, std::abs(ratio - 1.0));
  }
  return est;
}

// ---------------------------------------------------------------------------
// Sampled RC / PL / Lipschitz checks
// ---------------------------------------------------------------------------

struct RealFunction {
  std::function<double(const RVector&)> value;
  std::function<RVector(const RVector&)> gradient;
};

inline RealFunction make_real_function(const RealLift& lift) {
  return {[&lift](const RVector& x) { return real_objective(x, lift); },
          [&lift](const RVector& x) { return real_gradient(x, lift); }};
}

struct CheckReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  /// min over samples of (lhs - rhs); negative means a violation.
  double worst_margin = std::numeric_limits<double>::infinity();
};

/// Minimiser of the phase-invariant objective closest to z: rotate x* (in the
/// complex picture) onto z.
inline RVector nearest_minimizer(const RVector& xstar, const RVector& z) {
  const CVector xs = from_real(xstar);
  const CVector zc = from_real(z);
  const Complex ip = xs.dot(zc);
  if (std::abs(ip) == 0.0) return xstar;
  return to_real(xs * (ip / std::abs(ip)));
}

struct SampleOptions {
  std::size_t samples = 500;
  /// Samples are drawn uniformly in a ball of radius relative_radius * ||x*|| around x*.
  double relative_radius = 0.1;
  /// Compare against the phase-aligned minimiser instead of x* itself.
  bool align_phase = true;
  std::uint64_t seed = 7;
};

namespace detail {

inline RVector sample_ball(const RVector& center, double radius, Rng& rng) {
  RVector u(center.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = standard_normal(rng);
  u.normalize();
  const double r = radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(center.size()));
  return center + r * u;
}

}  // namespace detail

/// <grad f(z), z - x*> >= (1/alpha) ||grad f(z)||^2 + (1/beta) ||z - x*||^2 on sampled z.
/// Margins are reported relative to the scale of the two sides.
inline CheckReport check_rc(const RealFunction& f, const RVector& xstar, double alpha, double beta,
                            const SampleOptions& opt = {}) {
  require(alpha > 0.0 && beta > 0.0, "check_rc: alpha and beta must be positive");
  CheckReport rep;
  const double radius = opt.relative_radius * xstar.norm();
  for (std::size_t k = 0; k < opt.samples; ++k) {
    Rng rng = make_rng(opt.seed, Stream::Trials, k);
    const RVector z = k == 0 ? xstar : detail::sample_ball(xstar, radius, rng);
    const RVector ref = opt.align_phase ? nearest_minimizer(xstar, z) : xstar;
    const RVector g = f.gradient(z);
    const RVector h = z - ref;
    const double lhs = g.dot(h);
    const double rhs = g.squaredNorm() / alpha + h.squaredNorm() / beta;
    const double margin = lhs - rhs;
    // Relative slack plus the rounding floor of <g, h> when h carries an
    // error of order eps ||x*|| (both sides vanish at z = x*).
    const double tol = 1e-12 * std::max(std::abs(lhs), std::abs(rhs)) +
                       64.0 * std::numeric_limits<double>::epsilon() * g.norm() * xstar.norm();
    ++rep.samples;
    if (margin < -tol) ++rep.violations;
    rep.worst_margin = std::min(rep.worst_margin, margin);
  }
  return rep;
}

/// (1/2) ||grad f(z)||^2 >= mu (f(z) - f*) on sampled z.
inline CheckReport check_pl(const RealFunction& f, double f_star, double mu, const RVector& xstar,
                            const SampleOptions& opt = {}) {
  require(mu > 0.0, "check_pl: mu must be positive");
  CheckReport rep;
  const double radius = opt.relative_radius * xstar.norm();
  // Rounding floor of f near a zero-residual point: residuals carry errors of
  // order eps |d|, and f(0) is the weighted sum of |d|^2.
  const double f_floor = std::pow(64.0 * std::numeric_limits<double>::epsilon(), 2) *
                         std::abs(f.value(RVector::Zero(xstar.size())));
  for (std::size_t k = 0; k < opt.samples; ++k) {
    Rng rng = make_rng(opt.seed, Stream::Trials, k);
    const RVector z = k == 0 ? xstar : detail::sample_ball(xstar, radius, rng);
    const double lhs = 0.5 * f.gradient(z).squaredNorm();
    const double rhs = mu * (f.value(z) - f_star);
    const double margin = lhs - rhs;
    const double scale = std::max({std::abs(lhs), std::abs(rhs), std::numeric_limits<double>::min()});
    ++rep.samples;
    if (margin < -(1e-12 * scale + mu * f_floor)) ++rep.violations;
    rep.worst_margin = std::min(rep.worst_margin, margin);
  }
  return rep;
}

struct LipschitzReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  /// max ||grad f(u) - grad f(v)|| / ||u - v|| seen.
  double max_ratio = 0.0;
};

/// Monte Carlo check of ||grad f(u) - grad f(v)|| <= L ||u - v|| for u, v with ||.||^2 <= tau.
inline LipschitzReport check_lipschitz(const RealFunction& f, std::size_t dim, double tau, double L,
                                       std::size_t pairs, std::uint64_t seed) {
  LipschitzReport rep;
  const RVector origin = RVector::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < pairs; ++k) {
    Rng rng = make_rng(seed, Stream::Trials, k);
    const RVector u = detail::sample_ball(origin, std::sqrt(tau), rng);
    const RVector v = detail::sample_ball(origin, std::sqrt(tau), rng);
    const double du = (u - v).norm();
    if (du == 0.0) continue;
    const double ratio = (f.gradient(u) - f.gradient(v)).norm() / du;
    ++rep.pairs;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (ratio > L) ++rep.violations;
  }
  return rep;
}

}  // namespace dgwf
