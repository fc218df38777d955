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

#include "support.hpp"

#include <cmath>

using namespace dgwf;
using Catch::Approx;

TEST_CASE("step schedule values", "[solvers]") {
  CHECK(step_schedule(0.0, 3300.0, 0.01) == 0.0);
  CHECK(step_schedule(1e9, 3300.0, 0.01) == 0.01);
  CHECK(step_schedule(3300.0, 3300.0, 0.01) == 0.01);
  CHECK(step_schedule(10.0, 3300.0, 0.01) == Approx(1.0 - std::exp(-10.0 / 3300.0)).epsilon(1e-15));
  CHECK_THROWS_AS(step_schedule(1.0, 0.0, 0.01), InvalidArgument);
}

TEST_CASE("scalar spectral initialization recovers the modulus", "[solvers]") {
  std::vector<SamplingMatrix> s = {test::scalar_sampling(0, 1.0), test::scalar_sampling(1, 1.0)};
  CVector rho(1);
  rho(0) = Complex(-1.2, 0.5);
  const auto p = make_problem(s, rho, complete_graph(2));
  const CMatrix X = lifted_backprojection(p);
  CHECK(std::abs(X(0, 0) - std::norm(rho(0))) < 1e-15);
  const auto init = spectral_initialize(p);
  CHECK(std::abs(init.x0(0)) == Approx(std::abs(rho(0))).epsilon(1e-12));
  CHECK(mse_aligned(init.x0, rho) < 1e-24);
}

TEST_CASE("zero measurements give a zero initial point", "[solvers]") {
  auto inst = test::small_instance();
  const auto p = make_problem(inst.problem.sampling(), CVector::Zero(9), inst.problem.graph());
  CHECK(lifted_backprojection(p).cwiseAbs().maxCoeff() == 0.0);
  const auto init = spectral_initialize(p);
  CHECK(init.eigenvalue == 0.0);
  CHECK(init.x0.norm() == 0.0);
}

TEST_CASE("lifted backprojection is Hermitian", "[solvers]") {
  auto inst = test::small_instance(6, 3, 3, 8, false);
  const CMatrix X = lifted_backprojection(inst.problem);
  CHECK((X - X.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * X.cwiseAbs().maxCoeff());
}

TEST_CASE("power iteration matches a dense eigensolver", "[solvers]") {
  auto inst = test::small_instance(6, 3, 3, 8, false);
  const CMatrix X = lifted_backprojection(inst.problem);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(X);
  const auto ep = leading_eigenpair(X);
  CHECK(ep.value == Approx(es.eigenvalues()(8)).epsilon(1e-8));
}

TEST_CASE("spectral start beats a random unit start on the default scene", "[solvers][slow]") {
  ExperimentConfig cfg;
  cfg.noise.snr_db.reset();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance inst = build_instance(cfg, RunSeeds::from(seed));
    const CVector& rho = inst.truth.values;
    const CVector x0 = initialize(inst).x0;
    Rng rng = make_rng(seed, Stream::Init, 99);
    CVector r = test::random_complex(rho.size(), rng);
    r.normalize();
    const double e_init = (align_to(x0, rho) - rho).norm() / rho.norm();
    const double e_rand = (align_to(r, rho) - rho).norm() / rho.norm();
    CHECK(e_init < e_rand);
  }
}

TEST_CASE("gradient vanishes at the truth and at zero", "[solvers]") {
  auto inst = test::small_instance(6, 3, 3, 8, false);
  const auto& p = inst.problem;
  const double scale = local_wirtinger_gradient(p, 0, 2.0 * inst.truth).norm();
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    CHECK(local_wirtinger_gradient(p, i, inst.truth).norm() <= 1e-13 * scale);
    CHECK(local_wirtinger_gradient(p, i, CVector::Zero(9)).norm() == 0.0);
  }
}

TEST_CASE("global gradient is the mean of local gradients", "[solvers]") {
  auto inst = test::small_instance(6, 3, 3, 8, false);
  const auto& p = inst.problem;
  Rng rng(3);
  const CVector x = test::random_complex(9, rng, 0.02);
  CVector mean = CVector::Zero(9);
  double fmean = 0.0;
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    mean += local_wirtinger_gradient(p, i, x);
    fmean += local_objective(p, i, x);
  }
  mean /= 6.0;
  fmean /= 6.0;
  CHECK((global_wirtinger_gradient(p, x) - mean).norm() <= 1e-13 * mean.norm());
  CHECK(global_objective(p, x) == Approx(fmean).epsilon(1e-13));
}

TEST_CASE("local gradient matches the real reformulation on the default scene", "[solvers]") {
  ExperimentConfig cfg;
  cfg.noise.snr_db.reset();
  cfg.graph.num_agents = 10;
  cfg.waveform.num_samples = 16;
  const Instance inst = build_instance(cfg, RunSeeds::from(1));
  const auto& p = inst.problem;
  Rng rng(17);
  for (std::size_t i : {std::size_t{0}, std::size_t{4}}) {
    const RealLift lift = real_lift_local(p, i);
    for (int trial = 0; trial < 3; ++trial) {
      const CVector x = inst.truth.values + test::random_complex(144, rng, 1e-4);
      const CVector g = local_wirtinger_gradient(p, i, x);
      const CVector mapped = from_real(real_gradient(to_real(x), lift));
      CHECK((mapped - 2.0 * g).norm() <= 1e-10 * mapped.norm());
    }
  }
}

TEST_CASE("consensus at the truth is a fixed point", "[solvers]") {
  auto inst = test::small_instance();
  const auto& p = inst.problem;
  const SolverConfig cfg;
  const auto states = broadcast_init(inst.truth, p.num_agents());
  const auto next = dgwf_step(p, states, cfg, 5000, inst.truth.norm());
  for (std::size_t i = 0; i < states.size(); ++i) {
    CHECK(test::max_abs_diff(next[i].x, states[i].x) <= 1e-15);
    CHECK(next[i].v.norm() <= 1e-15);
  }
}

TEST_CASE("decoupled single agent takes a plain gradient step", "[solvers]") {
  auto inst = test::small_instance(2);
  const auto& p = inst.problem;
  SolverConfig cfg;
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  Rng rng(8);
  std::vector<AgentState> states(2);
  for (std::size_t i = 0; i < 2; ++i) states[i] = {i, test::random_complex(9, rng, 0.01), test::random_complex(9, rng)};
  const double norm_x0 = 0.3;
  const auto next = dgwf_step(p, states, cfg, 4000, norm_x0);
  for (std::size_t i = 0; i < 2; ++i) {
    const CVector expected = states[i].x - (cfg.eta(4000) / norm_x0) * local_wirtinger_gradient(p, i, states[i].x);
    CHECK(test::max_abs_diff(next[i].x, expected) == 0.0);
    CHECK(test::max_abs_diff(next[i].v, states[i].v) == 0.0);
  }
}

TEST_CASE("agent update agrees with the stacked update", "[solvers]") {
  auto inst = test::small_instance(7, 3, 3, 8, false);
  const auto& p = inst.problem;
  SolverConfig cfg;
  cfg.eta_cap = 0.5;
  Rng rng(5);
  std::vector<AgentState> states(7);
  for (std::size_t i = 0; i < 7; ++i) states[i] = {i, test::random_complex(9, rng, 0.01), test::random_complex(9, rng, 0.01)};
  const auto next = dgwf_step(p, states, cfg, 100, 0.4);
  const auto [xs, vs] = stacked_step(p, stack_states(states), stack_states(states, true), cfg, 100, 0.4);
  CHECK(test::max_abs_diff(stack_states(next), xs) <= 1e-14);
  CHECK(test::max_abs_diff(stack_states(next, true), vs) <= 1e-14);
}

TEST_CASE("stacked step from consensus is a blockwise gradient step", "[solvers]") {
  auto inst = test::small_instance(4);
  const auto& p = inst.problem;
  const SolverConfig cfg;
  Rng rng(6);
  const CVector x = test::random_complex(9, rng, 0.01);
  const CVector xs = stack_states(broadcast_init(x, 4));
  const auto [xn, vn] = stacked_step(p, xs, CVector::Zero(36), cfg, 7000, 0.2);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const CVector expected = x - (0.01 / 0.2) * local_wirtinger_gradient(p, static_cast<std::size_t>(i), x);
    CHECK(test::max_abs_diff(xn.segment(i * 9, 9), expected) <= 1e-15);
  }
  CHECK(vn.norm() <= 1e-15);
}

TEST_CASE("dual variables sum to zero along a run", "[solvers]") {
  auto inst = test::small_instance(6, 3, 3, 8, false);
  const auto& p = inst.problem;
  SolverConfig cfg;
  cfg.t_max = 200;
  const CVector x0 = spectral_initialize(p).x0;
  double worst = 0.0;
  run_dgwf(p, x0, cfg, &inst.truth, [&](std::size_t, const std::vector<AgentState>& s, const TraceRecord&) {
    CVector sum = CVector::Zero(9);
    for (const auto& a : s) sum += a.v;
    worst = std::max(worst, sum.norm());
  });
  CHECK(worst <= 1e-12);
}

TEST_CASE("zero normalizer is rejected", "[solvers]") {
  auto inst = test::small_instance();
  const auto states = broadcast_init(CVector::Zero(9), 5);
  CHECK_THROWS_AS(dgwf_step(inst.problem, states, SolverConfig{}, 1, 0.0), InvalidArgument);
  CHECK_THROWS_AS(run_dgwf(inst.problem, CVector::Zero(9), SolverConfig{}), InvalidArgument);
}

TEST_CASE("DGWF is equivariant to a global phase", "[solvers]") {
  auto inst = test::small_instance(5, 3, 3, 8, false);
  const auto& p = inst.problem;
  SolverConfig cfg;
  cfg.t_max = 50;
  const CVector x0 = spectral_initialize(p).x0;
  const Complex rot = std::polar(1.0, 0.77);
  const auto a = run_dgwf(p, x0, cfg);
  const auto b = run_dgwf(p, rot * x0, cfg);
  for (std::size_t i = 0; i < a.final_iterates.size(); ++i)
    CHECK(test::max_abs_diff(rot * a.final_iterates[i], b.final_iterates[i]) <= 1e-13 * x0.norm());
}

TEST_CASE("zero iterations return the starting point", "[solvers]") {
  auto inst = test::small_instance();
  SolverConfig cfg;
  cfg.t_max = 0;
  const CVector x0 = spectral_initialize(inst.problem).x0;
  const auto tr = run_dgwf(inst.problem, x0, cfg, &inst.truth);
  REQUIRE(tr.records.size() == 1);
  CHECK(tr.records.front().t == 0);
  CHECK(tr.iterations_run == 0);
  for (const auto& x : tr.final_iterates) CHECK(x == x0);
  const auto g = run_gwf(inst.problem, x0, cfg, &inst.truth);
  CHECK(g.records.size() == 1);
  CHECK(g.final_iterates.front() == x0);
}

TEST_CASE("results do not depend on the thread count", "[solvers]") {
  auto inst = test::small_instance(9, 3, 3, 8, false);
  const CVector x0 = spectral_initialize(inst.problem).x0;
  SolverConfig cfg;
  cfg.t_max = 100;
  const auto a = run_dgwf(inst.problem, x0, cfg, &inst.truth);
  cfg.threads = 4;
  const auto b = run_dgwf(inst.problem, x0, cfg, &inst.truth);
  for (std::size_t i = 0; i < a.final_iterates.size(); ++i) CHECK(a.final_iterates[i] == b.final_iterates[i]);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) CHECK(a.records[k].mse == b.records[k].mse);
}

TEST_CASE("iterations to threshold", "[solvers]") {
  IterationTrace tr;
  for (std::size_t t = 0; t <= 10; ++t) tr.records.push_back({t, std::pow(10.0, -static_cast<double>(t)), 0, 0});
  CHECK(iterations_to_threshold(tr, 1e-7) == std::optional<std::size_t>(7));
  CHECK(iterations_to_threshold(tr, 2.0) == std::optional<std::size_t>(0));
  CHECK_FALSE(iterations_to_threshold(tr, 1e-20).has_value());
}

TEST_CASE("divergent iterate raises a divergence error", "[solvers]") {
  auto inst = test::small_instance();
  SolverConfig cfg;
  cfg.t_max = 5;
  CVector x0 = CVector::Ones(9);
  x0(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(run_dgwf(inst.problem, x0, cfg), InvalidArgument);
  x0(0) = 1e100;
  CHECK_THROWS_AS(run_gwf(inst.problem, x0, cfg), DivergenceError);
}

TEST_CASE("graph without edges cannot form a problem", "[solvers]") {
  std::vector<SamplingMatrix> s = {test::scalar_sampling(0, 1.0)};
  CHECK_THROWS(make_problem(s, CVector::Ones(1), AgentGraph(1, {})));
}
