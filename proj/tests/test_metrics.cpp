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

using namespace dgwf;
using Catch::Approx;

TEST_CASE("aligned MSE examples", "[metrics]") {
  Rng rng(1);
  const CVector rho = test::random_complex(8, rng);
  CHECK(mse_aligned(rho, rho) <= 1e-30);
  CHECK(mse_aligned(std::polar(1.0, kPi / 3.0) * rho, rho) <= 1e-30 + 1e-15 * rho.squaredNorm());
  // A real positive scene makes the alignment a no-op for a real perturbation.
  const CVector real_rho = rho.cwiseAbs().cast<Complex>();
  const double eps = 1e-4;
  CVector pert = real_rho;
  pert(0) += eps;
  CHECK(mse_aligned(pert, real_rho) == Approx(eps * eps / 8.0).epsilon(1e-9));
  CHECK(mse_aligned(CVector::Zero(4), CVector::Zero(4)) == 0.0);
  CHECK(alignment_phase(CVector::Unit(2, 0), CVector::Unit(2, 1)) == 0.0);
  CHECK_THROWS_AS(mse_aligned(rho, CVector::Zero(3)), DimensionMismatch);
}

TEST_CASE("aligned MSE is phase invariant", "[metrics]") {
  Rng rng(2);
  const CVector rho = test::random_complex(10, rng);
  const CVector est = rho + test::random_complex(10, rng, 0.01);
  const double base = mse_aligned(est, rho);
  for (double th : {0.1, 1.0, 2.5, -3.0}) CHECK(mse_aligned(std::polar(1.0, th) * est, rho) == Approx(base).epsilon(1e-12));
}

TEST_CASE("consensus error examples", "[metrics]") {
  Rng rng(3);
  const CVector u = test::random_complex(6, rng);
  CHECK(consensus_error({u, u, u}) <= 1e-30);
  CHECK(consensus_error({u, CVector(-u)}) == Approx(2.0 * u.squaredNorm()).epsilon(1e-14));
  std::vector<CVector> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(test::random_complex(6, rng));
  double oracle = 0.0;
  for (int i = 0; i < 5; ++i) {
    CVector m = CVector::Zero(6);
    for (int j = 0; j < 5; ++j) m += xs[j] / 5.0;
    oracle += (xs[i] - m).squaredNorm();
  }
  CHECK(std::abs(consensus_error(xs) - oracle) <= 1e-14 * oracle);
}

TEST_CASE("median and median absolute deviation", "[metrics]") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(median_abs_deviation({1.0, 2.0, 10.0}) == 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(median({1.0, inf, inf}) == inf);
}
