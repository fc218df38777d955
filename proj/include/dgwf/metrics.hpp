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

#include <cmath>
#include <optional>
#include <vector>

namespace dgwf {

/// Rotation phi such that e^{i phi} estimate is closest to truth. Zero when the
/// two vectors are orthogonal.
inline double alignment_phase(const CVector& estimate, const CVector& truth) {
  const Complex ip = estimate.dot(truth);  // sum conj(estimate_k) truth_k
  if (ip == Complex{0.0, 0.0}) return 0.0;
  return std::arg(ip);
}

/// (1/K) || e^{i phi} estimate - truth ||^2 with phi = alignment_phase(estimate, truth).
inline double mse_aligned(const CVector& estimate, const CVector& truth) {
  require_dims(estimate.size() == truth.size(), "mse_aligned: length mismatch");
  if (truth.size() == 0) return 0.0;
  const Complex ip = estimate.dot(truth);
  const double mag = std::abs(ip);
  const Complex rot = mag > 0.0 ? ip / mag : Complex{1.0, 0.0};
  return (rot * estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

inline CVector mean_of(const std::vector<CVector>& xs) {
  require(!xs.empty(), "mean of an empty set");
  CVector m = CVector::Zero(xs.front().size());
  for (const auto& x : xs) {
    require_dims(x.size() == m.size(), "agent iterates differ in length");
    m += x;
  }
  return m / static_cast<double>(xs.size());
}

/// sum_i || x_i - mean ||^2.
inline double consensus_error(const std::vector<CVector>& xs) {
  if (xs.empty()) return 0.0;
  const CVector m = mean_of(xs);
  double e = 0.0;
  for (const auto& x : xs) e += (x - m).squaredNorm();
  return e;
}

}  // namespace dgwf
