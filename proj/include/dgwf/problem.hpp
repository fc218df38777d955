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
#include "dgwf/graph.hpp"
#include "dgwf/scene.hpp"

#include <vector>

namespace dgwf {

/// Everything one imaging instance needs: per-agent sampling vectors, the
/// cross-correlations the graph allows, and the graph itself.
///
/// Local objective of agent i:
///   f_i(x) = 1/(2 |N_i| S) sum_{j in N_i} sum_s |d_ij^s - <a_i^s, x> conj(<a_j^s, x>)|^2
/// Global objective: f(x) = (1/N) sum_i f_i(x).
class InterferometricProblem {
 public:
  InterferometricProblem(std::vector<SamplingMatrix> sampling, MeasurementSet measurements, AgentGraph graph)
      : sampling_(std::move(sampling)), measurements_(std::move(measurements)), graph_(std::move(graph)) {
    validate();
  }

  std::size_t num_agents() const noexcept { return graph_.num_agents(); }
  std::size_t num_voxels() const noexcept { return sampling_.front().num_voxels(); }
  std::size_t num_samples() const noexcept { return sampling_.front().num_samples(); }

  const std::vector<SamplingMatrix>& sampling() const noexcept { return sampling_; }
  const SamplingMatrix& sampling(std::size_t i) const { return sampling_.at(i); }
  const MeasurementSet& measurements() const noexcept { return measurements_; }
  const AgentGraph& graph() const noexcept { return graph_; }

  /// 1 / (2 |N_i| S_i).
  double local_weight(std::size_t i) const {
    const auto deg = graph_.degree(i);
    if (deg == 0) throw GraphError("agent " + std::to_string(i) + " has no neighbours");
    return 1.0 / (2.0 * static_cast<double>(deg) * static_cast<double>(num_samples()));
  }

 private:
  void validate() const {
    if (sampling_.empty()) throw InvalidArgument("problem needs at least one agent");
    require_dims(sampling_.size() == graph_.num_agents(), "need one sampling matrix per graph vertex");
    const auto S = sampling_.front().num_samples();
    const auto K = sampling_.front().num_voxels();
    for (std::size_t i = 0; i < sampling_.size(); ++i) {
      require_dims(sampling_[i].num_samples() == S && sampling_[i].num_voxels() == K,
                   "sampling matrices disagree in shape");
    }
    if (graph_.num_edges() == 0) throw EmptyMeasurements("graph has no edges");
    require_dims(measurements_.num_samples() == S, "measurement set and sampling disagree on S");
    if (measurements_.num_edges() != graph_.num_edges())
      throw InvalidArgument("measurement pairs must match the graph's edge set");
    for (auto [i, j] : graph_.edges())
      if (!measurements_.contains(i, j))
        throw InvalidArgument("missing measurements for edge (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  }

  std::vector<SamplingMatrix> sampling_;
  MeasurementSet measurements_;
  AgentGraph graph_;
};

inline InterferometricProblem make_problem(std::vector<SamplingMatrix> sampling, const CVector& truth,
                                           AgentGraph graph) {
  auto m = synthesize_measurements(sampling, truth, graph);
  return InterferometricProblem(std::move(sampling), std::move(m), std::move(graph));
}

/// f_i(x).
inline double local_objective(const InterferometricProblem& p, std::size_t i, const CVector& x) {
  require_dims(static_cast<std::size_t>(x.size()) == p.num_voxels(), "local_objective: x must have K entries");
  const CVector yi = p.sampling(i).project(x);
  double acc = 0.0;
  for (auto j : p.graph().neighbors(i)) {
    const CVector yj = p.sampling(j).project(x);
    acc += (p.measurements().pair(i, j) - yi.cwiseProduct(yj.conjugate())).squaredNorm();
  }
  return p.local_weight(i) * acc;
}

/// f(x) = (1/N) sum_i f_i(x). Each edge residual is evaluated once.
inline double global_objective(const InterferometricProblem& p, const CVector& x) {
  require_dims(static_cast<std::size_t>(x.size()) == p.num_voxels(), "global_objective: x must have K entries");
  std::vector<CVector> y;
  y.reserve(p.num_agents());
  for (const auto& a : p.sampling()) y.push_back(a.project(x));
  double acc = 0.0;
  for (auto [i, j] : p.graph().edges()) {
    // |d_ji - y_j conj(y_i)| = |d_ij - y_i conj(y_j)|, so both directions share one residual.
    const double r2 = (p.measurements().pair(i, j) - y[i].cwiseProduct(y[j].conjugate())).squaredNorm();
    acc += (p.local_weight(i) + p.local_weight(j)) * r2;
  }
  return acc / static_cast<double>(p.num_agents());
}

/// Conjugate Wirtinger gradient of f_i at x:
///   w_i sum_j sum_s [ conj(e_ij^s) a_j^s (a_i^s)^H x + e_ij^s a_i^s (a_j^s)^H x ],
///   e_ij^s = (a_i^s)^H x x^H a_j^s - d_ij^s.
/// Evaluated through projections and back-projections only.
inline CVector local_wirtinger_gradient(const InterferometricProblem& p, std::size_t i, const CVector& x) {
  require_dims(static_cast<std::size_t>(x.size()) == p.num_voxels(), "local gradient: x must have K entries");
  const double w = p.local_weight(i);
  const auto& ai = p.sampling(i);
  const CVector yi = ai.project(x);
  CVector coeff_i = CVector::Zero(yi.size());
  CVector g = CVector::Zero(x.size());
  for (auto j : p.graph().neighbors(i)) {
    const auto& aj = p.sampling(j);
    const CVector yj = aj.project(x);
    const CVector e = yi.cwiseProduct(yj.conjugate()) - p.measurements().pair(i, j);
    g.noalias() += aj.backproject(e.conjugate().cwiseProduct(yi));
    coeff_i.noalias() += e.cwiseProduct(yj);
  }
  g.noalias() += ai.backproject(coeff_i);
  return w * g;
}

/// (1/N) sum_i grad f_i(x), sharing projections across agents.
inline CVector global_wirtinger_gradient(const InterferometricProblem& p, const CVector& x) {
  require_dims(static_cast<std::size_t>(x.size()) == p.num_voxels(), "global gradient: x must have K entries");
  const auto n = p.num_agents();
  std::vector<CVector> y;
  y.reserve(n);
  for (const auto& a : p.sampling()) y.push_back(a.project(x));
  std::vector<CVector> coeff(n, CVector::Zero(static_cast<Eigen::Index>(p.num_samples())));
  for (auto [i, j] : p.graph().edges()) {
    const CVector e = y[i].cwiseProduct(y[j].conjugate()) - p.measurements().pair(i, j);
    const double wi = p.local_weight(i);
    const double wj = p.local_weight(j);
    // Agent i's terms for neighbour j.
    coeff[j].noalias() += wi * e.conjugate().cwiseProduct(y[i]);
    coeff[i].noalias() += wi * e.cwiseProduct(y[j]);
    // Agent j's terms for neighbour i use e_ji = conj(e_ij).
    coeff[i].noalias() += wj * e.cwiseProduct(y[j]);
    coeff[j].noalias() += wj * e.conjugate().cwiseProduct(y[i]);
  }
  CVector g = CVector::Zero(x.size());
  for (std::size_t k = 0; k < n; ++k) g.noalias() += p.sampling(k).backproject(coeff[k]);
  return g / static_cast<double>(n);
}

}  // namespace dgwf
