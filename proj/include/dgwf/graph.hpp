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
#include "dgwf/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dgwf {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected, unweighted, connected communication graph between agents.
///
/// Edges are stored once with i < j, sorted. The Laplacian L = D - A is kept
/// dense (N is small); the stacked operator L (x) I_K is only ever applied
/// blockwise.
class AgentGraph {
 public:
  AgentGraph() = default;

  AgentGraph(std::size_t num_agents, std::vector<Edge> edges) : n_(num_agents) {
    if (n_ < 1) throw GraphError("graph needs at least one vertex");
    std::set<Edge> unique;
    for (auto [i, j] : edges) {
      if (i == j) throw GraphError("self-loop at vertex " + std::to_string(i));
      if (i >= n_ || j >= n_) throw GraphError("edge endpoint out of range");
      unique.insert(std::minmax(i, j));
    }
    edges_.assign(unique.begin(), unique.end());
    neighbors_.assign(n_, {});
    laplacian_ = RMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (auto [i, j] : edges_) {
      neighbors_[i].push_back(j);
      neighbors_[j].push_back(i);
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      laplacian_(ii, jj) = -1.0;
      laplacian_(jj, ii) = -1.0;
      laplacian_(ii, ii) += 1.0;
      laplacian_(jj, jj) += 1.0;
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
  }

  std::size_t num_agents() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_.at(i); }
  std::size_t degree(std::size_t i) const { return neighbors_.at(i).size(); }
  const RMatrix& laplacian() const noexcept { return laplacian_; }

  bool has_edge(std::size_t i, std::size_t j) const {
    if (i == j || i >= n_ || j >= n_) return false;
    const auto& nb = neighbors_[i];
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  bool is_connected() const {
    if (n_ == 0) return false;
    std::vector<char> seen(n_, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : neighbors_[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n_;
  }

  /// Laplacian eigenvalues in ascending order.
  RVector laplacian_spectrum() const {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(laplacian_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  /// Second-smallest Laplacian eigenvalue (Fiedler value).
  double algebraic_connectivity() const {
    if (n_ < 2) return 0.0;
    return laplacian_spectrum()(1);
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
  RMatrix laplacian_;
};

/// Complete graph on N vertices.
inline AgentGraph complete_graph(std::size_t n) {
  if (n < 2) throw GraphError("complete_graph needs N >= 2");
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return AgentGraph(n, std::move(edges));
}

/// Ring lattice where each vertex links to base_degree/2 neighbours on each side.
inline AgentGraph ring_lattice(std::size_t n, std::size_t base_degree) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 1; h <= base_degree / 2; ++h) edges.emplace_back(i, (i + h) % n);
  return AgentGraph(n, std::move(edges));
}

namespace detail {

// One Watts-Strogatz draw: every lattice edge (i, i+h) is, with probability p,
// replaced by (i, w) for w uniform over vertices that are neither i nor
// already adjacent to i. Edges are visited hop-by-hop, vertex-by-vertex.
inline AgentGraph watts_strogatz_draw(std::size_t n, std::size_t k, double p, Rng& rng) {
  std::vector<std::set<std::size_t>> adj(n);
  auto link = [&](std::size_t a, std::size_t b) {
    adj[a].insert(b);
    adj[b].insert(a);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 1; h <= k / 2; ++h) link(i, (i + h) % n);

  for (std::size_t h = 1; h <= k / 2; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + h) % n;
      // Both draws are consumed for every lattice edge so that graphs drawn
      // with the same seed and increasing p share their rewiring decisions.
      const double u = uniform01(rng);
      const double r = uniform01(rng);
      if (u >= p) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t c = 0; c < n; ++c)
        if (c != i && adj[i].count(c) == 0) candidates.push_back(c);
      if (candidates.empty()) continue;
      const auto pick = std::min(candidates.size() - 1, static_cast<std::size_t>(r * static_cast<double>(candidates.size())));
      const std::size_t w = candidates[pick];
      adj[i].erase(j);
      adj[j].erase(i);
      link(i, w);
    }
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : adj[i])
      if (i < j) edges.emplace_back(i, j);
  return AgentGraph(n, std::move(edges));
}

}  // namespace detail

/// Watts-Strogatz small-world graph with rewiring probability p.
///
/// base_degree is clamped to N - 1; when the clamp reaches N - 1 the result is
/// the complete graph (nothing can be rewired). Disconnected draws are
/// discarded and redrawn from the same stream, up to max_retries times.
inline AgentGraph small_world(std::size_t n, double connection_prob, std::size_t base_degree,
                              std::uint64_t seed, std::size_t max_retries = 100) {
  if (n < 2) throw GraphError("small_world needs N >= 2");
  if (!(connection_prob >= 0.0 && connection_prob <= 1.0))
    throw GraphError("connection probability must lie in [0, 1]");
  if (base_degree < 2 || base_degree % 2 != 0) throw GraphError("base_degree must be even and >= 2");
  if (base_degree >= n - 1) return complete_graph(n);

  Rng rng(seed);
  for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
    AgentGraph g = detail::watts_strogatz_draw(n, base_degree, connection_prob, rng);
    if (g.is_connected()) return g;
  }
  throw GraphError("small_world: no connected graph after " + std::to_string(max_retries) + " retries");
}

// Stacked vectors hold one K-block per agent: x = col(x_1, ..., x_N).

/// Blockwise (L (x) I_K) x.
inline CVector laplacian_apply(const AgentGraph& g, const CVector& x, std::size_t block) {
  const auto n = static_cast<Eigen::Index>(g.num_agents());
  const auto k = static_cast<Eigen::Index>(block);
  require_dims(block > 0 && x.size() == n * k, "laplacian_apply: stacked vector must have N*K entries");
  CVector out(x.size());
  Eigen::Map<const CMatrix> xs(x.data(), k, n);
  Eigen::Map<CMatrix> ys(out.data(), k, n);
  ys.noalias() = xs * g.laplacian().cast<Complex>();  // L symmetric: (L x)_i = sum_j L_ij x_j
  return out;
}

/// x^H (L (x) I_K) x, computed edge by edge as sum over edges of |x_i - x_j|^2.
inline double laplacian_quadratic(const AgentGraph& g, const CVector& x, std::size_t block) {
  const auto n = static_cast<Eigen::Index>(g.num_agents());
  const auto k = static_cast<Eigen::Index>(block);
  require_dims(block > 0 && x.size() == n * k, "laplacian_quadratic: stacked vector must have N*K entries");
  double q = 0.0;
  for (auto [i, j] : g.edges()) {
    q += (x.segment(static_cast<Eigen::Index>(i) * k, k) - x.segment(static_cast<Eigen::Index>(j) * k, k))
             .squaredNorm();
  }
  return q;
}

/// Edge-list text: optional "# N=<count>" header, then one "i j" pair per line, 0-based.
inline void write_edge_list(const AgentGraph& g, std::ostream& os) {
  os << "# N=" << g.num_agents() << '\n';
  for (auto [i, j] : g.edges()) os << i << ' ' << j << '\n';
}

inline void write_edge_list(const AgentGraph& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_edge_list(g, os);
}

inline AgentGraph read_edge_list(std::istream& is) {
  std::vector<Edge> edges;
  std::size_t n = 0;
  bool have_n = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("N=");
      if (pos != std::string::npos) {
        n = std::stoul(line.substr(pos + 2));
        have_n = true;
      }
      continue;
    }
    std::istringstream ls(line);
    std::size_t i = 0, j = 0;
    if (!(ls >> i >> j)) throw GraphError("malformed edge-list line: " + line);
    edges.emplace_back(i, j);
    if (!have_n) n = std::max({n, i + 1, j + 1});
  }
  return AgentGraph(n, std::move(edges));
}

inline AgentGraph read_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return read_edge_list(is);
}

}  // namespace dgwf
