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

#include "dgwf/dgwf.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace dgwf::test {

inline CVector random_complex(Eigen::Index n, Rng& rng, double variance = 1.0) {
  CVector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = complex_normal(rng, variance);
  return v;
}

inline double max_abs_diff(const CVector& a, const CVector& b) { return (a - b).cwiseAbs().maxCoeff(); }

struct SmallInstance {
  CVector truth;
  InterferometricProblem problem;
};

/// Small radar instance: rows x cols grid, N receivers on a 100 m circle,
/// S stepped frequencies, complete or small-world graph, random complex scene.
inline SmallInstance small_instance(std::size_t n = 5, std::size_t rows = 3, std::size_t cols = 3,
                                    std::size_t samples = 8, bool complete = true, std::uint64_t seed = 11,
                                    double bandwidth = 1.2e9) {
  const SceneGeometry g = make_circular_geometry({rows, cols}, 2.4, n, 100.0, Point3(0.0, 0.0, 5e5));
  WaveformSpec w;
  w.num_samples = samples;
  w.bandwidth = bandwidth;
  auto sampling = build_all_sampling(g, w);
  Rng rng(seed);
  CVector truth = random_complex(static_cast<Eigen::Index>(rows * cols), rng, 0.01);
  AgentGraph graph = complete ? complete_graph(n) : small_world(n, 0.3, 2, seed);
  auto problem = make_problem(std::move(sampling), truth, std::move(graph));
  return {std::move(truth), std::move(problem)};
}

inline SamplingMatrix scalar_sampling(std::size_t agent, Complex a) {
  SamplingMatrix m{agent, CMatrix(1, 1)};
  m.rows(0, 0) = a;
  return m;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dgwf_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace dgwf::test
