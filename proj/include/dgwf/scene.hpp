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
#include "dgwf/random.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dgwf {

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const GridShape&) const = default;
};

/// Multistatic geometry: one transmitter, N receivers, K voxels.
struct SceneGeometry {
  Point3 tx_position = Point3::Zero();
  std::vector<Point3> rx_positions;
  std::vector<Point3> voxel_positions;
  GridShape grid_shape;
  double voxel_spacing = 0.0;
  double wave_speed = kSpeedOfLight;

  std::size_t num_agents() const noexcept { return rx_positions.size(); }
  std::size_t num_voxels() const noexcept { return voxel_positions.size(); }

  void validate() const {
    if (!(wave_speed > 0.0) || !std::isfinite(wave_speed)) throw InvalidArgument("wave speed must be positive");
    if (voxel_positions.size() != grid_shape.size())
      throw DimensionMismatch("voxel count must equal rows * cols");
    if (!tx_position.allFinite()) throw InvalidArgument("transmitter position is not finite");
    for (const auto& p : rx_positions)
      if (!p.allFinite()) throw InvalidArgument("receiver position is not finite");
    for (const auto& p : voxel_positions)
      if (!p.allFinite()) throw InvalidArgument("voxel position is not finite");
    for (std::size_t a = 0; a < rx_positions.size(); ++a)
      for (std::size_t b = a + 1; b < rx_positions.size(); ++b)
        if ((rx_positions[a] - rx_positions[b]).norm() == 0.0)
          throw InvalidArgument("receivers " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
  }
};

/// Voxel grid centred on `center` in the z = center.z plane; voxel k = r * cols + c.
inline std::vector<Point3> grid_voxels(GridShape shape, double spacing, const Point3& center = Point3::Zero()) {
  std::vector<Point3> out;
  out.reserve(shape.size());
  const double r0 = (static_cast<double>(shape.rows) - 1.0) / 2.0;
  const double c0 = (static_cast<double>(shape.cols) - 1.0) / 2.0;
  for (std::size_t r = 0; r < shape.rows; ++r)
    for (std::size_t c = 0; c < shape.cols; ++c)
      out.emplace_back(center.x() + (static_cast<double>(c) - c0) * spacing,
                       center.y() + (static_cast<double>(r) - r0) * spacing, center.z());
  return out;
}

/// N receivers evenly spaced on a circle around the scene centre, in the scene plane.
inline std::vector<Point3> circle_receivers(std::size_t n, double radius, const Point3& center = Point3::Zero(),
                                            double start_angle = 0.0) {
  std::vector<Point3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = start_angle + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    out.emplace_back(center.x() + radius * std::cos(th), center.y() + radius * std::sin(th), center.z());
  }
  return out;
}

inline SceneGeometry make_circular_geometry(GridShape shape, double spacing, std::size_t num_receivers,
                                            double radius, const Point3& tx, double wave_speed = kSpeedOfLight) {
  SceneGeometry g;
  g.tx_position = tx;
  g.rx_positions = circle_receivers(num_receivers, radius);
  g.voxel_positions = grid_voxels(shape, spacing);
  g.grid_shape = shape;
  g.voxel_spacing = spacing;
  g.wave_speed = wave_speed;
  g.validate();
  return g;
}

/// Stepped-frequency waveform: S samples uniformly spanning the band, endpoints included.
struct WaveformSpec {
  double center_frequency = 12e9;
  double bandwidth = 60e6;
  std::size_t num_samples = 64;
  double tx_gain_db = 100.0;
  double rx_gain_db = 100.0;
  /// J(omega_s). Empty means a flat unit spectrum.
  std::vector<Complex> spectrum;

  void validate() const {
    if (num_samples < 1) throw InvalidArgument("waveform needs at least one frequency sample");
    if (!(bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
    if (!(center_frequency > 0.0)) throw InvalidArgument("center frequency must be positive");
    if (!spectrum.empty() && spectrum.size() != num_samples)
      throw DimensionMismatch("spectrum must have one entry per frequency sample");
  }

  double frequency(std::size_t s) const {
    if (num_samples == 1) return center_frequency;
    return center_frequency - bandwidth / 2.0 +
           bandwidth * static_cast<double>(s) / static_cast<double>(num_samples - 1);
  }

  double angular_frequency(std::size_t s) const { return 2.0 * kPi * frequency(s); }

  std::vector<double> angular_frequencies() const {
    std::vector<double> w(num_samples);
    for (std::size_t s = 0; s < num_samples; ++s) w[s] = angular_frequency(s);
    return w;
  }

  Complex signal(std::size_t s) const { return spectrum.empty() ? Complex{1.0, 0.0} : spectrum.at(s); }

  /// Combined linear amplitude gain of transmitter and receiver.
  double gain() const { return std::pow(10.0, (tx_gain_db + rx_gain_db) / 20.0); }
};

struct ReflectivityImage {
  CVector values;
  GridShape grid_shape;
  double voxel_spacing = 0.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
  Complex at(std::size_t row, std::size_t col) const {
    return values(static_cast<Eigen::Index>(row * grid_shape.cols + col));
  }
};

struct PointScatterer {
  std::size_t row = 0;
  std::size_t col = 0;
  Complex amplitude{1.0, 0.0};
};

inline ReflectivityImage point_scatterer_scene(GridShape shape, double spacing,
                                               const std::vector<PointScatterer>& scatterers) {
  ReflectivityImage img{CVector::Zero(static_cast<Eigen::Index>(shape.size())), shape, spacing};
  for (const auto& p : scatterers) {
    if (p.row >= shape.rows || p.col >= shape.cols) throw OutOfRange("scatterer outside the grid");
    img.values(static_cast<Eigen::Index>(p.row * shape.cols + p.col)) += p.amplitude;
  }
  return img;
}

/// Per-agent sampling vectors. Row s holds a_i^s (K entries); the measurement
/// of a scene x is <a_i^s, x> = (a_i^s)^H x.
struct SamplingMatrix {
  std::size_t agent_id = 0;
  CMatrix rows;

  std::size_t num_samples() const noexcept { return static_cast<std::size_t>(rows.rows()); }
  std::size_t num_voxels() const noexcept { return static_cast<std::size_t>(rows.cols()); }

  /// y_s = (a^s)^H x for all s.
  CVector project(const CVector& x) const { return rows.conjugate() * x; }

  /// sum_s c_s a^s.
  CVector backproject(const CVector& c) const { return rows.transpose() * c; }
};

/// Propagation time transmitter -> voxel k -> receiver i.
inline double bistatic_delay(const SceneGeometry& g, std::size_t agent, std::size_t voxel) {
  if (agent >= g.num_agents() || voxel >= g.num_voxels()) throw OutOfRange("bistatic_delay: index out of range");
  const Point3& x = g.voxel_positions[voxel];
  return ((x - g.rx_positions[agent]).norm() + (x - g.tx_position).norm()) / g.wave_speed;
}

/// Free-space two-leg spreading with combined hardware gain G:
/// alpha = G / ((4 pi |x - p_rx|)(4 pi |x - p_tx|)).
inline double attenuation(const SceneGeometry& g, const WaveformSpec& w, std::size_t agent, std::size_t voxel) {
  const Point3& x = g.voxel_positions[voxel];
  const double r_rx = (x - g.rx_positions[agent]).norm();
  const double r_tx = (x - g.tx_position).norm();
  constexpr double kMinRange = 1e-9;
  if (r_rx < kMinRange) throw DegenerateGeometry("voxel " + std::to_string(voxel) + " coincides with receiver " +
                                                 std::to_string(agent));
  if (r_tx < kMinRange) throw DegenerateGeometry("voxel " + std::to_string(voxel) + " coincides with transmitter");
  return w.gain() / ((4.0 * kPi * r_rx) * (4.0 * kPi * r_tx));
}

/// Entry (s, k) = J(w_s) alpha_i(x_k) exp(-i w_s tau_i(x_k)).
inline SamplingMatrix build_sampling_matrix(const SceneGeometry& g, const WaveformSpec& w, std::size_t agent) {
  w.validate();
  if (agent >= g.num_agents()) throw OutOfRange("build_sampling_matrix: agent out of range");
  const auto S = static_cast<Eigen::Index>(w.num_samples);
  const auto K = static_cast<Eigen::Index>(g.num_voxels());
  SamplingMatrix m{agent, CMatrix(S, K)};
  const auto omega = w.angular_frequencies();
  for (Eigen::Index k = 0; k < K; ++k) {
    const double alpha = attenuation(g, w, agent, static_cast<std::size_t>(k));
    const double tau = bistatic_delay(g, agent, static_cast<std::size_t>(k));
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto su = static_cast<std::size_t>(s);
      m.rows(s, k) = w.signal(su) * alpha * std::polar(1.0, -omega[su] * tau);
    }
  }
  return m;
}

inline std::vector<SamplingMatrix> build_all_sampling(const SceneGeometry& g, const WaveformSpec& w) {
  g.validate();
  std::vector<SamplingMatrix> out;
  out.reserve(g.num_agents());
  for (std::size_t i = 0; i < g.num_agents(); ++i) out.push_back(build_sampling_matrix(g, w, i));
  return out;
}

/// Cross-correlations d_ij^s keyed by graph edge. Each undirected edge is stored
/// once as (i < j); reading (j, i) returns the exact complex conjugate.
class MeasurementSet {
 public:
  MeasurementSet() = default;

  MeasurementSet(std::size_t num_agents, std::size_t num_samples)
      : num_agents_(num_agents), num_samples_(num_samples) {}

  std::size_t num_agents() const noexcept { return num_agents_; }
  std::size_t num_samples() const noexcept { return num_samples_; }
  std::size_t num_edges() const noexcept { return data_.size(); }
  /// Number of stored complex values, M = |E| * S.
  std::size_t size() const noexcept { return data_.size() * num_samples_; }
  bool empty() const noexcept { return data_.empty(); }

  double noise_sigma() const noexcept { return noise_sigma_; }
  double snr_db() const noexcept { return snr_db_; }
  void set_noise(double sigma, double snr_db) {
    noise_sigma_ = sigma;
    snr_db_ = snr_db;
  }

  bool contains(std::size_t i, std::size_t j) const { return data_.count(std::minmax(i, j)) != 0; }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(data_.size());
    for (const auto& kv : data_) out.push_back(kv.first);
    return out;
  }

  /// Store the S samples of d_ij. (j, i) is stored as the conjugate under (i, j).
  void set(std::size_t i, std::size_t j, const CVector& samples) {
    if (i == j) throw InvalidArgument("measurement on a self-pair");
    if (i >= num_agents_ || j >= num_agents_) throw OutOfRange("measurement agent out of range");
    require_dims(static_cast<std::size_t>(samples.size()) == num_samples_, "measurement must have S samples");
    if (i < j)
      data_[{i, j}] = samples;
    else
      data_[{j, i}] = samples.conjugate();
  }

  Complex at(std::size_t i, std::size_t j, std::size_t s) const {
    const auto& v = stored(i, j);
    const Complex d = v(static_cast<Eigen::Index>(s));
    return i < j ? d : std::conj(d);
  }

  /// All S samples of d_ij as seen from agent i.
  CVector pair(std::size_t i, std::size_t j) const {
    const auto& v = stored(i, j);
    return i < j ? CVector(v) : CVector(v.conjugate());
  }

  /// Stored (i < j) samples, mutable for noise injection.
  template <typename Fn>
  void for_each_stored(Fn&& fn) {
    for (auto& kv : data_) fn(kv.first, kv.second);
  }
  template <typename Fn>
  void for_each_stored(Fn&& fn) const {
    for (const auto& kv : data_) fn(kv.first, kv.second);
  }

  double mean_power() const {
    if (empty()) return 0.0;
    double p = 0.0;
    for (const auto& kv : data_) p += kv.second.squaredNorm();
    return p / static_cast<double>(size());
  }

 private:
  const CVector& stored(std::size_t i, std::size_t j) const {
    const auto it = data_.find(std::minmax(i, j));
    if (it == data_.end())
      throw OutOfRange("no measurement for pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    return it->second;
  }

  std::size_t num_agents_ = 0;
  std::size_t num_samples_ = 0;
  std::map<Edge, CVector> data_;
  double noise_sigma_ = 0.0;
  double snr_db_ = std::numeric_limits<double>::infinity();
};

/// Noiseless d_ij^s = <a_i^s, rho> conj(<a_j^s, rho>) for every graph edge.
inline MeasurementSet synthesize_measurements(const std::vector<SamplingMatrix>& sampling, const CVector& truth,
                                              const AgentGraph& graph) {
  if (graph.num_edges() == 0) throw EmptyMeasurements("graph has no edges; no cross-correlations exist");
  require_dims(sampling.size() == graph.num_agents(), "need one sampling matrix per graph vertex");
  const std::size_t S = sampling.front().num_samples();
  std::vector<CVector> y;
  y.reserve(sampling.size());
  for (const auto& a : sampling) {
    require_dims(a.num_samples() == S, "sampling matrices disagree on S");
    require_dims(a.num_voxels() == static_cast<std::size_t>(truth.size()), "scene length must equal K");
    y.push_back(a.project(truth));
  }
  MeasurementSet m(graph.num_agents(), S);
  for (auto [i, j] : graph.edges()) m.set(i, j, y[i].cwiseProduct(y[j].conjugate()));
  return m;
}

/// Adds circular complex Gaussian noise at the requested SNR, where SNR is the
/// mean stored measurement power over the noise variance. snr_db = +inf is a
/// no-op.
inline MeasurementSet add_noise(const MeasurementSet& clean, double snr_db, std::uint64_t seed) {
  if (clean.empty()) throw EmptyMeasurements("cannot add noise to an empty measurement set");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw InvalidArgument("snr_db must be finite or +inf");
  MeasurementSet out = clean;
  if (snr_db == std::numeric_limits<double>::infinity()) return out;
  const double variance = clean.mean_power() * std::pow(10.0, -snr_db / 10.0);
  Rng rng(seed);
  out.for_each_stored([&](const Edge&, CVector& v) {
    for (Eigen::Index s = 0; s < v.size(); ++s) v(s) += complex_normal(rng, variance);
  });
  out.set_noise(std::sqrt(variance / 2.0), snr_db);
  return out;
}

/// Columnar text: header "i,j,s,re,im", one row per stored (i < j) sample.
inline void write_measurements_csv(const MeasurementSet& m, std::ostream& os) {
  os << "i,j,s,re,im\n";
  os << std::setprecision(17);
  m.for_each_stored([&](const Edge& e, const CVector& v) {
    for (Eigen::Index s = 0; s < v.size(); ++s)
      os << e.first << ',' << e.second << ',' << s << ',' << v(s).real() << ',' << v(s).imag() << '\n';
  });
}

inline void write_measurements_csv(const MeasurementSet& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_measurements_csv(m, os);
}

inline MeasurementSet read_measurements_csv(std::istream& is, std::size_t num_agents, std::size_t num_samples) {
  MeasurementSet m(num_agents, num_samples);
  std::map<Edge, CVector> acc;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t i = 0, j = 0, s = 0;
    double re = 0.0, im = 0.0;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ls >> i >> c1 >> j >> c2 >> s >> c3 >> re >> c4 >> im)) throw Error("malformed measurement row: " + line);
    if (s >= num_samples) throw OutOfRange("sample index out of range in measurement file");
    auto& v = acc.try_emplace(std::minmax(i, j), CVector::Zero(static_cast<Eigen::Index>(num_samples))).first->second;
    const Complex d{re, im};
    v(static_cast<Eigen::Index>(s)) = i < j ? d : std::conj(d);
  }
  for (const auto& [e, v] : acc) m.set(e.first, e.second, v);
  return m;
}

}  // namespace dgwf
