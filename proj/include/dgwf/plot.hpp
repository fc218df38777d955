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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace dgwf::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline const char* colour(std::size_t k) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return palette[k % 6];
}

}  // namespace detail

/// Static SVG line plot. Points with non-finite coordinates (or y <= 0 on a
/// log axis) are skipped.
inline std::string render_svg(const Figure& fig) {
  const double W = 720, H = 480, left = 80, right = 180, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!fig.log_y || y > 0.0); };
  auto ty = [&](double y) { return fig.log_y ? std::log10(y) : y; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : fig.series)
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
      if (usable(s.x[k], s.y[k])) {
        x0 = std::min(x0, s.x[k]);
        x1 = std::max(x1, s.x[k]);
        y0 = std::min(y0, ty(s.y[k]));
        y1 = std::max(y1, ty(s.y[k]));
      }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (fig.log_y) {
    y0 = std::floor(y0);
    y1 = std::ceil(y1);
  }
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (ty(y) - y0) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(fig.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << detail::fmt(xv) << "</text>\n";
  }
  const int ny = fig.log_y ? static_cast<int>(y1 - y0) : 5;
  for (int k = 0; k <= ny; ++k) {
    const double yt = y0 + (y1 - y0) * k / ny;
    const double ypix = top + ph - (yt - y0) / (y1 - y0) * ph;
    const std::string label = fig.log_y ? "1e" + detail::fmt(yt) : detail::fmt(yt);
    os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << ypix << "\" y2=\"" << ypix << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << ypix + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << detail::escape(fig.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(fig.y_label) << "</text>\n";

  for (std::size_t si = 0; si < fig.series.size(); ++si) {
    const auto& s = fig.series[si];
    std::ostringstream pts;
    pts << std::setprecision(6);
    std::size_t count = 0;
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!usable(s.x[k], s.y[k])) continue;
      pts << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
      ++count;
    }
    if (count > 1)
      os << "<polyline fill=\"none\" stroke=\"" << detail::colour(si) << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    if (count <= 60)
      for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
        if (usable(s.x[k], s.y[k]))
          os << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3\" fill=\"" << detail::colour(si) << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(si);
    os << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly << "\" stroke=\"" << detail::colour(si) << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << detail::escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Writes the figure; returns false instead of throwing so plotting never fails a run.
inline bool write_svg(const Figure& fig, const std::string& path) noexcept {
  try {
    std::ofstream os(path);
    if (!os) return false;
    os << render_svg(fig);
    return static_cast<bool>(os);
  } catch (...) {
    return false;
  }
}

}  // namespace dgwf::plot
