/*
 * Copyright 2026 The greedlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "greedlab/data.hpp"
#include "greedlab/errors.hpp"
#include "greedlab/oracle.hpp"

namespace greedlab {

using Polyline = std::vector<Point2>;

namespace detail {

/// Crossing on the lattice edge between flat indices a < b. Always evaluated
/// with the lower index first so neighbouring squares produce identical bits.
struct EdgeKey {
  std::size_t a;
  std::size_t b;
  auto operator<=>(const EdgeKey&) const = default;
};

inline EdgeKey edge(std::size_t i, std::size_t j) { return i < j ? EdgeKey{i, j} : EdgeKey{j, i}; }

inline Point2 edge_point(const GridSpec& grid, std::span<const double> values, EdgeKey e, double level) {
  const Point2 pa = grid.point(e.a);
  const Point2 pb = grid.point(e.b);
  const double va = values[e.a];
  const double vb = values[e.b];
  const double t = va == vb ? 0.5 : (level - va) / (vb - va);
  return {pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)};
}

}  // namespace detail

/// Marching squares over lattice values at cell centers. Segments are chained
/// into polylines; closed loops repeat their first point at the end. Saddle
/// squares are disambiguated by the mean of their four corners.
inline std::vector<Polyline> marching_squares(const GridSpec& grid, std::span<const double> values, double level) {
  require(values.size() == grid.cells(), "marching_squares: value count does not match the grid");
  const std::size_t n = grid.resolution;
  std::vector<std::pair<detail::EdgeKey, detail::EdgeKey>> segments;
  for (std::size_t r = 0; r + 1 < n; ++r) {
    for (std::size_t c = 0; c + 1 < n; ++c) {
      // Corners counter-clockwise from bottom-left (low y = low row).
      const std::size_t bl = r * n + c;
      const std::size_t br = bl + 1;
      const std::size_t tr = bl + n + 1;
      const std::size_t tl = bl + n;
      const int config = (values[bl] >= level ? 1 : 0) | (values[br] >= level ? 2 : 0) |
                         (values[tr] >= level ? 4 : 0) | (values[tl] >= level ? 8 : 0);
      if (config == 0 || config == 15) continue;
      const auto bottom = detail::edge(bl, br);
      const auto right = detail::edge(br, tr);
      const auto top = detail::edge(tl, tr);
      const auto left = detail::edge(bl, tl);
      const auto add = [&](detail::EdgeKey a, detail::EdgeKey b) { segments.emplace_back(a, b); };
      switch (config) {
        case 1: case 14: add(left, bottom); break;
        case 2: case 13: add(bottom, right); break;
        case 3: case 12: add(left, right); break;
        case 4: case 11: add(right, top); break;
        case 6: case 9: add(bottom, top); break;
        case 7: case 8: add(left, top); break;
        case 5: case 10: {
          const double mid = 0.25 * (values[bl] + values[br] + values[tr] + values[tl]);
          const bool center_high = mid >= level;
          if ((config == 5) == center_high) {
            add(left, top);
            add(bottom, right);
          } else {
            add(left, bottom);
            add(right, top);
          }
          break;
        }
        default: break;
      }
    }
  }

  // Chain segments through shared edges.
  std::map<detail::EdgeKey, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    incident[segments[s].first].push_back(s);
    incident[segments[s].second].push_back(s);
  }
  std::vector<char> used(segments.size(), 0);
  const auto next_segment = [&](detail::EdgeKey at) -> std::optional<std::size_t> {
    for (auto s : incident[at]) {
      if (!used[s]) return s;
    }
    return std::nullopt;
  };
  const auto walk = [&](detail::EdgeKey from, std::vector<detail::EdgeKey>& chain) {
    detail::EdgeKey at = from;
    while (auto s = next_segment(at)) {
      used[*s] = 1;
      at = segments[*s].first == at ? segments[*s].second : segments[*s].first;
      chain.push_back(at);
    }
  };

  std::vector<Polyline> lines;
  // Open chains start at edges with a single incident segment; loops afterwards.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (used[s]) continue;
      const auto start = segments[s].first;
      if (pass == 0 && incident[start].size() != 1 && incident[segments[s].second].size() != 1) continue;
      const auto head = pass == 0 && incident[start].size() != 1 ? segments[s].second : start;
      std::vector<detail::EdgeKey> chain{head};
      walk(head, chain);
      Polyline line;
      line.reserve(chain.size());
      for (const auto& e : chain) line.push_back(detail::edge_point(grid, values, e, level));
      lines.push_back(std::move(line));
    }
  }
  return lines;
}

struct PlotOptions {
  double lo = -6.0;
  double hi = 6.0;
  int size_px = 600;
  std::vector<double> contour_levels{0.1, 0.3, 0.5, 0.7, 0.9};
  std::string title;
};

/// Discriminator values on a lattice, for contour overlays.
struct GridField {
  GridSpec grid;
  std::vector<double> values;
};

namespace detail {
inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string level_attr(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}
}  // namespace detail

/// SVG scatter panel: contour polylines (if a field is given), real mode markers,
/// then one dot per generated sample. Output bytes depend only on the inputs.
inline std::string render_svg(const Tensor& samples, const GaussianGridSpec& spec,
                              const std::optional<GridField>& field, const PlotOptions& opt = {}) {
  require(samples.size() == 0 || (samples.shape().rank() == 2 && samples.cols() == 2),
          "render_svg: samples must be an n x 2 batch");
  require(opt.hi > opt.lo && opt.size_px > 0, "render_svg: bad plot extent");
  const double size = opt.size_px;
  const double span = opt.hi - opt.lo;
  const auto sx = [&](double x) { return detail::px((x - opt.lo) / span * size); };
  const auto sy = [&](double y) { return detail::px((opt.hi - y) / span * size); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.size_px) +
         "\" height=\"" + std::to_string(opt.size_px) + "\" viewBox=\"0 0 " +
         std::to_string(opt.size_px) + " " + std::to_string(opt.size_px) + "\">\n";
  if (!opt.title.empty()) svg += "<title>" + detail::xml_escape(opt.title) + "</title>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (field) {
    svg += "<g fill=\"none\" stroke=\"#4a6fa5\" stroke-width=\"1\">\n";
    for (double level : opt.contour_levels) {
      for (const auto& line : marching_squares(field->grid, field->values, level)) {
        svg += "<polyline class=\"contour\" data-level=\"" + detail::level_attr(level) + "\" points=\"";
        for (std::size_t i = 0; i < line.size(); ++i) {
          if (i > 0) svg += ' ';
          svg += sx(line[i].x) + "," + sy(line[i].y);
        }
        svg += "\"/>\n";
      }
    }
    svg += "</g>\n";
  }

  svg += "<g fill=\"#f28e2b\">\n";
  for (const auto& c : spec.centers) {
    svg += "<circle class=\"mode\" cx=\"" + sx(c.x) + "\" cy=\"" + sy(c.y) + "\" r=\"4\"/>\n";
  }
  svg += "</g>\n<g fill=\"#59a14f\" fill-opacity=\"0.6\">\n";
  for (std::size_t i = 0; i < samples.rows() && samples.size() > 0; ++i) {
    svg += "<circle class=\"sample\" cx=\"" + sx(samples.at(i, 0)) + "\" cy=\"" + sy(samples.at(i, 1)) +
           "\" r=\"1.5\"/>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

inline void emit_plot(const Tensor& samples, const GaussianGridSpec& spec, const std::optional<GridField>& field,
                      const std::string& path, const PlotOptions& opt = {}) {
  write_text_file(path, render_svg(samples, spec, field, opt));
}

}  // namespace greedlab
