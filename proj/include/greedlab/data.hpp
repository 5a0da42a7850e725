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
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "greedlab/errors.hpp"
#include "greedlab/rng.hpp"
#include "greedlab/tensor.hpp"

namespace greedlab {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// Isotropic Gaussian mixture in the plane. The default is the 5x5 benchmark grid.
struct GaussianGridSpec {
  std::vector<Point2> centers;
  double sigma = 0.05;
  std::vector<double> weights;

  /// `side` x `side` centers spaced `spacing` apart, centered on the origin, uniform weights.
  static GaussianGridSpec grid(std::size_t side = 5, double spacing = 2.0, double sigma = 0.05) {
    require(side > 0, "grid: side must be positive");
    GaussianGridSpec spec;
    spec.sigma = sigma;
    const double offset = spacing * static_cast<double>(side - 1) / 2.0;
    for (std::size_t i = 0; i < side; ++i) {
      for (std::size_t j = 0; j < side; ++j) {
        spec.centers.push_back({static_cast<double>(i) * spacing - offset,
                                static_cast<double>(j) * spacing - offset});
      }
    }
    spec.weights.assign(spec.centers.size(), 1.0 / static_cast<double>(spec.centers.size()));
    return spec;
  }

  /// Same mixture translated by (dx, dy).
  GaussianGridSpec shifted(double dx, double dy) const {
    GaussianGridSpec out = *this;
    for (auto& c : out.centers) c = {c.x + dx, c.y + dy};
    return out;
  }

  double max_center_norm() const {
    double r = 0.0;
    for (const auto& c : centers) r = std::max(r, std::hypot(c.x, c.y));
    return r;
  }

  void validate() const {
    require(!centers.empty(), "GaussianGridSpec: no centers");
    require(sigma > 0.0, "GaussianGridSpec: sigma must be positive");
    require(weights.size() == centers.size(), "GaussianGridSpec: one weight per center");
    double total = 0.0;
    for (double w : weights) {
      require(w >= 0.0, "GaussianGridSpec: negative mixture weight");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "GaussianGridSpec: weights must sum to 1");
  }
};

/// Standard-normal latent prior of dimension `dim`.
struct LatentSpec {
  std::size_t dim = 8;
};

namespace detail {
/// Index drawn from a discrete distribution given by `weights` (summing to 1).
inline std::size_t pick_component(const std::vector<double>& weights, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return k;
  }
  return weights.size() - 1;
}
}  // namespace detail

/// n x 2 batch: a mixture component per row, plus N(0, sigma^2 I) noise.
inline Tensor sample_real(const GaussianGridSpec& spec, std::size_t n, Rng& rng) {
  require(n > 0, "sample_real: n must be positive");
  Tensor out(Shape::matrix(n, 2));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = spec.centers[detail::pick_component(spec.weights, rng)];
    const double nx = rng.normal();
    const double ny = rng.normal();
    out.at(i, 0) = c.x + spec.sigma * nx;
    out.at(i, 1) = c.y + spec.sigma * ny;
  }
  return out;
}

/// Mixture density sum_k w_k N(p; c_k, sigma^2 I).
inline double density(const GaussianGridSpec& spec, Point2 p) {
  const double var = spec.sigma * spec.sigma;
  const double norm = 1.0 / (2.0 * std::numbers::pi * var);
  double total = 0.0;
  for (std::size_t k = 0; k < spec.centers.size(); ++k) {
    const double dx = p.x - spec.centers[k].x;
    const double dy = p.y - spec.centers[k].y;
    total += spec.weights[k] * norm * std::exp(-(dx * dx + dy * dy) / (2.0 * var));
  }
  return total;
}

/// n x dim batch of i.i.d. standard normals.
inline Tensor sample_latent(const LatentSpec& spec, std::size_t n, Rng& rng) {
  require(n > 0, "sample_latent: n must be positive");
  require(spec.dim >= 1, "sample_latent: latent dim must be positive");
  Tensor out(Shape::matrix(n, spec.dim));
  for (auto& v : out.values()) v = rng.normal();
  return out;
}

// Point CSV: header "x,y", one point per row, 17 significant digits.

inline std::string format_real(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string points_to_csv(const Tensor& points) {
  require(points.shape().rank() == 2 && points.cols() == 2, "points_to_csv: expected an n x 2 batch");
  std::string out = "x,y\n";
  for (std::size_t i = 0; i < points.rows(); ++i) {
    out += format_real(points.at(i, 0));
    out += ',';
    out += format_real(points.at(i, 1));
    out += '\n';
  }
  return out;
}

inline Tensor points_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "x,y") {
    throw IoError("points csv: missing 'x,y' header");
  }
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw IoError("points csv: line " + std::to_string(line_no) + ": expected 'x,y'");
    }
    const auto parse = [&](std::string_view field) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw IoError("points csv: line " + std::to_string(line_no) + ": bad number '" +
                      std::string(field) + "'");
      }
      return v;
    };
    const std::string_view view(line);
    values.push_back(parse(view.substr(0, comma)));
    values.push_back(parse(view.substr(comma + 1)));
  }
  const std::size_t n = values.size() / 2;
  return Tensor(Shape::matrix(n, 2), std::move(values));
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace greedlab
