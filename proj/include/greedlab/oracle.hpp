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

// Closed-form optimal discriminators on a regular lattice.
//
//   standard:  D*(x) = p_data / (p_data + p_g)
//   relaxed:   D*(x) = (p_data + lambda p_xhat) / (p_data + p_g + lambda p_xhat)
//
// Cells where every term of the denominator is below kUndefinedDensity are
// reported as 0.5.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "greedlab/data.hpp"
#include "greedlab/errors.hpp"
#include "greedlab/metrics.hpp"
#include "greedlab/nn.hpp"
#include "greedlab/regularizer.hpp"
#include "greedlab/rng.hpp"

namespace greedlab {

inline constexpr double kUndefinedDensity = 1e-12;

/// Square lattice of `resolution` x `resolution` cells covering [lo, hi]^2.
/// Values are taken at cell centers; flat index = row * resolution + col where
/// rows run along y and columns along x.
struct GridSpec {
  double lo = -6.0;
  double hi = 6.0;
  std::size_t resolution = 200;

  double step() const { return (hi - lo) / static_cast<double>(resolution); }
  double cell_area() const { return step() * step(); }
  std::size_t cells() const { return resolution * resolution; }
  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * step(); }
  Point2 point(std::size_t index) const {
    return {center(index % resolution), center(index / resolution)};
  }

  void validate() const {
    require(resolution > 0, "grid: resolution must be positive");
    require(hi > lo, "grid: empty extent");
  }
};

/// Cell-center coordinates as an [cells x 2] batch.
inline Tensor grid_points(const GridSpec& grid) {
  grid.validate();
  Tensor pts(Shape::matrix(grid.cells(), 2));
  for (std::size_t k = 0; k < grid.cells(); ++k) {
    const auto p = grid.point(k);
    pts.at(k, 0) = p.x;
    pts.at(k, 1) = p.y;
  }
  return pts;
}

struct GridDensity {
  GridSpec grid;
  std::vector<double> p_data;
  std::vector<double> p_g;
  std::vector<double> p_xhat;
};

/// Riemann sum of a lattice density.
inline double integrate(const GridSpec& grid, std::span<const double> values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total * grid.cell_area();
}

inline std::vector<double> mixture_on_grid(const GaussianGridSpec& spec, const GridSpec& grid) {
  grid.validate();
  std::vector<double> out(grid.cells());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = density(spec, grid.point(k));
  return out;
}

/// Histogram density: counts / (n * cell_area). Points outside the lattice only
/// contribute to n.
class DensityHistogram {
 public:
  explicit DensityHistogram(GridSpec grid) : grid_(grid), counts_(grid.cells(), 0) { grid_.validate(); }

  void add(const Tensor& points) {
    const double h = grid_.step();
    for (std::size_t i = 0; i < points.rows(); ++i) {
      ++total_;
      const double fx = (points.at(i, 0) - grid_.lo) / h;
      const double fy = (points.at(i, 1) - grid_.lo) / h;
      if (!(fx >= 0.0 && fy >= 0.0)) continue;
      const auto ix = static_cast<std::size_t>(fx);
      const auto iy = static_cast<std::size_t>(fy);
      if (ix >= grid_.resolution || iy >= grid_.resolution) continue;
      ++counts_[iy * grid_.resolution + ix];
    }
  }

  std::vector<double> density() const {
    require(total_ > 0, "histogram: no samples");
    std::vector<double> out(counts_.size());
    const double scale = 1.0 / (static_cast<double>(total_) * grid_.cell_area());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>(counts_[k]) * scale;
    return out;
  }

 private:
  GridSpec grid_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline std::vector<double> sampler_on_grid(const PointSampler& sampler, std::size_t n_samples,
                                           const GridSpec& grid, Rng& rng,
                                           std::size_t chunk = 1 << 16) {
  require(n_samples > 0, "sampler_on_grid: n_samples must be positive");
  DensityHistogram hist(grid);
  for (std::size_t done = 0; done < n_samples; done += chunk) {
    hist.add(sampler(std::min(chunk, n_samples - done), rng));
  }
  return hist.density();
}

namespace detail {
inline void check_densities(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(who) + ": density arrays differ in length (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0.0 || b[i] < 0.0) throw ContractError(std::string(who) + ": negative density");
  }
}
}  // namespace detail

inline std::vector<double> optimal_d_standard(std::span<const double> p_data, std::span<const double> p_g) {
  detail::check_densities(p_data, p_g, "optimal_d_standard");
  std::vector<double> out(p_data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (p_data[i] < kUndefinedDensity && p_g[i] < kUndefinedDensity) {
      out[i] = 0.5;
    } else {
      out[i] = p_data[i] / (p_data[i] + p_g[i]);
    }
  }
  return out;
}

inline std::vector<double> optimal_d_relaxed(std::span<const double> p_data, std::span<const double> p_g,
                                             std::span<const double> p_xhat, double lambda) {
  detail::check_densities(p_data, p_g, "optimal_d_relaxed");
  detail::check_densities(p_data, p_xhat, "optimal_d_relaxed");
  require(lambda >= 0.0, "optimal_d_relaxed: lambda must be non-negative");
  std::vector<double> out(p_data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double explore = lambda * p_xhat[i];
    if (p_data[i] < kUndefinedDensity && p_g[i] < kUndefinedDensity && explore < kUndefinedDensity) {
      out[i] = 0.5;
    } else {
      out[i] = (p_data[i] + explore) / (p_data[i] + p_g[i] + explore);
    }
  }
  return out;
}

/// Monte-Carlo histogram of x_hat = interpolate(real, generated, t) with t drawn
/// from `relaxation`'s range.
inline std::vector<double> estimate_xhat_density(const GaussianGridSpec& spec, const PointSampler& generated,
                                                 std::size_t n_samples, const GridSpec& grid, Rng& rng,
                                                 const RelaxationConfig& relaxation = {},
                                                 std::size_t chunk = 1 << 16) {
  require(n_samples > 0, "estimate_xhat_density: n_samples must be positive");
  require(grid.resolution > 0, "estimate_xhat_density: empty grid");
  DensityHistogram hist(grid);
  for (std::size_t done = 0; done < n_samples; done += chunk) {
    const std::size_t n = std::min(chunk, n_samples - done);
    const Tensor x = sample_real(spec, n, rng);
    const Tensor y = generated(n, rng);
    const auto t = sample_t(n, relaxation, rng);
    hist.add(interpolate(x, y, t));
  }
  return hist.density();
}

struct Deviation {
  double linf = 0.0;
  double mean_abs = 0.0;
  std::size_t cells = 0;
};

/// Deviation of a trained discriminator from the relaxed optimum on every cell
/// whose total mass p_data + p_g + lambda p_xhat exceeds `min_total_density`.
inline Deviation compare_discriminator(std::span<const double> trained, const GridDensity& gd, double lambda,
                                       double min_total_density = 0.0) {
  const auto optimum = optimal_d_relaxed(gd.p_data, gd.p_g, gd.p_xhat, lambda);
  require(trained.size() == optimum.size(), "compare_discriminator: grid size mismatch");
  Deviation dev;
  double total = 0.0;
  for (std::size_t i = 0; i < optimum.size(); ++i) {
    if (gd.p_data[i] + gd.p_g[i] + lambda * gd.p_xhat[i] <= min_total_density) continue;
    const double err = std::abs(trained[i] - optimum[i]);
    dev.linf = std::max(dev.linf, err);
    total += err;
    ++dev.cells;
  }
  dev.mean_abs = dev.cells > 0 ? total / static_cast<double>(dev.cells) : 0.0;
  return dev;
}

/// Evaluates a discriminator network on every cell center.
inline std::vector<double> discriminator_on_grid(const MlpParams& discriminator, const GridSpec& grid) {
  const Tensor out = mlp_apply(discriminator, grid_points(grid));
  return {out.values().begin(), out.values().end()};
}

inline Deviation compare_trained_discriminator(const MlpParams& discriminator, const GridDensity& gd,
                                               double lambda, double min_total_density = 0.0) {
  return compare_discriminator(discriminator_on_grid(discriminator, gd.grid), gd, lambda, min_total_density);
}

/// CSV with header x,y,p_data,p_g,p_xhat,d_star.
inline std::string grid_to_csv(const GridDensity& gd, std::span<const double> d_star) {
  require(d_star.size() == gd.grid.cells() && gd.p_data.size() == gd.grid.cells() &&
              gd.p_g.size() == gd.grid.cells() && gd.p_xhat.size() == gd.grid.cells(),
          "grid_to_csv: array sizes must match the grid");
  std::string out = "x,y,p_data,p_g,p_xhat,d_star\n";
  for (std::size_t k = 0; k < gd.grid.cells(); ++k) {
    const auto p = gd.grid.point(k);
    for (double v : {p.x, p.y, gd.p_data[k], gd.p_g[k], gd.p_xhat[k]}) {
      out += format_real(v);
      out += ',';
    }
    out += format_real(d_star[k]);
    out += '\n';
  }
  return out;
}

}  // namespace greedlab
