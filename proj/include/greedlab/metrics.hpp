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

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "greedlab/autodiff.hpp"
#include "greedlab/data.hpp"
#include "greedlab/errors.hpp"
#include "greedlab/losses.hpp"
#include "greedlab/nn.hpp"
#include "greedlab/rng.hpp"

namespace greedlab {

// ---------------------------------------------------------------------------
// Mode coverage on the Gaussian benchmark
// ---------------------------------------------------------------------------

struct CoverageConfig {
  double radius_sigmas = 3.0;
  /// Minimum in-radius hits for a covered mode, per 2500 samples (scaled with n).
  double coverage_min = 20.0;
};

struct CoverageReport {
  std::size_t modes_covered = 0;
  std::vector<std::size_t> per_mode_counts;
  double high_quality_fraction = 0.0;
  std::size_t n_samples = 0;
};

/// Each sample is attributed to its nearest center and counted if it lies within
/// radius_sigmas * sigma of it.
inline CoverageReport mode_coverage(const Tensor& samples, const GaussianGridSpec& spec,
                                    const CoverageConfig& config = {}) {
  require(samples.shape().rank() == 2 && samples.cols() == 2, "mode_coverage: expected an n x 2 batch");
  require(samples.rows() > 0, "mode_coverage: no samples");
  require(!spec.centers.empty(), "mode_coverage: no centers");
  const double radius = config.radius_sigmas * spec.sigma;
  const double radius2 = radius * radius;

  CoverageReport report;
  report.n_samples = samples.rows();
  report.per_mode_counts.assign(spec.centers.size(), 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double x = samples.at(i, 0);
    const double y = samples.at(i, 1);
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < spec.centers.size(); ++k) {
      const double dx = x - spec.centers[k].x;
      const double dy = y - spec.centers[k].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    if (best_d2 <= radius2) {
      ++report.per_mode_counts[best];
      ++hits;
    }
  }
  const double threshold = config.coverage_min * static_cast<double>(samples.rows()) / 2500.0;
  for (auto count : report.per_mode_counts) {
    if (static_cast<double>(count) >= threshold) ++report.modes_covered;
  }
  report.high_quality_fraction = static_cast<double>(hits) / static_cast<double>(samples.rows());
  return report;
}

// ---------------------------------------------------------------------------
// Independent Wasserstein critic
// ---------------------------------------------------------------------------

/// Draws an n x 2 batch of generated points.
using PointSampler = std::function<Tensor(std::size_t, Rng&)>;

inline PointSampler generator_sampler(MlpParams generator, LatentSpec latent) {
  return [g = std::move(generator), latent](std::size_t n, Rng& rng) {
    return mlp_apply(g, sample_latent(latent, n, rng));
  };
}

inline PointSampler mixture_sampler(GaussianGridSpec spec) {
  return [s = std::move(spec)](std::size_t n, Rng& rng) { return sample_real(s, n, rng); };
}

struct CriticConfig {
  std::uint64_t iterations = 2000;
  std::size_t batch_size = 256;
  std::size_t hidden_width = 128;
  std::size_t hidden_layers = 3;
  double clip_c = 0.01;
  AdamHyper adam;
  std::uint64_t seed = 0;
};

inline std::vector<std::size_t> mlp_dims(std::size_t in, std::size_t width, std::size_t hidden,
                                         std::size_t out) {
  std::vector<std::size_t> dims{in};
  for (std::size_t i = 0; i < hidden; ++i) dims.push_back(width);
  dims.push_back(out);
  return dims;
}

/// Trains a fresh weight-clipped critic on real vs. generated points with the
/// generator frozen. Throws TrainingAborted on a non-finite loss.
inline MlpParams train_independent_critic(const GaussianGridSpec& real, const PointSampler& fake,
                                          const CriticConfig& config) {
  require(config.batch_size > 0, "critic: batch_size must be positive");
  const auto dims = mlp_dims(2, config.hidden_width, config.hidden_layers, 1);
  MlpParams critic = init_params(derive_seed(config.seed, 11), dims, Head::kLinear);
  clip_weights(critic, config.clip_c);
  AdamState opt = AdamState::for_params(critic, config.adam);
  Rng rng(derive_seed(config.seed, 12));
  for (std::uint64_t it = 0; it < config.iterations; ++it) {
    const Tensor x = sample_real(real, config.batch_size, rng);
    const Tensor y = fake(config.batch_size, rng);
    Tape tape;
    const auto f = bind(tape, critic, true);
    const Var loss = d_loss_wgan(mlp_forward(f, tape.constant(x)), mlp_forward(f, tape.constant(y)));
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw TrainingAborted(it, value, 0.0);
    tape.backward(loss);
    adam_step(critic, gradients(tape, f, critic), opt);
    clip_weights(critic, config.clip_c);
  }
  return critic;
}

struct CriticScore {
  double w = 0.0;
  std::string critic_checkpoint;
};

/// mean f(real) - mean f(fake); lower means the generated points are closer to the data.
inline CriticScore wasserstein_score(const MlpParams& critic, const Tensor& real, const Tensor& fake) {
  require(real.rows() > 0 && fake.rows() > 0, "wasserstein_score: empty batch");
  const Tensor fr = mlp_apply(critic, real);
  const Tensor ff = mlp_apply(critic, fake);
  const double mean_real = fr.mat().sum() / static_cast<double>(fr.size());
  const double mean_fake = ff.mat().sum() / static_cast<double>(ff.size());
  return CriticScore{mean_real - mean_fake, {}};
}

// ---------------------------------------------------------------------------
// MS-SSIM on grayscale images in [0, 1]
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

namespace detail {

inline std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> taps{};
  const double center = static_cast<double>(kSsimWindow - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - center;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

/// 'valid' correlation with the separable 11x11 Gaussian window.
inline RowMatrix gaussian_filter_valid(const RowMatrix& img) {
  static const auto taps = gaussian_taps();
  const Eigen::Index w = static_cast<Eigen::Index>(kSsimWindow);
  const Eigen::Index rows = img.rows() - w + 1;
  const Eigen::Index cols = img.cols() - w + 1;
  RowMatrix horizontal = RowMatrix::Zero(img.rows(), cols);
  for (Eigen::Index k = 0; k < w; ++k) horizontal += taps[k] * img.middleCols(k, cols);
  RowMatrix out = RowMatrix::Zero(rows, cols);
  for (Eigen::Index k = 0; k < w; ++k) out += taps[k] * horizontal.middleRows(k, rows);
  return out;
}

/// Non-overlapping 2x2 block mean; odd trailing rows/columns are dropped.
inline RowMatrix downsample2(const RowMatrix& img) {
  const Eigen::Index rows = img.rows() / 2;
  const Eigen::Index cols = img.cols() / 2;
  RowMatrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = 0.25 * (img(2 * r, 2 * c) + img(2 * r + 1, 2 * c) + img(2 * r, 2 * c + 1) +
                          img(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

struct SsimTerms {
  double ssim = 0.0;  // mean of luminance * contrast-structure
  double cs = 0.0;    // mean of contrast-structure
};

inline SsimTerms ssim_terms(const RowMatrix& a, const RowMatrix& b) {
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const RowMatrix mu_a = gaussian_filter_valid(a);
  const RowMatrix mu_b = gaussian_filter_valid(b);
  const RowMatrix aa = gaussian_filter_valid(a.cwiseProduct(a));
  const RowMatrix bb = gaussian_filter_valid(b.cwiseProduct(b));
  const RowMatrix ab = gaussian_filter_valid(a.cwiseProduct(b));
  const auto mu_aa = mu_a.array().square();
  const auto mu_bb = mu_b.array().square();
  const auto mu_ab = mu_a.array() * mu_b.array();
  const auto var_a = aa.array() - mu_aa;
  const auto var_b = bb.array() - mu_bb;
  const auto cov = ab.array() - mu_ab;
  const Eigen::ArrayXXd lum = (2.0 * mu_ab + c1) / (mu_aa + mu_bb + c1);
  const Eigen::ArrayXXd cs = (2.0 * cov + c2) / (var_a + var_b + c2);
  return SsimTerms{(lum * cs).mean(), cs.mean()};
}

}  // namespace detail

/// Number of scales used for an image of the given size: up to 5, while the
/// coarsest scale is still at least one window wide.
inline std::size_t ms_ssim_scales(std::size_t rows, std::size_t cols) {
  std::size_t side = std::min(rows, cols);
  require(side >= kSsimWindow, "ms_ssim: images must be at least 11 pixels on each side");
  std::size_t scales = 1;
  while (scales < kMsSsimWeights.size() && side / 2 >= kSsimWindow) {
    side /= 2;
    ++scales;
  }
  return scales;
}

/// Multi-scale SSIM. With fewer than five scales the leading weights are
/// renormalized to sum to one. Negative per-scale terms are clamped to zero.
inline double ms_ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.shape().rank() != 2) {
    throw ShapeError("ms_ssim: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  const std::size_t scales = ms_ssim_scales(a.rows(), a.cols());
  double weight_total = 0.0;
  for (std::size_t s = 0; s < scales; ++s) weight_total += kMsSsimWeights[s];

  RowMatrix x = a.mat();
  RowMatrix y = b.mat();
  double result = 1.0;
  for (std::size_t s = 0; s < scales; ++s) {
    const auto terms = detail::ssim_terms(x, y);
    const double weight = kMsSsimWeights[s] / weight_total;
    const double term = s + 1 == scales ? terms.ssim : terms.cs;
    result *= std::pow(std::max(term, 0.0), weight);
    if (s + 1 < scales) {
      x = detail::downsample2(x);
      y = detail::downsample2(y);
    }
  }
  return std::min(result, 1.0);
}

/// Mean MS-SSIM over `n_pairs` uniformly drawn pairs of distinct images.
inline double pairwise_diversity(std::span<const Tensor> images, std::size_t n_pairs, Rng& rng) {
  require(images.size() >= 2, "pairwise_diversity: need at least two images");
  require(n_pairs > 0, "pairwise_diversity: n_pairs must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> pairs(n_pairs);
  for (auto& [i, j] : pairs) {
    i = rng.below(images.size());
    j = rng.below(images.size() - 1);
    if (j >= i) ++j;
  }
  double total = 0.0;
  for (const auto& [i, j] : pairs) total += ms_ssim(images[i], images[j]);
  return total / static_cast<double>(n_pairs);
}

/// Reads a binary (P5) or ASCII (P2) PGM into a [height x width] tensor scaled to [0, 1].
inline Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const auto token = [&]() {
    std::string t;
    while (in >> t) {
      if (t[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return t;
    }
    throw IoError(path + ": truncated PGM header");
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P2") throw IoError(path + ": not a PGM file");
  const std::size_t width = std::stoul(token());
  const std::size_t height = std::stoul(token());
  const double maxval = std::stod(token());
  if (width == 0 || height == 0 || maxval <= 0.0 || maxval > 65535.0) {
    throw IoError(path + ": bad PGM header");
  }
  Tensor img(Shape::matrix(height, width));
  if (magic == "P2") {
    for (auto& v : img.values()) v = std::stod(token()) / maxval;
    return img;
  }
  in.get();  // single whitespace after maxval
  const bool wide = maxval > 255.0;
  for (auto& v : img.values()) {
    unsigned value = static_cast<unsigned char>(in.get());
    if (wide) value = (value << 8) | static_cast<unsigned char>(in.get());
    v = static_cast<double>(value) / maxval;
  }
  if (!in) throw IoError(path + ": truncated PGM data");
  return img;
}

}  // namespace greedlab
