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

// Relaxation term for the discriminator objective.
//
// Transition samples x_hat = (1 - t) x + t y mix a real sample x with a
// generated sample y, with t restricted to [0, 0.5] so that x_hat stays on the
// real half of the segment. The discriminator is additionally rewarded for
// scoring x_hat as real, weighted by an exponentially decaying lambda.

#include <cmath>
#include <cstdint>
#include <vector>

#include "greedlab/autodiff.hpp"
#include "greedlab/errors.hpp"
#include "greedlab/rng.hpp"
#include "greedlab/tensor.hpp"

namespace greedlab {

enum class Variant { kGan, kWgan };

struct RelaxationConfig {
  bool enabled = true;
  double lambda0 = 1.0;
  double decay_factor = 0.99;
  std::uint64_t decay_every = 100;
  double t_min = 0.0;
  double t_max = 0.5;

  void validate() const {
    require(lambda0 >= 0.0, "relaxation: lambda0 must be non-negative");
    require(decay_factor > 0.0 && decay_factor <= 1.0, "relaxation: decay_factor must lie in (0, 1]");
    require(decay_every > 0, "relaxation: decay_every must be positive");
    require(0.0 <= t_min && t_min <= t_max && t_max <= 0.5,
            "relaxation: need 0 <= t_min <= t_max <= 0.5");
  }
};

/// One t per row, uniform on [t_min, t_max].
inline std::vector<double> sample_t(std::size_t n, const RelaxationConfig& config, Rng& rng) {
  require(n > 0, "sample_t: n must be positive");
  std::vector<double> t(n);
  for (auto& v : t) v = rng.uniform(config.t_min, config.t_max);
  return t;
}

/// Row i of the result is (1 - t_i) x_i + t_i y_i.
inline Tensor interpolate(const Tensor& x, const Tensor& y, std::span<const double> t) {
  if (x.shape() != y.shape() || x.shape().rank() != 2) {
    throw ShapeError("interpolate: shape mismatch " + x.shape().str() + " vs " + y.shape().str());
  }
  if (t.size() != x.rows()) {
    throw ShapeError("interpolate: " + std::to_string(t.size()) + " t values for " +
                     std::to_string(x.rows()) + " rows");
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double ti = t[i];
    require(ti >= 0.0 && ti <= 0.5, "interpolate: t must lie in [0, 0.5]");
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out.at(i, j) = (1.0 - ti) * x.at(i, j) + ti * y.at(i, j);
    }
  }
  return out;
}

/// lambda * mean(log D(x_hat)); `d_out` must already be clamped away from 0.
inline Var relaxation_gan(Var d_out, double lambda) { return scale(mean(log(d_out)), lambda); }

/// lambda * mean(f(x_hat)) for a linear-head critic.
inline Var relaxation_wgan(Var critic_out, double lambda) { return scale(mean(critic_out), lambda); }

/// lambda0 * decay_factor^floor(iteration / decay_every).
inline double decay_lambda(std::uint64_t iteration, const RelaxationConfig& config) {
  const auto events = static_cast<double>(iteration / config.decay_every);
  return config.lambda0 * std::pow(config.decay_factor, events);
}

}  // namespace greedlab
