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

#include "greedlab/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ms_ssim_pairs.hpp"
#include "test_util.hpp"

namespace greedlab {
namespace {

Tensor points_at_centers(const GaussianGridSpec& spec, std::size_t per_mode) {
  Tensor out(Shape::matrix(spec.centers.size() * per_mode, 2));
  for (std::size_t k = 0; k < spec.centers.size(); ++k) {
    for (std::size_t i = 0; i < per_mode; ++i) {
      out.at(k * per_mode + i, 0) = spec.centers[k].x;
      out.at(k * per_mode + i, 1) = spec.centers[k].y;
    }
  }
  return out;
}

TEST(ModeCoverage, AllCentersCovered) {
  const auto spec = GaussianGridSpec::grid();
  const auto r = mode_coverage(points_at_centers(spec, 100), spec);
  EXPECT_EQ(r.modes_covered, 25u);
  EXPECT_EQ(r.high_quality_fraction, 1.0);
  EXPECT_EQ(r.n_samples, 2500u);
  for (auto c : r.per_mode_counts) EXPECT_EQ(c, 100u);
}

TEST(ModeCoverage, SingleCenter) {
  const auto spec = GaussianGridSpec::grid();
  const auto r = mode_coverage(Tensor(Shape::matrix(2500, 2), 0.0), spec);
  EXPECT_EQ(r.modes_covered, 1u);
  EXPECT_EQ(r.per_mode_counts[12], 2500u);
}

TEST(ModeCoverage, TrueMixtureCoversEveryMode) {
  const auto spec = GaussianGridSpec::grid();
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = mode_coverage(sample_real(spec, 2500, rng), spec);
    EXPECT_EQ(r.modes_covered, 25u);
    // P(|N(0, I)| > 3) = exp(-4.5).
    EXPECT_NEAR(r.high_quality_fraction, 1.0 - std::exp(-4.5), 0.01);
  }
}

TEST(ModeCoverage, ThresholdScalesWithSampleCount) {
  const auto spec = GaussianGridSpec::grid();
  // 39 hits out of 5000 is below 20 * 5000 / 2500 = 40.
  Tensor pts(Shape::matrix(5000, 2), 100.0);
  for (std::size_t i = 0; i < 39; ++i) pts.at(i, 0) = pts.at(i, 1) = 0.0;
  EXPECT_EQ(mode_coverage(pts, spec).modes_covered, 0u);
  pts.at(39, 0) = pts.at(39, 1) = 0.0;
  EXPECT_EQ(mode_coverage(pts, spec).modes_covered, 1u);
}

TEST(ModeCoverage, RadiusIsInclusiveAndConfigurable) {
  const auto spec = GaussianGridSpec::grid();
  Tensor pts = Tensor::matrix(2, 2, {0.15, 0.0, 0.16, 0.0});
  CoverageConfig c;
  c.coverage_min = 0.0;
  const auto r = mode_coverage(pts, spec, c);
  EXPECT_EQ(r.per_mode_counts[12], 1u);
  c.radius_sigmas = 1e9;
  EXPECT_EQ(mode_coverage(pts, spec, c).high_quality_fraction, 1.0);
}

TEST(ModeCoverage, PermutationInvariant) {
  const auto spec = GaussianGridSpec::grid();
  Rng rng(3);
  Tensor pts = testing::random_tensor(Shape::matrix(1000, 2), rng, -4.2, 4.2);
  const auto a = mode_coverage(pts, spec);
  std::vector<std::size_t> order(1000);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::reverse(order.begin(), order.end());
  Tensor shuffled(pts.shape());
  for (std::size_t i = 0; i < 1000; ++i) {
    shuffled.at(i, 0) = pts.at(order[i], 0);
    shuffled.at(i, 1) = pts.at(order[i], 1);
  }
  const auto b = mode_coverage(shuffled, spec);
  EXPECT_EQ(a.per_mode_counts, b.per_mode_counts);
  EXPECT_EQ(a.modes_covered, b.modes_covered);
}

TEST(ModeCoverage, EmptyBatchIsAnError) {
  EXPECT_THROW(mode_coverage(Tensor(Shape::matrix(0, 2)), GaussianGridSpec::grid()), ContractError);
}

TEST(WassersteinScore, LinearAndConstantCritics) {
  MlpParams first_coord;
  first_coord.head = Head::kLinear;
  first_coord.layers = {Layer{Tensor::matrix(1, 2, {1.0, 0.0}), Tensor::vector({0.0})}};
  const Tensor real = Tensor::matrix(2, 2, {0.5, 7.0, 1.5, -3.0});
  const Tensor fake = Tensor::matrix(3, 2, {0.0, 1.0, -1.0, 2.0, 1.0, 3.0});
  EXPECT_DOUBLE_EQ(wasserstein_score(first_coord, real, fake).w, 1.0);
  EXPECT_DOUBLE_EQ(wasserstein_score(first_coord, fake, real).w, -1.0);
  first_coord.layers[0].bias[0] = 42.0;
  EXPECT_DOUBLE_EQ(wasserstein_score(first_coord, real, fake).w, 1.0);
  first_coord.layers[0].weight.fill(0.0);
  EXPECT_EQ(wasserstein_score(first_coord, real, fake).w, 0.0);
  EXPECT_THROW(wasserstein_score(first_coord, Tensor(Shape::matrix(0, 2)), fake), ContractError);
}

CriticConfig small_critic(std::uint64_t seed) {
  CriticConfig c;
  c.iterations = 400;
  c.batch_size = 128;
  c.hidden_width = 32;
  c.seed = seed;
  return c;
}

PointSampler far_point() {
  return [](std::size_t n, Rng&) {
    Tensor out(Shape::matrix(n, 2));
    for (std::size_t i = 0; i < n; ++i) out.at(i, 0) = out.at(i, 1) = 5.0;
    return out;
  };
}

TEST(IndependentCritic, NullVersusDegenerateGenerator) {
  const auto spec = GaussianGridSpec::grid();
  const auto score = [&](const PointSampler& fake, std::uint64_t seed) {
    const auto f = train_independent_critic(spec, fake, small_critic(seed));
    Rng rng(seed + 100);
    return wasserstein_score(f, sample_real(spec, 10000, rng), fake(10000, rng)).w;
  };
  const double degenerate = score(far_point(), 1);
  const double null = score(mixture_sampler(spec), 1);
  EXPECT_GT(degenerate, 0.0);
  EXPECT_LT(std::abs(null), 0.1 * degenerate);
}

TEST(IndependentCritic, DeterministicAndClipped) {
  const auto spec = GaussianGridSpec::grid();
  auto c = small_critic(5);
  c.iterations = 50;
  const auto a = train_independent_critic(spec, far_point(), c);
  const auto b = train_independent_critic(spec, far_point(), c);
  EXPECT_EQ(a, b);
  for (const auto& l : a.layers) {
    for (double v : l.weight.values()) EXPECT_LE(std::abs(v), c.clip_c);
  }
  c.seed = 6;
  EXPECT_NE(train_independent_critic(spec, far_point(), c), a);
}

// Fixture format: "<index> <value>" per line.
std::vector<double> reference_values() {
  std::ifstream in(std::string(GREEDLAB_FIXTURES) + "/ms_ssim_reference.txt");
  std::vector<double> values;
  std::size_t k;
  double v;
  while (in >> k >> v) {
    EXPECT_EQ(k, values.size());
    values.push_back(v);
  }
  return values;
}

TEST(MsSsim, AgreesWithTheReferenceImplementation) {
  const auto expected = reference_values();
  ASSERT_EQ(expected.size(), testing::kPairCount);
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const auto [a, b] = testing::make_image_pair(k);
    EXPECT_NEAR(ms_ssim(a, b), expected[k], 1e-3) << "pair " << k;
  }
}

TEST(MsSsim, SelfSimilarityAndSymmetry) {
  for (std::size_t k = 0; k < 5; ++k) {
    const auto [a, b] = testing::make_image_pair(k);
    EXPECT_NEAR(ms_ssim(a, a), 1.0, 1e-9);
    EXPECT_EQ(ms_ssim(a, b), ms_ssim(b, a));
    const double v = ms_ssim(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(MsSsim, ScaleCountReduction) {
  EXPECT_EQ(ms_ssim_scales(176, 176), 5u);
  EXPECT_EQ(ms_ssim_scales(175, 400), 4u);
  EXPECT_EQ(ms_ssim_scales(22, 22), 2u);
  EXPECT_EQ(ms_ssim_scales(11, 11), 1u);
  EXPECT_THROW(ms_ssim_scales(10, 64), ContractError);
  Rng rng(2);
  const Tensor small = testing::random_tensor(Shape::matrix(32, 40), rng, 0, 1);
  EXPECT_NEAR(ms_ssim(small, small), 1.0, 1e-9);
}

TEST(MsSsim, ShapeMismatch) {
  EXPECT_THROW(ms_ssim(Tensor(Shape::matrix(20, 20)), Tensor(Shape::matrix(20, 21))), ShapeError);
}

TEST(MsSsim, AnticorrelatedImagesClampToZero) {
  Tensor a(Shape::matrix(64, 64));
  Tensor b(Shape::matrix(64, 64));
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 64; ++c) {
      a.at(r, c) = (r + c) % 2 == 0 ? 1.0 : 0.0;
      b.at(r, c) = 1.0 - a.at(r, c);
    }
  }
  EXPECT_EQ(ms_ssim(a, b), 0.0);
}

std::vector<Tensor> noise_images(std::size_t n, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_tensor(Shape::matrix(48, 48), rng, 0, 1));
  return out;
}

TEST(PairwiseDiversity, OrderingAndRange) {
  Rng rng(8);
  const auto noise = noise_images(8, rng);
  std::vector<Tensor> dupes;
  for (std::size_t i = 0; i < 8; ++i) {
    Tensor t = noise[0];
    for (auto& v : t.values()) v = std::clamp(v + 0.02 * (rng.uniform() - 0.5), 0.0, 1.0);
    dupes.push_back(t);
  }
  Rng pick(1);
  const double diverse = pairwise_diversity(noise, 20, pick);
  const double similar = pairwise_diversity(dupes, 20, pick);
  EXPECT_LT(diverse, similar);
  EXPECT_GE(diverse, 0.0);
  EXPECT_LE(similar, 1.0);
  const std::vector<Tensor> same(4, noise[1]);
  EXPECT_NEAR(pairwise_diversity(same, 10, pick), 1.0, 1e-9);
}

TEST(PairwiseDiversity, DeterministicAndContract) {
  Rng rng(9);
  const auto imgs = noise_images(5, rng);
  Rng a(3), b(3);
  EXPECT_EQ(pairwise_diversity(imgs, 6, a), pairwise_diversity(imgs, 6, b));
  const std::vector<Tensor> one(1, imgs[0]);
  EXPECT_THROW(pairwise_diversity(one, 3, a), ContractError);
}

TEST(ReadPgm, AsciiAndBinary) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto ascii = (dir / "greedlab_p2.pgm").string();
  std::ofstream(ascii) << "P2\n# comment\n3 2\n4\n0 1 2\n3 4 0\n";
  EXPECT_EQ(read_pgm(ascii), Tensor::matrix(2, 3, {0, 0.25, 0.5, 0.75, 1, 0}));
  const auto binary = (dir / "greedlab_p5.pgm").string();
  {
    std::ofstream out(binary, std::ios::binary);
    out << "P5 2 1 255\n";
    out.put(static_cast<char>(0));
    out.put(static_cast<char>(255));
  }
  EXPECT_EQ(read_pgm(binary), Tensor::matrix(1, 2, {0, 1}));
  std::ofstream(binary, std::ios::binary) << "P5 2 2 255\nx";
  EXPECT_THROW(read_pgm(binary), IoError);
  EXPECT_THROW(read_pgm((dir / "greedlab_missing.pgm").string()), IoError);
  std::filesystem::remove(ascii);
  std::filesystem::remove(binary);
}

}  // namespace
}  // namespace greedlab
