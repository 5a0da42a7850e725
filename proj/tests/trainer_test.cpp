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

#include "greedlab/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "greedlab/losses.hpp"
#include "test_util.hpp"

namespace greedlab {
namespace {

namespace fs = std::filesystem;

TrainConfig small_config(Variant variant = Variant::kGan, std::uint64_t seed = 7) {
  TrainConfig c;
  c.variant = variant;
  c.seed = seed;
  c.batch_size = 32;
  c.total_iterations = 40;
  c.snapshot_every = 10;
  c.hidden_width = 16;
  c.hidden_layers = 2;
  c.eval.samples = 500;
  c.relaxation.decay_every = 7;
  return c;
}

Var column(Tape& tape, std::size_t n, double v) { return tape.leaf(Tensor(Shape::matrix(n, 1), v)); }

TEST(Losses, VanillaExamples) {
  Tape tape;
  EXPECT_NEAR(d_loss_vanilla(column(tape, 4, 0.5), column(tape, 4, 0.5)).value().item(), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(d_loss_vanilla(column(tape, 4, 0.5), column(tape, 4, 0.5)).value().item(), 1.3863, 1e-4);
  EXPECT_NEAR(d_loss_vanilla(column(tape, 4, kProbCeil), column(tape, 4, kProbFloor)).value().item(), 0.0, 1e-6);
  const double base = d_loss_vanilla(column(tape, 3, 0.3), column(tape, 3, 0.6)).value().item();
  const Var r = relaxation_gan(column(tape, 5, 0.5), 1.0);
  const double shifted = d_loss_vanilla(column(tape, 3, 0.3), column(tape, 3, 0.6), r).value().item();
  EXPECT_NEAR(shifted - base, std::log(2.0), 1e-15);
  EXPECT_NEAR(g_loss_vanilla(column(tape, 2, 0.5)).value().item(), 0.6931, 1e-4);
  EXPECT_NEAR(g_loss_vanilla(column(tape, 2, kProbCeil)).value().item(), 1e-7, 1e-12);
}

TEST(Losses, UnclampedInputsAreDomainErrors) {
  Tape tape;
  EXPECT_THROW(d_loss_vanilla(column(tape, 2, 0.0), column(tape, 2, 0.5)), DomainError);
  EXPECT_THROW(d_loss_vanilla(column(tape, 2, 0.5), column(tape, 2, 1.0)), DomainError);
  EXPECT_THROW(g_loss_vanilla(column(tape, 2, 0.0)), DomainError);
}

TEST(Losses, WganExamples) {
  Tape tape;
  const double c = 0.37;
  EXPECT_NEAR(d_loss_wgan(column(tape, 3, c), column(tape, 3, c)).value().item(), 0.0, 1e-15);
  const Var r = relaxation_wgan(column(tape, 3, c), 0.8);
  EXPECT_NEAR(d_loss_wgan(column(tape, 3, c), column(tape, 3, c), r).value().item(), -0.8 * c, 1e-15);
  EXPECT_EQ(d_loss_wgan(column(tape, 3, 1.0), column(tape, 3, 0.0)).value().item(), -1.0);
  EXPECT_EQ(g_loss_wgan(column(tape, 3, 0.0)).value().item(), 0.0);
  EXPECT_NEAR(g_loss_wgan(column(tape, 3, c)).value().item(), -c, 1e-15);
}

TEST(Losses, WganShiftInvariantWithoutRelaxation) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = testing::random_tensor(Shape::matrix(16, 1), rng, -3, 3);
    const Tensor b = testing::random_tensor(Shape::matrix(16, 1), rng, -3, 3);
    Tensor a2 = a, b2 = b;
    const double shift = rng.uniform(-10, 10);
    for (auto& v : a2.values()) v += shift;
    for (auto& v : b2.values()) v += shift;
    Tape tape;
    const Var r0 = relaxation_wgan(tape.constant(a), 0.0);
    EXPECT_NEAR(d_loss_wgan(tape.constant(a), tape.constant(b), r0).value().item(),
                d_loss_wgan(tape.constant(a2), tape.constant(b2), r0).value().item(), 1e-12);
  }
}

// Finite-difference oracle for every parameter of both networks.
struct TwoNets {
  MlpParams g;
  MlpParams d;
  Tensor z, x, xhat;
};

TwoNets random_nets(std::uint64_t seed, Head head) {
  Rng rng(seed);
  TwoNets n;
  for (;;) {
    n.g = init_params(rng.below(1u << 30), {3, 5, 5, 2}, Head::kLinear);
    n.d = init_params(rng.below(1u << 30), {2, 6, 6, 1}, head);
    for (auto* p : {&n.g, &n.d}) {
      for (auto& l : p->layers) {
        for (auto& v : l.bias.values()) v = rng.uniform(-0.3, 0.3);
      }
    }
    n.z = testing::random_tensor(Shape::matrix(4, 3), rng, -2, 2);
    n.x = testing::random_tensor(Shape::matrix(4, 2), rng, -2, 2);
    n.xhat = testing::random_tensor(Shape::matrix(4, 2), rng, -2, 2);
    const Tensor fake = mlp_apply(n.g, n.z);
    if (testing::min_relu_margin(n.g, n.z) > 1e-3 && testing::min_relu_margin(n.d, n.x) > 1e-3 &&
        testing::min_relu_margin(n.d, fake) > 1e-3 && testing::min_relu_margin(n.d, n.xhat) > 1e-3) {
      return n;
    }
  }
}

void expect_fd_match(MlpParams& p, const MlpParams& grads, const std::function<double()>& f) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_LT(testing::max_fd_error(p.layers[l].weight, grads.layers[l].weight, f), 1e-4) << "layer " << l;
    EXPECT_LT(testing::max_fd_error(p.layers[l].bias, grads.layers[l].bias, f), 1e-4) << "layer " << l;
  }
}

TEST(Gradients, DiscriminatorLossesMatchFiniteDifferences) {
  for (Variant v : {Variant::kGan, Variant::kWgan}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto n = random_nets(100 + seed, v == Variant::kGan ? Head::kSigmoid : Head::kLinear);
      const Tensor fake = mlp_apply(n.g, n.z);
      const auto build = [&](Tape& t, const MlpBinding& d) {
        const Var real = mlp_forward(d, t.constant(n.x));
        const Var gen = mlp_forward(d, t.constant(fake));
        const Var xh = mlp_forward(d, t.constant(n.xhat));
        return v == Variant::kGan ? d_loss_vanilla(real, gen, relaxation_gan(xh, 0.7))
                                  : d_loss_wgan(real, gen, relaxation_wgan(xh, 0.7));
      };
      const auto f = [&]() {
        Tape t;
        return build(t, bind(t, n.d, false)).value().item();
      };
      Tape tape;
      const auto d = bind(tape, n.d, true);
      tape.backward(build(tape, d));
      expect_fd_match(n.d, gradients(tape, d, n.d), f);
    }
  }
}

TEST(Gradients, GeneratorLossesMatchFiniteDifferencesThroughBothNetworks) {
  for (Variant v : {Variant::kGan, Variant::kWgan}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto n = random_nets(200 + seed, v == Variant::kGan ? Head::kSigmoid : Head::kLinear);
      const auto build = [&](Tape& t, const MlpBinding& g, const MlpBinding& d) {
        const Var scores = mlp_forward(d, mlp_forward(g, t.constant(n.z)));
        return v == Variant::kGan ? g_loss_vanilla(scores) : g_loss_wgan(scores);
      };
      const auto f = [&]() {
        Tape t;
        return build(t, bind(t, n.g, false), bind(t, n.d, false)).value().item();
      };
      Tape tape;
      const auto g = bind(tape, n.g, true);
      const auto d = bind(tape, n.d, false);
      tape.backward(build(tape, g, d));
      expect_fd_match(n.g, gradients(tape, g, n.g), f);
    }
  }
}

TEST(TrainStep, DiscriminatorStepLeavesGeneratorUntouched) {
  const auto config = small_config();
  TrainState state = init_state(config);
  const MlpParams g_before = state.generator;
  const MlpParams d_before = state.discriminator;
  discriminator_step(state, config, 1.0);
  EXPECT_EQ(state.generator, g_before);
  EXPECT_NE(state.discriminator, d_before);
  EXPECT_EQ(state.g_opt.step_count, 0u);
}

TEST(TrainStep, GeneratorStepLeavesDiscriminatorUntouched) {
  const auto config = small_config();
  TrainState state = init_state(config);
  const MlpParams g_before = state.generator;
  const MlpParams d_before = state.discriminator;
  generator_step(state, config);
  EXPECT_EQ(state.discriminator, d_before);
  EXPECT_NE(state.generator, g_before);
  EXPECT_EQ(state.d_opt.step_count, 0u);
}

TEST(TrainStep, WganTakesFiveCriticStepsAndStaysClipped) {
  auto config = small_config(Variant::kWgan);
  EXPECT_EQ(config.d_steps(), 5u);
  TrainState state = init_state(config);
  for (int i = 0; i < 5; ++i) {
    train_step(state, config);
    for (const auto& l : state.discriminator.layers) {
      for (double v : l.weight.values()) ASSERT_LE(std::abs(v), config.clip_c);
      for (double v : l.bias.values()) ASSERT_LE(std::abs(v), config.clip_c);
    }
  }
  EXPECT_EQ(state.d_opt.step_count, 25u);
  EXPECT_EQ(state.g_opt.step_count, 5u);
  EXPECT_EQ(small_config().d_steps(), 1u);
}

TEST(TrainRun, LambdaLogFollowsTheSchedule) {
  const auto config = small_config();
  const auto result = train_run(config);
  ASSERT_EQ(result.record.iterations.size(), config.total_iterations);
  for (std::size_t i = 0; i < result.record.iterations.size(); ++i) {
    const auto& r = result.record.iterations[i];
    EXPECT_EQ(r.iteration, i);
    EXPECT_EQ(r.lambda, decay_lambda(i, config.relaxation));
    if (i > 0) {
      EXPECT_LE(r.lambda, result.record.iterations[i - 1].lambda);
    }
  }
  ASSERT_EQ(result.record.snapshots.size(), 4u);
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(result.record.snapshots[s].iteration, 10 * (s + 1));

  auto off = config;
  off.relaxation.enabled = false;
  for (const auto& r : train_run(off).record.iterations) EXPECT_EQ(r.lambda, 0.0);
}

TEST(TrainRun, ZeroLambdaReducesToTheStandardObjective) {
  for (Variant v : {Variant::kGan, Variant::kWgan}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto zero = small_config(v, seed);
      zero.total_iterations = 15;
      zero.relaxation.lambda0 = 0.0;
      auto off = zero;
      off.relaxation.enabled = false;
      const auto a = train_run(zero);
      const auto b = train_run(off);
      EXPECT_EQ(run_record_to_jsonl(a.record), run_record_to_jsonl(b.record));
      EXPECT_EQ(encode_checkpoint(a.final_checkpoint), encode_checkpoint(b.final_checkpoint));
    }
  }
}

TEST(TrainRun, RelaxationChangesTheTrajectory) {
  auto off = small_config();
  off.relaxation.enabled = false;
  EXPECT_NE(run_record_to_jsonl(train_run(small_config()).record), run_record_to_jsonl(train_run(off).record));
}

TEST(TrainRun, DeterministicPerSeed) {
  const auto a = train_run(small_config());
  const auto b = train_run(small_config());
  EXPECT_EQ(run_record_to_jsonl(a.record), run_record_to_jsonl(b.record));
  EXPECT_EQ(encode_checkpoint(a.final_checkpoint), encode_checkpoint(b.final_checkpoint));
  const auto c = train_run(small_config(Variant::kGan, 8));
  EXPECT_NE(encode_checkpoint(a.final_checkpoint), encode_checkpoint(c.final_checkpoint));
}

TEST(TrainRun, ZeroIterationsKeepsInitialParameters) {
  auto config = small_config();
  config.total_iterations = 0;
  const auto result = train_run(config);
  EXPECT_TRUE(result.record.iterations.empty());
  EXPECT_TRUE(result.record.snapshots.empty());
  const TrainState initial = init_state(config);
  EXPECT_EQ(result.final_checkpoint.network("generator"), initial.generator);
  EXPECT_EQ(result.final_checkpoint.network("discriminator"), initial.discriminator);
  EXPECT_EQ(result.final_checkpoint.step, 0u);
}

TEST(TrainRun, WritesLogCheckpointsAndPanels) {
  const fs::path dir = fs::temp_directory_path() / "greedlab_trainer_test";
  fs::remove_all(dir);
  const auto config = small_config();
  const auto result = train_run(config, dir);
  EXPECT_TRUE(fs::exists(dir / "run.jsonl"));
  for (std::uint64_t it : {10, 20, 30, 40}) {
    EXPECT_TRUE(fs::exists(dir / checkpoint_name(it))) << it;
    EXPECT_TRUE(fs::exists(dir / plot_name(it))) << it;
  }
  const auto ckpt = load_checkpoint((dir / "ckpt_40").string());
  EXPECT_EQ(encode_checkpoint(ckpt), encode_checkpoint(result.final_checkpoint));
  const auto mid = load_checkpoint((dir / "ckpt_20").string());
  EXPECT_EQ(mid.step, 20u);
  EXPECT_EQ(mid.seed, config.seed);
  const auto parsed = run_record_from_jsonl(read_text_file((dir / "run.jsonl").string()));
  EXPECT_EQ(parsed.iterations, result.record.iterations);
  fs::remove_all(dir);
}

TEST(RunLog, RoundTripsExactly) {
  RunRecord r;
  r.seed = 3;
  r.iterations = {{0, 1.25, 0.5, 1.0}, {1, 0.1 + 0.2, 1.0 / 3.0, 0.99}};
  SnapshotRecord s;
  s.iteration = 2;
  s.coverage.modes_covered = 2;
  s.coverage.per_mode_counts = {30, 25, 0};
  s.coverage.high_quality_fraction = 0.55;
  s.coverage.n_samples = 100;
  s.wasserstein = 0.0123;
  s.checkpoint = "ckpt_2";
  r.snapshots = {s};
  const std::string text = run_record_to_jsonl(r);
  const auto back = run_record_from_jsonl(text);
  EXPECT_EQ(back.iterations, r.iterations);
  ASSERT_EQ(back.snapshots.size(), 1u);
  EXPECT_EQ(back.snapshots[0].coverage.per_mode_counts, s.coverage.per_mode_counts);
  EXPECT_EQ(*back.snapshots[0].wasserstein, 0.0123);
  EXPECT_EQ(run_record_to_jsonl(back), text);
}

TEST(RunLog, SnapshotsFollowTheirIteration) {
  RunRecord r;
  r.iterations = {{0, 1, 1, 1}, {1, 1, 1, 1}, {2, 1, 1, 1}};
  SnapshotRecord s;
  s.iteration = 2;
  r.snapshots = {s};
  std::istringstream in(run_record_to_jsonl(r));
  std::vector<std::string> types;
  for (std::string line; std::getline(in, line);) types.push_back(nlohmann::json::parse(line).at("type"));
  EXPECT_EQ(types, (std::vector<std::string>{"iteration", "iteration", "snapshot", "iteration"}));
}

TEST(RunLog, AbortRecordCarriesNonFiniteLosses) {
  RunRecord r;
  r.abort = AbortRecord{17, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()};
  const std::string text = run_record_to_jsonl(r);
  EXPECT_NE(text.find("\"nan\""), std::string::npos);
  EXPECT_NE(text.find("\"inf\""), std::string::npos);
  const auto back = run_record_from_jsonl(text);
  ASSERT_TRUE(back.abort);
  EXPECT_EQ(back.abort->iteration, 17u);
  EXPECT_TRUE(std::isnan(back.abort->d_loss));
}

TEST(RunLog, MalformedLinesNameTheLine) {
  try {
    run_record_from_jsonl("{\"type\":\"iteration\",\"iteration\":0,\"d_loss\":1,\"g_loss\":1,\"lambda\":1}\n{oops\n");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(TrainConfig, Validation) {
  auto c = small_config();
  c.batch_size = 0;
  EXPECT_THROW(train_run(c), ContractError);
  c = small_config();
  c.relaxation.t_max = 0.9;
  EXPECT_THROW(init_state(c), ContractError);
}

}  // namespace
}  // namespace greedlab
