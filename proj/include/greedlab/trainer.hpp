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

// Alternating discriminator / generator optimisation with the optional
// relaxation term, plus the run driver that snapshots metrics and persists
// the run log (JSONL) and checkpoints.
//
// RNG stream discipline: every discriminator step draws, in order, the real
// batch, the latent batch for the fake samples, the t values and the latent
// batch for the interpolation partners y, whether or not the relaxation is
// active. A run with lambda0 = 0 therefore consumes exactly the same random
// numbers as a run with the relaxation switched off.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "greedlab/autodiff.hpp"
#include "greedlab/data.hpp"
#include "greedlab/errors.hpp"
#include "greedlab/losses.hpp"
#include "greedlab/metrics.hpp"
#include "greedlab/nn.hpp"
#include "greedlab/oracle.hpp"
#include "greedlab/plot.hpp"
#include "greedlab/regularizer.hpp"
#include "greedlab/rng.hpp"

namespace greedlab {

/// Metrics computed at snapshots.
struct EvalConfig {
  std::size_t samples = 2500;
  CoverageConfig coverage;
  /// Train an independent critic every this many iterations (0 = never).
  std::uint64_t critic_every = 0;
  std::uint64_t critic_iterations = 2000;
  std::size_t critic_eval_samples = 10000;
  /// Lattice resolution used for discriminator contours in snapshot plots.
  std::size_t plot_resolution = 120;
};

struct TrainConfig {
  Variant variant = Variant::kGan;
  std::size_t batch_size = 256;
  std::uint64_t total_iterations = 30000;
  /// 0 selects the variant default (1 for gan, 5 for wgan).
  std::size_t d_steps_per_g_step = 0;
  double clip_c = 0.01;
  std::uint64_t seed = 1;
  std::uint64_t snapshot_every = 1000;
  std::size_t hidden_width = 128;
  std::size_t hidden_layers = 3;
  AdamHyper adam;
  RelaxationConfig relaxation;
  GaussianGridSpec data = GaussianGridSpec::grid();
  LatentSpec latent;
  EvalConfig eval;

  std::size_t d_steps() const {
    if (d_steps_per_g_step > 0) return d_steps_per_g_step;
    return variant == Variant::kWgan ? 5 : 1;
  }

  void validate() const {
    require(batch_size > 0, "train: batch_size must be positive");
    require(snapshot_every > 0, "train: snapshot_every must be positive");
    require(hidden_width > 0, "train: hidden_width must be positive");
    require(clip_c > 0.0, "train: clip_c must be positive");
    require(adam.lr > 0.0, "train: learning rate must be positive");
    require(eval.samples > 0, "train: eval.samples must be positive");
    require(latent.dim >= 1, "train: latent dim must be positive");
    data.validate();
    relaxation.validate();
  }
};

struct IterationRecord {
  std::uint64_t iteration = 0;  // 0-based index of the step
  double d_loss = 0.0;
  double g_loss = 0.0;
  double lambda = 0.0;

  bool operator==(const IterationRecord&) const = default;
};

struct SnapshotRecord {
  std::uint64_t iteration = 0;  // completed iterations when taken
  CoverageReport coverage;
  std::optional<double> wasserstein;
  std::string checkpoint;
};

struct AbortRecord {
  std::uint64_t iteration = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<IterationRecord> iterations;
  std::vector<SnapshotRecord> snapshots;
  std::optional<AbortRecord> abort;
};

struct TrainState {
  MlpParams generator;
  MlpParams discriminator;
  AdamState g_opt;
  AdamState d_opt;
  Rng rng{0};
  std::uint64_t iteration = 0;
};

inline TrainState init_state(const TrainConfig& config) {
  config.validate();
  TrainState state;
  const auto d_dims = mlp_dims(2, config.hidden_width, config.hidden_layers, 1);
  const auto g_dims = mlp_dims(config.latent.dim, config.hidden_width, config.hidden_layers, 2);
  const Head d_head = config.variant == Variant::kGan ? Head::kSigmoid : Head::kLinear;
  state.discriminator = init_params(derive_seed(config.seed, 2), d_dims, d_head);
  state.generator = init_params(derive_seed(config.seed, 3), g_dims, Head::kLinear);
  if (config.variant == Variant::kWgan) clip_weights(state.discriminator, config.clip_c);
  state.d_opt = AdamState::for_params(state.discriminator, config.adam);
  state.g_opt = AdamState::for_params(state.generator, config.adam);
  state.rng = Rng(derive_seed(config.seed, 1));
  return state;
}

/// Lambda in effect at `iteration`; 0 when the relaxation is off.
inline double lambda_at(std::uint64_t iteration, const TrainConfig& config) {
  return config.relaxation.enabled ? decay_lambda(iteration, config.relaxation) : 0.0;
}

/// One discriminator update. Returns the loss value.
inline double discriminator_step(TrainState& state, const TrainConfig& config, double lambda) {
  const std::size_t n = config.batch_size;
  const Tensor x = sample_real(config.data, n, state.rng);
  const Tensor fake = mlp_apply(state.generator, sample_latent(config.latent, n, state.rng));
  const auto t = sample_t(n, config.relaxation, state.rng);
  const Tensor z_partner = sample_latent(config.latent, n, state.rng);

  Tape tape;
  const auto d = bind(tape, state.discriminator, true);
  const Var out_real = mlp_forward(d, tape.constant(x));
  const Var out_fake = mlp_forward(d, tape.constant(fake));
  Var loss;
  if (config.relaxation.enabled) {
    // Generated partners enter as constants: no gradient reaches the generator.
    const Tensor y = mlp_apply(state.generator, z_partner);
    const Var out_xhat = mlp_forward(d, tape.constant(interpolate(x, y, t)));
    if (config.variant == Variant::kGan) {
      loss = d_loss_vanilla(out_real, out_fake, relaxation_gan(out_xhat, lambda));
    } else {
      loss = d_loss_wgan(out_real, out_fake, relaxation_wgan(out_xhat, lambda));
    }
  } else {
    loss = config.variant == Variant::kGan ? d_loss_vanilla(out_real, out_fake) : d_loss_wgan(out_real, out_fake);
  }
  const double value = loss.value().item();
  if (!std::isfinite(value)) return value;
  tape.backward(loss);
  adam_step(state.discriminator, gradients(tape, d, state.discriminator), state.d_opt);
  if (config.variant == Variant::kWgan) clip_weights(state.discriminator, config.clip_c);
  return value;
}

/// One generator update through the frozen discriminator. Returns the loss value.
inline double generator_step(TrainState& state, const TrainConfig& config) {
  const Tensor z = sample_latent(config.latent, config.batch_size, state.rng);
  Tape tape;
  const auto g = bind(tape, state.generator, true);
  const auto d = bind(tape, state.discriminator, false);
  const Var scores = mlp_forward(d, mlp_forward(g, tape.constant(z)));
  const Var loss = config.variant == Variant::kGan ? g_loss_vanilla(scores) : g_loss_wgan(scores);
  const double value = loss.value().item();
  if (!std::isfinite(value)) return value;
  tape.backward(loss);
  adam_step(state.generator, gradients(tape, g, state.generator), state.g_opt);
  return value;
}

/// d_steps discriminator updates followed by one generator update.
/// Throws TrainingAborted if either loss is non-finite.
inline IterationRecord train_step(TrainState& state, const TrainConfig& config) {
  IterationRecord record;
  record.iteration = state.iteration;
  record.lambda = lambda_at(state.iteration, config);
  for (std::size_t k = 0; k < config.d_steps(); ++k) {
    record.d_loss = discriminator_step(state, config, record.lambda);
    if (!std::isfinite(record.d_loss)) throw TrainingAborted(record.iteration, record.d_loss, 0.0);
  }
  record.g_loss = generator_step(state, config);
  if (!std::isfinite(record.g_loss)) throw TrainingAborted(record.iteration, record.d_loss, record.g_loss);
  ++state.iteration;
  return record;
}

inline Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config) {
  return Checkpoint{config.seed, state.iteration,
                    {{"generator", state.generator}, {"discriminator", state.discriminator}}};
}

// ---------------------------------------------------------------------------
// Run log (JSONL): one object per line, "type" is "iteration", "snapshot" or
// "abort". Keys appear in a fixed order.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const IterationRecord& r) {
  return {{"type", "iteration"}, {"iteration", r.iteration}, {"d_loss", r.d_loss},
          {"g_loss", r.g_loss}, {"lambda", r.lambda}};
}

inline nlohmann::ordered_json to_json(const SnapshotRecord& s) {
  nlohmann::ordered_json j = {{"type", "snapshot"},
                              {"iteration", s.iteration},
                              {"modes_covered", s.coverage.modes_covered},
                              {"high_quality_fraction", s.coverage.high_quality_fraction},
                              {"n_samples", s.coverage.n_samples},
                              {"per_mode_counts", s.coverage.per_mode_counts}};
  j["wasserstein"] = s.wasserstein ? nlohmann::ordered_json(*s.wasserstein) : nlohmann::ordered_json();
  j["checkpoint"] = s.checkpoint;
  return j;
}

inline nlohmann::ordered_json to_json(const AbortRecord& a) {
  return {{"type", "abort"}, {"iteration", a.iteration}, {"d_loss", a.d_loss}, {"g_loss", a.g_loss}};
}

namespace detail {
/// JSON has no NaN/Inf; non-finite losses are written as strings.
inline nlohmann::ordered_json real_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}
}  // namespace detail

/// Serialises records in chronological order: each snapshot follows the
/// iteration that completed it.
inline std::string run_record_to_jsonl(const RunRecord& record) {
  std::string out;
  std::size_t next_snapshot = 0;
  const auto emit_snapshots_up_to = [&](std::uint64_t completed) {
    while (next_snapshot < record.snapshots.size() && record.snapshots[next_snapshot].iteration <= completed) {
      out += to_json(record.snapshots[next_snapshot++]).dump() + "\n";
    }
  };
  emit_snapshots_up_to(0);
  for (const auto& it : record.iterations) {
    out += to_json(it).dump() + "\n";
    emit_snapshots_up_to(it.iteration + 1);
  }
  emit_snapshots_up_to(~std::uint64_t{0});
  if (record.abort) {
    auto j = to_json(*record.abort);
    j["d_loss"] = detail::real_or_string(record.abort->d_loss);
    j["g_loss"] = detail::real_or_string(record.abort->g_loss);
    out += j.dump() + "\n";
  }
  return out;
}

inline RunRecord run_record_from_jsonl(const std::string& text) {
  RunRecord record;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("run log line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "iteration") {
      record.iterations.push_back({j.at("iteration").get<std::uint64_t>(), j.at("d_loss").get<double>(),
                                   j.at("g_loss").get<double>(), j.at("lambda").get<double>()});
    } else if (type == "snapshot") {
      SnapshotRecord s;
      s.iteration = j.at("iteration").get<std::uint64_t>();
      s.coverage.modes_covered = j.at("modes_covered").get<std::size_t>();
      s.coverage.high_quality_fraction = j.at("high_quality_fraction").get<double>();
      s.coverage.n_samples = j.at("n_samples").get<std::size_t>();
      s.coverage.per_mode_counts = j.at("per_mode_counts").get<std::vector<std::size_t>>();
      if (!j.at("wasserstein").is_null()) s.wasserstein = j.at("wasserstein").get<double>();
      s.checkpoint = j.at("checkpoint").get<std::string>();
      record.snapshots.push_back(std::move(s));
    } else if (type == "abort") {
      const auto real = [](const nlohmann::json& v) {
        return v.is_number() ? v.get<double>() : std::nan("");
      };
      record.abort = AbortRecord{j.at("iteration").get<std::uint64_t>(), real(j.at("d_loss")), real(j.at("g_loss"))};
    } else {
      throw IoError("run log line " + std::to_string(line_no) + ": unknown record type '" + type + "'");
    }
  }
  return record;
}

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

struct RunResult {
  RunRecord record;
  Checkpoint final_checkpoint;
  bool aborted = false;
};

inline std::string checkpoint_name(std::uint64_t iteration) { return "ckpt_" + std::to_string(iteration); }
inline std::string plot_name(std::uint64_t iteration) { return "plot_" + std::to_string(iteration) + ".svg"; }

inline CriticConfig critic_config_for(const TrainConfig& config, std::uint64_t stream) {
  CriticConfig cc;
  cc.iterations = config.eval.critic_iterations;
  cc.batch_size = config.batch_size;
  cc.hidden_width = config.hidden_width;
  cc.hidden_layers = config.hidden_layers;
  cc.clip_c = config.clip_c;
  cc.adam = AdamHyper{};
  cc.seed = derive_seed(config.seed, stream);
  return cc;
}

/// Trains an independent critic against `generator` and scores it on fresh
/// batches. Seeds are derived from the run seed and `stream` only, so the same
/// generator always receives the same score.
inline double independent_critic_score(const TrainConfig& config, const MlpParams& generator, std::uint64_t stream) {
  const auto fake = generator_sampler(generator, config.latent);
  const auto critic = train_independent_critic(config.data, fake, critic_config_for(config, stream));
  Rng rng(derive_seed(config.seed, stream + 1));
  const Tensor real = sample_real(config.data, config.eval.critic_eval_samples, rng);
  const Tensor generated = fake(config.eval.critic_eval_samples, rng);
  return wasserstein_score(critic, real, generated).w;
}

inline Tensor snapshot_samples(const TrainState& state, const TrainConfig& config) {
  Rng eval_rng(derive_seed(config.seed, 1000003ull + state.iteration));
  return mlp_apply(state.generator, sample_latent(config.latent, config.eval.samples, eval_rng));
}

/// Figure-style panel: generated samples over the real modes, with
/// discriminator iso-probability contours for sigmoid-head discriminators.
inline void write_panel(const TrainState& state, const TrainConfig& config, const Tensor& samples,
                        const std::filesystem::path& out_dir) {
  std::optional<GridField> field;
  if (state.discriminator.head == Head::kSigmoid) {
    GridSpec grid{-6.0, 6.0, config.eval.plot_resolution};
    field = GridField{grid, discriminator_on_grid(state.discriminator, grid)};
  }
  PlotOptions opt;
  opt.title = "iteration " + std::to_string(state.iteration);
  emit_plot(samples, config.data, field, (out_dir / plot_name(state.iteration)).string(), opt);
}

inline SnapshotRecord take_snapshot(const TrainState& state, const TrainConfig& config,
                                    const std::optional<std::filesystem::path>& out_dir) {
  SnapshotRecord snap;
  snap.iteration = state.iteration;
  const Tensor samples = snapshot_samples(state, config);
  snap.coverage = mode_coverage(samples, config.data, config.eval.coverage);
  if (config.eval.critic_every > 0 && state.iteration % config.eval.critic_every == 0) {
    snap.wasserstein = independent_critic_score(config, state.generator, 2000003ull + 2 * state.iteration);
  }
  snap.checkpoint = checkpoint_name(state.iteration);
  if (out_dir) {
    save_checkpoint((*out_dir / snap.checkpoint).string(), make_checkpoint(state, config));
    write_panel(state, config, samples, *out_dir);
  }
  return snap;
}

/// Runs total_iterations steps, snapshotting every snapshot_every completed
/// iterations. With an output directory, writes run.jsonl, ckpt_<iteration>
/// files and plot_<iteration>.svg panels; the log is written even when the run
/// aborts on a non-finite loss. Aborts are reported through RunResult::aborted.
inline RunResult train_run(const TrainConfig& config, const std::optional<std::filesystem::path>& out_dir = {}) {
  config.validate();
  if (out_dir) std::filesystem::create_directories(*out_dir);
  TrainState state = init_state(config);
  RunResult result;
  result.record.seed = config.seed;

  const auto persist = [&]() {
    if (!out_dir) return;
    write_text_file((*out_dir / "run.jsonl").string(), run_record_to_jsonl(result.record));
    save_checkpoint((*out_dir / checkpoint_name(state.iteration)).string(), result.final_checkpoint);
  };

  try {
    while (state.iteration < config.total_iterations) {
      result.record.iterations.push_back(train_step(state, config));
      if (state.iteration % config.snapshot_every == 0 || state.iteration == config.total_iterations) {
        result.record.snapshots.push_back(take_snapshot(state, config, out_dir));
      }
    }
  } catch (const TrainingAborted& e) {
    result.record.abort = AbortRecord{e.iteration(), e.d_loss(), e.g_loss()};
    result.aborted = true;
  }
  result.final_checkpoint = make_checkpoint(state, config);
  persist();
  if (out_dir && result.record.snapshots.empty()) {
    // Zero-length or immediately aborted runs still get a panel of the current generator.
    write_panel(state, config, snapshot_samples(state, config), *out_dir);
  }
  return result;
}

}  // namespace greedlab
