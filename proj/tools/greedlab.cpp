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

// greedlab: train, evaluate and inspect relaxed GANs on the Gaussian-grid benchmark.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "greedlab/greedlab.hpp"

namespace fs = std::filesystem;
using namespace greedlab;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitAborted = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load_experiment(const Common& common) {
  ExperimentConfig config;
  if (!common.config_path.empty()) {
    try {
      config = load_config(common.config_path);
    } catch (const ConfigError& e) {
      throw ConfigError(0, common.config_path + ": " + e.what());
    }
  }
  if (common.seed) config.seeds = {*common.seed};
  return config;
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GREEDLAB_THREADS")) {
    try {
      cap = std::max<std::size_t>(1, std::stoul(env));
    } catch (const std::exception&) {
      throw ContractError(std::string("GREEDLAB_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return std::min(cap, jobs);
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string out;
  bool no_relaxation = false;
};

int run_train(const Common& common, const TrainArgs& args) {
  ExperimentConfig config = load_experiment(common);
  if (args.no_relaxation) config.train.relaxation.enabled = false;
  if (!args.out.empty()) config.out_dir = args.out;
  validate_config(config);

  const fs::path root(config.out_dir);
  fs::create_directories(root);
  std::mutex io;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> any_aborted{false};
  std::vector<std::string> failures;

  const auto worker = [&]() {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const std::uint64_t seed = config.seeds[i];
      const fs::path dir = root / seed_dir_name(seed);
      try {
        fs::create_directories(dir);
        ExperimentConfig copy = config;
        copy.seeds = {seed};
        copy.out_dir = dir.string();
        write_text_file((dir / "config.ini").string(), serialize_config(copy));
        const RunResult result = train_run(config.for_seed(seed), dir);
        std::lock_guard lock(io);
        if (result.aborted) {
          any_aborted = true;
          const auto& a = *result.record.abort;
          std::cout << "seed " << seed << ": aborted at iteration " << a.iteration << " (d_loss " << a.d_loss
                    << ", g_loss " << a.g_loss << ")\n";
        } else if (result.record.snapshots.empty()) {
          std::cout << "seed " << seed << ": 0 iterations\n";
        } else {
          const auto& last = result.record.snapshots.back();
          std::cout << "seed " << seed << ": " << last.iteration << " iterations, modes " << last.coverage.modes_covered
                    << "/" << last.coverage.per_mode_counts.size() << ", high-quality "
                    << fmt(last.coverage.high_quality_fraction) << "\n";
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(io);
        failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
      }
    }
  };

  std::vector<std::thread> pool;
  const std::size_t workers = worker_count(config.seeds.size());
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& f : failures) std::cerr << "error: " << f << "\n";
  if (!failures.empty()) return kExitFailure;
  return any_aborted ? kExitAborted : 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string samples_csv;
  std::string checkpoint;
  bool critic = false;
  std::vector<std::string> images;
  std::size_t pairs = 100;
};

void print_row(const std::string& name, const std::string& value) {
  std::cout << name << std::string(name.size() < 24 ? 24 - name.size() : 1, ' ') << value << "\n";
}

int run_eval(const Common& common, const EvalArgs& args) {
  const ExperimentConfig config = load_experiment(common);
  const TrainConfig train = config.for_seed(config.seeds.front());
  std::optional<Tensor> samples;
  std::optional<MlpParams> generator;
  if (!args.samples_csv.empty()) samples = points_from_csv(read_text_file(args.samples_csv));
  if (!args.checkpoint.empty()) {
    generator = load_checkpoint(args.checkpoint).network("generator");
    if (!samples) samples = snapshot_samples(TrainState{*generator, {}, {}, {}, Rng(0), 0}, train);
  }
  if (!samples && args.images.empty()) {
    throw ContractError("eval: give --samples, --checkpoint or --images");
  }

  std::cout << "metric                  value\n";
  if (samples) {
    const auto report = mode_coverage(*samples, train.data, train.eval.coverage);
    print_row("n_samples", std::to_string(report.n_samples));
    print_row("modes_covered", std::to_string(report.modes_covered) + "/" +
                                   std::to_string(report.per_mode_counts.size()));
    print_row("high_quality_fraction", fmt(report.high_quality_fraction));
  }
  if (args.critic) {
    if (!generator) throw ContractError("eval: --critic needs --checkpoint");
    print_row("wasserstein", fmt(independent_critic_score(train, *generator, 2000003ull), "%.6g"));
  }
  if (!args.images.empty()) {
    std::vector<Tensor> images;
    for (const auto& path : args.images) images.push_back(read_pgm(path));
    Rng rng(derive_seed(train.seed, 17));
    print_row("ms_ssim_diversity", fmt(pairwise_diversity(images, args.pairs, rng), "%.6f"));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

struct OracleArgs {
  std::optional<double> lambda;
  std::string checkpoint;
  std::vector<double> shift;
  std::size_t resolution = 200;
  std::size_t xhat_samples = 1000000;
  std::size_t g_samples = 1000000;
  std::string out;
};

int run_oracle(const Common& common, const OracleArgs& args) {
  const ExperimentConfig config = load_experiment(common);
  const TrainConfig train = config.for_seed(config.seeds.front());
  PointSampler generated;
  GridDensity gd;
  gd.grid = GridSpec{-6.0, 6.0, args.resolution};
  gd.p_data = mixture_on_grid(train.data, gd.grid);
  Rng rng(derive_seed(train.seed, 31));
  if (!args.checkpoint.empty()) {
    generated = generator_sampler(load_checkpoint(args.checkpoint).network("generator"), train.latent);
    gd.p_g = sampler_on_grid(generated, args.g_samples, gd.grid, rng);
  } else {
    if (args.shift.size() != 2) throw ContractError("oracle: --shift takes two values DX DY");
    const auto shifted = train.data.shifted(args.shift[0], args.shift[1]);
    generated = mixture_sampler(shifted);
    gd.p_g = mixture_on_grid(shifted, gd.grid);
  }
  gd.p_xhat = estimate_xhat_density(train.data, generated, args.xhat_samples, gd.grid, rng, train.relaxation);
  const auto d_star = args.lambda ? optimal_d_relaxed(gd.p_data, gd.p_g, gd.p_xhat, *args.lambda)
                                  : optimal_d_standard(gd.p_data, gd.p_g);
  const std::string csv = grid_to_csv(gd, d_star);
  if (args.out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(args.out, csv);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string checkpoint;
  std::string samples_csv;
  std::string out;
  std::string title;
};

int run_plot(const Common& common, const PlotArgs& args) {
  const ExperimentConfig config = load_experiment(common);
  const TrainConfig train = config.for_seed(config.seeds.front());
  Tensor samples(Shape::matrix(0, 2));
  std::optional<GridField> field;
  if (!args.checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const MlpParams& d = ckpt.network("discriminator");
    if (d.head == Head::kSigmoid) {
      const GridSpec grid{-6.0, 6.0, train.eval.plot_resolution};
      field = GridField{grid, discriminator_on_grid(d, grid)};
    }
    samples = snapshot_samples(TrainState{ckpt.network("generator"), d, {}, {}, Rng(0), ckpt.step}, train);
  }
  if (!args.samples_csv.empty()) samples = points_from_csv(read_text_file(args.samples_csv));
  PlotOptions opt;
  opt.title = args.title;
  emit_plot(samples, train.data, field, args.out, opt);
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct SeedSummary {
  std::size_t modes = 0;
  std::size_t total_modes = 0;
  std::optional<double> wasserstein;
  bool aborted = false;
};

std::map<std::uint64_t, SeedSummary> summarize(const fs::path& root) {
  std::map<std::uint64_t, SeedSummary> out;
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || !name.starts_with("seed_")) continue;
    const fs::path log = entry.path() / "run.jsonl";
    if (!fs::exists(log)) continue;
    const RunRecord record = run_record_from_jsonl(read_text_file(log.string()));
    SeedSummary s;
    s.aborted = record.abort.has_value();
    if (!record.snapshots.empty()) {
      s.modes = record.snapshots.back().coverage.modes_covered;
      s.total_modes = record.snapshots.back().coverage.per_mode_counts.size();
    }
    for (const auto& snap : record.snapshots) {
      if (snap.wasserstein) s.wasserstein = snap.wasserstein;
    }
    out[std::stoull(name.substr(5))] = s;
  }
  return out;
}

struct CompareArgs {
  std::string baseline;
  std::string relaxed;
  std::string out;
};

int run_compare(const CompareArgs& args) {
  const auto base = summarize(args.baseline);
  const auto relax = summarize(args.relaxed);
  const auto w = [](const SeedSummary& s) { return s.wasserstein ? fmt(*s.wasserstein, "%.6g") : "-"; };
  std::string table = "seed,baseline_modes,relaxed_modes,baseline_w,relaxed_w,relaxed_ge_baseline\n";
  std::size_t pairs = 0, wins = 0;
  for (const auto& [seed, b] : base) {
    const auto it = relax.find(seed);
    if (it == relax.end()) continue;
    const auto& r = it->second;
    const bool ge = r.modes >= b.modes;
    ++pairs;
    wins += ge ? 1 : 0;
    table += std::to_string(seed) + "," + std::to_string(b.modes) + (b.aborted ? "*" : "") + "," +
             std::to_string(r.modes) + (r.aborted ? "*" : "") + "," + w(b) + "," + w(r) + "," +
             (ge ? "yes" : "no") + "\n";
  }
  if (pairs == 0) throw IoError("no paired seeds between " + args.baseline + " and " + args.relaxed);
  std::cout << table << "# relaxed >= baseline in " << wins << "/" << pairs << " paired seeds\n";
  if (!args.out.empty()) write_text_file(args.out, table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greedlab: relaxed GAN training and analysis on the Gaussian-grid benchmark"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Override the seed list with a single seed");
  };

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one run per seed");
  add_common(train_cmd);
  train_cmd->add_option("--out", train.out, "Output directory (overrides experiment.out_dir)");
  train_cmd->add_flag("--no-relaxation", train.no_relaxation, "Disable the interpolation relaxation");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Print metrics for samples, a checkpoint or images");
  add_common(eval_cmd);
  eval_cmd->add_option("--samples", eval.samples_csv, "CSV of 2-D samples (header x,y)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint whose generator is sampled")
      ->check(CLI::ExistingFile);
  eval_cmd->add_flag("--critic", eval.critic, "Also train an independent critic and report W");
  eval_cmd->add_option("--images", eval.images, "PGM images for MS-SSIM diversity")->check(CLI::ExistingFile);
  eval_cmd->add_option("--pairs", eval.pairs, "Image pairs drawn for MS-SSIM diversity")->check(CLI::PositiveNumber);

  OracleArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "Write the optimal-discriminator grid as CSV");
  add_common(oracle_cmd);
  oracle_cmd->add_option("--lambda", oracle.lambda, "Relaxation weight; omit for the standard optimum")
      ->check(CLI::NonNegativeNumber);
  oracle_cmd->add_option("--checkpoint", oracle.checkpoint, "Take the generator from this checkpoint")
      ->check(CLI::ExistingFile);
  oracle_cmd->add_option("--shift", oracle.shift, "Generator = data mixture shifted by DX DY")
      ->expected(2)
      ->default_str("1 1");
  oracle_cmd->add_option("--resolution", oracle.resolution, "Cells per side")->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--xhat-samples", oracle.xhat_samples, "Monte-Carlo samples for the x_hat density")
      ->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--g-samples", oracle.g_samples, "Samples for a checkpoint generator's density")
      ->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--out", oracle.out, "Output CSV (default stdout)");

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render an SVG panel");
  add_common(plot_cmd);
  plot_cmd->add_option("--checkpoint", plot.checkpoint, "Checkpoint to draw (samples and D contours)")
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--samples", plot.samples_csv, "CSV of 2-D samples (header x,y)")->check(CLI::ExistingFile);
  plot_cmd->add_option("--title", plot.title, "Panel title");
  plot_cmd->add_option("--out", plot.out, "Output SVG")->required();

  CompareArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "Paired baseline-vs-relaxed summary table");
  compare_cmd->add_option("--baseline", compare.baseline, "Output directory of the baseline runs")->required();
  compare_cmd->add_option("--relaxed", compare.relaxed, "Output directory of the relaxed runs")->required();
  compare_cmd->add_option("--out", compare.out, "Also write the table as CSV");

  CLI11_PARSE(app, argc, argv);
  if (oracle.shift.empty()) oracle.shift = {1.0, 1.0};

  try {
    if (train_cmd->parsed()) return run_train(common, train);
    if (eval_cmd->parsed()) return run_eval(common, eval);
    if (oracle_cmd->parsed()) return run_oracle(common, oracle);
    if (plot_cmd->parsed()) return run_plot(common, plot);
    if (compare_cmd->parsed()) return run_compare(compare);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
