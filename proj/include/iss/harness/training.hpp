#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iss/envs/environment.hpp"
#include "iss/harness/config.hpp"
#include "iss/sac/agent.hpp"
#include "iss/selector/selector.hpp"

namespace iss::harness {

/// What a strategy sees when an episode is about to start.
struct EpisodeStart {
  const envs::Environment& env;
  const sac::SacAgent& agent;
  long env_step;
  long episode;
  Rng& canonical_rng; // shared stream for canonical resets
};

struct InitialStateChoice {
  envs::StateVector state;
  std::string branch;
  double overhead_ms = 0.0;
};

/// Picks episode initial states after SAC warmup. Before warmup every run uses
/// canonical resets drawn from the shared stream, whatever its strategy.
class InitialStateStrategy {
public:
  virtual ~InitialStateStrategy() = default;
  virtual InitialStateChoice choose(const EpisodeStart& start) = 0;
};

/// Canonical reset; branch label "canonical".
class DefaultStrategy final : public InitialStateStrategy {
public:
  InitialStateChoice choose(const EpisodeStart& start) override;
};

/// One uniform draw over the full state bounds; branch label "uniform".
class UniformWideStrategy final : public InitialStateStrategy {
public:
  explicit UniformWideStrategy(std::uint64_t seed);
  InitialStateChoice choose(const EpisodeStart& start) override;

private:
  Rng rng_;
};

/// One selector epoch per episode: score the pool with the condition-number
/// metric, fit the GP, shift, select. Branch label "variance" or "mean".
class GpConditionStrategy final : public InitialStateStrategy {
public:
  GpConditionStrategy(const envs::Environment& env, const ExperimentConfig& config, std::uint64_t seed);
  InitialStateChoice choose(const EpisodeStart& start) override;

  const selector::StateSelector& selector() const { return selector_; }
  const std::optional<selector::EpochReport>& last_report() const { return last_; }

private:
  metric::MetricSpec metric_;
  std::uint64_t seed_;
  selector::StateSelector selector_;
  std::optional<selector::EpochReport> last_;
};

using StrategyFactory =
    std::function<std::unique_ptr<InitialStateStrategy>(const ExperimentConfig&, const envs::Environment&, std::uint64_t)>;

std::unique_ptr<InitialStateStrategy> make_strategy(const ExperimentConfig& config, const envs::Environment& env,
                                                    std::uint64_t seed);

struct RunOptions {
  /// Replaces the strategy named in the config; the run keeps the config's label.
  StrategyFactory strategy_factory;
  bool verbose = false;
};

struct RunSummary {
  std::uint64_t seed = 0;
  std::string status = "ok"; // ok | aborted | failed
  std::string error;
  std::filesystem::path csv;
  std::filesystem::path run_info;
  std::optional<std::filesystem::path> best_checkpoint;
  std::optional<std::filesystem::path> final_checkpoint;
  std::optional<double> best_eval_mean;
  long env_steps = 0;
  long episodes = 0;
};

/// "<env>_<strategy>_<seed>"
std::string run_stem(const ExperimentConfig& config, std::uint64_t seed);
std::filesystem::path checkpoint_dir(const ExperimentConfig& config);

/// Trains one seed, streaming rows to <output_dir>/<stem>.csv. A non-finite
/// training signal ends the run with a row whose selection_branch is "abort".
RunSummary run_training(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {});

struct ExperimentSummary {
  std::vector<RunSummary> runs; // ordered by seed
  std::filesystem::path merged_csv;
  bool all_ok() const;
};

/// Runs every seed on `config.jobs` worker threads, then concatenates the
/// per-seed files in seed order into <output_dir>/<env>_<strategy>.csv.
ExperimentSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

} // namespace iss::harness
