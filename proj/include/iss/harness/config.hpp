#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iss/envs/noise.hpp"
#include "iss/metric/condition_number.hpp"
#include "iss/sac/agent.hpp"
#include "iss/selector/selector.hpp"

namespace iss::harness {

/// How each episode's initial state is chosen once SAC warmup is over.
enum class Strategy { default_reset, uniform_wide, gp_condition };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

/// One cell of a noise-robustness grid.
struct NoiseCell {
  envs::NoiseKind kind = envs::NoiseKind::none;
  double level = 0.0;
  envs::NoiseScale scale = envs::NoiseScale::range;
};

/// Gaussian {0, 0.05, 0.1}, linf {0.05, 0.1}, l2 {0.1, 0.2} (fractions of each
/// observation dimension's range) and l0 {1}.
std::vector<NoiseCell> default_noise_grid();

struct ExperimentConfig {
  std::string env_id = "pendulum-v1";
  Strategy strategy = Strategy::default_reset;
  long total_steps = 50000;
  long eval_interval = 5000;
  int eval_episodes = 100;
  std::vector<std::uint64_t> seeds{0};
  /// Ends a seed early once an evaluation mean reaches this value.
  std::optional<double> stop_at_reward;
  std::string output_dir = "runs";
  int jobs = 1;
  bool checkpoints = true;

  sac::SacConfig sac;
  metric::MetricSpec metric;
  selector::SelectorConfig selector;
  envs::NoiseSpec train_noise;
  envs::NoiseSpec eval_noise;
  std::vector<NoiseCell> noise_grid = default_noise_grid();

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Strict conversion: unknown keys and mistyped values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);

/// Applies "a.b.c=value" to a config document. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json read_config_document(const std::filesystem::path& path);

/// Reads, applies overrides in order, converts and validates.
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

} // namespace iss::harness
