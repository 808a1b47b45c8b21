#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iss/harness/config.hpp"
#include "iss/sac/agent.hpp"

namespace iss::harness {

struct SweepRow {
  std::string env_id;
  std::string strategy;
  std::string seed;
  std::string checkpoint;
  envs::NoiseKind kind = envs::NoiseKind::none;
  double level = 0.0;
  envs::NoiseScale scale = envs::NoiseScale::absolute;
  double eval_mean_reward = 0.0;
  double eval_std_reward = 0.0;
  int episodes_in_eval = 0;
};

/// Loads a checkpoint and checks its networks against the shapes `config` implies.
sac::SacAgent load_agent_for(const ExperimentConfig& config, const std::filesystem::path& checkpoint);

/// Evaluates the frozen policy once per grid cell, eval_episodes episodes each.
/// Every cell uses the same episode seeds.
std::vector<SweepRow> noise_sweep(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                                  const std::vector<NoiseCell>& grid, std::uint64_t eval_seed);

std::string sweep_header();
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

} // namespace iss::harness
