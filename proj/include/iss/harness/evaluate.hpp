#pragma once

#include <cstdint>
#include <vector>

#include "iss/envs/environment.hpp"
#include "iss/envs/noise.hpp"
#include "iss/sac/agent.hpp"

namespace iss::harness {

struct EvalResult {
  double mean = 0.0;
  double std = 0.0; // population standard deviation
  std::vector<double> returns;
};

/// Runs `episodes` deterministic-policy episodes from the environment's canonical
/// reset with observation noise `noise`. Episode i draws its initial state and
/// noise stream from sub-seeds of (seed, i). Returns undiscounted reward sums.
EvalResult evaluate(const sac::SacAgent& agent, const envs::Environment& env, const envs::NoiseSpec& noise,
                    int episodes, std::uint64_t seed);

} // namespace iss::harness
