#include "iss/harness/evaluate.hpp"

#include <cmath>

#include "iss/errors.hpp"

namespace iss::harness {

EvalResult evaluate(const sac::SacAgent& agent, const envs::Environment& env, const envs::NoiseSpec& noise,
                    int episodes, std::uint64_t seed) {
  if (episodes < 1) throw DomainError("evaluate: episodes must be >= 1");
  envs::NoisyEnvironment noisy(env.clone(), noise);
  Rng unused;
  EvalResult out;
  out.returns.reserve(std::size_t(episodes));
  for (int i = 0; i < episodes; ++i) {
    Rng reset_rng = make_rng(seed, {std::uint64_t(i), 0});
    const envs::StateVector start = env.canonical_initial_state(reset_rng);
    Eigen::VectorXd obs = noisy.reset_to(start, derive_seed(seed, {std::uint64_t(i), 1}));
    double total = 0.0;
    while (true) {
      const auto r = noisy.step(agent.act(obs, sac::ActMode::deterministic, unused));
      total += r.reward;
      obs = r.observation;
      if (r.done || r.truncated) break;
    }
    out.returns.push_back(total);
  }
  double sum = 0.0;
  for (double x : out.returns) sum += x;
  out.mean = sum / double(episodes);
  double sq = 0.0;
  for (double x : out.returns) sq += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(sq / double(episodes));
  return out;
}

} // namespace iss::harness
