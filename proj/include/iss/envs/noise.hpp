#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "iss/envs/environment.hpp"

namespace iss::envs {

enum class NoiseKind { none, l0, l2, linf, gaussian };

/// How a noise level maps onto observation coordinates. `absolute` uses the
/// level as-is; `range` measures it in units of each dimension's nominal range.
enum class NoiseScale { absolute, range };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& name);
std::string to_string(NoiseScale s);
NoiseScale noise_scale_from_string(const std::string& name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double level = 0.0; // l0: coordinate budget k; l2/linf: radius; gaussian: sigma
  std::uint64_t seed = 0;
  NoiseScale scale = NoiseScale::absolute;

  /// Throws DomainError for a negative level or a non-integral / oversize l0 budget.
  void validate(int observation_dim) const;
  bool is_identity() const { return kind == NoiseKind::none || level == 0.0; }
};

/// Perturbs an observation. `bounds` are the nominal observation bounds (used by
/// l0 replacement and range scaling).
Observation apply_noise(const Observation& obs, const NoiseSpec& spec, const Bounds& bounds, Rng& rng);

/// Environment view whose observations pass through a noise model. The wrapped
/// dynamics are untouched.
class NoisyEnvironment {
public:
  NoisyEnvironment(std::unique_ptr<Environment> env, NoiseSpec spec);

  Observation reset_to(const StateVector& state, std::uint64_t seed);
  StepResult step(const Action& action);

  Environment& base() { return *env_; }
  const Environment& base() const { return *env_; }
  const NoiseSpec& noise() const { return spec_; }

private:
  std::unique_ptr<Environment> env_;
  NoiseSpec spec_;
  Rng rng_;
};

} // namespace iss::envs
