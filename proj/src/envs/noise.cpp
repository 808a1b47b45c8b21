#include "iss/envs/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "iss/errors.hpp"

namespace iss::envs {

std::string to_string(NoiseKind k) {
  switch (k) {
  case NoiseKind::none: return "none";
  case NoiseKind::l0: return "l0";
  case NoiseKind::l2: return "l2";
  case NoiseKind::linf: return "linf";
  case NoiseKind::gaussian: return "gaussian";
  }
  return "none";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "none") return NoiseKind::none;
  if (name == "l0") return NoiseKind::l0;
  if (name == "l2") return NoiseKind::l2;
  if (name == "linf") return NoiseKind::linf;
  if (name == "gaussian") return NoiseKind::gaussian;
  throw DomainError("unknown noise kind '" + name + "'");
}

std::string to_string(NoiseScale s) { return s == NoiseScale::absolute ? "absolute" : "range"; }

NoiseScale noise_scale_from_string(const std::string& name) {
  if (name == "absolute") return NoiseScale::absolute;
  if (name == "range") return NoiseScale::range;
  throw DomainError("unknown noise scale '" + name + "'");
}

void NoiseSpec::validate(int observation_dim) const {
  if (!(level >= 0.0) || !std::isfinite(level)) throw DomainError("noise level must be finite and >= 0");
  if (kind == NoiseKind::l0) {
    if (level != std::floor(level)) throw DomainError("l0 budget must be an integer");
    if (level > observation_dim) throw DomainError("l0 budget exceeds observation dimension");
  }
}

Observation apply_noise(const Observation& obs, const NoiseSpec& spec, const Bounds& bounds, Rng& rng) {
  if (spec.is_identity()) return obs;
  const Eigen::Index dim = obs.size();
  if (bounds.size() != dim) throw ShapeError("noise bounds dimension", dim, bounds.size());
  const Eigen::VectorXd unit =
      spec.scale == NoiseScale::range ? bounds.range() : Eigen::VectorXd::Ones(dim);

  Observation out = obs;
  switch (spec.kind) {
  case NoiseKind::none: break;
  case NoiseKind::gaussian: {
    std::normal_distribution<double> n(0.0, spec.level);
    for (Eigen::Index i = 0; i < dim; ++i) out[i] += n(rng) * unit[i];
    break;
  }
  case NoiseKind::linf: {
    std::uniform_real_distribution<double> u(-spec.level, spec.level);
    for (Eigen::Index i = 0; i < dim; ++i) out[i] += u(rng) * unit[i];
    break;
  }
  case NoiseKind::l2: {
    // Uniform in the ball: isotropic direction, radius eps * U^(1/dim).
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd dir(dim);
    double norm = 0.0;
    do {
      for (Eigen::Index i = 0; i < dim; ++i) dir[i] = n(rng);
      norm = dir.norm();
    } while (norm == 0.0);
    const double radius =
        spec.level * std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / double(dim));
    out += (radius / norm) * dir.cwiseProduct(unit);
    break;
  }
  case NoiseKind::l0: {
    const auto k = static_cast<Eigen::Index>(spec.level);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(dim));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    // Partial Fisher-Yates: first k entries are a uniform k-subset.
    for (Eigen::Index i = 0; i < k; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, dim - 1);
      std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      const Eigen::Index c = idx[std::size_t(i)];
      out[c] = std::uniform_real_distribution<double>(bounds.lower[c], bounds.upper[c])(rng);
    }
    break;
  }
  }
  return out;
}

NoisyEnvironment::NoisyEnvironment(std::unique_ptr<Environment> env, NoiseSpec spec)
    : env_(std::move(env)), spec_(spec) {
  spec_.validate(env_->observation_dim());
}

Observation NoisyEnvironment::reset_to(const StateVector& state, std::uint64_t seed) {
  rng_.seed(derive_seed(spec_.seed, seed));
  return apply_noise(env_->reset_to(state), spec_, env_->observation_bounds(), rng_);
}

StepResult NoisyEnvironment::step(const Action& action) {
  StepResult r = env_->step(action);
  r.observation = apply_noise(r.observation, spec_, env_->observation_bounds(), rng_);
  return r;
}

} // namespace iss::envs
