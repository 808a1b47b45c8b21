#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iss/random.hpp"

namespace iss::envs {

using Observation = Eigen::VectorXd;
using Action = Eigen::VectorXd;

/// Internal simulator state, distinct from what the agent observes.
struct StateVector {
  Eigen::VectorXd values;

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
  bool operator==(const StateVector& o) const {
    return values.size() == o.values.size() && values == o.values;
  }
};

/// Per-dimension closed box.
struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index size() const { return lower.size(); }
  Eigen::VectorXd range() const { return upper - lower; }
  Eigen::VectorXd midpoint() const { return 0.5 * (upper + lower); }
  bool contains(const Eigen::VectorXd& x) const {
    return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
           (x.array() <= upper.array()).all();
  }
  Eigen::VectorXd clip(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
};

/// A continuous-control task that can be reset to any caller-chosen state.
class Environment {
public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual const Bounds& state_bounds() const = 0;
  virtual const Bounds& observation_bounds() const = 0;
  virtual const Bounds& action_bounds() const = 0;
  virtual int max_episode_steps() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

  /// Draw from the task's stock (narrow) reset distribution.
  virtual StateVector canonical_initial_state(Rng& rng) const = 0;

  int state_dim() const { return int(state_bounds().size()); }
  int observation_dim() const { return int(observation_bounds().size()); }
  int action_dim() const { return int(action_bounds().size()); }

  /// Sets the internal state exactly. Values up to 1% of a dimension's range
  /// outside the bounds are clipped with a warning; anything further is rejected.
  Observation reset_to(const StateVector& state);

  /// Advances one step; the action is clipped to the action bounds.
  StepResult step(const Action& action);

  const StateVector& state() const { return state_; }
  Observation observe() const { return observation_of(state_.values); }
  /// Noise-free observation of an arbitrary state; does not touch the episode.
  virtual Observation observation_of(const Eigen::VectorXd& state) const = 0;
  int elapsed_steps() const { return steps_; }
  bool needs_reset() const { return !ready_; }

protected:
  struct Transition {
    Eigen::VectorXd next_state;
    double reward = 0.0;
    bool terminal = false;
  };

  virtual Transition advance(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const = 0;

private:
  StateVector state_;
  int steps_ = 0;
  bool ready_ = false;
};

class Pendulum final : public Environment {
public:
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;

  Pendulum();

  std::string id() const override { return "pendulum-v1"; }
  const Bounds& state_bounds() const override { return state_bounds_; }
  const Bounds& observation_bounds() const override { return obs_bounds_; }
  const Bounds& action_bounds() const override { return action_bounds_; }
  int max_episode_steps() const override { return 200; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Pendulum>(*this); }
  StateVector canonical_initial_state(Rng& rng) const override;

  /// Wraps an angle into [-pi, pi).
  static double wrap_angle(double x);

  Observation observation_of(const Eigen::VectorXd& state) const override;

protected:
  Transition advance(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const override;

private:
  Bounds state_bounds_, obs_bounds_, action_bounds_;
};

class MountainCarContinuous final : public Environment {
public:
  static constexpr double kMinPosition = -1.2;
  static constexpr double kMaxPosition = 0.6;
  static constexpr double kMaxSpeed = 0.07;
  static constexpr double kGoalPosition = 0.45;
  static constexpr double kPower = 0.0015;

  MountainCarContinuous();

  std::string id() const override { return "mountaincar-continuous-v0"; }
  const Bounds& state_bounds() const override { return state_bounds_; }
  const Bounds& observation_bounds() const override { return state_bounds_; }
  const Bounds& action_bounds() const override { return action_bounds_; }
  int max_episode_steps() const override { return 999; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<MountainCarContinuous>(*this);
  }
  StateVector canonical_initial_state(Rng& rng) const override;

  Observation observation_of(const Eigen::VectorXd& state) const override { return state; }

protected:
  Transition advance(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const override;

private:
  Bounds state_bounds_, action_bounds_;
};

/// Registry lookup by id ("pendulum-v1", "mountaincar-continuous-v0").
std::unique_ptr<Environment> make_environment(const std::string& id);
std::vector<std::string> environment_ids();

/// n i.i.d. states uniform over the full state bounds.
std::vector<StateVector> sample_states(const Environment& env, int n, std::uint64_t seed);

} // namespace iss::envs
