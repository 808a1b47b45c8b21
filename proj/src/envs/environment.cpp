#include "iss/envs/environment.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

#include "iss/errors.hpp"

namespace iss::envs {

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

} // namespace

Observation Environment::reset_to(const StateVector& state) {
  const Bounds& b = state_bounds();
  if (state.size() != b.size()) throw ShapeError("reset_to state dimension", b.size(), state.size());
  if (!state.values.allFinite()) throw DomainError("reset_to: non-finite state");
  const Eigen::VectorXd tol = 0.01 * b.range();
  if ((state.values.array() < (b.lower - tol).array()).any() ||
      (state.values.array() > (b.upper + tol).array()).any())
    throw DomainError(id() + " reset_to: state outside bounds by more than 1% of range");
  state_.values = state.values;
  if (!b.contains(state.values)) {
    std::clog << "warning: " << id() << " reset_to state marginally outside bounds, clipped\n";
    state_.values = b.clip(state.values);
  }
  steps_ = 0;
  ready_ = true;
  return observe();
}

StepResult Environment::step(const Action& action) {
  if (!ready_) throw StateError(id() + ": step called before reset or after episode end");
  const Bounds& ab = action_bounds();
  if (action.size() != ab.size()) throw ShapeError("action dimension", ab.size(), action.size());
  if (!action.allFinite()) throw DomainError(id() + ": non-finite action");

  Transition t = advance(state_.values, ab.clip(action));
  state_.values = std::move(t.next_state);
  ++steps_;

  StepResult r;
  r.observation = observe();
  r.reward = t.reward;
  r.done = t.terminal;
  r.truncated = !t.terminal && steps_ >= max_episode_steps();
  if (r.done || r.truncated) ready_ = false;
  return r;
}

// ---------------------------------------------------------------------------

Pendulum::Pendulum()
    : state_bounds_{vec({-std::numbers::pi, -kMaxSpeed}), vec({std::numbers::pi, kMaxSpeed})},
      obs_bounds_{vec({-1.0, -1.0, -kMaxSpeed}), vec({1.0, 1.0, kMaxSpeed})},
      action_bounds_{vec({-kMaxTorque}), vec({kMaxTorque})} {}

double Pendulum::wrap_angle(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(x + std::numbers::pi, two_pi);
  if (r < 0) r += two_pi;
  return r - std::numbers::pi;
}

StateVector Pendulum::canonical_initial_state(Rng& rng) const {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(-1.0, 1.0);
  const double theta = angle(rng);
  const double theta_dot = speed(rng);
  return {vec({theta, theta_dot})};
}

Observation Pendulum::observation_of(const Eigen::VectorXd& s) const {
  return vec({std::cos(s[0]), std::sin(s[0]), s[1]});
}

Environment::Transition Pendulum::advance(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  const double theta = s[0], theta_dot = s[1], u = a[0];
  const double angle = wrap_angle(theta);
  const double cost = angle * angle + 0.1 * theta_dot * theta_dot + 0.001 * u * u;

  double next_dot = theta_dot + (3.0 * kGravity / (2.0 * kLength) * std::sin(theta) +
                                 3.0 / (kMass * kLength * kLength) * u) *
                                    kDt;
  next_dot = std::clamp(next_dot, -kMaxSpeed, kMaxSpeed);
  const double next_theta = wrap_angle(theta + next_dot * kDt);
  return {vec({next_theta, next_dot}), -cost, false};
}

// ---------------------------------------------------------------------------

MountainCarContinuous::MountainCarContinuous()
    : state_bounds_{vec({kMinPosition, -kMaxSpeed}), vec({kMaxPosition, kMaxSpeed})},
      action_bounds_{vec({-1.0}), vec({1.0})} {}

StateVector MountainCarContinuous::canonical_initial_state(Rng& rng) const {
  std::uniform_real_distribution<double> pos(-0.6, -0.4);
  return {vec({pos(rng), 0.0})};
}

Environment::Transition MountainCarContinuous::advance(const Eigen::VectorXd& s,
                                                       const Eigen::VectorXd& a) const {
  const double force = a[0];
  double v = s[1] + force * kPower - 0.0025 * std::cos(3.0 * s[0]);
  v = std::clamp(v, -kMaxSpeed, kMaxSpeed);
  double x = std::clamp(s[0] + v, kMinPosition, kMaxPosition);
  if (x == kMinPosition && v < 0) v = 0;
  const bool goal = x >= kGoalPosition;
  double reward = -0.1 * force * force;
  if (goal) reward += 100.0;
  return {vec({x, v}), reward, goal};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Environment> make_environment(const std::string& id) {
  if (id == "pendulum-v1") return std::make_unique<Pendulum>();
  if (id == "mountaincar-continuous-v0") return std::make_unique<MountainCarContinuous>();
  throw DomainError("unknown environment id '" + id + "'");
}

std::vector<std::string> environment_ids() { return {"pendulum-v1", "mountaincar-continuous-v0"}; }

std::vector<StateVector> sample_states(const Environment& env, int n, std::uint64_t seed) {
  if (n < 1) throw DomainError("sample_states: n must be >= 1");
  Rng rng(seed);
  const Bounds& b = env.state_bounds();
  std::vector<StateVector> out;
  out.reserve(std::size_t(n));
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd s(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i)
      s[i] = std::uniform_real_distribution<double>(b.lower[i], b.upper[i])(rng);
    out.push_back({std::move(s)});
  }
  return out;
}

} // namespace iss::envs
