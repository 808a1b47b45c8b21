#include "iss/metric/condition_number.hpp"

#include <cmath>
#include <sstream>

#include "iss/errors.hpp"

namespace iss::metric {

using Tape = nn::Tape<double>;

std::string to_string(MetricVariant v) {
  return v == MetricVariant::ratio ? "ratio" : "ratio-times-state-norm";
}

MetricVariant metric_variant_from_string(const std::string& name) {
  if (name == "ratio") return MetricVariant::ratio;
  if (name == "ratio-times-state-norm") return MetricVariant::ratio_times_state_norm;
  throw DomainError("unknown metric variant '" + name + "'");
}

std::string to_string(CriticChoice c) { return c == CriticChoice::min_q ? "min" : "q1"; }

CriticChoice critic_choice_from_string(const std::string& name) {
  if (name == "min") return CriticChoice::min_q;
  if (name == "q1") return CriticChoice::q1;
  throw DomainError("unknown metric critic '" + name + "'");
}

void MetricSpec::validate() const {
  if (n_actions < 2) throw DomainError("metric.n_actions must be >= 2");
  if (!(denom_floor > 0)) throw DomainError("metric.denom_floor must be positive");
}

Tape::Var record_value_estimate(Tape& tape, Tape::Params policy, const sac::SacAgent& agent,
                                const Eigen::VectorXd& obs, const MetricSpec& spec, Rng& rng) {
  if (spec.n_actions < 1) throw DomainError("value_estimate: n_actions must be >= 1");
  if (obs.size() != agent.obs_dim()) throw ShapeError("value_estimate observation", agent.obs_dim(), obs.size());
  const int k = agent.action_dim();
  const Eigen::Index n = spec.n_actions;

  Eigen::MatrixXd z(k, n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < n; ++j)
    for (int i = 0; i < k; ++i) z(i, j) = normal(rng);

  const auto o = tape.constant(obs);
  const auto head = tape.mlp(policy, o);
  const auto mu = tape.broadcast_cols(tape.rows(head, 0, k), n);
  const auto sigma = tape.broadcast_cols(
      tape.exp(tape.clamp(tape.rows(head, k, k), sac::kLogSigmaMin, sac::kLogSigmaMax)), n);
  const auto u = tape.add(mu, tape.mul(sigma, tape.constant(z)));
  const auto logp = tape.gaussian_log_density(u, mu, sigma);
  const auto x = tape.vstack(tape.constant(obs.replicate(1, n)), tape.tanh(u));

  const auto p1 = tape.bind(agent.critic_spec(), agent.q1(), false);
  auto q = tape.mlp(p1, x);
  if (spec.critic == CriticChoice::min_q) {
    const auto p2 = tape.bind(agent.critic_spec(), agent.q2(), false);
    q = tape.min(q, tape.mlp(p2, x));
  }
  return tape.self_normalized_mean(logp, q);
}

double value_estimate(const sac::SacAgent& agent, const Eigen::VectorXd& obs, const MetricSpec& spec,
                      Rng& rng) {
  Tape tape;
  const auto p = tape.bind(agent.policy_spec(), agent.policy(), false);
  return tape.scalar(record_value_estimate(tape, p, agent, obs, spec, rng));
}

ValueGradient value_and_policy_gradient(const sac::SacAgent& agent, const Eigen::VectorXd& obs,
                                        const MetricSpec& spec, Rng& rng) {
  Tape tape;
  const auto p = tape.bind(agent.policy_spec(), agent.policy());
  const auto v = record_value_estimate(tape, p, agent, obs, spec, rng);
  tape.backward(v);
  return {tape.scalar(v), tape.gradient(p), tape.last_weights()};
}

double ratio_score(double value, double grad_norm, const envs::StateVector& state, const MetricSpec& spec) {
  double score = grad_norm / std::max(std::abs(value), spec.denom_floor);
  if (spec.variant == MetricVariant::ratio_times_state_norm) score *= state.values.norm();
  return score;
}

namespace {

std::string echo(const envs::StateVector& s) {
  std::ostringstream os;
  os << "state (";
  for (Eigen::Index i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ")";
  return os.str();
}

} // namespace

MetricSample condition_number(const sac::SacAgent& agent, const envs::StateVector& state,
                              const envs::Environment& env, const MetricSpec& spec, Rng& rng) {
  if (state.size() != env.state_dim()) throw ShapeError("condition_number state", env.state_dim(), state.size());
  ValueGradient vg;
  try {
    vg = value_and_policy_gradient(agent, env.observation_of(state.values), spec, rng);
  } catch (const NumericError& e) {
    throw NumericError(e.primitive(), e.detail() + " at " + echo(state));
  }
  const double grad_norm = vg.gradient.norm();
  if (!std::isfinite(vg.value) || !std::isfinite(grad_norm))
    throw NumericError("condition_number", "non-finite value or gradient at " + echo(state));
  return {state, ratio_score(vg.value, grad_norm, state, spec), vg.value, grad_norm};
}

std::vector<MetricSample> score_batch(const sac::SacAgent& agent,
                                      const std::vector<envs::StateVector>& states,
                                      const envs::Environment& env, const MetricSpec& spec) {
  if (states.empty()) throw DomainError("score_batch: empty state list");
  std::vector<MetricSample> out;
  out.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    Rng rng(derive_seed(spec.seed, i));
    try {
      out.push_back(condition_number(agent, states[i], env, spec, rng));
    } catch (const NumericError& e) {
      throw NumericError(e.primitive(), e.detail() + " [state index " + std::to_string(i) + "]");
    }
  }
  return out;
}

} // namespace iss::metric
