#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iss/envs/environment.hpp"
#include "iss/nn/tape.hpp"
#include "iss/random.hpp"
#include "iss/sac/agent.hpp"

namespace iss::metric {

/// `ratio`: |grad V| / |V|. `ratio_times_state_norm` additionally multiplies by |s|.
enum class MetricVariant { ratio, ratio_times_state_norm };
/// Which critic supplies Q inside the value estimate.
enum class CriticChoice { min_q, q1 };

std::string to_string(MetricVariant v);
MetricVariant metric_variant_from_string(const std::string& name);
std::string to_string(CriticChoice c);
CriticChoice critic_choice_from_string(const std::string& name);

struct MetricSpec {
  int n_actions = 32;
  MetricVariant variant = MetricVariant::ratio;
  CriticChoice critic = CriticChoice::min_q;
  double denom_floor = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricSample {
  envs::StateVector state;
  double score = 0.0;
  double value_estimate = 0.0;
  double grad_norm = 0.0;
};

struct ValueGradient {
  double value = 0.0;
  Eigen::VectorXd gradient; // d value / d policy parameters
  Eigen::VectorXd weights;  // normalized sampled-action weights
};

/// Records the sampled-action value estimate of `obs` on `tape`:
/// u_i = mu + sigma * z_i, w = softmax(log N(u_i; mu, sigma)),
/// V = sum_i w_i * Q(obs, tanh(u_i)). Critic parameters enter as constants.
nn::Tape<double>::Var record_value_estimate(nn::Tape<double>& tape, nn::Tape<double>::Params policy,
                                            const sac::SacAgent& agent, const Eigen::VectorXd& obs,
                                            const MetricSpec& spec, Rng& rng);

double value_estimate(const sac::SacAgent& agent, const Eigen::VectorXd& obs, const MetricSpec& spec,
                      Rng& rng);

/// Value estimate and its gradient with respect to the policy parameters.
ValueGradient value_and_policy_gradient(const sac::SacAgent& agent, const Eigen::VectorXd& obs,
                                        const MetricSpec& spec, Rng& rng);

/// Relative condition number of the value estimate at `state`.
MetricSample condition_number(const sac::SacAgent& agent, const envs::StateVector& state,
                              const envs::Environment& env, const MetricSpec& spec, Rng& rng);

/// Order-preserving elementwise condition_number; state i uses sub-seed (spec.seed, i).
std::vector<MetricSample> score_batch(const sac::SacAgent& agent,
                                      const std::vector<envs::StateVector>& states,
                                      const envs::Environment& env, const MetricSpec& spec);

/// Score from an already computed value and gradient norm.
double ratio_score(double value, double grad_norm, const envs::StateVector& state, const MetricSpec& spec);

} // namespace iss::metric
