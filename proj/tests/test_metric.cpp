#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "iss/envs/environment.hpp"
#include "iss/errors.hpp"
#include "iss/metric/condition_number.hpp"

using namespace iss;
using namespace iss::metric;
using iss::testing::central_difference;
using iss::testing::relative_error;

namespace {

sac::SacAgent make_agent(nn::Activation act, std::uint64_t seed) {
  sac::SacConfig cfg;
  cfg.hidden = {16, 16};
  cfg.activation = act;
  sac::SacAgent agent(3, Eigen::VectorXd::Constant(1, 2.0), cfg, seed);
  // Spread the critics so Q varies visibly with the action.
  std::mt19937_64 rng(seed + 100);
  agent.mutable_q1() += 0.3 * iss::testing::random_matrix(agent.q1().size(), 1, rng);
  agent.mutable_q2() += 0.3 * iss::testing::random_matrix(agent.q2().size(), 1, rng);
  agent.mutable_policy() += 0.2 * iss::testing::random_matrix(agent.policy().size(), 1, rng);
  return agent;
}

void scale_output_layer(const nn::MlpSpec& spec, Eigen::VectorXd& params, double c) {
  const int last = spec.layer_count() - 1;
  nn::layer_weights(spec, params.data(), last) *= c;
  nn::layer_bias(spec, params.data(), last) *= c;
}

void constant_output_layer(const nn::MlpSpec& spec, Eigen::VectorXd& params, double value) {
  const int last = spec.layer_count() - 1;
  nn::layer_weights(spec, params.data(), last).setZero();
  nn::layer_bias(spec, params.data(), last).setConstant(value);
}

} // namespace

TEST_CASE("constant critic gives a score of exactly zero") {
  envs::Pendulum env;
  auto agent = make_agent(nn::Activation::relu, 1);
  constant_output_layer(agent.critic_spec(), agent.mutable_q1(), -3.7);
  constant_output_layer(agent.critic_spec(), agent.mutable_q2(), -3.7);
  MetricSpec spec;
  for (const auto& s : envs::sample_states(env, 20, 4)) {
    Rng rng(9);
    const auto m = condition_number(agent, s, env, spec, rng);
    CHECK(m.score == 0.0);
    CHECK(m.grad_norm == 0.0);
    CHECK(m.value_estimate == doctest::Approx(-3.7).epsilon(1e-15));
  }
}

TEST_CASE("score is invariant to scaling the critics") {
  envs::Pendulum env;
  const auto base = make_agent(nn::Activation::relu, 2);
  MetricSpec spec;
  const auto states = envs::sample_states(env, 10, 5);
  for (double c : {0.5, 3.0, 100.0}) {
    auto scaled = base;
    scale_output_layer(scaled.critic_spec(), scaled.mutable_q1(), c);
    scale_output_layer(scaled.critic_spec(), scaled.mutable_q2(), c);
    for (const auto& s : states) {
      Rng r1(3), r2(3);
      const auto a = condition_number(base, s, env, spec, r1);
      const auto b = condition_number(scaled, s, env, spec, r2);
      CHECK(b.value_estimate == doctest::Approx(c * a.value_estimate).epsilon(1e-12));
      CHECK(relative_error(a.score, b.score) < 1e-6);
    }
  }
}

TEST_CASE("analytic policy gradient of the value estimate matches finite differences") {
  envs::Pendulum env;
  for (const auto act : {nn::Activation::tanh, nn::Activation::relu}) {
    const auto agent = make_agent(act, 3);
    MetricSpec spec;
    spec.n_actions = 16;
    for (const auto& s : envs::sample_states(env, 3, 6)) {
      const Eigen::VectorXd obs = env.observation_of(s.values);
      Rng rng(11);
      const auto vg = value_and_policy_gradient(agent, obs, spec, rng);
      auto f = [&](const Eigen::VectorXd& p) {
        auto copy = agent;
        copy.mutable_policy() = p;
        Rng same(11);
        return value_estimate(copy, obs, spec, same);
      };
      Eigen::VectorXd fd(vg.gradient.size());
      for (Eigen::Index i = 0; i < fd.size(); ++i) fd[i] = central_difference(f, agent.policy(), i);
      const double score_analytic = vg.gradient.norm() / std::abs(vg.value);
      const double score_fd = fd.norm() / std::abs(vg.value);
      INFO("activation " << nn::to_string(act));
      CHECK(relative_error(score_analytic, score_fd) < 1e-4);
      if (act == nn::Activation::tanh) CHECK((vg.gradient - fd).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("value estimate is a normalized weighting of critic values") {
  envs::Pendulum env;
  const auto agent = make_agent(nn::Activation::relu, 4);
  const Eigen::VectorXd obs = env.observation_of(Eigen::Vector2d(0.4, -2.0));
  MetricSpec spec;
  Rng rng(5);
  const auto vg = value_and_policy_gradient(agent, obs, spec, rng);
  CHECK(vg.weights.size() == spec.n_actions);
  CHECK(vg.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((vg.weights.array() >= 0).all());

  // A single sample: V is min-Q at that squashed action.
  spec.n_actions = 1;
  Rng a(8), b(8);
  const double v = value_estimate(agent, obs, spec, a);
  const auto d = agent.policy_distribution(obs);
  const double z = std::normal_distribution<double>(0.0, 1.0)(b);
  const Eigen::VectorXd action = (d.mu + d.sigma * z).array().tanh().matrix() * 2.0;
  CHECK(v == doctest::Approx(agent.min_q(obs, action)).epsilon(1e-13));
}

TEST_CASE("critic choice and variants") {
  envs::Pendulum env;
  auto agent = make_agent(nn::Activation::relu, 5);
  constant_output_layer(agent.critic_spec(), agent.mutable_q2(), 1e6);
  const envs::StateVector s{Eigen::Vector2d(1.0, 3.0)};
  MetricSpec min_spec, q1_spec;
  q1_spec.critic = CriticChoice::q1;
  Rng r1(2), r2(2), r3(2);
  const auto a = condition_number(agent, s, env, min_spec, r1);
  const auto b = condition_number(agent, s, env, q1_spec, r2);
  CHECK(a.value_estimate == b.value_estimate); // q2 never wins the min

  MetricSpec scaled = min_spec;
  scaled.variant = MetricVariant::ratio_times_state_norm;
  const auto c = condition_number(agent, s, env, scaled, r3);
  CHECK(c.score == doctest::Approx(a.score * s.values.norm()).epsilon(1e-14));
  CHECK(ratio_score(0.0, 2.0, s, min_spec) == 2.0 / 1e-6);

  CHECK(metric_variant_from_string("ratio-times-state-norm") == MetricVariant::ratio_times_state_norm);
  CHECK_THROWS_AS(metric_variant_from_string("eq4"), DomainError);
  CHECK_THROWS_AS((MetricSpec{1}.validate()), DomainError);
}

TEST_CASE("score_batch equals sequential per-state evaluation with derived seeds") {
  envs::MountainCarContinuous env;
  sac::SacConfig cfg;
  cfg.hidden = {8};
  const sac::SacAgent agent(2, Eigen::VectorXd::Ones(1), cfg, 6);
  MetricSpec spec;
  spec.seed = 1234;
  const auto states = envs::sample_states(env, 12, 7);
  const auto batch = score_batch(agent, states, env, spec);
  REQUIRE(batch.size() == states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    Rng rng(derive_seed(spec.seed, i));
    const auto one = condition_number(agent, states[i], env, spec, rng);
    CHECK(batch[i].score == one.score);
    CHECK(batch[i].state == states[i]);
  }
  CHECK(score_batch(agent, states, env, spec)[5].score == batch[5].score);
}

TEST_CASE("numeric failures name the state") {
  envs::Pendulum env;
  auto agent = make_agent(nn::Activation::relu, 7);
  agent.mutable_policy().setConstant(std::nan(""));
  const auto states = envs::sample_states(env, 3, 1);
  try {
    score_batch(agent, states, env, MetricSpec{});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("state (") != std::string::npos);
    CHECK(what.find("state index 0") != std::string::npos);
  }
  Rng rng(1);
  CHECK_THROWS_AS(condition_number(agent, {Eigen::Vector3d::Zero()}, env, MetricSpec{}, rng), ShapeError);
}
