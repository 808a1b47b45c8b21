#include "iss/sac/agent.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "iss/errors.hpp"
#include "iss/nn/checkpoint.hpp"
#include "iss/nn/tape.hpp"

namespace iss::sac {

using Tape = nn::Tape<double>;

void SacConfig::validate() const {
  for (int h : hidden)
    if (h <= 0) throw DomainError("sac.hidden widths must be positive");
  if (!(actor_lr >= 0 && critic_lr >= 0 && alpha_lr >= 0))
    throw DomainError("sac learning rates must be non-negative");
  if (!(gamma > 0 && gamma < 1)) throw DomainError("sac.gamma must lie in (0, 1)");
  if (!(tau > 0 && tau <= 1)) throw DomainError("sac.tau must lie in (0, 1]");
  if (batch_size < 1) throw DomainError("sac.batch_size must be positive");
  if (buffer_capacity < batch_size) throw DomainError("sac.buffer_capacity must be >= batch_size");
  if (warmup_steps < 0) throw DomainError("sac.warmup_steps must be >= 0");
  if (!(initial_alpha > 0)) throw DomainError("sac.initial_alpha must be positive");
}

double squashed_log_density(const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& sigma) {
  double lp = nn::gaussian_log_density<double>(u, mu, sigma);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double t = std::tanh(u[i]);
    lp -= std::log(1.0 - t * t + kSquashEpsilon);
  }
  return lp;
}

SacAgent::SacAgent(int obs_dim, Eigen::VectorXd action_high, SacConfig config, std::uint64_t seed)
    : obs_dim_(obs_dim), action_high_(std::move(action_high)), config_(std::move(config)) {
  config_.validate();
  if (obs_dim_ < 1) throw DomainError("SacAgent: observation dimension must be positive");
  if (action_high_.size() < 1 || (action_high_.array() <= 0).any())
    throw DomainError("SacAgent: action bounds must be symmetric and non-degenerate");
  const int k = int(action_high_.size());
  policy_spec_ = {obs_dim_, config_.hidden, 2 * k, config_.activation};
  critic_spec_ = {obs_dim_ + k, config_.hidden, 1, config_.activation};

  Rng p_rng = make_rng(seed, {1}), q1_rng = make_rng(seed, {2}), q2_rng = make_rng(seed, {3});
  policy_ = nn::init_parameters<double>(policy_spec_, p_rng);
  q1_ = nn::init_parameters<double>(critic_spec_, q1_rng);
  q2_ = nn::init_parameters<double>(critic_spec_, q2_rng);
  q1_target_ = q1_;
  q2_target_ = q2_;
  log_alpha_ = std::log(config_.initial_alpha);
}

double SacAgent::alpha() const { return std::exp(log_alpha_); }

double SacAgent::target_entropy() const {
  return config_.target_entropy.value_or(-double(action_dim()));
}

PolicyDistribution SacAgent::policy_distribution(const Eigen::VectorXd& obs) const {
  if (obs.size() != obs_dim_) throw ShapeError("policy observation dimension", obs_dim_, obs.size());
  const Eigen::VectorXd out = nn::mlp_forward<double>(policy_spec_, policy_, obs);
  const int k = action_dim();
  PolicyDistribution d;
  d.mu = out.head(k);
  d.sigma = out.tail(k).cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax).array().exp().matrix();
  return d;
}

Eigen::VectorXd SacAgent::act(const Eigen::VectorXd& obs, ActMode mode, Rng& rng) const {
  if (!obs.allFinite()) throw DomainError("act: non-finite observation");
  const PolicyDistribution d = policy_distribution(obs);
  if (!d.mu.allFinite() || !d.sigma.allFinite())
    throw NumericError("policy", "non-finite policy output (policy parameters contain NaN/inf: " +
                                     std::to_string(!policy_.allFinite()) + ")");
  Eigen::VectorXd u = d.mu;
  if (mode == ActMode::stochastic) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += d.sigma[i] * n(rng);
  }
  return u.array().tanh().matrix().cwiseProduct(action_high_);
}

double SacAgent::min_q(const Eigen::VectorXd& obs, const Eigen::VectorXd& action) const {
  Eigen::VectorXd x(obs_dim_ + action_dim());
  x << obs, action.cwiseQuotient(action_high_);
  const double a = nn::mlp_forward<double>(critic_spec_, q1_, x)(0, 0);
  const double b = nn::mlp_forward<double>(critic_spec_, q2_, x)(0, 0);
  return std::min(a, b);
}

void SacAgent::polyak(const Params& online, Params& target) const {
  if (config_.tau == 1.0)
    target = online;
  else
    target += config_.tau * (online - target);
}

LossReport SacAgent::update(const ReplayBatch& batch, Rng& rng, UpdateParts parts) {
  const Eigen::Index n = batch.size();
  if (n < 1) throw DomainError("update: empty batch");
  const int k = action_dim();
  const double alpha_now = alpha();
  std::normal_distribution<double> normal(0.0, 1.0);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  LossReport report;

  // Critic regression target, no gradient.
  Eigen::RowVectorXd y;
  {
    const Eigen::MatrixXd out = nn::mlp_forward<double>(policy_spec_, policy_, batch.next_obs);
    const Eigen::MatrixXd log_sigma = out.bottomRows(k).cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax);
    Eigen::MatrixXd z(k, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (int i = 0; i < k; ++i) z(i, j) = normal(rng);
    const Eigen::MatrixXd u = out.topRows(k) + (log_sigma.array().exp() * z.array()).matrix();
    const Eigen::MatrixXd a = u.array().tanh().matrix();
    const Eigen::RowVectorXd logp =
        (-0.5 * z.array().square() - log_sigma.array() - half_log_2pi).matrix().colwise().sum() -
        (1.0 - a.array().square() + kSquashEpsilon).log().matrix().colwise().sum();
    Eigen::MatrixXd x(obs_dim_ + k, n);
    x << batch.next_obs, a;
    const Eigen::RowVectorXd qt = nn::mlp_forward<double>(critic_spec_, q1_target_, x)
                                      .cwiseMin(nn::mlp_forward<double>(critic_spec_, q2_target_, x));
    y = batch.rewards.array() +
        config_.gamma * (1.0 - batch.done.array()) * (qt - alpha_now * logp).array();
    if (!y.allFinite()) throw NumericError("sac_update", "non-finite critic target");
  }

  Eigen::MatrixXd obs_action(obs_dim_ + k, n);
  obs_action << batch.obs, batch.actions.cwiseQuotient(action_high_.replicate(1, n));
  {
    Tape tape;
    const auto p1 = tape.bind(critic_spec_, q1_);
    const auto p2 = tape.bind(critic_spec_, q2_);
    const auto x = tape.constant(obs_action);
    const auto target = tape.constant(y);
    const auto l1 = tape.mean(tape.square(tape.sub(tape.mlp(p1, x), target)));
    const auto l2 = tape.mean(tape.square(tape.sub(tape.mlp(p2, x), target)));
    const auto total = tape.add(l1, l2);
    tape.backward(total);
    report.q1_loss = tape.scalar(l1);
    report.q2_loss = tape.scalar(l2);
    nn::adam_step(q1_, tape.gradient(p1), q1_opt_, config_.critic_lr);
    nn::adam_step(q2_, tape.gradient(p2), q2_opt_, config_.critic_lr);
  }

  if (parts == UpdateParts::all) {
    Eigen::MatrixXd z(k, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (int i = 0; i < k; ++i) z(i, j) = normal(rng);

    Tape tape;
    const auto pp = tape.bind(policy_spec_, policy_);
    const auto p1 = tape.bind(critic_spec_, q1_, false);
    const auto p2 = tape.bind(critic_spec_, q2_, false);
    const auto obs = tape.constant(batch.obs);
    const auto head = tape.mlp(pp, obs);
    const auto mu = tape.rows(head, 0, k);
    const auto sigma = tape.exp(tape.clamp(tape.rows(head, k, k), kLogSigmaMin, kLogSigmaMax));
    const auto u = tape.add(mu, tape.mul(sigma, tape.constant(z)));
    const auto a = tape.tanh(u);
    const auto correction =
        tape.col_sum(tape.log(tape.add_scalar(tape.scale(tape.square(a), -1.0), 1.0 + kSquashEpsilon)));
    const auto logp = tape.sub(tape.gaussian_log_density(u, mu, sigma), correction);
    const auto x = tape.vstack(obs, a);
    const auto q = tape.min(tape.mlp(p1, x), tape.mlp(p2, x));
    const auto loss = tape.mean(tape.sub(tape.scale(logp, alpha_now), q));
    tape.backward(loss);
    report.policy_loss = tape.scalar(loss);
    nn::adam_step(policy_, tape.gradient(pp), policy_opt_, config_.actor_lr);

    if (config_.auto_alpha) {
      // d/d(log_alpha) of -log_alpha * mean(logp + target_entropy)
      const double g = -(tape.value(logp).array() + target_entropy()).mean();
      Params la(1), grad(1);
      la[0] = log_alpha_;
      grad[0] = g;
      nn::adam_step(la, grad, alpha_opt_, config_.alpha_lr);
      log_alpha_ = la[0];
    }
  }

  polyak(q1_, q1_target_);
  polyak(q2_, q2_target_);
  report.alpha = alpha();
  if (!std::isfinite(report.q1_loss) || !std::isfinite(report.q2_loss) ||
      !std::isfinite(report.policy_loss) || !std::isfinite(report.alpha))
    throw NumericError("sac_update", "non-finite loss");
  return report;
}

std::filesystem::path SacAgent::save(const std::filesystem::path& dir, const std::string& stem,
                                     const std::string& extra_json) const {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {
      {"schema", "iss.sac-checkpoint/1"},
      {"obs_dim", obs_dim_},
      {"action_high", std::vector<double>(action_high_.data(), action_high_.data() + action_high_.size())},
      {"hidden", config_.hidden},
      {"activation", nn::to_string(config_.activation)},
      {"log_alpha", log_alpha_},
      {"meta", nlohmann::json::parse(extra_json)},
  };
  const std::pair<const char*, const Params*> nets[] = {
      {"policy", &policy_}, {"q1", &q1_}, {"q2", &q2_}, {"q1_target", &q1_target_}, {"q2_target", &q2_target_}};
  for (const auto& [name, params] : nets) {
    const std::string file = stem + "." + name + ".net";
    nn::save_checkpoint(dir / file, std::string(name) == "policy" ? policy_spec_ : critic_spec_, *params);
    manifest["networks"][name] = file;
  }
  const auto path = dir / (stem + ".ckpt");
  std::ofstream out(path);
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return path;
}

SacAgent SacAgent::load(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open checkpoint manifest " + manifest_path.string());
  const auto m = nlohmann::json::parse(in);
  if (m.value("schema", "") != "iss.sac-checkpoint/1")
    throw std::runtime_error("unsupported checkpoint manifest schema");
  const auto high = m.at("action_high").get<std::vector<double>>();
  SacConfig cfg;
  cfg.hidden = m.at("hidden").get<std::vector<int>>();
  cfg.activation = nn::activation_from_string(m.at("activation").get<std::string>());
  SacAgent agent(m.at("obs_dim").get<int>(),
                 Eigen::Map<const Eigen::VectorXd>(high.data(), Eigen::Index(high.size())), cfg, 0);
  agent.log_alpha_ = m.at("log_alpha").get<double>();

  const auto dir = manifest_path.parent_path();
  auto restore = [&](const char* name, const nn::MlpSpec& spec, Params& dst) {
    const auto ck = nn::load_checkpoint(dir / m.at("networks").at(name).get<std::string>());
    if (!(ck.spec == spec))
      throw ShapeError(std::string("checkpoint network '") + name + "' parameter count",
                       std::size_t(spec.parameter_count()), std::size_t(ck.spec.parameter_count()));
    dst = ck.params;
  };
  restore("policy", agent.policy_spec_, agent.policy_);
  restore("q1", agent.critic_spec_, agent.q1_);
  restore("q2", agent.critic_spec_, agent.q2_);
  restore("q1_target", agent.critic_spec_, agent.q1_target_);
  restore("q2_target", agent.critic_spec_, agent.q2_target_);
  return agent;
}

} // namespace iss::sac
