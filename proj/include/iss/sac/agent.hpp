#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iss/nn/adam.hpp"
#include "iss/nn/mlp.hpp"
#include "iss/random.hpp"
#include "iss/sac/replay_buffer.hpp"

namespace iss::sac {

struct SacConfig {
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::relu;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 256;
  int buffer_capacity = 100000;
  int warmup_steps = 1000;
  bool auto_alpha = true;
  double initial_alpha = 1.0;
  std::optional<double> target_entropy; // defaults to -(action dim)

  void validate() const;
};

struct LossReport {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double policy_loss = 0.0;
  double alpha = 0.0;
};

enum class ActMode { stochastic, deterministic };

/// Pre-squash Gaussian parameters.
struct PolicyDistribution {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
};

enum class UpdateParts { all, critics_only };

inline constexpr double kLogSigmaMin = -20.0;
inline constexpr double kLogSigmaMax = 2.0;
inline constexpr double kSquashEpsilon = 1e-6;

/// Log-density of a = tanh(u) with u ~ N(mu, sigma), in normalized action
/// space: log N(u) - sum_i log(1 - tanh(u_i)^2 + 1e-6).
double squashed_log_density(const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& sigma);

/// Soft actor-critic with a tanh-squashed Gaussian policy and twin critics.
/// The policy head emits (mu, log_sigma) per action dimension; critics see
/// (observation, action / action_high).
class SacAgent {
public:
  using Params = nn::ParameterVector<double>;

  SacAgent(int obs_dim, Eigen::VectorXd action_high, SacConfig config, std::uint64_t seed);

  Eigen::VectorXd act(const Eigen::VectorXd& obs, ActMode mode, Rng& rng) const;
  PolicyDistribution policy_distribution(const Eigen::VectorXd& obs) const;
  LossReport update(const ReplayBatch& batch, Rng& rng, UpdateParts parts = UpdateParts::all);

  /// Online critic value min(Q1, Q2) for one (observation, environment action) pair.
  double min_q(const Eigen::VectorXd& obs, const Eigen::VectorXd& action) const;

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return int(action_high_.size()); }
  const Eigen::VectorXd& action_high() const { return action_high_; }
  const SacConfig& config() const { return config_; }
  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  double target_entropy() const;

  const nn::MlpSpec& policy_spec() const { return policy_spec_; }
  const nn::MlpSpec& critic_spec() const { return critic_spec_; }
  const Params& policy() const { return policy_; }
  const Params& q1() const { return q1_; }
  const Params& q2() const { return q2_; }
  const Params& q1_target() const { return q1_target_; }
  const Params& q2_target() const { return q2_target_; }

  // Direct parameter access for tests and checkpoint restore.
  Params& mutable_policy() { return policy_; }
  Params& mutable_q1() { return q1_; }
  Params& mutable_q2() { return q2_; }
  Params& mutable_q1_target() { return q1_target_; }
  Params& mutable_q2_target() { return q2_target_; }
  void set_log_alpha(double v) { log_alpha_ = v; }
  SacConfig& mutable_config() { return config_; }

  /// Writes one network file per parameter vector plus `<stem>.ckpt` manifest
  /// in `dir`; returns the manifest path.
  std::filesystem::path save(const std::filesystem::path& dir, const std::string& stem,
                             const std::string& extra_json = "{}") const;
  static SacAgent load(const std::filesystem::path& manifest);

private:
  void polyak(const Params& online, Params& target) const;

  int obs_dim_;
  Eigen::VectorXd action_high_;
  SacConfig config_;
  nn::MlpSpec policy_spec_, critic_spec_;
  Params policy_, q1_, q2_, q1_target_, q2_target_;
  nn::AdamState<double> policy_opt_, q1_opt_, q2_opt_, alpha_opt_;
  double log_alpha_;
};

} // namespace iss::sac
