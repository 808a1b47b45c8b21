#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iss/envs/environment.hpp"
#include "iss/random.hpp"
#include "iss/selector/gp.hpp"

namespace iss::selector {

enum class Branch { variance, mean };
std::string to_string(Branch b);

struct SelectorConfig {
  int pool_size = 64;
  double variance_threshold = 0.25; // on standardized-target scale; +inf forces the mean branch
  double shift_sigma = 0.1;
  double resample_fraction = 0.2;
  GpHyper<double> gp{};

  void validate() const;
};

/// Index chosen by the two-branch rule: argmax variance if max variance > threshold,
/// else argmax mean. Ties go to the lowest index.
struct BranchChoice {
  Eigen::Index index = 0;
  Branch branch = Branch::mean;
};
BranchChoice choose_index(const Eigen::VectorXd& means, const Eigen::VectorXd& variances, double threshold);

struct Selection {
  envs::StateVector state;
  Branch branch = Branch::mean;
  Eigen::Index index = 0;
  double max_variance = 0.0;
};

/// One selection epoch's diagnostics.
struct EpochReport {
  int epoch = 0;
  Selection selection;
  double score_min = 0.0, score_mean = 0.0, score_max = 0.0;
  bool standardized = false;
  double metric_ms = 0.0, fit_ms = 0.0, predict_ms = 0.0;
};

/// Scores a list of states. Supplied by the caller.
using ScoreFn = std::function<Eigen::VectorXd(const std::vector<envs::StateVector>&, int epoch)>;

/// Candidate pool over the normalized state box [-1, 1]^d plus the
/// fit / shift / select cycle that picks each episode's initial state.
class StateSelector {
public:
  /// Initial pool: pool_size states uniform over `bounds`.
  StateSelector(envs::Bounds bounds, SelectorConfig config, std::uint64_t seed);

  Eigen::MatrixXd normalize(const std::vector<envs::StateVector>& states) const;
  std::vector<envs::StateVector> unnormalize(const Eigen::MatrixXd& z) const;

  /// Gaussian perturbation of the pool, clipped to [-1, 1], with a
  /// resample_fraction of rows redrawn uniformly.
  Eigen::MatrixXd shift_candidates();

  /// Predicts on z_test with `model` and applies the two-branch rule.
  Selection select_initial_state(const GpModel<double>& model, const Eigen::MatrixXd& z_test) const;

  /// Replaces the candidate pool.
  void advance(Eigen::MatrixXd z_test);

  /// Full epoch: shift, score the current pool, standardize, fit, select, advance.
  EpochReport run_epoch(const ScoreFn& score);

  const Eigen::MatrixXd& pool() const { return pool_; }
  const envs::Bounds& bounds() const { return bounds_; }
  const SelectorConfig& config() const { return config_; }
  int epochs_run() const { return epoch_; }

private:
  envs::Bounds bounds_;
  SelectorConfig config_;
  Rng rng_;
  Eigen::MatrixXd pool_; // rows are normalized states
  int epoch_ = 0;
};

} // namespace iss::selector
