#pragma once

#include <Eigen/Core>

#include "iss/random.hpp"

namespace iss::sac {

/// Column-per-sample minibatch.
struct ReplayBatch {
  Eigen::MatrixXd obs;        // obs_dim x B
  Eigen::MatrixXd actions;    // action_dim x B (environment scale)
  Eigen::RowVectorXd rewards; // 1 x B
  Eigen::MatrixXd next_obs;   // obs_dim x B
  Eigen::RowVectorXd done;    // 1 x B, 1 where bootstrapping stops

  Eigen::Index size() const { return obs.cols(); }
};

/// Fixed-capacity ring of transitions. `done` is false for time-limit truncations.
class ReplayBuffer {
public:
  ReplayBuffer(int capacity, int obs_dim, int action_dim);

  void add(const Eigen::VectorXd& obs, const Eigen::VectorXd& action, double reward,
           const Eigen::VectorXd& next_obs, bool done);

  /// Uniform sampling with replacement.
  ReplayBatch sample(int batch_size, Rng& rng) const;

  /// Builds a batch from explicit indices (oldest-first order is not implied).
  ReplayBatch gather(const std::vector<Eigen::Index>& indices) const;

  int size() const { return size_; }
  int capacity() const { return capacity_; }

private:
  int capacity_;
  int size_ = 0;
  int head_ = 0;
  Eigen::MatrixXd obs_, actions_, next_obs_;
  Eigen::RowVectorXd rewards_, done_;
};

} // namespace iss::sac
