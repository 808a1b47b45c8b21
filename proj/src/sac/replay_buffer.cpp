#include "iss/sac/replay_buffer.hpp"

#include <vector>

#include "iss/errors.hpp"

namespace iss::sac {

ReplayBuffer::ReplayBuffer(int capacity, int obs_dim, int action_dim)
    : capacity_(capacity),
      obs_(obs_dim, capacity),
      actions_(action_dim, capacity),
      next_obs_(obs_dim, capacity),
      rewards_(capacity),
      done_(capacity) {
  if (capacity < 1) throw DomainError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(const Eigen::VectorXd& obs, const Eigen::VectorXd& action, double reward,
                       const Eigen::VectorXd& next_obs, bool done) {
  if (obs.size() != obs_.rows()) throw ShapeError("replay obs dimension", obs_.rows(), obs.size());
  if (next_obs.size() != obs_.rows())
    throw ShapeError("replay next_obs dimension", obs_.rows(), next_obs.size());
  if (action.size() != actions_.rows())
    throw ShapeError("replay action dimension", actions_.rows(), action.size());
  obs_.col(head_) = obs;
  actions_.col(head_) = action;
  rewards_[head_] = reward;
  next_obs_.col(head_) = next_obs;
  done_[head_] = done ? 1.0 : 0.0;
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

ReplayBatch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (batch_size < 1) throw DomainError("batch size must be positive");
  if (size_ < batch_size) throw StateError("replay buffer holds fewer transitions than the batch size");
  std::uniform_int_distribution<Eigen::Index> pick(0, size_ - 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(batch_size));
  for (auto& i : idx) i = pick(rng);
  return gather(idx);
}

ReplayBatch ReplayBuffer::gather(const std::vector<Eigen::Index>& indices) const {
  const auto b = Eigen::Index(indices.size());
  ReplayBatch out{Eigen::MatrixXd(obs_.rows(), b), Eigen::MatrixXd(actions_.rows(), b),
                  Eigen::RowVectorXd(b), Eigen::MatrixXd(obs_.rows(), b), Eigen::RowVectorXd(b)};
  for (Eigen::Index k = 0; k < b; ++k) {
    const Eigen::Index i = indices[std::size_t(k)];
    if (i < 0 || i >= size_) throw ShapeError("replay index bound", std::size_t(size_), std::size_t(i));
    out.obs.col(k) = obs_.col(i);
    out.actions.col(k) = actions_.col(i);
    out.rewards[k] = rewards_[i];
    out.next_obs.col(k) = next_obs_.col(i);
    out.done[k] = done_[i];
  }
  return out;
}

} // namespace iss::sac
