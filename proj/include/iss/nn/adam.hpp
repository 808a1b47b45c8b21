#pragma once

#include <cmath>

#include <Eigen/Core>

#include "iss/errors.hpp"
#include "iss/nn/mlp.hpp"

namespace iss::nn {

template <typename Scalar>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  long step = 0;

  static AdamState zeros(Eigen::Index n) { return {Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n), 0}; }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam step in place. On a non-finite gradient nothing is modified.
template <typename Scalar>
void adam_step(ParameterVector<Scalar>& params, const Vector<Scalar>& grad, AdamState<Scalar>& state,
               Scalar lr, const AdamConfig& cfg = {}) {
  if (grad.size() != params.size()) throw ShapeError("adam gradient length", params.size(), grad.size());
  if (!grad.allFinite()) throw NumericError("adam_step", "non-finite gradient entry");
  if (!(lr >= Scalar(0))) throw DomainError("adam_step: learning rate must be non-negative");
  if (state.m.size() != params.size()) state = AdamState<Scalar>::zeros(params.size());

  const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
  state.step += 1;
  state.m = b1 * state.m + (Scalar(1) - b1) * grad;
  state.v = b2 * state.v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + Scalar(cfg.epsilon));
}

} // namespace iss::nn
