#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iss/errors.hpp"

namespace iss::nn {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Flat parameter store. Layout is layer-major; within a layer the
/// (fan_out x fan_in) weight matrix comes first in row-major order, then the bias.
template <typename Scalar>
using ParameterVector = Vector<Scalar>;

/// Dense feed-forward network shape. The activation applies to hidden layers;
/// the output layer is affine.
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;
  Activation activation = Activation::relu;

  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int fan_in(int layer) const { return layer == 0 ? input_dim : hidden[layer - 1]; }
  int fan_out(int layer) const {
    return layer == layer_count() - 1 ? output_dim : hidden[layer];
  }

  std::ptrdiff_t weight_offset(int layer) const {
    std::ptrdiff_t off = 0;
    for (int l = 0; l < layer; ++l) off += std::ptrdiff_t(fan_in(l) + 1) * fan_out(l);
    return off;
  }
  std::ptrdiff_t bias_offset(int layer) const {
    return weight_offset(layer) + std::ptrdiff_t(fan_in(layer)) * fan_out(layer);
  }
  std::ptrdiff_t parameter_count() const { return weight_offset(layer_count()); }

  /// Throws DomainError when any width is non-positive.
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

template <typename Scalar>
Eigen::Map<const RowMajorMatrix<Scalar>> layer_weights(const MlpSpec& spec, const Scalar* params,
                                                       int layer) {
  return {params + spec.weight_offset(layer), spec.fan_out(layer), spec.fan_in(layer)};
}

template <typename Scalar>
Eigen::Map<const Vector<Scalar>> layer_bias(const MlpSpec& spec, const Scalar* params, int layer) {
  return {params + spec.bias_offset(layer), spec.fan_out(layer)};
}

template <typename Scalar>
Eigen::Map<RowMajorMatrix<Scalar>> layer_weights(const MlpSpec& spec, Scalar* params, int layer) {
  return {params + spec.weight_offset(layer), spec.fan_out(layer), spec.fan_in(layer)};
}

template <typename Scalar>
Eigen::Map<Vector<Scalar>> layer_bias(const MlpSpec& spec, Scalar* params, int layer) {
  return {params + spec.bias_offset(layer), spec.fan_out(layer)};
}

inline void check_parameters(const MlpSpec& spec, std::ptrdiff_t size) {
  if (size != spec.parameter_count())
    throw ShapeError("parameter vector length", std::size_t(spec.parameter_count()),
                     std::size_t(size));
}

/// Glorot-uniform weights, zero biases.
template <typename Scalar, typename Rng>
ParameterVector<Scalar> init_parameters(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParameterVector<Scalar> params = ParameterVector<Scalar>::Zero(spec.parameter_count());
  for (int l = 0; l < spec.layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / double(spec.fan_in(l) + spec.fan_out(l)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto w = layer_weights(spec, params.data(), l);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = Scalar(dist(rng));
  }
  return params;
}

template <typename Scalar, typename Derived>
void apply_activation(Activation a, Eigen::MatrixBase<Derived>& x) {
  if (a == Activation::relu)
    x = x.cwiseMax(Scalar(0));
  else
    x = x.array().tanh().matrix();
}

/// Batched forward pass; columns of `x` are samples.
template <typename Scalar, typename Derived>
Matrix<Scalar> mlp_forward(const MlpSpec& spec, const ParameterVector<Scalar>& params,
                           const Eigen::MatrixBase<Derived>& x) {
  check_parameters(spec, params.size());
  if (x.rows() != spec.input_dim)
    throw ShapeError("mlp input dimension", std::size_t(spec.input_dim), std::size_t(x.rows()));
  Matrix<Scalar> h = x;
  for (int l = 0; l < spec.layer_count(); ++l) {
    Matrix<Scalar> next = layer_weights(spec, params.data(), l) * h;
    next.colwise() += layer_bias(spec, params.data(), l);
    if (l + 1 < spec.layer_count()) apply_activation<Scalar>(spec.activation, next);
    h = std::move(next);
  }
  return h;
}

} // namespace iss::nn
