#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iss/nn/mlp.hpp"

namespace iss::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("iss-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Central difference of f at x along coordinate i with step h * max(1, |x_i|).
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                 Eigen::Index i, double h = 1e-4) {
  const double step = h * std::max(1.0, std::abs(x[i]));
  const double x0 = x[i];
  x[i] = x0 + step;
  const double up = f(x);
  x[i] = x0 - step;
  const double down = f(x);
  return (up - down) / (2.0 * step);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}

/// Signs of every hidden pre-activation for inputs X (columns are samples).
/// Finite differences are only meaningful when a perturbation leaves this unchanged.
inline std::vector<bool> hidden_pattern(const nn::MlpSpec& spec, const Eigen::VectorXd& params,
                                        const Eigen::MatrixXd& X) {
  std::vector<bool> out;
  Eigen::MatrixXd h = X;
  for (int l = 0; l + 1 < spec.layer_count(); ++l) {
    Eigen::MatrixXd z = nn::layer_weights(spec, params.data(), l) * h;
    z.colwise() += nn::layer_bias(spec, params.data(), l);
    for (Eigen::Index i = 0; i < z.size(); ++i) out.push_back(z.data()[i] > 0);
    nn::apply_activation<double>(spec.activation, z);
    h = z;
  }
  return out;
}

} // namespace iss::testing
