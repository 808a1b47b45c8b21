#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "iss/errors.hpp"

namespace iss::selector {

template <typename Scalar>
struct GpHyper {
  Scalar lengthscale = Scalar(0.3);
  Scalar signal_var = Scalar(1);
  Scalar noise_var = Scalar(1e-4);
  Scalar jitter = Scalar(1e-8);

  void validate() const {
    if (!(lengthscale > 0)) throw DomainError("gp lengthscale must be positive");
    if (!(signal_var > 0)) throw DomainError("gp signal_var must be positive");
    if (!(noise_var >= 0)) throw DomainError("gp noise_var must be non-negative");
    if (!(jitter > 0)) throw DomainError("gp jitter must be positive");
  }
};

/// Isotropic squared-exponential kernel between the rows of `a` and `b`.
template <typename Scalar, typename DerivedA, typename DerivedB>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
rbf_kernel(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
           const GpHyper<Scalar>& h) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k(a.rows(), b.rows());
  const Scalar inv = Scalar(1) / (Scalar(2) * h.lengthscale * h.lengthscale);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      k(i, j) = h.signal_var * std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
  return k;
}

/// Exact GP regression with an RBF kernel and constant prior mean mean(y).
template <typename Scalar>
class GpModel {
public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Prediction {
    Vec mean;
    Vec variance;     // clipped at 0
    Vec raw_variance; // before clipping
  };

  static constexpr Scalar kMaxJitter = Scalar(1e-4);

  /// Rows of `z` are training inputs. Jitter escalates x10 up to 1e-4 if the
  /// regularized kernel is not numerically positive definite.
  static GpModel fit(const Mat& z, const Vec& y, const GpHyper<Scalar>& hyper) {
    hyper.validate();
    if (z.rows() < 1) throw DomainError("gp_fit: need at least one training point");
    if (y.size() != z.rows()) throw ShapeError("gp_fit targets", std::size_t(z.rows()), std::size_t(y.size()));
    if (!z.allFinite() || !y.allFinite()) throw NumericError("gp_fit", "non-finite training data");

    GpModel m;
    m.hyper_ = hyper;
    m.z_ = z;
    m.y_mean_ = y.mean();
    m.y_ = y.array() - m.y_mean_;
    const Mat k = rbf_kernel(z, z, hyper);
    const auto n = z.rows();
    for (Scalar jitter = hyper.jitter;; jitter *= Scalar(10)) {
      Eigen::LLT<Mat> llt(k + (hyper.noise_var + jitter) * Mat::Identity(n, n));
      if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0) {
        m.chol_ = llt.matrixL();
        m.jitter_used_ = jitter;
        break;
      }
      if (jitter * Scalar(10) > kMaxJitter * Scalar(1.0000001))
        throw NumericError("gp_fit", "kernel matrix not positive definite after jitter escalation");
    }
    m.alpha_ = m.chol_.transpose().template triangularView<Eigen::Upper>().solve(
        m.chol_.template triangularView<Eigen::Lower>().solve(m.y_));
    return m;
  }

  /// Posterior mean and latent-function variance at the rows of `z_test`.
  Prediction predict(const Mat& z_test) const {
    if (z_test.cols() != z_.cols())
      throw ShapeError("gp_predict input columns", std::size_t(z_.cols()), std::size_t(z_test.cols()));
    const Mat ks = rbf_kernel(z_test, z_, hyper_); // m x n
    Prediction p;
    p.mean = (ks * alpha_).array() + y_mean_;
    const Mat v = chol_.template triangularView<Eigen::Lower>().solve(ks.transpose()); // n x m
    p.raw_variance = (hyper_.signal_var - v.colwise().squaredNorm().array()).matrix().transpose();
    p.variance = p.raw_variance.cwiseMax(Scalar(0));
    return p;
  }

  const Mat& inputs() const { return z_; }
  const Vec& centered_targets() const { return y_; }
  Scalar y_mean() const { return y_mean_; }
  const Mat& cholesky() const { return chol_; }
  const Vec& weights() const { return alpha_; }
  Scalar jitter_used() const { return jitter_used_; }
  const GpHyper<Scalar>& hyper() const { return hyper_; }

  /// K(Z, Z) + (noise_var + jitter) I as factorized.
  Mat regularized_kernel() const {
    return rbf_kernel(z_, z_, hyper_) +
           (hyper_.noise_var + jitter_used_) * Mat::Identity(z_.rows(), z_.rows());
  }

private:
  GpHyper<Scalar> hyper_;
  Mat z_;
  Vec y_;
  Scalar y_mean_ = 0;
  Mat chol_;
  Vec alpha_;
  Scalar jitter_used_ = 0;
};

} // namespace iss::selector
