#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "iss/errors.hpp"
#include "iss/nn/mlp.hpp"

namespace iss::nn {

/// Self-normalized weights exp(logw_i) / sum_j exp(logw_j), computed with a max shift.
/// Throws NumericError when every weight underflows (or the input is not finite).
template <typename Scalar>
Vector<Scalar> normalized_weights(const Eigen::Ref<const Vector<Scalar>>& logw) {
  const Scalar shift = logw.maxCoeff();
  if (!std::isfinite(double(shift)))
    throw NumericError("self_normalized_mean",
                       "all sampled-action weights are zero or non-finite; increase n_actions "
                       "or narrow the log-sigma clamp");
  Vector<Scalar> w = (logw.array() - shift).exp().matrix();
  const Scalar total = w.sum();
  if (!(total > Scalar(0)) || !std::isfinite(double(total)))
    throw NumericError("self_normalized_mean",
                       "sampled-action weights underflowed to zero; increase n_actions or "
                       "narrow the log-sigma clamp");
  return w / total;
}

/// log N(a; mu, diag(sigma^2)) summed over the vector.
template <typename Scalar>
Scalar gaussian_log_density(const Vector<Scalar>& a, const Vector<Scalar>& mu,
                            const Vector<Scalar>& sigma) {
  if (a.size() != mu.size()) throw ShapeError("gaussian_log_density mu", a.size(), mu.size());
  if (a.size() != sigma.size())
    throw ShapeError("gaussian_log_density sigma", a.size(), sigma.size());
  if ((sigma.array() <= Scalar(0)).any())
    throw DomainError("gaussian_log_density: sigma must be positive");
  const Scalar half_log_2pi = Scalar(0.5 * std::log(2.0 * std::numbers::pi));
  Scalar total = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Scalar z = (a[i] - mu[i]) / sigma[i];
    total += Scalar(-0.5) * z * z - std::log(sigma[i]) - half_log_2pi;
  }
  return total;
}

/// Reverse-mode recorder over a fixed set of matrix primitives. Values are
/// (rows x batch) matrices; a scalar is 1x1. Bound parameter vectors must
/// outlive the tape.
template <typename Scalar>
class Tape {
public:
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;

  struct Var {
    int index = -1;
  };
  struct Params {
    int index = -1;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Params bind(const MlpSpec& spec, const ParameterVector<Scalar>& values,
              bool requires_grad = true) {
    check_parameters(spec, values.size());
    Bound b{spec, &values, requires_grad, {}};
    if (requires_grad) b.grad = Vec::Zero(values.size());
    bound_.push_back(std::move(b));
    return {int(bound_.size()) - 1};
  }

  Var constant(Mat value) { return push(std::move(value), false, {}); }
  Var detach(Var v) { return constant(value(v)); }

  const Mat& value(Var v) const { return nodes_[v.index].value; }
  Scalar scalar(Var v) const { return nodes_[v.index].value(0, 0); }
  const Mat& adjoint(Var v) const { return nodes_[v.index].adj; }
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }

  /// d(output)/d(params) accumulated by the last backward(); zeros if unused.
  const Vec& gradient(Params p) const {
    if (!bound_[p.index].requires_grad)
      throw StateError("Tape::gradient: parameters were bound without requires_grad");
    return bound_[p.index].grad;
  }

  // W x + b for one layer of a bound network.
  Var affine(Params p, int layer, Var x) {
    const Bound& b = bound_[p.index];
    const auto w = layer_weights(b.spec, b.values->data(), layer);
    if (value(x).rows() != w.cols())
      throw ShapeError("affine input rows", std::size_t(w.cols()), std::size_t(value(x).rows()));
    Mat out = w * value(x);
    out.colwise() += layer_bias(b.spec, b.values->data(), layer);
    check(out, "affine");
    const bool rg = b.requires_grad || requires_grad(x);
    return push(std::move(out), rg, [this, p, layer, x](int self) {
      Bound& bb = bound_[p.index];
      const Mat& g = nodes_[self].adj;
      if (bb.requires_grad) {
        Eigen::Map<RowMajorMatrix<Scalar>> gw(bb.grad.data() + bb.spec.weight_offset(layer),
                                               bb.spec.fan_out(layer), bb.spec.fan_in(layer));
        gw.noalias() += g * nodes_[x.index].value.transpose();
        Eigen::Map<Vec>(bb.grad.data() + bb.spec.bias_offset(layer), bb.spec.fan_out(layer)) +=
            g.rowwise().sum();
      }
      if (nodes_[x.index].requires_grad)
        nodes_[x.index].adj.noalias() +=
            layer_weights(bb.spec, bb.values->data(), layer).transpose() * g;
    });
  }

  /// Full network forward: affine layers with the spec's hidden activation.
  Var mlp(Params p, Var x) {
    const MlpSpec& spec = bound_[p.index].spec;
    Var h = x;
    for (int l = 0; l < spec.layer_count(); ++l) {
      h = affine(p, l, h);
      if (l + 1 < spec.layer_count()) h = spec.activation == Activation::relu ? relu(h) : tanh(h);
    }
    return h;
  }

  Var relu(Var x) {
    Mat out = value(x).cwiseMax(Scalar(0));
    return unary(x, std::move(out), "relu", [](const Mat& in, const Mat&, const Mat& g) -> Mat {
      return (in.array() > Scalar(0)).select(g, Mat::Zero(g.rows(), g.cols()));
    });
  }

  Var tanh(Var x) {
    Mat out = value(x).array().tanh().matrix();
    return unary(x, std::move(out), "tanh", [](const Mat&, const Mat& y, const Mat& g) -> Mat {
      return (g.array() * (Scalar(1) - y.array().square())).matrix();
    });
  }

  Var exp(Var x) {
    Mat out = value(x).array().exp().matrix();
    return unary(x, std::move(out), "exp", [](const Mat&, const Mat& y, const Mat& g) -> Mat {
      return (g.array() * y.array()).matrix();
    });
  }

  Var log(Var x) {
    if ((value(x).array() <= Scalar(0)).any()) throw NumericError("log", "non-positive argument");
    Mat out = value(x).array().log().matrix();
    return unary(x, std::move(out), "log", [](const Mat& in, const Mat&, const Mat& g) -> Mat {
      return (g.array() / in.array()).matrix();
    });
  }

  Var square(Var x) {
    Mat out = value(x).array().square().matrix();
    return unary(x, std::move(out), "square", [](const Mat& in, const Mat&, const Mat& g) -> Mat {
      return (Scalar(2) * g.array() * in.array()).matrix();
    });
  }

  Var scale(Var x, Scalar c) {
    Mat out = c * value(x);
    return unary(x, std::move(out), "scale",
                 [c](const Mat&, const Mat&, const Mat& g) -> Mat { return c * g; });
  }

  Var add_scalar(Var x, Scalar c) {
    Mat out = (value(x).array() + c).matrix();
    return unary(x, std::move(out), "add_scalar",
                 [](const Mat&, const Mat&, const Mat& g) -> Mat { return g; });
  }

  /// Gradient passes only where lo <= x <= hi.
  Var clamp(Var x, Scalar lo, Scalar hi) {
    Mat out = value(x).cwiseMax(lo).cwiseMin(hi);
    return unary(x, std::move(out), "clamp",
                 [lo, hi](const Mat& in, const Mat&, const Mat& g) -> Mat {
                   return (in.array() >= lo && in.array() <= hi)
                       .select(g, Mat::Zero(g.rows(), g.cols()));
                 });
  }

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    return binary(a, b, value(a) + value(b), "add",
                  [](const Mat&, const Mat&, const Mat& g) { return std::pair<Mat, Mat>{g, g}; });
  }

  Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    return binary(a, b, value(a) - value(b), "sub",
                  [](const Mat&, const Mat&, const Mat& g) { return std::pair<Mat, Mat>{g, -g}; });
  }

  Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    Mat out = value(a).cwiseProduct(value(b));
    return binary(a, b, std::move(out), "mul", [](const Mat& va, const Mat& vb, const Mat& g) {
      return std::pair<Mat, Mat>{g.cwiseProduct(vb), g.cwiseProduct(va)};
    });
  }

  /// Elementwise minimum; ties route the gradient to `a`.
  Var min(Var a, Var b) {
    same_shape(a, b, "min");
    Mat out = value(a).cwiseMin(value(b));
    return binary(a, b, std::move(out), "min", [](const Mat& va, const Mat& vb, const Mat& g) {
      const Mat zero = Mat::Zero(g.rows(), g.cols());
      return std::pair<Mat, Mat>{(va.array() <= vb.array()).select(g, zero),
                                 (va.array() <= vb.array()).select(zero, g)};
    });
  }

  /// Repeat a single column n times.
  Var broadcast_cols(Var x, Eigen::Index n) {
    if (value(x).cols() != 1) throw ShapeError("broadcast_cols input columns", 1, value(x).cols());
    Mat out = value(x).replicate(1, n);
    return unary(x, std::move(out), "broadcast_cols",
                 [](const Mat&, const Mat&, const Mat& g) -> Mat { return g.rowwise().sum(); });
  }

  Var rows(Var x, Eigen::Index start, Eigen::Index count) {
    const Eigen::Index total = value(x).rows();
    if (start < 0 || count < 0 || start + count > total)
      throw ShapeError("rows slice end", std::size_t(total), std::size_t(start + count));
    Mat out = value(x).middleRows(start, count);
    return unary(x, std::move(out), "rows",
                 [start, count, total](const Mat& in, const Mat&, const Mat& g) -> Mat {
                   Mat full = Mat::Zero(total, in.cols());
                   full.middleRows(start, count) = g;
                   return full;
                 });
  }

  Var vstack(Var top, Var bottom) {
    if (value(top).cols() != value(bottom).cols())
      throw ShapeError("vstack columns", value(top).cols(), value(bottom).cols());
    const Eigen::Index split = value(top).rows();
    Mat out(split + value(bottom).rows(), value(top).cols());
    out << value(top), value(bottom);
    return binary(top, bottom, std::move(out), "vstack",
                  [split](const Mat&, const Mat& vb, const Mat& g) {
                    return std::pair<Mat, Mat>{g.topRows(split), g.bottomRows(vb.rows())};
                  });
  }

  Var sum(Var x) {
    Mat out(1, 1);
    out(0, 0) = value(x).sum();
    return unary(x, std::move(out), "sum", [](const Mat& in, const Mat&, const Mat& g) -> Mat {
      return Mat::Constant(in.rows(), in.cols(), g(0, 0));
    });
  }

  Var mean(Var x) { return scale(sum(x), Scalar(1) / Scalar(value(x).size())); }

  /// Per-column sum, (k x n) -> (1 x n).
  Var col_sum(Var x) {
    Mat out = value(x).colwise().sum();
    return unary(x, std::move(out), "col_sum", [](const Mat& in, const Mat&, const Mat& g) -> Mat {
      return g.replicate(in.rows(), 1);
    });
  }

  /// Diagonal Gaussian log-density per column: (k x n) inputs -> (1 x n).
  Var gaussian_log_density(Var a, Var mu, Var sigma) {
    same_shape(a, mu, "gaussian_log_density mu");
    same_shape(a, sigma, "gaussian_log_density sigma");
    const Mat& s = value(sigma);
    if ((s.array() <= Scalar(0)).any())
      throw DomainError("gaussian_log_density: sigma must be positive");
    const Scalar half_log_2pi = Scalar(0.5 * std::log(2.0 * std::numbers::pi));
    const Mat z = ((value(a) - value(mu)).array() / s.array()).matrix();
    Mat per = (Scalar(-0.5) * z.array().square() - s.array().log() - half_log_2pi).matrix();
    Mat out = per.colwise().sum();
    check(out, "gaussian_log_density");
    const bool rg = requires_grad(a) || requires_grad(mu) || requires_grad(sigma);
    return push(std::move(out), rg, [this, a, mu, sigma, z](int self) {
      const Mat g = nodes_[self].adj.replicate(z.rows(), 1);
      const auto& s = nodes_[sigma.index].value.array();
      const Mat dz = (g.array() * z.array() / s).matrix(); // d/dmu
      if (nodes_[a.index].requires_grad) nodes_[a.index].adj -= dz;
      if (nodes_[mu.index].requires_grad) nodes_[mu.index].adj += dz;
      if (nodes_[sigma.index].requires_grad)
        nodes_[sigma.index].adj +=
            (g.array() * (z.array().square() - Scalar(1)) / s).matrix();
    });
  }

  /// sum_i w_i * values_i with w = normalized_weights(logw); both inputs are 1 x n.
  /// The log-weight adjoint is w_i * sum_j w_j (g_i - g_j), exactly zero for equal values.
  Var self_normalized_mean(Var logw, Var values) {
    same_shape(logw, values, "self_normalized_mean");
    if (value(logw).rows() != 1)
      throw ShapeError("self_normalized_mean rows", 1, std::size_t(value(logw).rows()));
    const Vec w = normalized_weights<Scalar>(value(logw).row(0).transpose());
    Mat out(1, 1);
    out(0, 0) = value(values).row(0).dot(w.transpose());
    check(out, "self_normalized_mean");
    const bool rg = requires_grad(logw) || requires_grad(values);
    last_weights_ = w;
    return push(std::move(out), rg, [this, logw, values, w](int self) {
      const Scalar g = nodes_[self].adj(0, 0);
      if (nodes_[values.index].requires_grad)
        nodes_[values.index].adj.row(0) += g * w.transpose();
      if (nodes_[logw.index].requires_grad) {
        const auto& v = nodes_[values.index].value;
        const Eigen::Index n = w.size();
        for (Eigen::Index i = 0; i < n; ++i) {
          Scalar acc = 0;
          for (Eigen::Index j = 0; j < n; ++j) acc += w[j] * (v(0, i) - v(0, j));
          nodes_[logw.index].adj(0, i) += g * w[i] * acc;
        }
      }
    });
  }

  /// Weights used by the most recent self_normalized_mean.
  const Vec& last_weights() const { return last_weights_; }

  /// Reverse sweep from a 1x1 output, seeding d(out)/d(out) = seed.
  void backward(Var out, Scalar seed = Scalar(1)) {
    if (value(out).size() != 1) throw ShapeError("backward output size", 1, value(out).size());
    for (auto& b : bound_)
      if (b.requires_grad) b.grad.setZero();
    for (auto& n : nodes_) n.adj.setZero(n.value.rows(), n.value.cols());
    nodes_[out.index].adj(0, 0) = seed;
    for (int i = out.index; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.back) n.back(i);
    }
    for (auto& b : bound_)
      if (b.requires_grad && !b.grad.allFinite())
        throw NumericError("backward", "non-finite parameter gradient");
  }

private:
  struct Node {
    Mat value;
    Mat adj;
    bool requires_grad = false;
    std::function<void(int)> back;
  };
  struct Bound {
    MlpSpec spec;
    const ParameterVector<Scalar>* values;
    bool requires_grad;
    Vec grad;
  };

  static void check(const Mat& m, const char* primitive) {
    if (!m.allFinite()) throw NumericError(primitive, "non-finite intermediate value");
  }

  void same_shape(Var a, Var b, const char* what) const {
    if (value(a).rows() != value(b).rows())
      throw ShapeError(std::string(what) + " rows", value(a).rows(), value(b).rows());
    if (value(a).cols() != value(b).cols())
      throw ShapeError(std::string(what) + " cols", value(a).cols(), value(b).cols());
  }

  Var push(Mat value, bool requires_grad, std::function<void(int)> back) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(back)});
    return {int(nodes_.size()) - 1};
  }

  // local(in, out, g) -> adjoint contribution to the single input
  template <typename Local>
  Var unary(Var x, Mat out, const char* primitive, Local local) {
    check(out, primitive);
    const bool rg = requires_grad(x);
    return push(std::move(out), rg, [this, x, local](int self) {
      nodes_[x.index].adj += local(nodes_[x.index].value, nodes_[self].value, nodes_[self].adj);
    });
  }

  template <typename Local>
  Var binary(Var a, Var b, Mat out, const char* primitive, Local local) {
    check(out, primitive);
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [this, a, b, local](int self) {
      auto [ga, gb] = local(nodes_[a.index].value, nodes_[b.index].value, nodes_[self].adj);
      if (nodes_[a.index].requires_grad) nodes_[a.index].adj += ga;
      if (nodes_[b.index].requires_grad) nodes_[b.index].adj += gb;
    });
  }

  std::vector<Node> nodes_;
  std::vector<Bound> bound_;
  Vec last_weights_;
};

/// d(scalar)/d(params) for a computation built on a fresh tape. `build` receives
/// (Tape&, Tape::Params) and returns the 1x1 output Var.
template <typename Scalar, typename Build>
ParameterVector<Scalar> grad_scalar(const MlpSpec& spec, const ParameterVector<Scalar>& params,
                                    Build&& build) {
  Tape<Scalar> tape;
  const auto p = tape.bind(spec, params);
  const auto out = build(tape, p);
  tape.backward(out);
  return tape.gradient(p);
}

} // namespace iss::nn
