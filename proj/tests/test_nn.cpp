#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "iss/nn/adam.hpp"
#include "iss/nn/checkpoint.hpp"
#include "iss/nn/mlp.hpp"
#include "iss/nn/tape.hpp"

using namespace iss;
using namespace iss::nn;
using iss::testing::central_difference;
using iss::testing::random_matrix;
using iss::testing::relative_error;

namespace {

// Plain nested loops over the documented flat layout.
Eigen::VectorXd loop_forward(const MlpSpec& spec, const Eigen::VectorXd& p, const Eigen::VectorXd& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  std::ptrdiff_t off = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.fan_in(l), out = spec.fan_out(l);
    std::vector<double> next(std::size_t(out), 0.0);
    for (int o = 0; o < out; ++o)
      for (int i = 0; i < in; ++i) next[std::size_t(o)] += p[off + o * in + i] * h[std::size_t(i)];
    off += std::ptrdiff_t(in) * out;
    for (int o = 0; o < out; ++o) next[std::size_t(o)] += p[off + o];
    off += out;
    if (l + 1 < spec.layer_count())
      for (auto& v : next) v = spec.activation == Activation::relu ? std::max(v, 0.0) : std::tanh(v);
    h = next;
  }
  return Eigen::Map<Eigen::VectorXd>(h.data(), Eigen::Index(h.size()));
}

MlpSpec leaf_spec(Eigen::Index rows, Eigen::Index cols) {
  return MlpSpec{int(cols), {}, int(rows), Activation::relu};
}

// Evaluates build() on a differentiable leaf holding W (rows x cols, row-major in w).
// The leaf is the affine map W * I + 0, so d/dW equals the leaf's adjoint.
double eval_leaf(const std::function<Tape<double>::Var(Tape<double>&, Tape<double>::Var)>& build, Eigen::Index rows,
                 Eigen::Index cols, const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
  const MlpSpec spec = leaf_spec(rows, cols);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(spec.parameter_count());
  params.head(rows * cols) = w;
  Tape<double> tape;
  const auto p = tape.bind(spec, params);
  const auto leaf = tape.affine(p, 0, tape.constant(Eigen::MatrixXd::Identity(cols, cols)));
  const auto out = build(tape, leaf);
  if (grad) {
    tape.backward(out);
    *grad = tape.gradient(p).head(rows * cols);
  }
  return tape.scalar(out);
}

void check_op(const char* name, Eigen::Index rows, Eigen::Index cols,
              const std::function<Tape<double>::Var(Tape<double>&, Tape<double>::Var)>& op, double lo = -1.0,
              double hi = 1.0, double tol = 1e-7) {
  std::mt19937_64 rng(std::hash<std::string>{}(name));
  const Eigen::VectorXd w = random_matrix(rows * cols, 1, rng, lo, hi);
  // Contract whatever op returns against a random constant to get a scalar.
  Eigen::MatrixXd probe;
  auto build = [&](Tape<double>& t, Tape<double>::Var leaf) {
    const auto y = op(t, leaf);
    if (probe.size() == 0) {
      std::mt19937_64 r2(7);
      probe = random_matrix(t.value(y).rows(), t.value(y).cols(), r2);
    }
    return t.sum(t.mul(y, t.constant(probe)));
  };
  Eigen::VectorXd analytic;
  eval_leaf(build, rows, cols, w, &analytic);
  auto f = [&](const Eigen::VectorXd& x) { return eval_leaf(build, rows, cols, x, nullptr); };
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double fd = central_difference(f, w, i, 1e-6);
    INFO(name << " coordinate " << i << " analytic " << analytic[i] << " fd " << fd);
    CHECK(std::abs(analytic[i] - fd) <= tol * std::max(1.0, std::abs(fd)));
  }
}

} // namespace

TEST_CASE("parameter count and offsets follow the layer-major layout") {
  const MlpSpec spec{3, {5, 4}, 2, Activation::tanh};
  CHECK(spec.parameter_count() == (3 + 1) * 5 + (5 + 1) * 4 + (4 + 1) * 2);
  CHECK(spec.weight_offset(0) == 0);
  CHECK(spec.bias_offset(0) == 15);
  CHECK(spec.weight_offset(1) == 20);
  CHECK(spec.bias_offset(2) == 20 + 24 + 8);
  CHECK_THROWS_AS((MlpSpec{0, {4}, 1, Activation::relu}.validate()), DomainError);
  CHECK_THROWS_AS((MlpSpec{2, {4, 0}, 1, Activation::relu}.validate()), DomainError);
}

TEST_CASE("forward pass matches a plain-loop oracle for both activations") {
  std::mt19937_64 rng(11);
  for (const auto act : {Activation::relu, Activation::tanh}) {
    const MlpSpec spec{4, {7, 6}, 3, act};
    const auto params = init_parameters<double>(spec, rng);
    const Eigen::MatrixXd X = random_matrix(4, 9, rng, -2, 2);
    const Eigen::MatrixXd Y = mlp_forward(spec, params, X);
    REQUIRE(Y.rows() == 3);
    REQUIRE(Y.cols() == 9);
    for (Eigen::Index c = 0; c < X.cols(); ++c)
      CHECK((Y.col(c) - loop_forward(spec, params, X.col(c))).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("forward rejects wrong input and parameter sizes") {
  const MlpSpec spec{2, {3}, 1, Activation::relu};
  const Eigen::VectorXd params = Eigen::VectorXd::Zero(spec.parameter_count());
  CHECK_THROWS_AS(mlp_forward(spec, params, Eigen::MatrixXd::Zero(3, 1)), ShapeError);
  CHECK_THROWS_AS(mlp_forward(spec, Eigen::VectorXd(Eigen::VectorXd::Zero(4)), Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 1))), ShapeError);
}

TEST_CASE("glorot init: zero biases, weights inside the limit, reproducible") {
  const MlpSpec spec{10, {30}, 5, Activation::relu};
  std::mt19937_64 a(3), b(3);
  const auto p = init_parameters<double>(spec, a);
  CHECK(p == init_parameters<double>(spec, b));
  for (int l = 0; l < spec.layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / (spec.fan_in(l) + spec.fan_out(l)));
    CHECK(layer_weights(spec, p.data(), l).cwiseAbs().maxCoeff() <= limit);
    CHECK(layer_bias(spec, p.data(), l).isZero(0.0));
  }
}

TEST_CASE("tape gradient of a network matches central differences") {
  std::mt19937_64 rng(5);
  for (const auto act : {Activation::tanh, Activation::relu}) {
    const MlpSpec spec{3, {8, 8}, 2, act};
    const Eigen::VectorXd params = init_parameters<double>(spec, rng) + 0.1 * random_matrix(spec.parameter_count(), 1, rng);
    const Eigen::MatrixXd X = random_matrix(3, 6, rng);
    const Eigen::MatrixXd T = random_matrix(2, 6, rng);
    auto loss = [&](Tape<double>& t, Tape<double>::Params p) {
      return t.mean(t.square(t.sub(t.mlp(p, t.constant(X)), t.constant(T))));
    };
    const auto g = grad_scalar<double>(spec, params, loss);
    auto f = [&](const Eigen::VectorXd& q) {
      return (mlp_forward(spec, q, X) - T).array().square().mean();
    };
    const auto base_pattern = iss::testing::hidden_pattern(spec, params, X);
    int compared = 0;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      Eigen::VectorXd up = params, down = params;
      up[i] += 1e-4 * std::max(1.0, std::abs(params[i]));
      down[i] -= 1e-4 * std::max(1.0, std::abs(params[i]));
      if (iss::testing::hidden_pattern(spec, up, X) != base_pattern ||
          iss::testing::hidden_pattern(spec, down, X) != base_pattern)
        continue;
      const double fd = central_difference(f, params, i);
      CHECK(std::abs(g[i] - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
      ++compared;
    }
    CHECK(compared > params.size() * 9 / 10);
  }
}

TEST_CASE("every tape primitive matches central differences") {
  using V = Tape<double>::Var;
  using T = Tape<double>;
  check_op("relu", 3, 4, [](T& t, V x) { return t.relu(x); });
  check_op("tanh", 3, 4, [](T& t, V x) { return t.tanh(x); });
  check_op("exp", 3, 4, [](T& t, V x) { return t.exp(x); });
  check_op("log", 3, 4, [](T& t, V x) { return t.log(x); }, 0.5, 2.0);
  check_op("square", 3, 4, [](T& t, V x) { return t.square(x); });
  check_op("scale", 3, 4, [](T& t, V x) { return t.scale(x, -2.5); });
  check_op("add_scalar", 3, 4, [](T& t, V x) { return t.add_scalar(x, 0.75); });
  check_op("clamp", 4, 5, [](T& t, V x) { return t.clamp(x, -0.5, 0.5); });
  check_op("add", 4, 3, [](T& t, V x) { return t.add(t.rows(x, 0, 2), t.rows(x, 2, 2)); });
  check_op("sub", 4, 3, [](T& t, V x) { return t.sub(t.rows(x, 0, 2), t.rows(x, 2, 2)); });
  check_op("mul", 4, 3, [](T& t, V x) { return t.mul(t.rows(x, 0, 2), t.rows(x, 2, 2)); });
  check_op("min", 4, 3, [](T& t, V x) { return t.min(t.rows(x, 0, 2), t.rows(x, 2, 2)); });
  check_op("broadcast_cols", 3, 1, [](T& t, V x) { return t.broadcast_cols(x, 5); });
  check_op("vstack", 4, 3, [](T& t, V x) { return t.vstack(t.rows(x, 2, 2), t.rows(x, 0, 1)); });
  check_op("sum", 3, 4, [](T& t, V x) { return t.sum(x); });
  check_op("mean", 3, 4, [](T& t, V x) { return t.mean(x); });
  check_op("col_sum", 3, 4, [](T& t, V x) { return t.col_sum(x); });
  check_op("gaussian_log_density", 6, 4, [](T& t, V x) {
    return t.gaussian_log_density(t.rows(x, 0, 2), t.rows(x, 2, 2), t.exp(t.rows(x, 4, 2)));
  });
  check_op("self_normalized_mean", 2, 6, [](T& t, V x) {
    return t.self_normalized_mean(t.scale(t.rows(x, 0, 1), 3.0), t.rows(x, 1, 1));
  });
}

TEST_CASE("gaussian log density matches the closed form") {
  const Eigen::Vector2d a(0.3, -1.2), mu(0.1, 0.4), sigma(0.5, 2.0);
  double expect = 0.0;
  for (int i = 0; i < 2; ++i)
    expect += -0.5 * std::pow((a[i] - mu[i]) / sigma[i], 2) - std::log(sigma[i]) - 0.5 * std::log(2 * std::numbers::pi);
  CHECK(gaussian_log_density<double>(a, mu, sigma) == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_log_density<double>(a, mu, Eigen::Vector2d(0.5, 0.0)), DomainError);
  CHECK_THROWS_AS(gaussian_log_density<double>(a, Eigen::Vector3d::Zero(), sigma), ShapeError);
}

TEST_CASE("self-normalized weights are a max-shifted softmax") {
  const Eigen::Vector3d logw(1000.0, 1001.0, 999.0);
  const auto w = normalized_weights<double>(logw);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[1] / w[0] == doctest::Approx(std::exp(1.0)));
  const Eigen::Vector2d bad(std::numeric_limits<double>::infinity(), 0.0);
  CHECK_THROWS_AS(normalized_weights<double>(bad), NumericError);
}

TEST_CASE("constant values give an exactly zero log-weight gradient") {
  std::mt19937_64 rng(9);
  const Eigen::VectorXd w = random_matrix(6, 1, rng, -3, 3);
  Eigen::VectorXd grad;
  eval_leaf(
      [](Tape<double>& t, Tape<double>::Var x) {
        return t.self_normalized_mean(x, t.constant(Eigen::MatrixXd::Constant(1, 6, 0.37)));
      },
      1, 6, w, &grad);
  CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite intermediate values raise NumericError naming the primitive") {
  Tape<double> t;
  const auto x = t.constant(Eigen::MatrixXd::Constant(2, 2, -1.0));
  try {
    t.log(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.primitive() == "log");
  }
}

TEST_CASE("gradient of constant-bound parameters is a state error") {
  const MlpSpec spec{2, {}, 1, Activation::relu};
  const Eigen::VectorXd params = Eigen::VectorXd::Ones(spec.parameter_count());
  Tape<double> t;
  const auto p = t.bind(spec, params, false);
  const auto out = t.sum(t.mlp(p, t.constant(Eigen::MatrixXd::Ones(2, 1))));
  t.backward(out);
  CHECK_THROWS_AS(t.gradient(p), StateError);
}

TEST_CASE("tape is usable with float scalars") {
  std::mt19937_64 rng(4);
  const MlpSpec spec{3, {5}, 1, Activation::tanh};
  const Eigen::VectorXd pd = init_parameters<double>(spec, rng);
  const Eigen::VectorXf pf = pd.cast<float>();
  const Eigen::MatrixXd X = random_matrix(3, 4, rng);
  const auto gd = grad_scalar<double>(spec, pd, [&](Tape<double>& t, Tape<double>::Params p) {
    return t.sum(t.mlp(p, t.constant(X)));
  });
  const Eigen::MatrixXf Xf = X.cast<float>();
  const auto gf = grad_scalar<float>(spec, pf, [&](Tape<float>& t, Tape<float>::Params p) {
    return t.sum(t.mlp(p, t.constant(Xf)));
  });
  CHECK((gf.cast<double>() - gd).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("adam: first step is lr * g / (|g| + eps), later steps follow the recurrences") {
  Eigen::VectorXd p(3), g(3);
  p << 1.0, -2.0, 0.5;
  g << 0.3, -4.0, 1e-3;
  Eigen::VectorXd expect = p.array() - 0.01 * g.array() / (g.array().abs() + 1e-8);
  AdamState<double> s;
  adam_step<double>(p, g, s, 0.01);
  CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-15);

  // Second step against scalar recurrences.
  Eigen::VectorXd g2(3);
  g2 << -0.1, 2.0, 0.5;
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double m = 0.9 * (0.1 * g[i]) + 0.1 * g2[i];
    const double v = 0.999 * (0.001 * g[i] * g[i]) + 0.001 * g2[i] * g2[i];
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    expect[i] = p[i] - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  }
  adam_step<double>(p, g2, s, 0.01);
  CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(s.step == 2);
}

TEST_CASE("adam leaves parameters untouched on bad input") {
  Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
  AdamState<double> s;
  Eigen::VectorXd g(2);
  g << 1.0, std::nan("");
  CHECK_THROWS_AS(adam_step<double>(p, g, s, 0.1), NumericError);
  CHECK(p == Eigen::VectorXd::Ones(2));
  CHECK_THROWS_AS(adam_step<double>(p, Eigen::VectorXd::Ones(3), s, 0.1), ShapeError);
  CHECK_THROWS_AS(adam_step<double>(p, Eigen::VectorXd::Ones(2), s, -1.0), DomainError);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  std::mt19937_64 rng(21);
  const MlpSpec spec{3, {64, 64}, 2, Activation::relu};
  Eigen::VectorXd params = init_parameters<double>(spec, rng);
  params[0] = std::nextafter(1.0, 2.0);
  params[1] = -0.0;
  params[2] = 5e-324;
  std::stringstream buf;
  write_checkpoint(buf, spec, params);
  const auto ck = read_checkpoint(buf);
  CHECK(ck.spec == spec);
  REQUIRE(ck.params.size() == params.size());
  CHECK(std::memcmp(ck.params.data(), params.data(), sizeof(double) * std::size_t(params.size())) == 0);
}

TEST_CASE("checkpoint reader rejects damaged input") {
  const MlpSpec spec{2, {3}, 1, Activation::tanh};
  const Eigen::VectorXd params = Eigen::VectorXd::Ones(spec.parameter_count());
  std::stringstream buf;
  write_checkpoint(buf, spec, params);
  std::string text = buf.str();
  std::stringstream truncated(text.substr(0, text.size() - 3));
  CHECK_THROWS(read_checkpoint(truncated));
  std::stringstream bad_schema("{\"schema\":\"other\"}\n");
  CHECK_THROWS(read_checkpoint(bad_schema));
  Eigen::VectorXd nan_params = params;
  nan_params[0] = std::nan("");
  std::stringstream sink;
  CHECK_THROWS_AS(write_checkpoint(sink, spec, nan_params), NumericError);
}
