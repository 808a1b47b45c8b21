#include "iss/selector/selector.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "iss/errors.hpp"

namespace iss::selector {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

Eigen::Index first_argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

} // namespace

std::string to_string(Branch b) { return b == Branch::variance ? "variance" : "mean"; }

void SelectorConfig::validate() const {
  if (pool_size < 1) throw DomainError("selector.pool_size must be >= 1");
  if (!(variance_threshold >= 0)) throw DomainError("selector.variance_threshold must be >= 0");
  if (!(shift_sigma >= 0)) throw DomainError("selector.shift_sigma must be >= 0");
  if (!(resample_fraction >= 0 && resample_fraction <= 1))
    throw DomainError("selector.resample_fraction must lie in [0, 1]");
  gp.validate();
}

BranchChoice choose_index(const Eigen::VectorXd& means, const Eigen::VectorXd& variances, double threshold) {
  if (means.size() == 0) throw DomainError("choose_index: no candidates");
  if (means.size() != variances.size())
    throw ShapeError("choose_index variances", std::size_t(means.size()), std::size_t(variances.size()));
  if (variances.maxCoeff() > threshold) return {first_argmax(variances), Branch::variance};
  return {first_argmax(means), Branch::mean};
}

StateSelector::StateSelector(envs::Bounds bounds, SelectorConfig config, std::uint64_t seed)
    : bounds_(std::move(bounds)), config_(config), rng_(derive_seed(seed, {0x5e1ec7})) {
  config_.validate();
  if ((bounds_.range().array() <= 0).any()) throw DomainError("selector: degenerate state bounds");
  pool_.resize(config_.pool_size, bounds_.size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index r = 0; r < pool_.rows(); ++r)
    for (Eigen::Index c = 0; c < pool_.cols(); ++c) pool_(r, c) = u(rng_);
}

Eigen::MatrixXd StateSelector::normalize(const std::vector<envs::StateVector>& states) const {
  Eigen::MatrixXd z(Eigen::Index(states.size()), bounds_.size());
  const Eigen::ArrayXd lo = bounds_.lower.array(), range = bounds_.range().array();
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() != bounds_.size())
      throw ShapeError("normalize state dimension", std::size_t(bounds_.size()), std::size_t(states[i].size()));
    z.row(Eigen::Index(i)) = (2.0 * (states[i].values.array() - lo) / range - 1.0).matrix().transpose();
  }
  return z;
}

std::vector<envs::StateVector> StateSelector::unnormalize(const Eigen::MatrixXd& z) const {
  if (z.cols() != bounds_.size())
    throw ShapeError("unnormalize columns", std::size_t(bounds_.size()), std::size_t(z.cols()));
  std::vector<envs::StateVector> out;
  out.reserve(std::size_t(z.rows()));
  const Eigen::ArrayXd lo = bounds_.lower.array(), range = bounds_.range().array();
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const Eigen::VectorXd x = (lo + (z.row(r).transpose().array() + 1.0) * 0.5 * range).matrix();
    out.push_back({bounds_.clip(x)});
  }
  return out;
}

Eigen::MatrixXd StateSelector::shift_candidates() {
  Eigen::MatrixXd z = pool_;
  if (config_.shift_sigma > 0) {
    std::normal_distribution<double> n(0.0, config_.shift_sigma);
    for (Eigen::Index r = 0; r < z.rows(); ++r)
      for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = std::clamp(z(r, c) + n(rng_), -1.0, 1.0);
  }
  const auto count = Eigen::Index(std::lround(config_.resample_fraction * double(z.rows())));
  if (count > 0) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(z.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index(0));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < count; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, z.rows() - 1);
      std::swap(rows[std::size_t(i)], rows[std::size_t(pick(rng_))]);
      for (Eigen::Index c = 0; c < z.cols(); ++c) z(rows[std::size_t(i)], c) = u(rng_);
    }
  }
  return z;
}

Selection StateSelector::select_initial_state(const GpModel<double>& model, const Eigen::MatrixXd& z_test) const {
  if (z_test.rows() == 0) throw DomainError("select_initial_state: empty candidate set");
  const auto pred = model.predict(z_test);
  const BranchChoice choice = choose_index(pred.mean, pred.variance, config_.variance_threshold);
  Selection s;
  s.index = choice.index;
  s.branch = choice.branch;
  s.max_variance = pred.variance.maxCoeff();
  s.state = unnormalize(z_test.row(choice.index)).front();
  return s;
}

void StateSelector::advance(Eigen::MatrixXd z_test) {
  if (z_test.rows() != pool_.rows() || z_test.cols() != pool_.cols())
    throw ShapeError("selector advance rows", std::size_t(pool_.rows()), std::size_t(z_test.rows()));
  pool_ = std::move(z_test);
}

EpochReport StateSelector::run_epoch(const ScoreFn& score) {
  EpochReport report;
  report.epoch = epoch_;

  Eigen::MatrixXd z_test = shift_candidates();

  auto t0 = std::chrono::steady_clock::now();
  const Eigen::VectorXd y = score(unnormalize(pool_), epoch_);
  report.metric_ms = elapsed_ms(t0);
  if (y.size() != pool_.rows()) throw ShapeError("selector scores", std::size_t(pool_.rows()), std::size_t(y.size()));
  report.score_min = y.minCoeff();
  report.score_max = y.maxCoeff();
  report.score_mean = y.mean();

  const double sd = std::sqrt((y.array() - y.mean()).square().mean());
  Eigen::VectorXd targets = y;
  GpHyper<double> hyper = config_.gp;
  report.standardized = sd > 0 && std::isfinite(sd);
  if (report.standardized)
    targets = (y.array() - y.mean()) / sd;
  else
    hyper.signal_var = 1.0;

  t0 = std::chrono::steady_clock::now();
  const auto model = GpModel<double>::fit(pool_, targets, hyper);
  report.fit_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  if (report.standardized) {
    report.selection = select_initial_state(model, z_test);
  } else {
    // Flat targets carry no ranking: explore by variance alone.
    const auto pred = model.predict(z_test);
    Selection s;
    s.index = first_argmax(pred.variance);
    s.branch = Branch::variance;
    s.max_variance = pred.variance.maxCoeff();
    s.state = unnormalize(z_test.row(s.index)).front();
    report.selection = s;
  }
  report.predict_ms = elapsed_ms(t0);

  advance(std::move(z_test));
  ++epoch_;
  return report;
}

} // namespace iss::selector
