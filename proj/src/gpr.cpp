#include "aoigpr/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "aoigpr/errors.hpp"
#include "aoigpr/optimize.hpp"

namespace aoigpr {

namespace {

// Smallest acceptable Cholesky pivot, relative to h^2. Exact duplicates
// without jitter leave round-off-sized pivots that must count as singular.
constexpr double kPivotFloorRel = 1e-12;

double window_mean(const SlidingDataset& data, bool center) {
  if (!center || data.empty()) return 0.0;
  double s = 0.0;
  for (const auto& smp : data) s += smp.y;
  return s / static_cast<double>(data.size());
}

Eigen::MatrixXd kernel_matrix(const SlidingDataset& data, const KernelHyperparams& theta, KernelScaling scaling) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd C(n, n);
  const double h2 = theta.h * theta.h;
  for (Eigen::Index j = 0; j < n; ++j) {
    C(j, j) = h2;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double c = matern(data[i].x, data[j].x, theta, scaling);
      C(i, j) = c;
      C(j, i) = c;
    }
  }
  return C;
}

// Returns false when the factorization is missing or has a pivot below the floor.
bool try_cholesky(const Eigen::MatrixXd& C, double jitter2, double h2, Eigen::MatrixXd& L) {
  Eigen::MatrixXd A = C;
  A.diagonal().array() += jitter2;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) return false;
  L = llt.matrixL();
  const double floor = std::sqrt(kPivotFloorRel * h2);
  return (L.diagonal().array() > floor).all() && L.allFinite();
}

Eigen::VectorXd centered_targets(const SlidingDataset& data, double mean) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data[i].y - mean;
  return y;
}

Eigen::VectorXd solve_weights(const Eigen::MatrixXd& L, const Eigen::VectorXd& y) {
  Eigen::VectorXd a = L.triangularView<Eigen::Lower>().solve(y);
  L.triangularView<Eigen::Lower>().transpose().solveInPlace(a);
  return a;
}

}  // namespace

GramFactor gram(const SlidingDataset& dataset, const KernelHyperparams& theta, const GprOptions& opts) {
  if (dataset.empty()) throw std::invalid_argument("gram of an empty dataset");
  if (!theta.valid()) throw std::invalid_argument("invalid kernel hyperparameters");
  const double h2 = theta.h * theta.h;
  const Eigen::MatrixXd C = kernel_matrix(dataset, theta, opts.scaling);

  GramFactor f;
  f.y_mean = window_mean(dataset, opts.center_mean);
  double jitter2 = theta.sigma_j * theta.sigma_j;
  bool ok = try_cholesky(C, jitter2, h2, f.L);
  if (!ok && opts.jitter.escalate) {
    const double base = opts.jitter.base_rel > 0 ? opts.jitter.base_rel : 1e-6;
    for (double rel = base; rel <= opts.jitter.max_rel * (1 + 1e-12) && !ok; rel *= 10.0) {
      jitter2 = theta.sigma_j * theta.sigma_j + rel * h2;
      ok = try_cholesky(C, jitter2, h2, f.L);
      f.escalated = true;
    }
  }
  if (!ok) throw SingularKernelError("Gram matrix is not positive definite");
  f.jitter2 = jitter2;
  f.alpha = solve_weights(f.L, centered_targets(dataset, f.y_mean));
  return f;
}

void predict_batch(const SlidingDataset& dataset, const GramFactor& factor, const KernelHyperparams& theta,
                   const Eigen::MatrixXd& candidates, Eigen::VectorXd& mu, Eigen::VectorXd& sigma2,
                   const GprOptions& opts) {
  const Eigen::Index S = candidates.cols();
  const double h2 = theta.h * theta.h;
  mu.resize(S);
  sigma2.resize(S);
  if (dataset.empty()) {
    mu.setZero();
    sigma2.setConstant(h2);
    return;
  }
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto dim = candidates.rows();
  Eigen::MatrixXd cross(n, S);
  for (Eigen::Index j = 0; j < S; ++j) {
    const double* c = candidates.col(j).data();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& x = dataset[static_cast<std::size_t>(i)].x;
      if (static_cast<Eigen::Index>(x.size()) != dim) throw std::invalid_argument("candidate dimension mismatch");
      double s = 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        double d = x[static_cast<std::size_t>(k)] - c[k];
        s += d * d;
      }
      cross(i, j) = h2 * matern_correlation(std::sqrt(s), theta.lambda, theta.nu, opts.scaling);
    }
  }
  mu.noalias() = cross.transpose() * factor.alpha;
  mu.array() += factor.y_mean;
  factor.L.triangularView<Eigen::Lower>().solveInPlace(cross);
  sigma2 = (h2 - cross.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
}

Posterior predict(const SlidingDataset& dataset, const GramFactor& factor, const KernelHyperparams& theta,
                  std::span<const double> x_star, const GprOptions& opts) {
  Eigen::MatrixXd c = Eigen::Map<const Eigen::VectorXd>(x_star.data(), static_cast<Eigen::Index>(x_star.size()));
  Eigen::VectorXd mu, s2;
  predict_batch(dataset, factor, theta, c, mu, s2, opts);
  return {mu(0), s2(0)};
}

Posterior predict(const SlidingDataset& dataset, const KernelHyperparams& theta, std::span<const double> x_star,
                  const GprOptions& opts) {
  if (!theta.valid()) throw std::invalid_argument("invalid kernel hyperparameters");
  if (dataset.empty()) return {0.0, theta.h * theta.h};
  return predict(dataset, gram(dataset, theta, opts), theta, x_star, opts);
}

double log_marginal_likelihood(const SlidingDataset& dataset, const GramFactor& factor) {
  const auto y = centered_targets(dataset, factor.y_mean);
  const double n = static_cast<double>(dataset.size());
  return -0.5 * y.dot(factor.alpha) - factor.L.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

double log_marginal_likelihood(const SlidingDataset& dataset, const KernelHyperparams& theta,
                               const GprOptions& opts) {
  return log_marginal_likelihood(dataset, gram(dataset, theta, opts));
}

FitBounds FitBounds::around(const KernelHyperparams& theta, double ratio) {
  FitBounds b{theta, theta};
  const double sj = theta.sigma_j > 0 ? theta.sigma_j : 1e-3 * theta.h;
  b.lower.h = theta.h / ratio;
  b.upper.h = theta.h * ratio;
  b.lower.lambda = theta.lambda / ratio;
  b.upper.lambda = theta.lambda * ratio;
  b.lower.sigma_j = sj / ratio;
  b.upper.sigma_j = sj * ratio;
  return b;
}

FitResult fit_hyperparams(const SlidingDataset& dataset, const KernelHyperparams& theta_init,
                          const FitBounds& bounds, const FitOptions& fit, const GprOptions& opts, Engine& rng) {
  if (dataset.size() < fit.min_samples) throw std::invalid_argument("dataset too small to fit hyperparameters");
  if (!theta_init.valid()) throw std::invalid_argument("invalid initial hyperparameters");

  // Fitting scores each candidate as given; escalated jitter would change the model being scored.
  GprOptions scoring = opts;
  scoring.jitter.escalate = false;

  // sigma_j may legitimately be zero; it is searched in log space above a tiny floor.
  const double sj_floor = 1e-12 * theta_init.h;
  const bool fixed[3] = {bounds.lower.h >= bounds.upper.h, bounds.lower.lambda >= bounds.upper.lambda,
                         bounds.lower.sigma_j >= bounds.upper.sigma_j};
  auto to_theta = [&](std::span<const double> v) {
    KernelHyperparams t = theta_init;
    if (!fixed[0]) t.h = std::exp(v[0]);
    if (!fixed[1]) t.lambda = std::exp(v[1]);
    if (!fixed[2]) t.sigma_j = std::exp(v[2]);
    return t;
  };
  // Pairwise distances do not depend on theta; only the kernel values are rebuilt per evaluation.
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i)
      D(i, j) = euclidean_distance(dataset[static_cast<std::size_t>(i)].x, dataset[static_cast<std::size_t>(j)].x);
  const Eigen::VectorXd y = centered_targets(dataset, window_mean(dataset, scoring.center_mean));
  Eigen::MatrixXd A(n, n);
  auto score = [&](const KernelHyperparams& t) {
    constexpr double kFail = -std::numeric_limits<double>::infinity();
    if (!t.valid()) return kFail;
    const double h2 = t.h * t.h;
    try {
      for (Eigen::Index j = 0; j < n; ++j) {
        A(j, j) = h2 + t.sigma_j * t.sigma_j;
        for (Eigen::Index i = j + 1; i < n; ++i)
          A(i, j) = h2 * matern_correlation(D(i, j), t.lambda, t.nu, scoring.scaling);
      }
    } catch (const NumericalDomainError&) {
      return kFail;
    }
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>, Eigen::Lower> llt(A);
    if (llt.info() != Eigen::Success) return kFail;
    const auto L = A.triangularView<Eigen::Lower>();
    const double floor = std::sqrt(kPivotFloorRel * h2);
    if (!(A.diagonal().array() > floor).all() || !A.diagonal().allFinite()) return kFail;
    Eigen::VectorXd alpha = L.solve(y);
    const double quad = alpha.squaredNorm();
    if (!std::isfinite(quad)) return kFail;
    return -0.5 * quad - A.diagonal().array().log().sum() - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  };

  const double lo[3] = {std::log(bounds.lower.h), std::log(bounds.lower.lambda),
                        std::log(std::max(bounds.lower.sigma_j, sj_floor))};
  const double hi[3] = {std::log(bounds.upper.h), std::log(bounds.upper.lambda),
                        std::log(std::max(bounds.upper.sigma_j, sj_floor))};
  std::vector<double> x0 = {std::log(theta_init.h), std::log(theta_init.lambda),
                            std::log(std::max(theta_init.sigma_j, sj_floor))};
  for (int i = 0; i < 3; ++i) x0[static_cast<std::size_t>(i)] = std::clamp(x0[static_cast<std::size_t>(i)], lo[i], hi[i]);

  FitResult best;
  best.theta = theta_init;
  best.lml = score(theta_init);
  best.evaluations = 1;

  const double step[3] = {0.5, 0.5, 0.5};
  auto objective = [&](std::span<const double> v) { return -score(to_theta(v)); };
  std::uniform_real_distribution<double> jitter(-fit.restart_spread, fit.restart_spread);
  for (int r = 0; r < fit.restarts; ++r) {
    std::vector<double> start = x0;
    if (r > 0)
      for (int i = 0; i < 3; ++i)
        start[static_cast<std::size_t>(i)] = std::clamp(x0[static_cast<std::size_t>(i)] + jitter(rng), lo[i], hi[i]);
    auto res = nelder_mead(objective, start, step, lo, hi, fit.max_evals);
    best.evaluations += res.evaluations;
    if (-res.f > best.lml) {
      best.lml = -res.f;
      best.theta = to_theta(res.x);
    }
  }
  best.warning = !std::isfinite(best.lml);
  if (best.warning) best.theta = theta_init;
  return best;
}

// ---------------------------------------------------------------------------

OnlineGpr::OnlineGpr(std::size_t capacity, const KernelHyperparams& theta, const GprOptions& opts)
    : data_(capacity), theta_(theta), opts_(opts) {
  if (!theta.valid()) throw std::invalid_argument("invalid kernel hyperparameters");
}

void OnlineGpr::set_theta(const KernelHyperparams& theta) {
  if (!theta.valid()) throw std::invalid_argument("invalid kernel hyperparameters");
  theta_ = theta;
  refactor();
}

void OnlineGpr::refactor() {
  pushes_since_refactor_ = 0;
  if (data_.empty()) {
    factor_ = GramFactor{};
    return;
  }
  factor_ = gram(data_, theta_, opts_);
}

void OnlineGpr::push(Sample s) {
  const bool was_factorized = factorized();
  auto evicted = data_.push(std::move(s));
  // Mean centering shifts every target on each push, so it always refactors.
  if (!was_factorized || opts_.center_mean || ++pushes_since_refactor_ >= data_.capacity()) {
    refactor();
    return;
  }
  if (evicted) drop_oldest_row();
  if (!append_row(data_[data_.size() - 1])) {
    refactor();
    return;
  }
  refresh_alpha();
}

void OnlineGpr::drop_oldest_row() {
  // C[1:,1:] = L21 L21^T + L22 L22^T, so the new factor is a rank-one
  // update of L22 by the column that is being removed.
  const Eigen::Index n = factor_.L.rows();
  Eigen::VectorXd v = factor_.L.col(0).tail(n - 1);
  Eigen::MatrixXd L = factor_.L.bottomRightCorner(n - 1, n - 1);
  for (Eigen::Index k = 0; k < n - 1; ++k) {
    const double lkk = L(k, k);
    const double r = std::hypot(lkk, v(k));
    const double c = r / lkk;
    const double s = v(k) / lkk;
    L(k, k) = r;
    const Eigen::Index rest = n - 2 - k;
    if (rest > 0) {
      L.col(k).tail(rest) = (L.col(k).tail(rest) + s * v.tail(rest)) / c;
      v.tail(rest) = c * v.tail(rest) - s * L.col(k).tail(rest);
    }
  }
  factor_.L = std::move(L);
}

bool OnlineGpr::append_row(const Sample& s) {
  const Eigen::Index n = factor_.L.rows();
  const double h2 = theta_.h * theta_.h;
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) c(i) = matern(data_[static_cast<std::size_t>(i)].x, s.x, theta_, opts_.scaling);
  Eigen::VectorXd l = factor_.L.triangularView<Eigen::Lower>().solve(c);
  const double pivot2 = h2 + factor_.jitter2 - l.squaredNorm();
  if (!(pivot2 > kPivotFloorRel * h2)) return false;
  factor_.L.conservativeResize(n + 1, n + 1);
  factor_.L.col(n).setZero();
  factor_.L.row(n).head(n) = l.transpose();
  factor_.L(n, n) = std::sqrt(pivot2);
  return true;
}

void OnlineGpr::refresh_alpha() {
  factor_.y_mean = window_mean(data_, opts_.center_mean);
  factor_.alpha = solve_weights(factor_.L, centered_targets(data_, factor_.y_mean));
}

Posterior OnlineGpr::predict(std::span<const double> x_star) const {
  if (data_.empty()) return {0.0, theta_.h * theta_.h};
  return aoigpr::predict(data_, factor_, theta_, x_star, opts_);
}

void OnlineGpr::predict_batch(const Eigen::MatrixXd& candidates, Eigen::VectorXd& mu, Eigen::VectorXd& sigma2) const {
  aoigpr::predict_batch(data_, factor_, theta_, candidates, mu, sigma2, opts_);
}

double OnlineGpr::log_marginal_likelihood() const {
  if (data_.empty()) return 0.0;
  return aoigpr::log_marginal_likelihood(data_, factor_);
}

}  // namespace aoigpr
