#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>

#include "aoigpr/dataset.hpp"
#include "aoigpr/kernel.hpp"
#include "aoigpr/rng.hpp"

namespace aoigpr {

struct Posterior {
  double mu = 0.0;      // ms
  double sigma2 = 0.0;  // ms^2, never negative
};

/// How to react when C + sigma_j^2 I will not factorize.
struct JitterPolicy {
  bool escalate = true;
  double base_rel = 1e-6;  // first escalation step, relative to h^2
  double max_rel = 1e-2;   // last escalation step, relative to h^2
};

struct GprOptions {
  KernelScaling scaling = KernelScaling::kPaper;
  JitterPolicy jitter;
  bool center_mean = false;
};

/// Cholesky factor of the jittered Gram matrix plus the cached weights C^-1 y.
struct GramFactor {
  Eigen::MatrixXd L;      // lower triangular, window order (oldest first)
  Eigen::VectorXd alpha;  // C^-1 (y - y_mean)
  double jitter2 = 0.0;   // diagonal term actually applied
  double y_mean = 0.0;
  bool escalated = false;

  std::size_t size() const { return static_cast<std::size_t>(L.rows()); }
};

/// Gram matrix C = [c(x_i, x_j)] + jitter*I with its factorization.
/// Throws SingularKernelError if no jitter level in the policy makes it positive definite.
GramFactor gram(const SlidingDataset& dataset, const KernelHyperparams& theta, const GprOptions& opts = {});

/// Posterior at x_star reusing a factorization of the same dataset.
Posterior predict(const SlidingDataset& dataset, const GramFactor& factor, const KernelHyperparams& theta,
                  std::span<const double> x_star, const GprOptions& opts = {});

/// Posterior at x_star; an empty dataset yields the prior (0, h^2).
Posterior predict(const SlidingDataset& dataset, const KernelHyperparams& theta, std::span<const double> x_star,
                  const GprOptions& opts = {});

/// Batched posterior for the columns of `candidates` (dim x S).
void predict_batch(const SlidingDataset& dataset, const GramFactor& factor, const KernelHyperparams& theta,
                   const Eigen::MatrixXd& candidates, Eigen::VectorXd& mu, Eigen::VectorXd& sigma2,
                   const GprOptions& opts = {});

double log_marginal_likelihood(const SlidingDataset& dataset, const GramFactor& factor);
double log_marginal_likelihood(const SlidingDataset& dataset, const KernelHyperparams& theta,
                               const GprOptions& opts = {});

/// Box on (h, lambda, sigma_j); nu is never fitted.
struct FitBounds {
  KernelHyperparams lower;
  KernelHyperparams upper;

  /// Each fitted parameter within [theta/ratio, theta*ratio]. A zero sigma_j
  /// is boxed around 1e-3*h instead.
  static FitBounds around(const KernelHyperparams& theta, double ratio = 1e3);
};

struct FitOptions {
  int restarts = 3;
  int max_evals = 200;
  std::size_t min_samples = 10;
  double restart_spread = 2.0;  // half-width of restart draws, in log units
};

struct FitResult {
  KernelHyperparams theta;
  double lml = 0.0;
  bool warning = false;  // every evaluation was singular; theta is the initial value
  int evaluations = 0;
};

/// Maximizes the log marginal likelihood over (log h, log lambda, log sigma_j)
/// with restarted Nelder-Mead. The result never scores below theta_init.
FitResult fit_hyperparams(const SlidingDataset& dataset, const KernelHyperparams& theta_init,
                          const FitBounds& bounds, const FitOptions& fit, const GprOptions& opts, Engine& rng);

/// Dataset, hyperparameters and factorization owned together by one agent.
/// The factorization follows the window with O(M^2) updates per push and is
/// rebuilt from scratch whenever that is not possible.
class OnlineGpr {
 public:
  OnlineGpr(std::size_t capacity, const KernelHyperparams& theta, const GprOptions& opts = {});

  void push(Sample s);
  void set_theta(const KernelHyperparams& theta);
  void refactor();

  Posterior predict(std::span<const double> x_star) const;
  void predict_batch(const Eigen::MatrixXd& candidates, Eigen::VectorXd& mu, Eigen::VectorXd& sigma2) const;
  double log_marginal_likelihood() const;

  const SlidingDataset& dataset() const noexcept { return data_; }
  const KernelHyperparams& theta() const noexcept { return theta_; }
  const GprOptions& options() const noexcept { return opts_; }
  const GramFactor& factor() const noexcept { return factor_; }
  bool factorized() const noexcept { return !data_.empty() && factor_.size() == data_.size(); }

 private:
  void drop_oldest_row();
  bool append_row(const Sample& s);
  void refresh_alpha();

  SlidingDataset data_;
  KernelHyperparams theta_;
  GprOptions opts_;
  GramFactor factor_;
  std::size_t pushes_since_refactor_ = 0;
};

}  // namespace aoigpr
