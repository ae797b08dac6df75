#pragma once

#include <span>

namespace aoigpr {

/// Matérn covariance hyperparameters. h and sigma_j are in output units (ms),
/// lambda in normalized-input units.
struct KernelHyperparams {
  double h = 10.0;
  double lambda = 1.0;
  double nu = 0.5;
  double sigma_j = 0.0;

  bool valid() const { return h > 0 && lambda > 0 && nu > 0 && sigma_j >= 0; }
  bool operator==(const KernelHyperparams&) const = default;
};

/// kPaper uses z = 2*sqrt(nu)*r/lambda; kStandard uses the textbook sqrt(2*nu)*r/lambda.
enum class KernelScaling { kPaper, kStandard };

/// Correlation part of the Matérn covariance, c(r) / h^2, in [0, 1].
/// Half-integer nu in {0.5, 1.5, 2.5} use closed forms, anything else goes
/// through the modified Bessel function of the second kind.
double matern_correlation(double r, double lambda, double nu, KernelScaling scaling = KernelScaling::kPaper);

double matern(double r, const KernelHyperparams& theta, KernelScaling scaling = KernelScaling::kPaper);

/// Covariance between two inputs of equal dimension (Euclidean distance).
double matern(std::span<const double> xi, std::span<const double> xj, const KernelHyperparams& theta,
              KernelScaling scaling = KernelScaling::kPaper);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace aoigpr
