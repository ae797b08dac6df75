#include "aoigpr/kernel.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "aoigpr/errors.hpp"

namespace aoigpr {

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel inputs differ in dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double matern_correlation(double r, double lambda, double nu, KernelScaling scaling) {
  if (r <= 0.0) return 1.0;
  const double z = (scaling == KernelScaling::kPaper ? 2.0 * std::sqrt(nu) : std::sqrt(2.0 * nu)) * r / lambda;
  double c;
  if (nu == 0.5) {
    c = std::exp(-z);
  } else if (nu == 1.5) {
    c = (1.0 + z) * std::exp(-z);
  } else if (nu == 2.5) {
    c = (1.0 + z + z * z / 3.0) * std::exp(-z);
  } else {
    // K_nu underflows long before z^nu overflows; past that point the
    // correlation is zero to double precision.
    if (z > 700.0) return 0.0;
    c = std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(z)) * std::cyl_bessel_k(nu, z);
  }
  if (!std::isfinite(c)) throw NumericalDomainError("non-finite Matérn correlation");
  return c;
}

double matern(double r, const KernelHyperparams& theta, KernelScaling scaling) {
  return theta.h * theta.h * matern_correlation(r, theta.lambda, theta.nu, scaling);
}

double matern(std::span<const double> xi, std::span<const double> xj, const KernelHyperparams& theta,
              KernelScaling scaling) {
  return matern(euclidean_distance(xi, xj), theta, scaling);
}

}  // namespace aoigpr
