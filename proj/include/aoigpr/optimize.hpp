#pragma once

#include <functional>
#include <span>
#include <vector>

namespace aoigpr {

struct SimplexResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
};

/// Derivative-free Nelder-Mead minimization inside a box. Every trial point
/// is projected onto [lower, upper]; a dimension with lower == upper stays fixed.
/// f may return +inf for infeasible points.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                          std::span<const double> step, std::span<const double> lower,
                          std::span<const double> upper, int max_evals, double ftol = 1e-10, double xtol = 1e-8);

}  // namespace aoigpr
