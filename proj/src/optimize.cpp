#include "aoigpr/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aoigpr {

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                          std::span<const double> step, std::span<const double> lower,
                          std::span<const double> upper, int max_evals, double ftol, double xtol) {
  const std::size_t n = x0.size();
  auto project = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  };

  SimplexResult best;
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  // Only free coordinates get a vertex of their own.
  std::vector<std::size_t> free_dims;
  for (std::size_t i = 0; i < n; ++i)
    if (upper[i] > lower[i]) free_dims.push_back(i);

  project(x0);
  std::vector<std::vector<double>> simplex{x0};
  for (auto i : free_dims) {
    auto v = x0;
    v[i] += step[i];
    if (v[i] > upper[i]) v[i] = x0[i] - step[i];
    project(v);
    simplex.push_back(std::move(v));
  }
  std::vector<double> fv;
  for (const auto& v : simplex) fv.push_back(eval(v));

  const std::size_t m = simplex.size();
  std::vector<std::size_t> order(m);
  while (m > 1 && evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const auto ib = order.front(), iw = order.back(), isw = order[m - 2];

    double spread = 0.0;
    for (const auto& v : simplex)
      for (std::size_t i = 0; i < n; ++i) spread = std::max(spread, std::abs(v[i] - simplex[ib][i]));
    if (std::isfinite(fv[iw]) && std::abs(fv[iw] - fv[ib]) <= ftol * (1.0 + std::abs(fv[ib])) && spread <= xtol)
      break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t j = 0; j < m; ++j)
      if (j != iw)
        for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[j][i] / static_cast<double>(m - 1);

    auto along = [&](double t) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = centroid[i] + t * (simplex[iw][i] - centroid[i]);
      project(v);
      return v;
    };

    auto xr = along(-1.0);
    double fr = eval(xr);
    if (fr < fv[ib]) {
      auto xe = along(-2.0);
      double fe = eval(xe);
      if (fe < fr) {
        simplex[iw] = std::move(xe);
        fv[iw] = fe;
      } else {
        simplex[iw] = std::move(xr);
        fv[iw] = fr;
      }
      continue;
    }
    if (fr < fv[isw]) {
      simplex[iw] = std::move(xr);
      fv[iw] = fr;
      continue;
    }
    const bool outside = fr < fv[iw];
    auto xc = along(outside ? -0.5 : 0.5);
    double fc = eval(xc);
    if (fc < std::min(fr, fv[iw])) {
      simplex[iw] = std::move(xc);
      fv[iw] = fc;
      continue;
    }
    // shrink toward the best vertex
    for (std::size_t j = 0; j < m; ++j) {
      if (j == ib) continue;
      for (std::size_t i = 0; i < n; ++i) simplex[j][i] = simplex[ib][i] + 0.5 * (simplex[j][i] - simplex[ib][i]);
      project(simplex[j]);
      fv[j] = eval(simplex[j]);
    }
  }

  auto ib = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  best.x = simplex[ib];
  best.f = fv[ib];
  best.evaluations = evals;
  return best;
}

}  // namespace aoigpr
