#include "aoigpr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aoigpr {

std::vector<CcdfPoint> ccdf(std::span<const double> samples_ms, std::span<const double> grid_ms) {
  if (samples_ms.empty()) throw std::invalid_argument("ccdf of an empty sample");
  if (!std::is_sorted(grid_ms.begin(), grid_ms.end())) throw std::invalid_argument("ccdf grid must be ascending");
  std::vector<double> sorted(samples_ms.begin(), samples_ms.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  std::vector<CcdfPoint> out;
  out.reserve(grid_ms.size());
  for (double x : grid_ms) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
    out.push_back({x, static_cast<double>(above) / n});
  }
  return out;
}

std::vector<double> default_ccdf_grid(std::span<const double> samples_ms, double d_ms) {
  double hi = d_ms;
  for (double v : samples_ms) hi = std::max(hi, v);
  std::vector<double> grid;
  const auto top = static_cast<long>(std::ceil(hi));
  for (long i = 0; i <= top; ++i) grid.push_back(static_cast<double>(i));
  grid.push_back(d_ms);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double violation_rate(std::span<const double> samples_ms, double d_ms) {
  if (samples_ms.empty()) throw std::invalid_argument("violation rate of an empty sample");
  const auto above = std::count_if(samples_ms.begin(), samples_ms.end(), [d_ms](double v) { return v > d_ms; });
  return static_cast<double>(above) / static_cast<double>(samples_ms.size());
}

double rmse(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("rmse: no predictions");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - actual[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

}  // namespace aoigpr
