#pragma once

#include <span>
#include <vector>

namespace aoigpr {

struct CcdfPoint {
  double threshold_ms = 0.0;
  double ccdf = 0.0;
};

/// Fraction of samples strictly above each grid point. Throws on empty samples
/// or an unsorted grid.
std::vector<CcdfPoint> ccdf(std::span<const double> samples_ms, std::span<const double> grid_ms);

/// Integer thresholds 0..ceil(max sample) plus d, sorted and deduplicated.
std::vector<double> default_ccdf_grid(std::span<const double> samples_ms, double d_ms);

/// Empirical Pr{X > d}. Throws on empty samples.
double violation_rate(std::span<const double> samples_ms, double d_ms);

/// Root mean squared difference; throws when there are no pairs.
double rmse(std::span<const double> predicted, std::span<const double> actual);

}  // namespace aoigpr
