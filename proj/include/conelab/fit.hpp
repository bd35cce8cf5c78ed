#pragma once

// Least-squares fits used by refinement studies and tail-decay measurements.

#include <span>

namespace conelab {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;  ///< coefficient of determination; 1 for an exact line
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x. Needs >= 2 points with
/// distinct x (ConfigError otherwise).
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// err = C * h^p fitted in log space; returns p as slope and ln C as
/// intercept. Non-positive errors are rejected with ConfigError.
LinearFit power_law_fit(std::span<const double> h, std::span<const double> err);

/// C * h^p through two points, used to extrapolate a tolerance to a finer
/// level. Returns {C, p}.
struct PowerLaw {
  double coefficient = 0.0;
  double order = 0.0;
  double at(double h) const;
};
PowerLaw power_law_through(double h1, double e1, double h2, double e2);

}  // namespace conelab
