#include "conelab/fit.hpp"

#include <cmath>
#include <vector>

#include "conelab/errors.hpp"

namespace conelab {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("linear_fit needs two or more (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("linear_fit: x values coincide");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.points = x.size();
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.r2 = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
  return f;
}

LinearFit power_law_fit(std::span<const double> h, std::span<const double> err) {
  if (h.size() != err.size()) throw ConfigError("power_law_fit: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0) || !(err[i] > 0.0))
      throw ConfigError("power_law_fit needs positive spacings and errors");
    lx.push_back(std::log(h[i]));
    ly.push_back(std::log(err[i]));
  }
  return linear_fit(lx, ly);
}

double PowerLaw::at(double h) const { return coefficient * std::pow(h, order); }

PowerLaw power_law_through(double h1, double e1, double h2, double e2) {
  if (!(h1 > 0) || !(h2 > 0) || h1 == h2 || !(e1 > 0) || !(e2 > 0))
    throw ConfigError("power_law_through needs two distinct positive points");
  const double p = std::log(e1 / e2) / std::log(h1 / h2);
  return {e1 / std::pow(h1, p), p};
}

}  // namespace conelab
