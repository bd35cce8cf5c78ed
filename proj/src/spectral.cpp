#include "conelab/spectral.hpp"

#include <cmath>

#include "conelab/errors.hpp"
#include "conelab/fft.hpp"
#include "conelab/wave.hpp"

namespace conelab::spectral {
namespace {

void require_spectral_grid(const GridSpec& grid) {
  grid.validate();
  if (grid.boundary != Boundary::periodic)
    throw ConfigError("sqrt-KG evolution needs a periodic grid");
}

double scale(const GridSpec& grid) {
  return std::sqrt(grid.cell_volume() / static_cast<double>(grid.sites()));
}

// |psi|^2 h^dim outside `ball` dilated by `reach`, over the total.
template <typename Mag2>
double outside_fraction(const GridSpec& grid, const Region& support, double reach,
                        Mag2&& mag2) {
  const auto inside = ball_mask_clipped(grid, support.center, support.radius + reach);
  double out = 0.0, total = 0.0;
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    const double m2 = mag2(s);
    total += m2;
    if (!inside[s]) out += m2;
  }
  return total > 0.0 ? out / total : 0.0;
}

void check_leakage_setup(const GridSpec& grid, const Region& support, double T,
                         double speed) {
  if (support.kind != Region::Kind::ball)
    throw ConfigError("leakage support must be a ball");
  if (!(T >= 0.0) || !(speed > 0.0))
    throw ConfigError("leakage needs T >= 0 and speed > 0");
  require_no_wrap(grid, support.center, support.radius + speed * T,
                  "light-cone dilation of the support");
}

template <typename Mag2>
void check_support(const GridSpec& grid, const Region& support, Mag2&& mag2) {
  const auto inside = ball_mask_clipped(grid, support.center, support.radius);
  double peak = 0.0;
  for (std::size_t s = 0; s < grid.sites(); ++s) peak = std::max(peak, std::sqrt(mag2(s)));
  std::vector<std::size_t> bad;
  for (std::size_t s = 0; s < grid.sites(); ++s)
    if (!inside[s] && std::sqrt(mag2(s)) > 1e-15 * peak) bad.push_back(s);
  if (!bad.empty())
    throw PreconditionError("initial data is not supported on the given ball",
                            std::move(bad));
}

}  // namespace

double SpectralState::norm_sq() const {
  double acc = 0.0;
  for (const auto& c : coeffs) acc += std::norm(c);
  return acc;
}

ComplexField SpectralState::to_field() const {
  ComplexField f(grid, 1);
  auto data = f.component(0);
  const double s = 1.0 / scale(grid);
  for (std::size_t k = 0; k < coeffs.size(); ++k) data[k] = coeffs[k] * s;
  Fft(grid).backward(data);
  return f;
}

SpectralState from_field(const ComplexField& psi, double mass) {
  require_spectral_grid(psi.grid());
  if (psi.components() != 1) throw ConfigError("sqrt-KG fields have one component");
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw ConfigError("sqrt-KG evolution needs mass > 0");
  SpectralState st{psi.grid(), {psi.values().begin(), psi.values().end()}, mass, 0.0};
  Fft(st.grid).forward(st.coeffs);
  const double s = scale(st.grid);
  for (auto& c : st.coeffs) c *= s;
  return st;
}

SpectralState evolve_sqrt_kg(const SpectralState& state, double T) {
  if (!(state.mass > 0.0)) throw ConfigError("sqrt-KG evolution needs mass > 0");
  SpectralState out = state;
  out.t += T;
  if (T == 0.0) return out;
  const auto k2 = fft_k_squared(state.grid);
  const double m2 = state.mass * state.mass;
  for (std::size_t k = 0; k < k2.size(); ++k)
    out.coeffs[k] *= std::polar(1.0, -std::sqrt(k2[k] + m2) * T);
  return out;
}

SpectralState time_derivative(const SpectralState& state) {
  SpectralState out = state;
  const auto k2 = fft_k_squared(state.grid);
  const double m2 = state.mass * state.mass;
  for (std::size_t k = 0; k < k2.size(); ++k)
    out.coeffs[k] *= cplx{0.0, -std::sqrt(k2[k] + m2)};
  return out;
}

double leakage_fraction(const ComplexField& psi0, const Region& support,
                        double mass, double T, double speed) {
  const auto& grid = psi0.grid();
  check_leakage_setup(grid, support, T, speed);
  auto mag0 = [&](std::size_t s) { return std::norm(psi0.at(s, 0)); };
  check_support(grid, support, mag0);
  if (T == 0.0) return 0.0;
  const auto psi = evolve_sqrt_kg(from_field(psi0, mass), T).to_field();
  return outside_fraction(grid, support, speed * T,
                          [&](std::size_t s) { return std::norm(psi.at(s, 0)); });
}

double control_leakage(const RealField& u0, const Region& support, double mass,
                       double T, double cfl) {
  const auto& grid = u0.grid();
  check_leakage_setup(grid, support, T, 1.0);
  if (u0.components() != 1) throw ConfigError("control field has one component");
  auto mag0 = [&](std::size_t s) { return u0.at(s, 0) * u0.at(s, 0); };
  check_support(grid, support, mag0);
  if (T == 0.0) return 0.0;
  const double unit = grid.dim == 1 ? grid.spacing : grid.spacing / std::sqrt(3.0);
  const auto steps = static_cast<std::size_t>(std::ceil(T / (cfl * unit) - 1e-9));
  auto st = wave::make_state(grid, 1, mass, T / (static_cast<double>(steps) * unit));
  st.u = u0;
  for (std::size_t n = 0; n < steps; ++n) st = wave::step_leapfrog(st);
  return outside_fraction(grid, support, T,
                          [&](std::size_t s) { return st.u.at(s, 0) * st.u.at(s, 0); });
}

}  // namespace conelab::spectral
