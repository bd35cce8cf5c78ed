#pragma once

// First-order square-root Klein-Gordon evolution i d_t psi = sqrt(m^2 - lap) psi,
// diagonal in Fourier space, and its leakage outside the light cone.

#include <vector>

#include "conelab/lattice.hpp"

namespace conelab::spectral {

/// Fourier amplitudes of a single-component field on a periodic grid,
/// scaled so that sum |coeffs|^2 equals sum |psi|^2 h^dim.
struct SpectralState {
  GridSpec grid;
  std::vector<cplx> coeffs;
  double mass = 1.0;
  double t = 0.0;

  double norm_sq() const;
  ComplexField to_field() const;
};

/// Throws ConfigError for non-periodic grids, multi-component fields or
/// mass <= 0.
SpectralState from_field(const ComplexField& psi, double mass);

/// Multiplies mode k by exp(-i sqrt(k^2 + m^2) T).
SpectralState evolve_sqrt_kg(const SpectralState& state, double T);

/// The positive-energy time derivative -i sqrt(k^2 + m^2) psi.
SpectralState time_derivative(const SpectralState& state);

/// Fraction of |psi|^2 found outside the ball of radius support.radius +
/// speed * T after evolving psi0 by evolve_sqrt_kg for T. psi0 must vanish
/// (<= 1e-15 times its peak) outside the ball `support` (PreconditionError);
/// the dilated ball must not wrap (ConfigError).
double leakage_fraction(const ComplexField& psi0, const Region& support,
                        double mass, double T, double speed = 1.0);

/// Control run: second-order KG with Cauchy data (u0, 0) stepped by the
/// leapfrog scheme at Courant number <= cfl (dt divides T exactly); returns
/// the same L2 mass fraction of u outside the dilated support.
double control_leakage(const RealField& u0, const Region& support, double mass,
                       double T, double cfl);

}  // namespace conelab::spectral
