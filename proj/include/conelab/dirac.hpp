#pragma once

// Free Dirac evolution: 2-component spinors in 1+1-D, 4-component in 3+1-D.
// H = -i alpha.grad + beta m with alpha_a = gamma^0 gamma^a, beta = gamma^0.

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "conelab/lattice.hpp"

namespace conelab::dirac {

using SpinMatrix = Eigen::MatrixXcd;

struct GammaSet {
  int size = 2;                  ///< spinor components
  SpinMatrix gamma0;
  std::vector<SpinMatrix> gamma; ///< spatial gammas, one per axis

  /// max |{g^mu, g^nu} - 2 eta^{mu nu} I| over all pairs and entries,
  /// signature (+,-,-,-).
  double anticommutator_defect() const;
  /// max deviation of gamma^0 from Hermitian and gamma^a from
  /// anti-Hermitian.
  double hermiticity_defect() const;

  SpinMatrix alpha(int axis) const { return gamma0 * gamma[axis]; }
  const SpinMatrix& beta() const { return gamma0; }
};

/// gamma^0 = diag(1,-1), gamma^1 = [[0,1],[-1,0]].
GammaSet gamma_1d();
/// Dirac representation.
GammaSet gamma_3d();
GammaSet gammas_for(const GridSpec& grid);

struct SpinorState {
  GridSpec grid;
  ComplexField psi;
  double t = 0.0;
  double mass = 0.0;

  void validate() const;
};

SpinorState make_spinor(const GridSpec& grid, double mass);

/// Largest stable transport step: spacing in 1-D, spacing/sqrt(3) in 3-D.
double max_stable_dt(const GridSpec& grid);

/// One Strang step: exact mass rotation exp(-i beta m dt/2), a Lax-Wendroff
/// transport step for d_t psi = -alpha.grad psi, then the second half mass
/// rotation. Influence spreads at most one site per step per axis; at
/// dt = spacing in 1-D the massless transport is an exact shift.
/// Throws InstabilityError on NaN/Inf or > 10% norm growth.
SpinorState step_fd(const SpinorState& state, double dt);

/// Exact free evolution by the per-mode propagator
/// exp(-i H(k) T) = cos(E T) - i sin(E T) H(k)/E. Periodic grids only.
SpinorState evolve_spectral(const SpinorState& state, double T);

struct Current {
  RealField density;  ///< psi^dagger psi
  RealField current;  ///< psi^dagger alpha_a psi, one component per axis
};

/// Throws InvalidStateError if a bilinear's imaginary part exceeds 1e-14
/// relative to the local density.
Current probability_current(const SpinorState& state);

/// Total probability sum psi^dagger psi h^dim.
double total_probability(const SpinorState& state);

/// d(rho)/dt + div(j) from three consecutive states, centred in time and space.
RealField continuity_residual(const SpinorState& prev, const SpinorState& cur,
                              const SpinorState& next);

/// Positive-energy plane-wave spinor u(p) (unit norm) for momentum p along x.
Eigen::VectorXcd positive_energy_spinor(const GammaSet& g, double p, double mass);

}  // namespace conelab::dirac
