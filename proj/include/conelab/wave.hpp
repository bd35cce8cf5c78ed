#pragma once

// Second-order hyperbolic solver for the Lorenz-gauge potentials
// (phi, A_x, A_y, A_z) and the Klein-Gordon field.
//
// Potential components use a Yee-style placement: phi (component 0) sits on
// the sites, A_a (component a+1) sits half a spacing up along axis a. With
// forward-difference gradients and backward-difference divergences,
// div(grad f) is exactly the compact Laplacian used by the time stepper, so
// gauge transforms built from leapfrog solutions keep the Lorenz residual
// unchanged to rounding.

#include <functional>
#include <utility>

#include "conelab/lattice.hpp"

namespace conelab::wave {

inline constexpr int kEmComponents = 4;

struct WaveState {
  GridSpec grid;
  RealField u;  ///< field value per component
  RealField v;  ///< time derivative per component
  double t = 0.0;
  double mass = 0.0;
  double cfl = 1.0;
  std::size_t step = 0;

  /// cfl * spacing in 1-D, cfl * spacing / sqrt(3) in 3-D.
  double dt() const;
  int components() const { return u.components(); }
  void validate() const;
};

WaveState make_state(const GridSpec& grid, int components, double mass,
                     double cfl);

/// Sources sampled on demand. `rho(site, t)` feeds 4*pi*rho into the phi
/// equation; `current(site, axis, t)` feeds 4*pi*J_axis into A_axis and is
/// read at the A_axis sample point (site + spacing/2 along axis).
struct SourceSpec {
  std::function<double(std::size_t site, double t)> rho;
  std::function<double(std::size_t site, int axis, double t)> current;

  bool empty() const { return !rho && !current; }

  static SourceSpec none() { return {}; }

  /// Adapts analytic callables of physical position; J_axis is evaluated at
  /// the staggered sample point automatically.
  static SourceSpec from_functions(
      const GridSpec& grid, std::function<double(const Point&, double)> rho,
      std::function<double(const Point&, int axis, double)> current);

  /// File-driven sources: rho[k], J[k] hold samples at t0 + k*dt. Lookups off
  /// that lattice of times throw ConfigError.
  static SourceSpec cached(double t0, double dt, std::vector<RealField> rho,
                           std::vector<RealField> current);
};

/// Sample point of a component: sites for phi and KG fields, staggered by
/// spacing/2 along axis (c-1) for A components on active axes.
Point sample_point(const GridSpec& grid, std::size_t site, int component,
                   int components);

/// One synchronised leapfrog (velocity Verlet) step of
/// (d_t^2 - lap + m^2) u = s; u advances exactly as the three-level
/// central-difference scheme. Throws InstabilityError on NaN/Inf.
WaveState step_leapfrog(const WaveState& state, const SourceSpec& src = {});

/// Right-hand side lap(u) - m^2 u + s for every component at time t.
RealField acceleration(const WaveState& state, const RealField& u, double t,
                       const SourceSpec& src);

struct EmFields {
  RealField E;
  RealField B;
};

/// E = -grad(phi) - dA/dt and B = curl(A) from a 4-component state.
EmFields em_fields(const WaveState& state);

/// phi -> phi - dLambda/dt, A -> A + grad(Lambda); velocities use Lambda's
/// own leapfrog acceleration for d^2 Lambda / dt^2.
WaveState gauge_transform(const WaveState& state, const WaveState& lambda);

/// div(A) + d(phi)/dt per site.
RealField lorenz_residual(const WaveState& state);

/// d(rho)/dt + div(J) at time t, centred differences with half-width dt.
RealField continuity_residual(const GridSpec& grid, const SourceSpec& src,
                              double t, double dt);

/// Potentials at time t0 that satisfy the Lorenz condition and its first
/// time derivative: phi solves lap(phi) = -4 pi rho(t0) on the periodic grid,
/// A = dphi/dt = dA/dt = 0. Needs zero net charge (ConfigError otherwise).
WaveState lorenz_consistent_state(const GridSpec& grid, const SourceSpec& src,
                                  double t0, double cfl);

/// Per-site energy density 1/2 [v^2 + |grad u|^2 + m^2 u^2] summed over
/// components; the gradient term averages forward and backward differences.
RealField energy_density(const WaveState& state);

/// Energy integrated over the whole grid.
double total_energy(const WaveState& state);

// Finite-difference building blocks with the staggering conventions above.
void forward_diff(const GridSpec& grid, std::span<const double> f, int axis,
                  std::span<double> out);
void backward_diff(const GridSpec& grid, std::span<const double> f, int axis,
                   std::span<double> out);
void laplacian(const GridSpec& grid, std::span<const double> f,
               std::span<double> out);

}  // namespace conelab::wave
