#pragma once

// Free lattice scalar field H = 1/2 pi^T pi + 1/2 phi^T K phi in its Gaussian
// sector: vacuum, partial traces, entropies, evolution and displacements.
// Covariances order the phase-space vector as (phi_1..phi_n, pi_1..pi_n) and
// hold the symmetrised second moments, so a pure state has every symplectic
// eigenvalue equal to 1/2.

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <vector>

#include "conelab/lattice.hpp"
#include "json.hpp"

namespace conelab::gaussian {

struct CouplingMatrix {
  Eigen::MatrixXd K;
  double mass = 0.0;
  double spacing = 1.0;

  std::size_t sites() const { return static_cast<std::size_t>(K.rows()); }
  /// Symmetry <= 1e-14 entrywise and smallest eigenvalue > 0, else ConfigError.
  void validate() const;
};

/// K = -lap_h + m^2 on the grid's nearest-neighbour graph (periodic wrap or
/// Dirichlet edges for absorbing-pad grids).
CouplingMatrix coupling_for(const GridSpec& grid, double mass);
/// Periodic 1-D chain of n sites.
CouplingMatrix chain_coupling(std::size_t n, double mass, double spacing = 1.0);

struct GaussianState {
  Eigen::VectorXd mean_phi;
  Eigen::VectorXd mean_pi;
  Eigen::MatrixXd cov;             ///< 2n x 2n
  std::vector<std::size_t> site_map;  ///< lattice site of each mode, ascending
  std::size_t lattice_sites = 0;      ///< size of the full lattice

  std::size_t modes() const { return site_map.size(); }
  bool is_full() const { return modes() == lattice_sites; }
  /// Symmetry <= 1e-12 and symplectic eigenvalues >= 1/2 - 1e-10, else
  /// InvalidStateError.
  void validate() const;
};

/// Ground state of K. Throws ConfigError when K is singular (use m > 0).
GaussianState vacuum_state(const CouplingMatrix& K);

/// Restriction to the given lattice sites (exact partial trace). Sites must
/// be distinct members of state.site_map (ConfigError otherwise).
GaussianState reduce(const GaussianState& state, std::vector<std::size_t> sites);
GaussianState reduce(const GaussianState& state, const GridSpec& grid,
                     const Region& region);

/// Symplectic eigenvalues in ascending order, one per mode.
Eigen::VectorXd symplectic_eigenvalues(const GaussianState& state);

struct EntropyReport {
  std::vector<std::size_t> sites;
  std::vector<double> symplectic_eigenvalues;
  double entropy = 0.0;
};

/// Von Neumann entropy sum (nu + 1/2) ln(nu + 1/2) - (nu - 1/2) ln(nu - 1/2).
/// Throws InvalidStateError for an eigenvalue below 1/2 - 1e-8.
EntropyReport entropy(const GaussianState& state);

/// S(A) + S(B) - S(A u B) for disjoint site sets of a state.
double mutual_information(const GaussianState& state,
                          const std::vector<std::size_t>& a,
                          const std::vector<std::size_t>& b);

enum class Method { exact_spectral, symplectic_steps };

/// Normal-mode propagator of K, reusable across evolution times.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const CouplingMatrix& K);
  /// 2n x 2n phase-space map for time T.
  Eigen::MatrixXd matrix(double T) const;
  const CouplingMatrix& coupling() const { return K_; }

 private:
  CouplingMatrix K_;
  Eigen::MatrixXd V_;
  Eigen::VectorXd omega_;
};

/// Full-lattice evolution. exact_spectral conjugates by the normal-mode
/// propagator; symplectic_steps runs T/dt drift-kick-drift steps (T must be
/// an integer multiple of dt, dt < 2/omega_max), whose influence spreads one
/// site per step in both phi and pi.
/// Throws ConfigError for reduced states or bad step sizes.
GaussianState evolve(const GaussianState& state, const CouplingMatrix& K, double T,
                     Method method, double dt = 0.0);
GaussianState evolve(const GaussianState& state, const SpectralPropagator& prop,
                     double T);

/// One drift-kick-drift step applied to a phase-space vector in place.
void symplectic_step(const CouplingMatrix& K, double dt, Eigen::Ref<Eigen::VectorXd> x);

/// Shifts the means at lattice site `site`; covariance untouched.
GaussianState displace(const GaussianState& state, std::size_t site, double dphi,
                       double dpi);

/// max(sup |mean difference|, sup |covariance difference|).
/// Throws ConfigError when the site maps differ.
double reduced_state_distance(const GaussianState& a, const GaussianState& b);

/// <H> = 1/2 [tr <pi pi> + tr(K <phi phi>)] + classical energy of the means.
double energy(const GaussianState& state, const CouplingMatrix& K);

void write_covariance_csv(std::ostream& os, const GaussianState& state);
nlohmann::json to_json(const EntropyReport& r);

}  // namespace conelab::gaussian
