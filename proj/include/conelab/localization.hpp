#pragma once

// Standard versus Newton-Wigner localization for the free scalar field in
// 3-D (c = hbar = 1). Two-point functions are radial momentum integrals
// evaluated by composite Gauss-Legendre quadrature; the regional Fock states
// live on a small 1-D lattice.

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "conelab/lattice.hpp"
#include "json.hpp"

namespace conelab::localization {

enum class TwoPointKind { wightman, pauli_jordan, nw_overlap };

std::string to_string(TwoPointKind k);
TwoPointKind two_point_kind_from_string(const std::string& s);

/// Quadrature controls. Zero (or negative sigma) selects the automatic value:
/// cutoff from the oscillation and damping scales, nodes from one oscillation
/// period per 20-point panel, sigma = 0.1 / m for pauli_jordan and
/// nw_overlap and 0 for wightman.
struct QuadratureSettings {
  double cutoff = 0.0;
  std::size_t nodes = 0;
  double sigma = -1.0;
  double rtol = 1e-9;
  double atol = 1e-13;
};

struct TwoPointQuery {
  double r = 1.0;
  double t = 0.0;
  double mass = 1.0;
  TwoPointKind kind = TwoPointKind::wightman;
  QuadratureSettings quadrature;

  /// r >= 0, mass > 0, cutoff >= 20 m, sigma * cutoff >= 8 when sigma > 0,
  /// else ConfigError.
  void validate() const;
};

struct TwoPointResult {
  TwoPointQuery query;  ///< with the automatic settings resolved
  std::complex<double> value;
  double est_error = 0.0;  ///< |I(n panels) - I(2n panels)|
  double normalization = 1.0;  ///< factor applied to the raw kernel
};

/// Resolves the automatic settings, integrates at n and 2n panels and
/// returns the finer value. Throws QuadratureError when the two disagree by
/// more than max(rtol |I|, atol), ConfigError for invalid queries.
TwoPointResult evaluate(TwoPointQuery q);

/// <0|phi(x)phi(x')|0> at equal times, r = |x - x'| > 0.
double wightman_equal_time(double r, double mass, const QuadratureSettings& q = {});

/// Positive-frequency Wightman function <0|phi+(x,t) phi-(x',0)|0>, the
/// overlap of standard one-particle position states. Needs sigma > 0 when
/// t != 0.
std::complex<double> wightman(double t, double r, double mass,
                              const QuadratureSettings& q = {});

/// Commutator function i<0|[phi(x,t), phi(x',0)]|0> with Gaussian damping
/// exp(-sigma^2 p^2) (sigma = 0 is allowed only at t = 0, where the result
/// is exactly 0).
double pauli_jordan(double t, double r, double mass, const QuadratureSettings& q = {});

/// Overlap of two unit-normalised Gaussian-smeared NW packets (width sigma)
/// at separation r, one evolved for time t. sigma must be positive
/// (PreconditionError); the raw kernel times 8 pi^{3/2} sigma^3.
std::complex<double> nw_overlap(double t, double r, double mass,
                                const QuadratureSettings& q = {});

/// CSV with columns r,t,m,kind,re,im,est_error.
void write_two_point_csv(std::ostream& os, const std::vector<TwoPointResult>& rows);

// ---------------------------------------------------------------------------
// Regional states for NW Fock states

struct RegionalProbability {
  double p = 0.0;        ///< probability of finding the particle in R
  double purity = 1.0;   ///< p^2 + (1-p)^2
  double entropy = 0.0;  ///< binary entropy of p (natural log)
};

/// One-particle NW state restricted to R. psi must satisfy
/// sum |psi|^2 h^dim = 1 within 1e-12 (InvalidStateError otherwise).
RegionalProbability single_particle_regional_state(const ComplexField& psi,
                                                   const Region& region);
RegionalProbability regional_probability(double p);

/// Multi-particle wave functions on an L-site 1-D lattice of spacing h.
/// psi[n] holds psi^(n)(x_1..x_n) with x_1 slowest (L^n entries); the state
/// is normalised when sum_n sum |psi^(n)|^2 h^n = 1.
struct FockWavefunctions {
  std::size_t sites = 0;
  double spacing = 1.0;
  std::vector<std::vector<std::complex<double>>> psi;

  std::size_t n_max() const { return psi.empty() ? 0 : psi.size() - 1; }
};

/// Occupation vector of the region's sites (one count per region site).
using Occupation = std::vector<unsigned>;

/// Reduced state on R in the orthonormal occupation basis, stored as blocks
/// keyed by (particles in R for the ket, particles in R for the bra).
/// Blocks with a != b come only from cross-sector terms (n != m).
struct RegionalFockState {
  std::size_t n_max = 0;
  std::vector<std::size_t> region_sites;  ///< lattice sites of R, ascending
  std::vector<std::vector<Occupation>> basis;  ///< basis[a]: a particles in R
  std::map<std::pair<std::size_t, std::size_t>, Eigen::MatrixXcd> blocks;

  double trace() const;
  /// Assembles all blocks into one matrix over the concatenated basis.
  Eigen::MatrixXcd dense() const;
  double min_eigenvalue() const;
  /// Frobenius norm of the off-diagonal (a != b) blocks.
  double cross_sector_norm() const;
  /// Probability of finding a particles in R.
  std::vector<double> number_distribution() const;
  /// Entropy of the number-diagonal part (cross-sector blocks excluded).
  double entropy() const;
  double purity() const;
  /// Trace 1 within 1e-10, Hermitian blocks, min eigenvalue >= -1e-10; else
  /// InvalidStateError.
  void validate() const;
};

/// Reduced density matrix on the sites flagged in `inside`. Inputs are
/// symmetrised; an asymmetry above 1e-10, a normalisation error above 1e-10
/// or n_max > 3 throws InvalidStateError / ConfigError.
RegionalFockState fock_regional_state(const FockWavefunctions& wf,
                                      const SiteMask& inside);

/// Product state psi(x_1)...psi(x_n) in sector n only.
FockWavefunctions product_state(const std::vector<std::complex<double>>& one_particle,
                                std::size_t n, double spacing);

/// Normalised random state with Gaussian amplitudes in every sector
/// 0..n_max (n_max <= 3), symmetrised over particle labels.
FockWavefunctions random_fock_state(std::size_t sites, double spacing, std::size_t n_max,
                                    std::uint64_t seed);

nlohmann::json to_json(const RegionalFockState& s);

// ---------------------------------------------------------------------------

struct ProbeResult {
  double p_inside = 0.0;   ///< sum over R-(T) of |psi(T)|^2 h^dim
  double amplitude = 0.0;  ///< sqrt(p_inside), the L2 difference from zero data
  double penetration = 0.0;
  std::size_t slice_sites = 0;
};

/// Evolves psi0 (vanishing on R, <= 1e-15) by the NW dynamics (first-order
/// sqrt-KG) for T and compares the regional state on the contracting slice
/// R-(T) with the one obtained from zero initial data.
/// Throws PreconditionError listing support violations and
/// ConeVanishedError when R-(T) is empty.
ProbeResult nw_locality_probe(const ComplexField& psi0, const Region& region,
                              double mass, double T);

}  // namespace conelab::localization
