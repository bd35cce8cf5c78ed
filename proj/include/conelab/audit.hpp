#pragma once

// Twin-run locality checks: evolve two states that agree on a ball R, then
// measure their difference inside the contracting cone over R and outside
// the expanding cone over the disagreement support. Also the frustum energy
// bookkeeping for those differences and a two-qubit non-separability check.

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "conelab/dirac.hpp"
#include "conelab/fit.hpp"
#include "conelab/lattice.hpp"
#include "conelab/wave.hpp"
#include "json.hpp"

namespace conelab::audit {

enum class Norm { sup, l2 };
std::string to_string(Norm n);

struct DivergenceReport {
  std::vector<double> times;
  std::vector<double> max_inside_contracting;
  std::vector<double> max_outside_expanding;
  int guard_band = 2;
  Norm norm = Norm::sup;

  /// Throws ShapeError on length mismatch, InvalidStateError on negatives.
  void validate() const;
  double worst_inside() const;
  double worst_outside() const;
};

struct TwinRunOptions {
  /// Steps to run; 0 or anything past the vanishing of the contracting
  /// cone is capped at the last step with a non-empty slice.
  std::size_t horizon = 0;
  int guard_band = 2;
  /// Keep every n-th difference state (0 keeps none). The t = 0 difference
  /// is kept whenever n > 0.
  std::size_t history_stride = 0;
};

/// The guarded statistics plus the raw (guard 0) ones, in both norms.
/// Wave statistics use the field values u of every component; Dirac
/// statistics use |psi| over all spinor components.
struct TwinRunResult {
  DivergenceReport sup;
  DivergenceReport l2;
  DivergenceReport raw_sup;
  DivergenceReport raw_l2;
  std::vector<wave::WaveState> wave_history;     ///< A - B
  std::vector<dirac::SpinorState> dirac_history; ///< A - B
  std::size_t steps = 0;
};

/// `base` is the ball R on which the two states agree; `support` is a ball
/// containing every site where they differ at t = 0. Both states evolve with
/// the same sources.
/// Throws PreconditionError listing offending sites when the states differ on
/// R (values and velocities, all components) or differ outside `support`.
TwinRunResult twin_run_divergence(const wave::WaveState& a,
                                  const wave::WaveState& b, const Region& base,
                                  const Region& support,
                                  const wave::SourceSpec& src,
                                  const TwinRunOptions& opt = {});

/// Dirac version: only spinor values need to agree on R.
TwinRunResult twin_run_divergence(const dirac::SpinorState& a,
                                  const dirac::SpinorState& b, double dt,
                                  const Region& base, const Region& support,
                                  const TwinRunOptions& opt = {});

struct EnergyReport {
  double e_base = 0.0;
  std::vector<double> times;
  std::vector<double> e_top;
  std::vector<double> slack;  ///< e_top - e_base

  double max_slack() const;
  double max_top() const;
};

/// Discrete field energy of the difference over R at the first history entry
/// and over the contracting slice R^-(t) for every entry before the cone
/// vanishes. The mass enters through the m^2 phi^2 term.
EnergyReport frustum_energy_check(const std::vector<wave::WaveState>& diff_history,
                                  const Region& base, double mass);

/// Same bookkeeping with the density |psi_d|^2.
EnergyReport dirac_frustum_check(
    const std::vector<dirac::SpinorState>& diff_history, const Region& base);

/// Tolerance calibration across three or more refinement levels: fit
/// C h^p through the two coarsest values and require the finest to sit
/// below it. Values at or below `floor` count as converged to rounding.
struct RefinementCheck {
  std::vector<double> spacing;
  std::vector<double> value;
  PowerLaw calibrated;      ///< from the two coarsest levels
  double tolerance = 0.0;   ///< calibrated bound at the finest spacing
  LinearFit fit;            ///< least squares over every level above floor
  bool below_floor = false; ///< every level at or below `floor`
  bool pass = false;
};
RefinementCheck calibrate_tolerance(std::vector<double> spacing,
                                    std::vector<double> value, double floor);

/// Least-squares order over all levels; levels at or below `floor` are
/// dropped. Returns the fit; `order_ok` is set when the order is at least
/// `min_order` or when every level is already at the floor.
struct OrderCheck {
  std::vector<double> spacing;
  std::vector<double> value;
  LinearFit fit;
  bool below_floor = false;
  bool order_ok = false;
};
OrderCheck fitted_order(std::vector<double> spacing, std::vector<double> value,
                        double min_order, double floor);

struct NonseparabilityReport {
  Eigen::Matrix2cd singlet_a, singlet_b;
  Eigen::Matrix2cd triplet_a, triplet_b;
  Eigen::Matrix2cd flipped_a, flipped_b;
  double singlet_vs_half_identity = 0.0;   ///< max entry deviation, A and B
  double triplet_vs_half_identity = 0.0;
  double singlet_vs_triplet_reduced = 0.0;
  double singlet_triplet_fidelity = 0.0;   ///< |<singlet|triplet>|^2
  double flipped_reduced_change = 0.0;     ///< vs the singlet's reduced states
  double flipped_fidelity = 0.0;           ///< |<singlet|flipped>|^2
  double flipped_overlap = 0.0;            ///< |<singlet|flipped>|
  bool pass = false;
};

/// Singlet, m = 0 triplet and the singlet after sigma_x on A, with their
/// single-qubit reduced states. Basis order |up up>, |up down>, |down up>,
/// |down down> with A the left factor.
NonseparabilityReport nonseparability_demo();

/// Partial traces of a two-qubit pure state.
Eigen::Matrix2cd reduced_a(const Eigen::Vector4cd& psi);
Eigen::Matrix2cd reduced_b(const Eigen::Vector4cd& psi);

// Serialisation: CSV rows "t,stat,value" and JSON objects.
void write_csv(std::ostream& os, const DivergenceReport& r,
               const std::string& prefix = "");
void write_csv(std::ostream& os, const EnergyReport& r,
               const std::string& prefix = "");
nlohmann::json to_json(const DivergenceReport& r);
nlohmann::json to_json(const EnergyReport& r);
nlohmann::json to_json(const RefinementCheck& r);
nlohmann::json to_json(const OrderCheck& r);
nlohmann::json to_json(const NonseparabilityReport& r);

}  // namespace conelab::audit
