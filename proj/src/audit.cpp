#include "conelab/audit.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "conelab/errors.hpp"

namespace conelab::audit {
namespace {

struct Stats {
  double sup_in = 0, l2_in = 0, sup_out = 0, l2_out = 0;
};

// |d|^2 per site summed over components, from any accessor.
template <typename Mag2>
Stats masked_stats(const GridSpec& grid, const SiteMask& in, const SiteMask& out_of,
                   Mag2&& mag2) {
  Stats s;
  const double vol = grid.cell_volume();
  for (std::size_t site = 0; site < grid.sites(); ++site) {
    if (!in[site] && out_of[site]) continue;
    const double m2 = mag2(site);
    if (in[site]) {
      s.sup_in = std::max(s.sup_in, std::sqrt(m2));
      s.l2_in += m2 * vol;
    }
    if (!out_of[site]) {
      s.sup_out = std::max(s.sup_out, std::sqrt(m2));
      s.l2_out += m2 * vol;
    }
  }
  s.l2_in = std::sqrt(s.l2_in);
  s.l2_out = std::sqrt(s.l2_out);
  return s;
}

void require_ball(const Region& r, const char* what) {
  if (r.kind != Region::Kind::ball)
    throw ConfigError(std::string(what) + " must be a ball");
}

// Number of steps before the contracting cone over `base` vanishes, capped
// by the requested horizon.
std::size_t step_budget(const Region& base, double dt, std::size_t horizon) {
  std::size_t n = 0;
  while (static_cast<double>(n + 1) * dt < base.radius * (1.0 - 1e-12)) ++n;
  return horizon == 0 ? n : std::min(n, horizon);
}

class Recorder {
 public:
  Recorder(const GridSpec& grid, const Region& base, const Region& support,
           int guard)
      : grid_(grid), base_(base), support_(support), guard_(guard) {
    for (auto* r : {&res_.sup, &res_.l2, &res_.raw_sup, &res_.raw_l2})
      r->guard_band = guard;
    res_.raw_sup.guard_band = res_.raw_l2.guard_band = 0;
    res_.l2.norm = res_.raw_l2.norm = Norm::l2;
  }

  template <typename Mag2>
  void record(double t, Mag2&& mag2) {
    const double h = grid_.spacing;
    const double rin = base_.radius - t;
    const double rout = support_.radius + t;
    const auto raw_in = ball_mask_clipped(grid_, base_.center, rin);
    const auto raw_out = ball_mask_clipped(grid_, support_.center, rout);
    const auto g_in = ball_mask_clipped(grid_, base_.center, rin - guard_ * h);
    const auto g_out =
        ball_mask_clipped(grid_, support_.center, rout + guard_ * h);
    const Stats raw = masked_stats(grid_, raw_in, raw_out, mag2);
    const Stats grd = masked_stats(grid_, g_in, g_out, mag2);
    push(res_.sup, t, grd.sup_in, grd.sup_out);
    push(res_.l2, t, grd.l2_in, grd.l2_out);
    push(res_.raw_sup, t, raw.sup_in, raw.sup_out);
    push(res_.raw_l2, t, raw.l2_in, raw.l2_out);
  }

  TwinRunResult& result() { return res_; }

 private:
  static void push(DivergenceReport& r, double t, double in, double out) {
    r.times.push_back(t);
    r.max_inside_contracting.push_back(in);
    r.max_outside_expanding.push_back(out);
  }

  GridSpec grid_;
  Region base_, support_;
  int guard_;
  TwinRunResult res_;
};

template <typename Differs>
void check_preconditions(const GridSpec& grid, const Region& base,
                         const Region& support, Differs&& differs) {
  require_ball(base, "twin-run base");
  require_ball(support, "twin-run support");
  const auto in_base = region_mask(grid, base);
  const auto in_support = ball_mask_clipped(grid, support.center, support.radius);
  std::vector<std::size_t> bad_base, bad_support;
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    if (!differs(s)) continue;
    if (in_base[s]) bad_base.push_back(s);
    if (!in_support[s]) bad_support.push_back(s);
  }
  if (!bad_base.empty())
    throw PreconditionError("twin states disagree inside the base region on " +
                                std::to_string(bad_base.size()) + " sites",
                            bad_base);
  if (!bad_support.empty())
    throw PreconditionError("twin states disagree outside the declared support on " +
                                std::to_string(bad_support.size()) + " sites",
                            bad_support);
}

wave::WaveState wave_diff(const wave::WaveState& a, const wave::WaveState& b) {
  wave::WaveState d = a;
  for (std::size_t k = 0; k < d.u.values().size(); ++k) {
    d.u.values()[k] -= b.u.values()[k];
    d.v.values()[k] -= b.v.values()[k];
  }
  return d;
}

dirac::SpinorState spinor_diff(const dirac::SpinorState& a,
                               const dirac::SpinorState& b) {
  dirac::SpinorState d = a;
  for (std::size_t k = 0; k < d.psi.values().size(); ++k)
    d.psi.values()[k] -= b.psi.values()[k];
  return d;
}

nlohmann::json fit_json(const LinearFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2},
          {"points", f.points}};
}

}  // namespace

std::string to_string(Norm n) { return n == Norm::sup ? "sup" : "L2"; }

void DivergenceReport::validate() const {
  if (max_inside_contracting.size() != times.size() ||
      max_outside_expanding.size() != times.size())
    throw ShapeError("divergence report columns differ in length");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(max_inside_contracting[i] >= 0.0) || !(max_outside_expanding[i] >= 0.0))
      throw InvalidStateError("divergence report holds a negative or NaN entry");
}

double DivergenceReport::worst_inside() const {
  return max_inside_contracting.empty()
             ? 0.0
             : *std::max_element(max_inside_contracting.begin(),
                                 max_inside_contracting.end());
}

double DivergenceReport::worst_outside() const {
  return max_outside_expanding.empty()
             ? 0.0
             : *std::max_element(max_outside_expanding.begin(),
                                 max_outside_expanding.end());
}

TwinRunResult twin_run_divergence(const wave::WaveState& a,
                                  const wave::WaveState& b, const Region& base,
                                  const Region& support,
                                  const wave::SourceSpec& src,
                                  const TwinRunOptions& opt) {
  a.validate();
  b.validate();
  if (!a.u.same_shape(b.u) || a.mass != b.mass || a.cfl != b.cfl || a.t != b.t)
    throw ShapeError("twin states must share grid, components, mass, cfl and time");
  if (opt.guard_band < 0) throw ConfigError("guard band must be >= 0");
  const auto& grid = a.grid;
  const int nc = a.components();
  check_preconditions(grid, base, support, [&](std::size_t s) {
    for (int c = 0; c < nc; ++c)
      if (a.u.at(s, c) != b.u.at(s, c) || a.v.at(s, c) != b.v.at(s, c))
        return true;
    return false;
  });

  Recorder rec(grid, base, support, opt.guard_band);
  auto& res = rec.result();
  const std::size_t steps = step_budget(base, a.dt(), opt.horizon);
  wave::WaveState sa = a, sb = b;
  for (std::size_t n = 0;; ++n) {
    rec.record(sa.t - a.t, [&](std::size_t s) {
      double acc = 0.0;
      for (int c = 0; c < nc; ++c) {
        const double d = sa.u.at(s, c) - sb.u.at(s, c);
        acc += d * d;
      }
      return acc;
    });
    if (opt.history_stride > 0 && n % opt.history_stride == 0) {
      auto d = wave_diff(sa, sb);
      d.t = sa.t - a.t;
      res.wave_history.push_back(std::move(d));
    }
    if (n == steps) break;
    sa = wave::step_leapfrog(sa, src);
    sb = wave::step_leapfrog(sb, src);
  }
  res.steps = steps;
  return res;
}

TwinRunResult twin_run_divergence(const dirac::SpinorState& a,
                                  const dirac::SpinorState& b, double dt,
                                  const Region& base, const Region& support,
                                  const TwinRunOptions& opt) {
  a.validate();
  b.validate();
  if (!a.psi.same_shape(b.psi) || a.mass != b.mass || a.t != b.t)
    throw ShapeError("twin spinors must share grid, mass and time");
  if (opt.guard_band < 0) throw ConfigError("guard band must be >= 0");
  const auto& grid = a.grid;
  const int nc = a.psi.components();
  check_preconditions(grid, base, support, [&](std::size_t s) {
    for (int c = 0; c < nc; ++c)
      if (a.psi.at(s, c) != b.psi.at(s, c)) return true;
    return false;
  });

  Recorder rec(grid, base, support, opt.guard_band);
  auto& res = rec.result();
  const std::size_t steps = step_budget(base, dt, opt.horizon);
  dirac::SpinorState sa = a, sb = b;
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * dt;
    rec.record(t, [&](std::size_t s) {
      double acc = 0.0;
      for (int c = 0; c < nc; ++c) acc += std::norm(sa.psi.at(s, c) - sb.psi.at(s, c));
      return acc;
    });
    if (opt.history_stride > 0 && n % opt.history_stride == 0) {
      auto d = spinor_diff(sa, sb);
      d.t = t;
      res.dirac_history.push_back(std::move(d));
    }
    if (n == steps) break;
    sa = dirac::step_fd(sa, dt);
    sb = dirac::step_fd(sb, dt);
  }
  res.steps = steps;
  return res;
}

double EnergyReport::max_slack() const {
  return slack.empty() ? 0.0 : *std::max_element(slack.begin(), slack.end());
}

double EnergyReport::max_top() const {
  return e_top.empty() ? 0.0 : *std::max_element(e_top.begin(), e_top.end());
}

namespace {

template <typename History, typename Density>
EnergyReport frustum(const History& hist, const Region& base, Density&& density) {
  require_ball(base, "frustum base");
  EnergyReport rep;
  if (hist.empty()) return rep;
  const GridSpec grid = hist.front().grid;
  const double t0 = hist.front().t;
  const auto base_mask = region_mask(grid, base);
  rep.e_base = discrete_integral(grid, density(hist.front()).component(0), base_mask);
  for (const auto& state : hist) {
    const double t = state.t - t0;
    if (!(t < base.radius)) break;
    const auto mask = ball_mask_clipped(grid, base.center, base.radius - t);
    const double top = discrete_integral(grid, density(state).component(0), mask);
    rep.times.push_back(t);
    rep.e_top.push_back(top);
    rep.slack.push_back(top - rep.e_base);
  }
  return rep;
}

}  // namespace

EnergyReport frustum_energy_check(const std::vector<wave::WaveState>& diff_history,
                                  const Region& base, double mass) {
  return frustum(diff_history, base, [mass](const wave::WaveState& s) {
    auto copy = s;
    copy.mass = mass;
    return wave::energy_density(copy);
  });
}

EnergyReport dirac_frustum_check(
    const std::vector<dirac::SpinorState>& diff_history, const Region& base) {
  return frustum(diff_history, base, [](const dirac::SpinorState& s) {
    return dirac::probability_current(s).density;
  });
}

RefinementCheck calibrate_tolerance(std::vector<double> spacing,
                                    std::vector<double> value, double floor) {
  if (spacing.size() != value.size() || spacing.size() < 3)
    throw ConfigError("tolerance calibration needs three or more levels");
  RefinementCheck rc;
  rc.spacing = std::move(spacing);
  rc.value = std::move(value);
  const auto& h = rc.spacing;
  const auto& v = rc.value;
  const std::size_t last = v.size() - 1;
  rc.below_floor = std::all_of(v.begin(), v.end(), [&](double x) { return x <= floor; });
  if (v[0] > floor && v[1] > floor) {
    rc.calibrated = power_law_through(h[0], v[0], h[1], v[1]);
    rc.tolerance = std::max(rc.calibrated.at(h[last]), floor);
  } else {
    rc.tolerance = floor;
  }
  std::vector<double> fh, fv;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > floor) fh.push_back(h[i]), fv.push_back(v[i]);
  if (fh.size() >= 2) rc.fit = power_law_fit(fh, fv);
  rc.pass = v[last] <= rc.tolerance;
  return rc;
}

OrderCheck fitted_order(std::vector<double> spacing, std::vector<double> value,
                        double min_order, double floor) {
  if (spacing.size() != value.size() || spacing.size() < 2)
    throw ConfigError("order fit needs two or more levels");
  OrderCheck oc;
  oc.spacing = std::move(spacing);
  oc.value = std::move(value);
  std::vector<double> fh, fv;
  for (std::size_t i = 0; i < oc.value.size(); ++i)
    if (oc.value[i] > floor) fh.push_back(oc.spacing[i]), fv.push_back(oc.value[i]);
  if (fh.size() < 2) {
    // Nothing left to fit: the statistic already sits at rounding level.
    oc.below_floor = true;
    oc.order_ok = true;
    return oc;
  }
  oc.fit = power_law_fit(fh, fv);
  oc.order_ok = oc.fit.slope >= min_order;
  return oc;
}

Eigen::Matrix2cd reduced_a(const Eigen::Vector4cd& psi) {
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) r(i, j) += psi(2 * i + k) * std::conj(psi(2 * j + k));
  return r;
}

Eigen::Matrix2cd reduced_b(const Eigen::Vector4cd& psi) {
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) r(i, j) += psi(2 * k + i) * std::conj(psi(2 * k + j));
  return r;
}

NonseparabilityReport nonseparability_demo() {
  const double s = 1.0 / std::sqrt(2.0);
  // Index 2*a + b, 0 = up, 1 = down.
  Eigen::Vector4cd singlet(0.0, s, -s, 0.0);
  Eigen::Vector4cd triplet(0.0, s, s, 0.0);
  Eigen::Matrix2cd flip;
  flip << 0.0, 1.0, 1.0, 0.0;
  Eigen::Matrix4cd flip_a = Eigen::Matrix4cd::Zero();
  for (int a = 0; a < 2; ++a)
    for (int ap = 0; ap < 2; ++ap)
      for (int b = 0; b < 2; ++b) flip_a(2 * a + b, 2 * ap + b) = flip(a, ap);
  const Eigen::Vector4cd flipped = flip_a * singlet;

  NonseparabilityReport r;
  r.singlet_a = reduced_a(singlet);
  r.singlet_b = reduced_b(singlet);
  r.triplet_a = reduced_a(triplet);
  r.triplet_b = reduced_b(triplet);
  r.flipped_a = reduced_a(flipped);
  r.flipped_b = reduced_b(flipped);
  const Eigen::Matrix2cd half = 0.5 * Eigen::Matrix2cd::Identity();
  auto dev = [](const Eigen::Matrix2cd& m) { return m.cwiseAbs().maxCoeff(); };
  r.singlet_vs_half_identity = std::max(dev(r.singlet_a - half), dev(r.singlet_b - half));
  r.triplet_vs_half_identity = std::max(dev(r.triplet_a - half), dev(r.triplet_b - half));
  r.singlet_vs_triplet_reduced =
      std::max(dev(r.singlet_a - r.triplet_a), dev(r.singlet_b - r.triplet_b));
  r.singlet_triplet_fidelity = std::norm(singlet.dot(triplet));
  r.flipped_reduced_change =
      std::max(dev(r.flipped_a - r.singlet_a), dev(r.flipped_b - r.singlet_b));
  r.flipped_overlap = std::abs(singlet.dot(flipped));
  r.flipped_fidelity = r.flipped_overlap * r.flipped_overlap;
  r.pass = r.singlet_vs_half_identity <= 1e-15 && r.triplet_vs_half_identity <= 1e-15 &&
           r.singlet_vs_triplet_reduced <= 1e-15 && r.singlet_triplet_fidelity < 1.0 &&
           r.flipped_reduced_change <= 1e-15 && r.flipped_fidelity <= 1e-15;
  return r;
}

void write_csv(std::ostream& os, const DivergenceReport& r, const std::string& prefix) {
  const std::string tag = prefix + to_string(r.norm) + "_g" + std::to_string(r.guard_band);
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    os << r.times[i] << ',' << tag << "_inside_contracting," << r.max_inside_contracting[i] << '\n';
    os << r.times[i] << ',' << tag << "_outside_expanding," << r.max_outside_expanding[i] << '\n';
  }
}

void write_csv(std::ostream& os, const EnergyReport& r, const std::string& prefix) {
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    os << r.times[i] << ',' << prefix << "e_base," << r.e_base << '\n';
    os << r.times[i] << ',' << prefix << "e_top," << r.e_top[i] << '\n';
    os << r.times[i] << ',' << prefix << "slack," << r.slack[i] << '\n';
  }
}

nlohmann::json to_json(const DivergenceReport& r) {
  return {{"norm", to_string(r.norm)},
          {"guard_band", r.guard_band},
          {"times", r.times},
          {"max_inside_contracting", r.max_inside_contracting},
          {"max_outside_expanding", r.max_outside_expanding},
          {"worst_inside", r.worst_inside()},
          {"worst_outside", r.worst_outside()}};
}

nlohmann::json to_json(const EnergyReport& r) {
  return {{"e_base", r.e_base}, {"times", r.times}, {"e_top", r.e_top},
          {"slack", r.slack},   {"max_slack", r.max_slack()}};
}

nlohmann::json to_json(const RefinementCheck& r) {
  return {{"spacing", r.spacing},
          {"value", r.value},
          {"calibrated_coefficient", r.calibrated.coefficient},
          {"calibrated_order", r.calibrated.order},
          {"tolerance", r.tolerance},
          {"fit", fit_json(r.fit)},
          {"below_floor", r.below_floor},
          {"pass", r.pass}};
}

nlohmann::json to_json(const OrderCheck& r) {
  return {{"spacing", r.spacing},   {"value", r.value},
          {"fit", fit_json(r.fit)}, {"order", r.fit.slope},
          {"below_floor", r.below_floor}, {"order_ok", r.order_ok}};
}

nlohmann::json to_json(const NonseparabilityReport& r) {
  return {{"singlet_vs_half_identity", r.singlet_vs_half_identity},
          {"triplet_vs_half_identity", r.triplet_vs_half_identity},
          {"singlet_vs_triplet_reduced", r.singlet_vs_triplet_reduced},
          {"singlet_triplet_fidelity", r.singlet_triplet_fidelity},
          {"flipped_reduced_change", r.flipped_reduced_change},
          {"flipped_fidelity", r.flipped_fidelity},
          {"flipped_overlap", r.flipped_overlap},
          {"pass", r.pass}};
}

}  // namespace conelab::audit
