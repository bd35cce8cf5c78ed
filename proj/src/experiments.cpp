#include "conelab/experiments.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <thread>

#include "conelab/audit.hpp"
#include "conelab/dirac.hpp"
#include "conelab/fft.hpp"
#include "conelab/fit.hpp"
#include "conelab/gaussian.hpp"
#include "conelab/localization.hpp"
#include "conelab/spectral.hpp"
#include "conelab/wave.hpp"

#ifndef CONELAB_VERSION
#define CONELAB_VERSION "unknown"
#endif

namespace conelab::scenario {
namespace {

constexpr double kPi = std::numbers::pi;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Table {
  Table(std::string f, std::vector<std::string> h) : file(std::move(f)), header(std::move(h)) {}

  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // Plot hints for the generated script.
  std::string x;
  std::vector<std::string> y;
  bool logy = false;
  std::string group;

  void add(std::vector<double> values) {
    std::vector<std::string> r;
    for (double v : values) r.push_back(num(v));
    rows.push_back(std::move(r));
  }
};

struct Outcome {
  std::vector<Check> checks;
  std::vector<Table> tables;
};

// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
// written by index; the first failure by index is rethrown after joining.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::size_t> as_sizes(const std::vector<std::int64_t>& v) {
  return {v.begin(), v.end()};
}

double smooth_profile(double x, double c, double w) {
  const double q = (x - c) / w;
  return std::abs(q) < 1.0 ? std::pow(1.0 - q * q, 6) : 0.0;
}

// Order check over refinement levels. Levels already at the rounding floor
// turn the check into a floor check.
Check order_check(const std::string& name, const std::vector<double>& h,
                  const std::vector<double>& v, double min_order, double floor) {
  const auto oc = audit::fitted_order(h, v, min_order, floor);
  if (oc.below_floor)
    return make_check(name + " (converged to floor)", *std::max_element(v.begin(), v.end()),
                      Relation::le, floor);
  auto c = make_check(name, oc.fit.slope, Relation::ge, min_order);
  c.pass = oc.order_ok;
  return c;
}

Check calibrated_check(const std::string& name, const std::vector<double>& h,
                       const std::vector<double>& v, double floor) {
  const auto rc = audit::calibrate_tolerance(h, v, floor);
  if (rc.below_floor) return make_check(name + " (at floor)", v.back(), Relation::le, floor);
  auto c = make_check(name, v.back(), Relation::le, rc.tolerance);
  c.pass = rc.pass;
  return c;
}

// ---------------------------------------------------------------------------
// Twin runs for the wave equations

struct WaveTwin {
  wave::WaveState a, b;
  Region base, support;
  wave::SourceSpec src;
};

wave::SourceSpec moving_pair(const GridSpec& g, const ScenarioConfig& c) {
  const double q = c.real("solver.source_charge"), v = c.real("solver.source_speed"),
               w = c.real("solver.source_width"), L = g.length();
  // The two charges sit exactly half a period apart so the lattice sums of
  // the two profiles cancel.
  auto rho = [=](const Point& x, double t) {
    return q * (smooth_profile(x[0], 0.2 * L + v * t, w) -
                smooth_profile(x[0], 0.7 * L + v * t, w));
  };
  auto cur = [=](const Point& x, int axis, double t) { return axis == 0 ? v * rho(x, t) : 0.0; };
  return wave::SourceSpec::from_functions(g, rho, cur);
}

WaveTwin make_wave_twin(const ScenarioConfig& c, std::size_t n, std::uint64_t seed, bool em) {
  const double L = c.real("grid.length");
  const auto g = make_grid(1, n, L / static_cast<double>(n));
  const double cfl = c.real("solver.cfl");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> uni;

  WaveTwin tw;
  if (em) {
    tw.src = moving_pair(g, c);
    tw.a = wave::lorenz_consistent_state(g, tw.src, 0.0, cfl);
  } else {
    tw.a = wave::make_state(g, 1, c.real("solver.mass"), cfl);
  }
  // Smooth periodic background; for the potentials only the transverse
  // components, which leave the Lorenz condition untouched.
  const std::vector<int> comps = em ? std::vector<int>{2, 3} : std::vector<int>{0};
  for (int comp : comps)
    for (int k = 1; k <= 4; ++k) {
      const double au = nd(rng) / k, av = nd(rng) / k, ph = nd(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = g.coord(i)[0];
        tw.a.u.at(i, comp) += au * std::sin(2 * kPi * k * x / L + ph);
        tw.a.v.at(i, comp) += av * std::cos(2 * kPi * k * x / L + ph);
      }
    }
  const double w = c.real("region.bump_width");
  const double centre = c.real("region.center") + c.real("region.radius") +
                        c.real("region.gap") + w + c.real("region.jitter") * uni(rng);
  const double amp = 0.5 + 0.5 * uni(rng);
  tw.b = tw.a;
  const auto bump = poly_bump(g, Point{centre, 0, 0}, w, amp, 6);
  const int target = em ? 2 : 0;
  for (std::size_t i = 0; i < n; ++i) tw.b.u.at(i, target) += bump.at(i, 0);
  tw.base = Region::ball(c.real("region.center"), c.real("region.radius"));
  tw.support = Region::ball(centre, w);
  return tw;
}

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

Outcome run_wave(const ScenarioConfig& c, std::size_t threads, bool em) {
  Outcome out;
  const auto seeds = c.integers("solver.seeds");
  const auto levels = as_sizes(c.integers("grid.levels"));
  audit::TwinRunOptions opt;
  opt.horizon = c.count("solver.steps");
  opt.guard_band = static_cast<int>(c.integer("solver.guard_band"));

  if (levels.empty()) {
    const std::size_t n = c.count("grid.extent");
    std::vector<audit::TwinRunResult> res(seeds.size());
    parallel_for(seeds.size(), threads, [&](std::size_t i) {
      const auto tw = make_wave_twin(c, n, static_cast<std::uint64_t>(seeds[i]), em);
      res[i] = audit::twin_run_divergence(tw.a, tw.b, tw.base, tw.support, tw.src, opt);
    });
    Table t{"divergence.csv", {"seed", "t", "inside_sup", "outside_sup"}};
    t.x = "t";
    t.y = {"inside_sup", "outside_sup"};
    t.group = "seed";
    double worst = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      worst = std::max(worst, res[i].sup.worst_inside());
      const auto& r = res[i].sup;
      for (std::size_t k = 0; k < r.times.size(); ++k)
        t.add({static_cast<double>(seeds[i]), r.times[k], r.max_inside_contracting[k],
               r.max_outside_expanding[k]});
    }
    out.checks.push_back(make_check("inside-cone sup difference", worst, Relation::le,
                                    c.real("checks.inside_tol")));
    out.tables.push_back(std::move(t));
    return out;
  }

  struct LevelResult {
    double inside = 0, outside = 0, slack = 0, lorenz = 0, continuity = 0;
  };
  const std::size_t nl = levels.size();
  std::vector<LevelResult> res(seeds.size() * nl);
  opt.history_stride = 1;
  parallel_for(res.size(), threads, [&](std::size_t idx) {
    const std::size_t si = idx / nl, li = idx % nl;
    const auto tw = make_wave_twin(c, levels[li], static_cast<std::uint64_t>(seeds[si]), em);
    const auto r = audit::twin_run_divergence(tw.a, tw.b, tw.base, tw.support, tw.src, opt);
    const double mass = em ? 0.0 : c.real("solver.mass");
    const auto e = audit::frustum_energy_check(r.wave_history, tw.base, mass);
    LevelResult lr{r.sup.worst_inside(), r.sup.worst_outside(), std::max(e.max_slack(), 0.0)};
    if (em) {
      auto s = tw.a;
      const double dt = s.dt();
      for (std::size_t k = 0; k < r.steps; ++k) {
        s = wave::step_leapfrog(s, tw.src);
        lr.lorenz = std::max(lr.lorenz, max_abs(wave::lorenz_residual(s).values()));
        lr.continuity = std::max(
            lr.continuity,
            max_abs(wave::continuity_residual(s.grid, tw.src, s.t, dt).values()));
      }
    }
    res[idx] = lr;
  });

  Table t{"levels.csv", {"seed", "extent", "h", "inside_sup", "outside_sup", "frustum_slack"}};
  if (em) {
    t.header.push_back("lorenz_residual");
    t.header.push_back("continuity_residual");
  }
  t.x = "h";
  t.y = {"inside_sup", "outside_sup", "frustum_slack"};
  t.logy = true;
  t.group = "seed";
  std::vector<Check> per_seed;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    std::vector<double> h, in, outv, slack, lor, cont;
    for (std::size_t li = 0; li < nl; ++li) {
      const auto& lr = res[si * nl + li];
      h.push_back(c.real("grid.length") / static_cast<double>(levels[li]));
      in.push_back(lr.inside);
      outv.push_back(lr.outside);
      slack.push_back(lr.slack);
      lor.push_back(lr.lorenz);
      cont.push_back(lr.continuity);
      std::vector<double> row{static_cast<double>(seeds[si]), static_cast<double>(levels[li]),
                              h.back(), lr.inside, lr.outside, lr.slack};
      if (em) {
        row.push_back(lr.lorenz);
        row.push_back(lr.continuity);
      }
      t.add(row);
    }
    const std::string tag = seeds.size() > 1 ? " [seed " + std::to_string(seeds[si]) + "]" : "";
    const double mo = c.real("checks.min_order"), fl = c.real("checks.floor");
    out.checks.push_back(order_check("inside-contracting leakage order" + tag, h, in, mo, fl));
    out.checks.push_back(order_check("outside-expanding leakage order" + tag, h, outv, mo, fl));
    out.checks.push_back(calibrated_check("frustum energy slack within calibrated tolerance" + tag,
                                          h, slack, c.real("checks.energy_floor")));
    if (em) {
      out.checks.push_back(order_check("Lorenz residual order" + tag, h, lor, mo, fl));
      out.checks.push_back(make_check("Lorenz residual at finest level" + tag, lor.back(),
                                      Relation::le, c.real("checks.lorenz_tol")));
      out.checks.push_back(order_check("source continuity residual order" + tag, h, cont, mo, fl));
    }
  }
  out.tables.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------

dirac::SpinorState dirac_plane_wave(const GridSpec& g, int mode, double mass, double t) {
  const double p = 2.0 * kPi * mode / g.length();
  const double E = std::sqrt(p * p + mass * mass);
  const auto u = dirac::positive_energy_spinor(dirac::gammas_for(g), p, mass);
  auto s = dirac::make_spinor(g, mass);
  for (std::size_t i = 0; i < g.sites(); ++i) {
    const cplx ph = std::exp(cplx{0, p * g.coord(i)[0] - E * t});
    for (int k = 0; k < u.size(); ++k) s.psi.at(i, k) = u(k) * ph;
  }
  s.t = t;
  return s;
}

dirac::SpinorState random_spinor(const GridSpec& g, double mass, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto s = dirac::make_spinor(g, mass);
  for (auto& z : s.psi.values()) z = {nd(rng), nd(rng)};
  return s;
}

// Sites whose difference is nonzero outside the n-site dilation of a single
// perturbed site, summed over the first `steps` steps.
double cone_violations(int dim, std::size_t n, double mass, std::size_t steps, double cfl,
                       std::uint64_t seed) {
  const auto g = make_grid(dim, n, 1.0);
  const auto a = random_spinor(g, mass, seed);
  auto b = a;
  const std::size_t centre =
      g.flatten({n / 2, dim == 3 ? n / 2 : 0, dim == 3 ? n / 2 : 0});
  for (int k = 0; k < b.psi.components(); ++k) b.psi.at(centre, k) += cplx{0.3, -0.2};
  SiteMask seed_mask(g.sites(), 0);
  seed_mask[centre] = 1;
  const double dt = cfl * dirac::max_stable_dt(g);
  auto sa = a, sb = b;
  double bad = 0;
  for (std::size_t step = 1; step <= steps; ++step) {
    sa = dirac::step_fd(sa, dt);
    sb = dirac::step_fd(sb, dt);
    const auto inside = dilate_sites(g, seed_mask, step);
    for (std::size_t s = 0; s < g.sites(); ++s)
      for (int k = 0; k < sa.psi.components(); ++k)
        if (!inside[s] && sa.psi.at(s, k) != sb.psi.at(s, k)) bad += 1;
  }
  return bad;
}

Outcome run_dirac(const ScenarioConfig& c, std::size_t threads) {
  Outcome out;
  const double mass = c.real("solver.mass"), cfl = c.real("solver.cfl");
  const auto seed = static_cast<std::uint64_t>(c.integers("solver.seeds").front());

  const double defect = std::max({dirac::gamma_1d().anticommutator_defect(),
                                  dirac::gamma_3d().anticommutator_defect()});
  out.checks.push_back(make_check("gamma anticommutator defect", defect, Relation::le,
                                  c.real("checks.gamma_tol")));

  // Spectral evolution of a smooth packet in many short steps.
  {
    const std::size_t n = c.count("grid.extent");
    const auto g = make_grid(1, n, c.real("grid.length") / static_cast<double>(n));
    auto s = dirac::make_spinor(g, mass);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const cplx a0{nd(rng), nd(rng)}, a1{nd(rng), nd(rng)};
    const double x0 = g.length() / 2, w = g.length() / 16;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = (g.coord(i)[0] - x0) / w;
      const double env = std::exp(-q * q);
      s.psi.at(i, 0) = a0 * env;
      s.psi.at(i, 1) = a1 * env;
    }
    const double p0 = dirac::total_probability(s);
    const double dt = cfl * g.spacing;
    double drift = 0.0;
    for (std::size_t k = 0; k < c.count("solver.steps"); ++k) {
      s = dirac::evolve_spectral(s, dt);
      drift = std::max(drift, std::abs(dirac::total_probability(s) / p0 - 1.0));
    }
    out.checks.push_back(make_check(
        "spectral norm drift over " + std::to_string(c.count("solver.steps")) + " steps", drift,
        Relation::le, c.real("checks.drift_tol")));
  }

  // Plane-wave oracle: L = 8, mode 3, T = 2.
  {
    std::vector<double> h, err;
    for (std::size_t n : {64, 128, 256}) {
      const auto g = make_grid(1, n, 8.0 / static_cast<double>(n));
      const double dt = cfl * g.spacing;
      const auto steps = static_cast<std::size_t>(std::lround(2.0 / dt));
      auto s = dirac_plane_wave(g, 3, mass, 0.0);
      for (std::size_t k = 0; k < steps; ++k) s = dirac::step_fd(s, dt);
      const auto ref = dirac_plane_wave(g, 3, mass, static_cast<double>(steps) * dt);
      double acc = 0.0;
      for (std::size_t k = 0; k < s.psi.values().size(); ++k)
        acc += std::norm(s.psi.values()[k] - ref.psi.values()[k]);
      h.push_back(g.spacing);
      err.push_back(std::sqrt(acc * g.spacing));
    }
    out.checks.push_back(make_check("step_fd plane-wave error order", power_law_fit(h, err).slope,
                                    Relation::ge, c.real("checks.min_order")));
    Table t{"plane_wave.csv", {"h", "l2_error"}};
    t.x = "h";
    t.y = {"l2_error"};
    t.logy = true;
    for (std::size_t i = 0; i < h.size(); ++i) t.add({h[i], err[i]});
    out.tables.push_back(std::move(t));
  }

  const double bad = cone_violations(1, 256, mass, 40, cfl, seed) +
                     cone_violations(3, 16, mass, 5, cfl, seed);
  out.checks.push_back(
      make_check("differences outside the numerical cone", bad, Relation::eq, 0.0));

  const auto levels = as_sizes(c.integers("grid.levels"));
  struct LevelResult {
    double inside = 0, top = 0;
  };
  std::vector<LevelResult> res(levels.size());
  const auto base = Region::ball(c.real("region.center"), c.real("region.radius"));
  const double w = c.real("region.bump_width");
  const double bc = c.real("region.center") + c.real("region.radius") + c.real("region.gap") + w;
  parallel_for(levels.size(), threads, [&](std::size_t li) {
    const std::size_t n = levels[li];
    const auto g = make_grid(1, n, c.real("grid.length") / static_cast<double>(n));
    auto a = dirac::make_spinor(g, mass);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (int comp = 0; comp < 2; ++comp)
      for (int k = 1; k <= 3; ++k) {
        const cplx amp{nd(rng), nd(rng)};
        for (std::size_t i = 0; i < n; ++i)
          a.psi.at(i, comp) += amp * std::exp(cplx{0, 2 * kPi * k * g.coord(i)[0] / g.length()});
      }
    auto b = a;
    const auto bump = poly_bump(g, Point{bc, 0, 0}, w, 1.0, 6);
    for (std::size_t i = 0; i < n; ++i) b.psi.at(i, 0) += bump.at(i, 0);
    audit::TwinRunOptions opt;
    opt.history_stride = 1;
    const auto r =
        audit::twin_run_divergence(a, b, cfl * g.spacing, base, Region::ball(bc, w), opt);
    res[li] = {r.sup.worst_inside(), audit::dirac_frustum_check(r.dirac_history, base).max_top()};
  });
  std::vector<double> h, in, top;
  Table t{"levels.csv", {"extent", "h", "inside_sup", "frustum_top"}};
  t.x = "h";
  t.y = {"inside_sup", "frustum_top"};
  t.logy = true;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    h.push_back(c.real("grid.length") / static_cast<double>(levels[li]));
    in.push_back(res[li].inside);
    top.push_back(res[li].top);
    t.add({static_cast<double>(levels[li]), h.back(), in.back(), top.back()});
  }
  out.checks.push_back(order_check("inside-contracting leakage order", h, in,
                                   c.real("checks.min_order"), c.real("checks.floor")));
  out.checks.push_back(calibrated_check("probability frustum within calibrated tolerance", h, top,
                                        c.real("checks.energy_floor")));
  out.tables.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------

Outcome run_sqrt_kg(const ScenarioConfig& c, std::size_t threads) {
  Outcome out;
  const auto levels = as_sizes(c.integers("grid.levels"));
  const double L = c.real("grid.length"), ctr = c.real("region.center"),
               w = c.real("region.bump_width"), m = c.real("solver.mass"),
               T = c.real("solver.time"), cfl = c.real("solver.cfl");
  std::vector<double> h(levels.size()), first(levels.size()), second(levels.size());
  parallel_for(levels.size(), threads, [&](std::size_t i) {
    const auto g = make_grid(1, levels[i], L / static_cast<double>(levels[i]));
    const auto bump = poly_bump(g, Point{ctr, 0, 0}, w, 1.0, 6);
    ComplexField psi(g, 1);
    for (std::size_t s = 0; s < g.sites(); ++s) psi.at(s, 0) = bump.at(s, 0);
    h[i] = g.spacing;
    first[i] = spectral::leakage_fraction(psi, Region::ball(ctr, w), m, T);
    second[i] = spectral::control_leakage(bump, Region::ball(ctr, w), m, T, cfl);
  });
  out.checks.push_back(make_check("first-order leakage at finest level", first.back(),
                                  Relation::gt, c.real("checks.leakage_floor")));
  out.checks.push_back(make_check("first-order leakage refinement order (abs)",
                                  std::abs(power_law_fit(h, first).slope), Relation::lt,
                                  c.real("checks.stability_max")));
  out.checks.push_back(make_check("control leakage at finest level", second.back(), Relation::lt,
                                  c.real("checks.control_ceiling")));
  out.checks.push_back(make_check("control leakage order", power_law_fit(h, second).slope,
                                  Relation::ge, c.real("checks.min_order")));
  out.checks.push_back(make_check("leakage contrast at finest level", first.back() / second.back(),
                                  Relation::ge, c.real("checks.contrast")));
  Table t{"leakage.csv", {"extent", "h", "sqrt_kg_leakage", "control_leakage"}};
  t.x = "h";
  t.y = {"sqrt_kg_leakage", "control_leakage"};
  t.logy = true;
  for (std::size_t i = 0; i < levels.size(); ++i)
    t.add({static_cast<double>(levels[i]), h[i], first[i], second[i]});
  out.tables.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------

Outcome run_gaussian(const ScenarioConfig& c) {
  using namespace gaussian;
  Outcome out;
  const std::size_t n = c.count("grid.extent");
  const auto g = make_grid(1, n, 1.0);
  const double mass = c.real("solver.mass"), radius = c.real("region.radius");
  const std::size_t margin = c.count("region.margin");
  const auto K = coupling_for(g, mass);
  const auto vac = vacuum_state(K);

  const auto nu = symplectic_eigenvalues(vac);
  out.checks.push_back(make_check("vacuum symplectic eigenvalues minus 1/2",
                                  (nu.array() - 0.5).abs().maxCoeff(), Relation::le,
                                  c.real("checks.purity_tol")));

  // Exact numerical light cone of the drift-kick-drift stepper.
  const double half = static_cast<double>(n / 2);
  const auto base = Region::ball(half, radius);
  const auto site = static_cast<std::size_t>(half + radius) + margin;
  const double dt = c.real("solver.dt");
  auto ea = vac, eb = displace(vac, site, 1.0, 1.0);
  double worst = 0.0;
  Table zt{"symplectic_zero.csv", {"step", "t", "distance"}};
  zt.x = "t";
  zt.y = {"distance"};
  for (std::size_t step = 1; step <= margin; ++step) {
    ea = evolve(ea, K, dt, Method::symplectic_steps, dt);
    eb = evolve(eb, K, dt, Method::symplectic_steps, dt);
    const double t = static_cast<double>(step) * dt;
    const auto slice = cone_slice(base, t, 1.0, ConeDirection::contracting).region();
    const double d = reduced_state_distance(reduce(ea, g, slice), reduce(eb, g, slice));
    worst = std::max(worst, d);
    zt.add({static_cast<double>(step), t, d});
  }
  out.checks.push_back(make_check("symplectic-step distance on the contracting slice",
                                  worst, Relation::eq, 0.0));
  out.tables.push_back(std::move(zt));

  // Beyond-cone tail under exact evolution: R sits `d` sites left of the
  // displaced site, the slice is R-(T).
  const double T = c.real("solver.time");
  const SpectralPropagator prop(K);
  const auto va = evolve(vac, prop, T);
  std::vector<double> ds, logd;
  Table tt{"tail.csv", {"margin", "distance"}};
  tt.x = "margin";
  tt.y = {"distance"};
  tt.logy = true;
  const auto step = c.count("solver.tail_step");
  for (std::size_t d = 0; d <= c.count("solver.tail_max_margin"); d += step) {
    const auto region = Region::ball(static_cast<double>(site - d) - radius, radius);
    const auto slice = cone_slice(region, T, 1.0, ConeDirection::contracting).region();
    const auto vb = evolve(displace(vac, site, 1.0, 1.0), prop, T);
    const double dist = reduced_state_distance(reduce(va, g, slice), reduce(vb, g, slice));
    tt.add({static_cast<double>(d), dist});
    if (dist > c.real("checks.tail_floor")) {
      ds.push_back(static_cast<double>(d));
      logd.push_back(std::log(dist));
    }
  }
  out.tables.push_back(std::move(tt));
  if (ds.size() < 3)
    throw InvalidStateError("fewer than three tail distances above checks.tail_floor");
  const auto fit = linear_fit(ds, logd);
  out.checks.push_back(make_check("exponential tail decay rate", -fit.slope, Relation::gt, 0.0));
  out.checks.push_back(
      make_check("exponential tail fit R^2", fit.r2, Relation::ge, c.real("checks.r2_min")));
  return out;
}

std::vector<std::size_t> interval(std::size_t start, std::size_t len, std::size_t n) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < len; ++i) s.push_back((start + i) % n);
  std::sort(s.begin(), s.end());
  return s;
}

Outcome run_entropy(const ScenarioConfig& c) {
  using namespace gaussian;
  Outcome out;
  const std::size_t ns = c.count("solver.symmetry_extent");
  const auto sym = vacuum_state(chain_coupling(ns, c.real("solver.symmetry_mass")));
  std::mt19937_64 rng(static_cast<std::uint64_t>(c.integers("solver.seeds").front()));
  std::uniform_int_distribution<std::size_t> start(0, ns - 1), len(1, ns - 2);
  double worst = 0.0;
  Table st{"complement.csv", {"start", "length", "s_a", "s_complement"}};
  st.x = "length";
  st.y = {"s_a", "s_complement"};
  for (std::size_t k = 0; k < c.count("solver.intervals"); ++k) {
    const std::size_t s0 = start(rng), l = len(rng);
    const auto a = interval(s0, l, ns);
    std::vector<std::size_t> comp;
    for (std::size_t i = 0; i < ns; ++i)
      if (!std::binary_search(a.begin(), a.end(), i)) comp.push_back(i);
    const double sa = entropy(reduce(sym, a)).entropy, sb = entropy(reduce(sym, comp)).entropy;
    worst = std::max(worst, std::abs(sa - sb));
    st.add({static_cast<double>(s0), static_cast<double>(l), sa, sb});
  }
  out.checks.push_back(make_check("|S(A) - S(complement)| over random intervals", worst,
                                  Relation::le, c.real("checks.symmetry_tol")));
  out.tables.push_back(std::move(st));

  const std::size_t w = std::min<std::size_t>(8, ns / 4);
  const double mi = mutual_information(sym, interval(w, w, ns), interval(2 * w, w, ns));
  out.checks.push_back(make_check("mutual information of adjacent intervals", mi, Relation::gt, 0.0));

  const std::size_t n = c.count("grid.extent");
  const auto crit = vacuum_state(chain_coupling(n, c.real("solver.mass")));
  std::vector<double> logl, s;
  Table lt{"scaling.csv", {"length", "log_length", "entropy"}};
  lt.x = "log_length";
  lt.y = {"entropy"};
  for (auto l : c.integers("solver.lengths")) {
    logl.push_back(std::log(static_cast<double>(l)));
    s.push_back(entropy(reduce(crit, interval(0, static_cast<std::size_t>(l), n))).entropy);
    lt.add({static_cast<double>(l), logl.back(), s.back()});
  }
  const double slope = linear_fit(logl, s).slope;
  out.checks.push_back(
      make_check("entropy slope vs ln l (lower)", slope, Relation::ge, c.real("checks.slope_min")));
  out.checks.push_back(
      make_check("entropy slope vs ln l (upper)", slope, Relation::le, c.real("checks.slope_max")));
  out.tables.push_back(std::move(lt));
  return out;
}

// ---------------------------------------------------------------------------

Outcome run_two_point(const ScenarioConfig& c, std::size_t threads) {
  using namespace localization;
  Outcome out;
  const double m = c.real("solver.mass");
  QuadratureSettings q;
  q.sigma = c.real("solver.sigma");
  Table t{"two_point.csv", {"r", "t", "m", "kind", "re", "im", "reference"}};
  auto row = [&](double r, double tt, const std::string& kind, cplx v, double ref) {
    t.rows.push_back({num(r), num(tt), num(m), kind, num(v.real()), num(v.imag()), num(ref)});
  };

  const auto& mr = c.reals("solver.mr_points");
  std::vector<double> w(mr.size()), ref(mr.size());
  parallel_for(mr.size(), threads, [&](std::size_t i) {
    const double r = mr[i] / m;
    w[i] = wightman_equal_time(r, m);
    ref[i] = m * std::cyl_bessel_k(1.0, mr[i]) / (4 * kPi * kPi * r);
  });
  double rel = 0.0;
  for (std::size_t i = 0; i < mr.size(); ++i) {
    rel = std::max(rel, std::abs(w[i] / ref[i] - 1.0));
    row(mr[i] / m, 0.0, "wightman", w[i], ref[i]);
  }
  out.checks.push_back(make_check("equal-time Wightman vs m K1(mr)/(4 pi^2 r), relative", rel,
                                  Relation::le, c.real("checks.wightman_rtol")));

  std::vector<std::pair<double, double>> pts;
  for (double tt : c.reals("solver.times"))
    for (double d : c.reals("solver.offsets")) pts.push_back({tt, tt + d});
  std::vector<double> pj(pts.size());
  std::vector<cplx> nw(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    pj[i] = pauli_jordan(pts[i].first, pts[i].second, m, q);
    nw[i] = nw_overlap(pts[i].first, pts[i].second, m, q);
  });
  double pj_max = 0.0, nw_min = INFINITY;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pj_max = std::max(pj_max, std::abs(pj[i]));
    nw_min = std::min(nw_min, std::abs(nw[i]));
    row(pts[i].second, pts[i].first, "pauli_jordan", pj[i], 0.0);
    row(pts[i].second, pts[i].first, "nw_overlap", nw[i], 0.0);
  }
  out.checks.push_back(make_check("Pauli-Jordan at spacelike points (max abs)", pj_max,
                                  Relation::le, c.real("checks.pj_tol")));
  // A vanishing commutator residual is replaced by the smallest normal double
  // so the ratio stays finite.
  out.checks.push_back(make_check("NW overlap / Pauli-Jordan residual at spacelike points",
                                  nw_min / std::max(pj_max, 2.2250738585072014e-308),
                                  Relation::ge, c.real("checks.contrast")));

  const double tf = c.real("solver.falloff_t");
  const auto& rs = c.reals("solver.falloff_r");
  std::vector<cplx> fv(rs.size());
  parallel_for(rs.size(), threads, [&](std::size_t i) { fv[i] = nw_overlap(tf, rs[i], m, q); });
  std::vector<double> s, y;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (rs[i] <= tf) throw ConfigError("falloff_r values must exceed falloff_t");
    const double sr = std::sqrt(rs[i] * rs[i] - tf * tf);
    s.push_back(sr);
    y.push_back(std::log(std::abs(fv[i])) + 2.5 * std::log(sr));
    row(rs[i], tf, "nw_overlap", fv[i], 0.0);
  }
  const double alpha = -linear_fit(s, y).slope;
  out.checks.push_back(make_check("NW falloff rate / m - 1 (abs)", std::abs(alpha / m - 1.0),
                                  Relation::le, c.real("checks.falloff_rtol")));
  out.tables.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------

ComplexField complex_bump(const GridSpec& g, double centre, double width) {
  const auto b = poly_bump(g, Point{centre, 0, 0}, width, 1.0, 6);
  ComplexField f(g, 1);
  for (std::size_t i = 0; i < g.sites(); ++i) f.at(i, 0) = b.at(i, 0);
  return f;
}

Outcome run_nw_probe(const ScenarioConfig& c, std::size_t threads) {
  Outcome out;
  const auto levels = as_sizes(c.integers("grid.levels"));
  const double L = c.real("grid.length"), ctr = c.real("region.center"),
               r = c.real("region.radius"), w = c.real("region.bump_width"),
               m = c.real("solver.mass"), T = c.real("solver.time"), gap = c.real("region.gap");
  const auto R = Region::ball(ctr, r);
  const auto& ds = c.reals("solver.distances");
  const std::size_t nl = levels.size();
  std::vector<double> pen(nl + ds.size());
  parallel_for(pen.size(), threads, [&](std::size_t i) {
    const std::size_t n = i < nl ? levels[i] : levels.back();
    const double d = i < nl ? gap : ds[i - nl];
    const auto g = make_grid(1, n, L / static_cast<double>(n));
    pen[i] = localization::nw_locality_probe(complex_bump(g, ctr + r + d + w, w), R, m, T)
                 .penetration;
  });
  std::vector<double> h;
  Table lt{"refinement.csv", {"extent", "h", "penetration"}};
  lt.x = "h";
  lt.y = {"penetration"};
  lt.logy = true;
  for (std::size_t i = 0; i < nl; ++i) {
    h.push_back(L / static_cast<double>(levels[i]));
    lt.add({static_cast<double>(levels[i]), h.back(), pen[i]});
  }
  const std::vector<double> lvl(pen.begin(), pen.begin() + static_cast<long>(nl));
  std::vector<double> logp;
  Table dt{"distance.csv", {"distance", "penetration"}};
  dt.x = "distance";
  dt.y = {"penetration"};
  dt.logy = true;
  double pmin = INFINITY;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    pmin = std::min(pmin, pen[nl + k]);
    logp.push_back(std::log(pen[nl + k]));
    dt.add({ds[k], pen[nl + k]});
  }
  out.checks.push_back(make_check("smallest NW penetration into the contracting cone", pmin,
                                  Relation::ge, c.real("checks.min_penetration")));
  out.checks.push_back(make_check("penetration refinement order (abs)",
                                  std::abs(power_law_fit(h, lvl).slope), Relation::le,
                                  c.real("checks.max_order")));
  const double rate = -linear_fit(ds, logp).slope;
  out.checks.push_back(make_check("penetration decay rate / m - 1 (abs)", std::abs(rate / m - 1.0),
                                  Relation::le, c.real("checks.rate_rtol")));
  out.tables.push_back(std::move(lt));
  out.tables.push_back(std::move(dt));
  return out;
}

// ---------------------------------------------------------------------------

Outcome run_fock(const ScenarioConfig& c, std::size_t threads) {
  using namespace localization;
  Outcome out;
  const std::size_t L = c.count("grid.extent");
  const double h = c.real("grid.length") / static_cast<double>(L);
  SiteMask inside(L, 0);
  for (auto s : c.integers("region.sites")) inside[static_cast<std::size_t>(s)] = 1;
  const auto seed = static_cast<std::uint64_t>(c.integers("solver.seeds").front());
  const std::size_t n_max = c.count("solver.n_max"), states = c.count("solver.states");

  struct Row {
    double trace = 0, min_eig = 0, cross = 0, entropy = 0, purity = 0;
  };
  std::vector<Row> rows(states);
  parallel_for(states, threads, [&](std::size_t k) {
    const auto st = fock_regional_state(random_fock_state(L, h, n_max, seed + k), inside);
    rows[k] = {st.trace(), st.min_eigenvalue(), st.cross_sector_norm(), st.entropy(), st.purity()};
  });
  double tr = 0.0, eig = INFINITY;
  Table t{"states.csv", {"state", "trace", "min_eigenvalue", "cross_sector_norm", "entropy", "purity"}};
  t.x = "state";
  t.y = {"entropy", "purity"};
  for (std::size_t k = 0; k < states; ++k) {
    tr = std::max(tr, std::abs(rows[k].trace - 1.0));
    eig = std::min(eig, rows[k].min_eig);
    t.add({static_cast<double>(k), rows[k].trace, rows[k].min_eig, rows[k].cross, rows[k].entropy,
           rows[k].purity});
  }
  out.checks.push_back(make_check("max |trace - 1|", tr, Relation::le, c.real("checks.trace_tol")));
  out.checks.push_back(
      make_check("minimum eigenvalue", eig, Relation::ge, -c.real("checks.eig_tol")));

  // A normalised packet straddling the region.
  std::vector<cplx> one(L);
  double norm = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    const double x = (static_cast<double>(i) - 0.4 * static_cast<double>(L)) /
                     (0.2 * static_cast<double>(L));
    one[i] = std::exp(-x * x) * std::polar(1.0, 0.7 * static_cast<double>(i));
    norm += std::norm(one[i]) * h;
  }
  double p = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    one[i] /= std::sqrt(norm);
    if (inside[i]) p += std::norm(one[i]) * h;
  }
  const auto single = fock_regional_state(product_state(one, 1, h), inside);
  out.checks.push_back(make_check("one-particle purity vs p^2 + (1-p)^2",
                                  std::abs(single.purity() - regional_probability(p).purity),
                                  Relation::le, c.real("checks.purity_tol")));
  if (n_max >= 2) {
    const auto pair = fock_regional_state(product_state(one, 2, h), inside).number_distribution();
    const double dev = std::max({std::abs(pair[0] - (1 - p) * (1 - p)),
                                 std::abs(pair[1] - 2 * p * (1 - p)), std::abs(pair[2] - p * p)});
    out.checks.push_back(make_check("two-particle number distribution vs Binomial(2, p)", dev,
                                    Relation::le, c.real("checks.binomial_tol")));
  }
  out.tables.push_back(std::move(t));
  return out;
}

Outcome run_nonseparability(const ScenarioConfig& c) {
  Outcome out;
  const auto r = audit::nonseparability_demo();
  const double tol = c.real("checks.reduced_tol");
  out.checks.push_back(make_check("singlet and triplet reduced states vs identity/2",
                                  std::max(r.singlet_vs_half_identity, r.triplet_vs_half_identity),
                                  Relation::le, tol));
  out.checks.push_back(make_check("reduced-state change under the local flip",
                                  r.flipped_reduced_change, Relation::le, tol));
  out.checks.push_back(make_check("fidelity of the flipped singlet with the singlet",
                                  r.flipped_fidelity, Relation::le, tol));
  return out;
}

Outcome dispatch(const ScenarioConfig& c, std::size_t threads) {
  switch (c.experiment) {
    case Experiment::kg_locality: return run_wave(c, threads, false);
    case Experiment::em_locality: return run_wave(c, threads, true);
    case Experiment::dirac_locality: return run_dirac(c, threads);
    case Experiment::sqrt_kg_leakage: return run_sqrt_kg(c, threads);
    case Experiment::gaussian_locality: return run_gaussian(c);
    case Experiment::entropy_scan: return run_entropy(c);
    case Experiment::two_point_scan: return run_two_point(c, threads);
    case Experiment::nw_probe: return run_nw_probe(c, threads);
    case Experiment::fock_regional: return run_fock(c, threads);
    case Experiment::nonseparability: return run_nonseparability(c);
  }
  throw ConfigError("unhandled experiment");
}

std::string py_list(const std::vector<std::string>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::string("\"") + v[i] + "\"";
  return s + "]";
}

void write_plot_script(const std::filesystem::path& dir, const std::vector<Table>& tables) {
  std::ofstream f(dir / "plot.py");
  f << "#!/usr/bin/env python3\n"
       "\"\"\"Plots the CSV tables next to this script into PNG files.\"\"\"\n"
       "import csv\n"
       "import pathlib\n\n"
       "import matplotlib\n\n"
       "matplotlib.use(\"Agg\")\n"
       "import matplotlib.pyplot as plt  # noqa: E402\n\n"
       "HERE = pathlib.Path(__file__).resolve().parent\n"
       "PLOTS = [\n";
  for (const auto& t : tables)
    f << "    (\"" << t.file << "\", \"" << t.x << "\", " << py_list(t.y) << ", "
      << (t.logy ? "True" : "False") << ", " << (t.group.empty() ? "None" : "\"" + t.group + "\"")
      << "),\n";
  f << "]\n\n\n"
       "def main():\n"
       "    for name, x, ys, logy, group in PLOTS:\n"
       "        with open(HERE / name, newline=\"\") as fh:\n"
       "            rows = list(csv.DictReader(fh))\n"
       "        groups = sorted({r[group] for r in rows}) if group else [None]\n"
       "        fig, ax = plt.subplots()\n"
       "        for g in groups[:8]:\n"
       "            sel = [r for r in rows if group is None or r[group] == g]\n"
       "            for y in ys:\n"
       "                vals = [abs(float(r[y])) for r in sel]\n"
       "                label = y if g is None else f\"{y} ({group} {g})\"\n"
       "                ax.plot([float(r[x]) for r in sel], vals, marker=\"o\", label=label)\n"
       "        if logy:\n"
       "            ax.set_yscale(\"log\")\n"
       "        ax.set_xlabel(x)\n"
       "        ax.legend(fontsize=\"small\")\n"
       "        fig.savefig(HERE / (pathlib.Path(name).stem + \".png\"), dpi=120)\n"
       "        plt.close(fig)\n\n\n"
       "if __name__ == \"__main__\":\n"
       "    main()\n";
}

void write_table(const std::filesystem::path& dir, const Table& t) {
  std::ofstream f(dir / t.file);
  for (std::size_t i = 0; i < t.header.size(); ++i) f << (i ? "," : "") << t.header[i];
  f << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << r[i];
    f << '\n';
  }
  if (!f) throw std::runtime_error("failed to write " + (dir / t.file).string());
}

}  // namespace

std::string to_string(Relation r) {
  switch (r) {
    case Relation::le: return "<=";
    case Relation::lt: return "<";
    case Relation::ge: return ">=";
    case Relation::gt: return ">";
    case Relation::eq: return "==";
  }
  return "?";
}

Check make_check(std::string name, double value, Relation relation, double bound) {
  bool pass = false;
  switch (relation) {
    case Relation::le: pass = value <= bound; break;
    case Relation::lt: pass = value < bound; break;
    case Relation::ge: pass = value >= bound; break;
    case Relation::gt: pass = value > bound; break;
    case Relation::eq: pass = value == bound; break;
  }
  return {std::move(name), value, bound, relation, pass};
}

std::size_t threads_from_env() {
  const char* v = std::getenv("CONELAB_THREADS");
  if (!v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

int RunReport::exit_code() const {
  if (error_kind == "config") return 2;
  if (!error.empty()) return 3;
  return pass ? 0 : 1;
}

nlohmann::json RunReport::to_json(bool include_wall_clock) const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json cj{{"name", c.name},
                      {"relation", scenario::to_string(c.relation)},
                      {"bound", c.bound},
                      {"pass", c.pass}};
    // JSON has no infinities; keep the value textual in that case.
    if (std::isfinite(c.value))
      cj["value"] = c.value;
    else
      cj["value"] = num(c.value);
    j["checks"].push_back(cj);
  }
  j["pass"] = pass;
  if (!error.empty()) j["error"] = {{"kind", error_kind}, {"message", error}};
  if (include_wall_clock) j["wall_clock_s"] = wall_clock_s;
  j["versions"] = versions;
  return j;
}

nlohmann::json versions() {
  return {{"conelab", CONELAB_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"fftw", fft_backend_version()},
          {"boost", BOOST_LIB_VERSION},
          {"compiler", __VERSION__}};
}

RunReport run(const ScenarioConfig& config, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.scenario = config.to_json();
  report.versions = versions();
  const std::size_t threads = options.threads ? options.threads : threads_from_env();
  Outcome outcome;
  try {
    outcome = dispatch(config, threads);
    report.checks = outcome.checks;
    report.pass = !report.checks.empty() &&
                  std::all_of(report.checks.begin(), report.checks.end(),
                              [](const Check& c) { return c.pass; });
  } catch (const ConfigError& e) {
    report.error = e.what();
    report.error_kind = "config";
  } catch (const Error& e) {
    report.error = e.what();
    report.error_kind = "domain";
  }
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (options.write_artifacts) {
    const std::filesystem::path dir =
        options.out_dir.empty() ? std::filesystem::path(config.text("output.dir")) : options.out_dir;
    std::filesystem::create_directories(dir);
    if (config.flag("output.csv"))
      for (const auto& t : outcome.tables) write_table(dir, t);
    if (config.flag("output.plot_script") && config.flag("output.csv") && !outcome.tables.empty())
      write_plot_script(dir, outcome.tables);
    std::ofstream f(dir / "report.json");
    f << report.to_json().dump(2) << '\n';
    if (!f) throw std::runtime_error("failed to write " + (dir / "report.json").string());
  }
  return report;
}

}  // namespace conelab::scenario
