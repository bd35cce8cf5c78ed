#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "conelab/audit.hpp"
#include "conelab/errors.hpp"
#include "doctest.h"

using namespace conelab;
using namespace conelab::audit;

namespace {

struct Twin {
  wave::WaveState a, b;
  Region base, support;
};

// Smooth periodic background plus a compact bump added to u (and v when
// `both`) of every component; the domain is [0, 1).
Twin make_twin(std::size_t n, double mass, double cfl, double bump_center,
               double bump_width, unsigned seed, int components = 1,
               bool both = false) {
  const auto g = make_grid(1, n, 1.0 / n);
  Twin tw{wave::make_state(g, components, mass, cfl), {}, Region::ball(0.3, 0.15),
          Region::ball(bump_center, bump_width)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int c = 0; c < components; ++c)
    for (int k = 1; k <= 4; ++k) {
      const double au = nd(rng) / k, av = nd(rng) / k, ph = nd(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = g.coord(i)[0];
        tw.a.u.at(i, c) += au * std::sin(2 * std::numbers::pi * k * x + ph);
        tw.a.v.at(i, c) += av * std::cos(2 * std::numbers::pi * k * x + ph);
      }
    }
  tw.b = tw.a;
  const auto bump = poly_bump(g, Point{bump_center, 0, 0}, bump_width, 0.7, 6);
  for (int c = 0; c < components; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      tw.b.u.at(i, c) += bump.at(i, 0);
      if (both) tw.b.v.at(i, c) -= 0.5 * bump.at(i, 0);
    }
  return tw;
}

}  // namespace

TEST_CASE("identical twins give an all-zero report") {
  auto tw = make_twin(128, 1.0, 0.5, 0.6, 0.05, 1);
  tw.b = tw.a;
  TwinRunOptions opt;
  opt.history_stride = 5;
  const auto r = twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {}, opt);
  for (const auto* rep : {&r.sup, &r.l2, &r.raw_sup, &r.raw_l2}) {
    CHECK_NOTHROW(rep->validate());
    CHECK(rep->worst_inside() == 0.0);
    CHECK(rep->worst_outside() == 0.0);
  }
  const auto e = frustum_energy_check(r.wave_history, tw.base, 1.0);
  CHECK(e.e_base == 0.0);
  CHECK(e.max_top() == 0.0);
}

TEST_CASE("twin run stops before the contracting cone vanishes") {
  const auto tw = make_twin(128, 0.0, 1.0, 0.6, 0.05, 2);
  const auto r = twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {});
  const double dt = tw.a.dt();
  CHECK(r.sup.times.back() < 0.15);
  CHECK(r.sup.times.back() + dt >= 0.15 - 1e-12);
  CHECK(r.sup.times.size() == r.steps + 1);
  TwinRunOptions opt;
  opt.horizon = 3;
  CHECK(twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {}, opt).steps == 3);
}

TEST_CASE("precondition: disagreement on the base is reported with its sites") {
  auto tw = make_twin(64, 0.0, 1.0, 0.7, 0.05, 3);
  tw.b.v.at(19, 0) += 1e-9;  // x = 0.297, inside R
  try {
    twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {});
    FAIL("expected PreconditionError");
  } catch (const PreconditionError& e) {
    CHECK(e.sites() == std::vector<std::size_t>{19});
  }
  auto tw2 = make_twin(64, 0.0, 1.0, 0.7, 0.05, 3);
  CHECK_THROWS_AS(twin_run_divergence(tw2.a, tw2.b, tw2.base, Region::ball(0.7, 0.01), {}),
                  PreconditionError);
}

TEST_CASE("massless KG at cfl = 1: zero difference inside the contracting cone") {
  for (unsigned seed = 0; seed < 4; ++seed) {
    const auto tw = make_twin(512, 0.0, 1.0, 0.52 + 0.02 * seed, 0.05, seed);
    const auto r = twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {});
    CHECK(r.sup.worst_inside() <= 1e-13);
    CHECK(r.raw_sup.worst_inside() <= 1e-13);
    // d'Alembert moves the bump rigidly, so nothing escapes the expanding cone.
    CHECK(r.raw_sup.worst_outside() <= 1e-13);
  }
}

TEST_CASE("larger guard bands never increase the inside statistic") {
  const auto tw = make_twin(256, 1.0, 0.5, 0.5, 0.04, 5);
  double prev_in = INFINITY, prev_out = INFINITY;
  for (int guard : {0, 1, 2, 4, 8}) {
    TwinRunOptions opt;
    opt.guard_band = guard;
    const auto r = twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {}, opt);
    for (std::size_t i = 0; i < r.sup.times.size(); ++i) {
      CHECK(r.sup.max_inside_contracting[i] <= r.raw_sup.max_inside_contracting[i]);
      CHECK(r.sup.max_outside_expanding[i] <= r.raw_sup.max_outside_expanding[i]);
    }
    CHECK(r.sup.worst_inside() <= prev_in);
    CHECK(r.sup.worst_outside() <= prev_out);
    prev_in = r.sup.worst_inside();
    prev_out = r.sup.worst_outside();
  }
}

TEST_CASE("differences vanish bit-exactly outside the numerical cone") {
  for (double cfl : {0.3, 0.5, 1.0}) {
    const auto tw = make_twin(256, 1.0, cfl, 0.6, 0.03, 6, 1, true);
    TwinRunOptions opt;
    opt.history_stride = 1;
    opt.horizon = 40;
    const auto r = twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {}, opt);
    const auto& g = tw.a.grid;
    SiteMask seed(g.sites(), 0);
    for (std::size_t i = 0; i < g.sites(); ++i)
      seed[i] = tw.a.u.at(i, 0) != tw.b.u.at(i, 0) || tw.a.v.at(i, 0) != tw.b.v.at(i, 0);
    for (std::size_t n = 0; n < r.wave_history.size(); ++n) {
      const auto cone_u = dilate_sites(g, seed, n);
      const auto cone_v = dilate_sites(g, seed, n + 1);
      bool clean = true;
      for (std::size_t i = 0; i < g.sites(); ++i) {
        if (!cone_u[i] && r.wave_history[n].u.at(i, 0) != 0.0) clean = false;
        if (!cone_v[i] && r.wave_history[n].v.at(i, 0) != 0.0) clean = false;
      }
      CHECK(clean);
    }
  }
}

TEST_CASE("massive KG at cfl = 0.5: leakage converges at second order or better") {
  std::vector<double> h, in, out;
  for (std::size_t n : {512, 1024, 2048}) {
    const auto tw = make_twin(n, 1.0, 0.5, 0.458 + 0.05, 0.05, 9);
    const auto r = twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {});
    h.push_back(1.0 / n);
    in.push_back(r.sup.worst_inside());
    out.push_back(r.sup.worst_outside());
  }
  const auto oin = fitted_order(h, in, 1.9, 1e-15);
  const auto oout = fitted_order(h, out, 1.9, 1e-15);
  CHECK(in[0] > 1e-12);  // the statistic is measurable, not rounding noise
  CHECK(oin.order_ok);
  CHECK(oout.order_ok);
  CHECK(oout.fit.slope >= 1.9);
}

TEST_CASE("frustum energy: exterior difference") {
  std::vector<double> h, top;
  for (std::size_t n : {512, 1024, 2048}) {
    const auto tw = make_twin(n, 1.0, 0.5, 0.508, 0.05, 10);
    TwinRunOptions opt;
    opt.history_stride = 1;
    const auto r = twin_run_divergence(tw.a, tw.b, tw.base, tw.support, {}, opt);
    const auto e = frustum_energy_check(r.wave_history, tw.base, 1.0);
    CHECK(e.e_base == 0.0);
    h.push_back(1.0 / n);
    top.push_back(e.max_top());
  }
  const auto rc = calibrate_tolerance(h, top, 1e-28);
  CHECK(rc.pass);
  CHECK(top[2] < top[0]);
}

TEST_CASE("frustum energy: interior difference cannot grow into the cone") {
  std::vector<double> h, slack;
  for (std::size_t n : {256, 512, 1024}) {
    // The twins differ inside R, so the history is built by stepping both.
    const auto tw = make_twin(n, 1.0, 0.5, 0.3, 0.06, 11, 1, true);
    std::vector<wave::WaveState> hist;
    auto sa = tw.a, sb = tw.b;
    while (sa.t < 0.15) {
      auto d = sa;
      for (std::size_t k = 0; k < d.u.values().size(); ++k) {
        d.u.values()[k] -= sb.u.values()[k];
        d.v.values()[k] -= sb.v.values()[k];
      }
      hist.push_back(d);
      sa = wave::step_leapfrog(sa);
      sb = wave::step_leapfrog(sb);
    }
    struct { std::vector<wave::WaveState> wave_history; } r{hist};
    const auto e = frustum_energy_check(r.wave_history, Region::ball(0.3, 0.15), 1.0);
    CHECK(e.e_base > 0.0);
    // Global energy of the difference is conserved to O(dt^2).
    auto total = [](const wave::WaveState& s) { return wave::total_energy(s); };
    const double e0 = total(r.wave_history.front());
    const double dt = tw.a.dt();
    double drift = 0.0;
    for (const auto& s : r.wave_history) drift = std::max(drift, std::abs(total(s) - e0));
    CHECK(drift <= 1500.0 * dt * dt * e0);
    h.push_back(1.0 / n);
    slack.push_back(std::max(e.max_slack(), 0.0));
  }
  const auto rc = calibrate_tolerance(h, slack, 1e-14 * 1.0);
  CHECK(rc.pass);
}

TEST_CASE("Dirac twin runs and the probability frustum") {
  for (bool inside : {false, true}) {
    const auto g = make_grid(1, 512, 1.0 / 512);
    auto a = dirac::make_spinor(g, 1.0);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    for (int c = 0; c < 2; ++c)
      for (int k = 1; k <= 3; ++k) {
        const cplx amp{nd(rng), nd(rng)};
        for (std::size_t i = 0; i < g.sites(); ++i)
          a.psi.at(i, c) += amp * std::exp(cplx{0, 2 * std::numbers::pi * k * g.coord(i)[0]});
      }
    auto b = a;
    const double c0 = inside ? 0.3 : 0.51;
    const auto bump = poly_bump(g, Point{c0, 0, 0}, 0.05, 1.0, 6);
    for (std::size_t i = 0; i < g.sites(); ++i) b.psi.at(i, 0) += bump.at(i, 0);
    const auto base = Region::ball(0.3, 0.15);
    TwinRunOptions opt;
    opt.history_stride = 1;
    const double dt = 0.5 * g.spacing;
    if (inside) {
      CHECK_THROWS_AS(twin_run_divergence(a, b, dt, base, Region::ball(c0, 0.05), opt),
                      PreconditionError);
      continue;
    }
    const auto r = twin_run_divergence(a, b, dt, base, Region::ball(c0, 0.05), opt);
    const auto e = dirac_frustum_check(r.dirac_history, base);
    CHECK(e.e_base == 0.0);
    CHECK(e.max_top() <= 1e-12);
    CHECK(r.sup.worst_inside() <= 1e-4);
  }
}

TEST_CASE("Dirac frustum: interior difference is bounded by its base value") {
  const auto g = make_grid(1, 1024, 1.0 / 1024);
  auto d = dirac::make_spinor(g, 1.0);
  const auto bump = poly_bump(g, Point{0.3, 0, 0}, 0.05, 1.0, 6);
  for (std::size_t i = 0; i < g.sites(); ++i) {
    d.psi.at(i, 0) = bump.at(i, 0);
    d.psi.at(i, 1) = cplx{0, 0.5} * bump.at(i, 0);
  }
  std::vector<dirac::SpinorState> hist{d};
  const double dt = 0.5 * g.spacing;
  for (int n = 1; n * dt < 0.15; ++n) {
    hist.push_back(dirac::step_fd(hist.back(), dt));
    hist.back().t = n * dt;
  }
  const auto e = dirac_frustum_check(hist, Region::ball(0.3, 0.15));
  CHECK(e.e_base > 0.0);
  CHECK(e.max_slack() <= 1e-6 * e.e_base);
  for (std::size_t i = 1; i < e.e_top.size(); ++i)
    CHECK(e.e_top[i] <= e.e_top[i - 1] * (1 + 1e-6) + 1e-12);
}

TEST_CASE("calibrate_tolerance and fitted_order") {
  const std::vector<double> h{0.1, 0.05, 0.025};
  const auto rc = calibrate_tolerance(h, {3e-2, 7.5e-3, 1.8e-3}, 1e-16);
  CHECK(rc.calibrated.order == doctest::Approx(2.0));
  CHECK(rc.tolerance == doctest::Approx(1.875e-3));
  CHECK(rc.pass);
  CHECK_FALSE(calibrate_tolerance(h, {3e-2, 7.5e-3, 4e-3}, 1e-16).pass);
  const auto zero = calibrate_tolerance(h, {0, 0, 0}, 1e-16);
  CHECK(zero.below_floor);
  CHECK(zero.pass);
  const auto oc = fitted_order(h, {1e-2, 2.5e-3, 6.25e-4}, 1.9, 0.0);
  CHECK(oc.fit.slope == doctest::Approx(2.0));
  CHECK(oc.fit.r2 == doctest::Approx(1.0));
  CHECK(oc.order_ok);
  CHECK_FALSE(fitted_order(h, {1e-2, 5e-3, 2.5e-3}, 1.9, 0.0).order_ok);
  CHECK_THROWS_AS(power_law_fit(std::vector<double>{1, 2}, std::vector<double>{1, 0}),
                  ConfigError);
}

TEST_CASE("non-separability demo") {
  const auto r = nonseparability_demo();
  const Eigen::Matrix2cd half = 0.5 * Eigen::Matrix2cd::Identity();
  CHECK((r.singlet_a - half).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((r.triplet_a - half).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(r.singlet_vs_triplet_reduced <= 1e-15);
  CHECK(r.singlet_triplet_fidelity < 1.0);
  CHECK(r.flipped_overlap <= 1e-15);
  CHECK(r.flipped_reduced_change <= 1e-15);
  CHECK(r.pass);
  // Oracle: (|dd> - |uu>)/sqrt 2 written out by hand.
  const double s = 1.0 / std::sqrt(2.0);
  const Eigen::Vector4cd expected(-s, 0, 0, s);
  const Eigen::Vector4cd product(1, 0, 0, 0);
  CHECK((reduced_a(expected) - half).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(reduced_a(product)(0, 0) == cplx{1.0});
  CHECK(reduced_b(product)(1, 1) == cplx{0.0});
}

TEST_CASE("report serialisation") {
  DivergenceReport r;
  r.times = {0.0, 0.1};
  r.max_inside_contracting = {0.0, 1e-3};
  r.max_outside_expanding = {0.0, 2e-3};
  std::ostringstream os;
  write_csv(os, r);
  CHECK(os.str() == "0,sup_g2_inside_contracting,0\n0,sup_g2_outside_expanding,0\n"
                    "0.1,sup_g2_inside_contracting,0.001\n0.1,sup_g2_outside_expanding,0.002\n");
  const auto j = to_json(r);
  CHECK(j["norm"] == "sup");
  CHECK(j["worst_outside"].get<double>() == 2e-3);
  r.max_outside_expanding.pop_back();
  CHECK_THROWS_AS(r.validate(), ShapeError);
  r.max_outside_expanding = {0.0, -1.0};
  CHECK_THROWS_AS(r.validate(), InvalidStateError);
}

TEST_CASE("Dirac exterior leakage shrinks under refinement") {
  std::vector<double> h, in, top;
  for (std::size_t n : {512, 1024, 2048}) {
    const auto g = make_grid(1, n, 1.0 / n);
    auto a = dirac::make_spinor(g, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      a.psi.at(i, 1) = std::exp(cplx{0, 2 * std::numbers::pi * g.coord(i)[0]});
    auto b = a;
    const auto bump = poly_bump(g, Point{0.508, 0, 0}, 0.05, 1.0, 6);
    for (std::size_t i = 0; i < n; ++i) b.psi.at(i, 0) += bump.at(i, 0);
    TwinRunOptions opt;
    opt.history_stride = 1;
    const auto r = twin_run_divergence(a, b, 0.5 * g.spacing, Region::ball(0.3, 0.15),
                                       Region::ball(0.508, 0.05), opt);
    h.push_back(1.0 / n);
    in.push_back(r.sup.worst_inside());
    top.push_back(dirac_frustum_check(r.dirac_history, Region::ball(0.3, 0.15)).max_top());
  }
  CHECK(fitted_order(h, in, 1.9, 1e-15).order_ok);
  CHECK(calibrate_tolerance(h, top, 1e-30).pass);
}
