#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "conelab/errors.hpp"
#include "conelab/fit.hpp"
#include "conelab/localization.hpp"
#include "doctest.h"
#include "fock_oracle.hpp"

using namespace conelab;
using namespace conelab::localization;
using conelab::testing::brute_reduced;
using conelab::testing::Occ;
using std::numbers::pi;

namespace {

double k1_oracle(double r, double m) {
  return m * std::cyl_bessel_k(1.0, m * r) / (4 * pi * pi * r);
}

// sigma -> 0 limit of the raw NW kernel at spacelike separation.
double nw_point_kernel_im(double t, double r, double m) {
  const double s2 = r * r - t * t;
  return m * m * t * std::cyl_bessel_k(2.0, m * std::sqrt(s2)) / (2 * pi * pi * s2);
}

FockWavefunctions random_state(std::size_t L, double h, std::size_t n_max, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  FockWavefunctions wf{L, h, std::vector<std::vector<cplx>>(n_max + 1)};
  wf.psi[0] = {cplx(nd(rng), nd(rng))};
  if (n_max >= 1)
    for (std::size_t i = 0; i < L; ++i) wf.psi[1].push_back({nd(rng), nd(rng)});
  if (n_max >= 2) {
    wf.psi[2].assign(L * L, 0.0);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = i; j < L; ++j) {
        const cplx v(nd(rng), nd(rng));
        wf.psi[2][i * L + j] = wf.psi[2][j * L + i] = v;
      }
  }
  double norm = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n)
    for (auto v : wf.psi[n]) norm += std::norm(v) * std::pow(h, n);
  for (auto& sector : wf.psi)
    for (auto& v : sector) v /= std::sqrt(norm);
  return wf;
}

std::vector<cplx> normalized_packet(std::size_t L, double h, double center, double width) {
  std::vector<cplx> v(L);
  double norm = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    const double x = (static_cast<double>(i) - center) / width;
    v[i] = std::exp(-x * x) * std::polar(1.0, 0.7 * static_cast<double>(i));
    norm += std::norm(v[i]) * h;
  }
  for (auto& z : v) z /= std::sqrt(norm);
  return v;
}

ComplexField bump_field(const GridSpec& g, double center, double width) {
  const auto b = poly_bump(g, Point{center, 0, 0}, width, 1.0, 6);
  ComplexField f(g, 1);
  for (std::size_t i = 0; i < g.sites(); ++i) f.at(i, 0) = b.at(i, 0);
  return f;
}

}  // namespace

TEST_CASE("equal-time Wightman function matches the Bessel-K form") {
  for (double m : {1.0, 0.5})
    for (double mr : {0.5, 1.0, 2.0, 3.0, 5.0}) {
      const double r = mr / m;
      const double v = wightman_equal_time(r, m);
      CHECK(v > 0.0);
      CHECK(std::abs(v / k1_oracle(r, m) - 1.0) <= 1e-6);
    }
  CHECK_THROWS_AS(wightman_equal_time(0.0, 1.0), PreconditionError);
}

TEST_CASE("r W(r) decays with log-slope approaching -m") {
  const double m = 1.0;
  std::vector<double> slopes;
  const std::vector<double> rs{0.5, 1.0, 2.0, 4.0, 8.0};
  for (std::size_t i = 0; i + 1 < rs.size(); ++i) {
    const double a = std::log(rs[i] * wightman_equal_time(rs[i], m));
    const double b = std::log(rs[i + 1] * wightman_equal_time(rs[i + 1], m));
    slopes.push_back((b - a) / (rs[i + 1] - rs[i]));
  }
  for (std::size_t i = 1; i < slopes.size(); ++i)
    CHECK(std::abs(slopes[i] + m) < std::abs(slopes[i - 1] + m));
  CHECK(std::abs(slopes.back() + m) < 0.1 * m);
}

TEST_CASE("quadratures are stable under node and cutoff doubling") {
  struct Case { TwoPointKind kind; double r, t; };
  for (const auto& c : {Case{TwoPointKind::wightman, 2.0, 0.0},
                        Case{TwoPointKind::wightman, 2.0, 1.0},
                        Case{TwoPointKind::pauli_jordan, 1.0, 2.0},
                        Case{TwoPointKind::pauli_jordan, 3.0, 1.0},
                        Case{TwoPointKind::nw_overlap, 2.0, 1.0}}) {
    TwoPointQuery q{c.r, c.t, 1.0, c.kind, {}};
    if (c.kind == TwoPointKind::wightman && c.t != 0.0) q.quadrature.sigma = 0.1;
    const auto base = evaluate(q);
    auto more = q;
    more.quadrature = base.query.quadrature;
    more.quadrature.nodes = 2 * 20 * 2000;
    auto wider = q;
    wider.quadrature.sigma = base.query.quadrature.sigma;
    wider.quadrature.cutoff = 2 * base.query.quadrature.cutoff;
    CHECK(std::abs(evaluate(more).value - base.value) < 1e-8);
    CHECK(std::abs(evaluate(wider).value - base.value) < 1e-8);
    CHECK(base.est_error < 1e-8);
  }
}

TEST_CASE("Pauli-Jordan function: t = 0, spacelike zero, oddness, timelike oracle") {
  for (double r : {0.3, 1.0, 4.0}) CHECK(pauli_jordan(0.0, r, 1.0) == 0.0);
  CHECK(std::abs(pauli_jordan(1.0, 2.0, 1.0)) <= 1e-8);
  for (double t : {0.5, 1.5, 2.5})
    CHECK(pauli_jordan(-t, 1.0, 1.0) == doctest::Approx(-pauli_jordan(t, 1.0, 1.0)));

  // Two independent quadratures of the timelike point.
  QuadratureSettings a, b;
  a.sigma = 0.004;
  b.sigma = 0.002;
  b.nodes = 20 * 6000;
  const double va = pauli_jordan(2.0, 1.0, 1.0, a);
  const double vb = pauli_jordan(2.0, 1.0, 1.0, b);
  CHECK(va != 0.0);
  CHECK(std::abs(va - vb) <= 1e-4 * std::abs(vb));
  const double s = std::sqrt(3.0);
  CHECK(vb == doctest::Approx(-std::cyl_bessel_j(1.0, s) / (4 * pi * s)).epsilon(1e-4));
}

TEST_CASE("NW overlap: precondition, t = 0 packet overlap, point-kernel limit") {
  QuadratureSettings zero;
  zero.sigma = 0.0;
  CHECK_THROWS_AS(nw_overlap(1.0, 2.0, 1.0, zero), PreconditionError);

  QuadratureSettings q;
  q.sigma = 0.1;
  for (double r : {0.3, 0.5, 0.8}) {
    const auto v = nw_overlap(0.0, r, 1.0, q);
    const double bound = std::exp(-r * r / (4 * 0.01));
    CHECK(std::abs(v) <= bound * (1 + 1e-8));
    CHECK(std::abs(v) == doctest::Approx(bound).epsilon(1e-8));
  }
  CHECK(std::abs(nw_overlap(0.0, 0.0, 1.0, q)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(nw_overlap(0.0, 0.0, 3.0, q)) == doctest::Approx(1.0).epsilon(1e-10));

  QuadratureSettings fine;
  fine.sigma = 0.02;
  const auto res = evaluate({3.0, 1.0, 1.0, TwoPointKind::nw_overlap, fine});
  const double raw_im = res.value.imag() / res.normalization;
  CHECK(raw_im == doctest::Approx(nw_point_kernel_im(1.0, 3.0, 1.0)).epsilon(5e-3));
  CHECK(std::abs(res.value.real()) <= 1e-3 * std::abs(res.value.imag()));
}

TEST_CASE("spacelike contrast: NW and positive-frequency overlaps survive, commutator vanishes") {
  for (double t : {0.5, 1.0, 1.5, 2.0})
    for (double dr : {1.0, 2.0}) {
      const double r = t + dr;
      const double pj = std::abs(pauli_jordan(t, r, 1.0));
      CHECK(pj <= 1e-8);
      CHECK(std::abs(nw_overlap(t, r, 1.0)) >= 1e3 * std::max(pj, 1e-14));
      CHECK(std::abs(wightman(t, r, 1.0)) > 1e-4);
    }
}

TEST_CASE("NW spacelike falloff") {
  const double m = 1.0, t = 1.0;
  // Raw slope at r in {2,3,4} follows the point kernel.
  std::vector<double> r1, l1, o1;
  for (double r : {2.0, 3.0, 4.0}) {
    r1.push_back(r);
    l1.push_back(std::log(std::abs(nw_overlap(t, r, m))));
    o1.push_back(std::log(nw_point_kernel_im(t, r, m)));
  }
  CHECK(linear_fit(r1, l1).slope == doctest::Approx(linear_fit(r1, o1).slope).epsilon(0.03));
  // Exponential rate after removing the s^{-5/2} prefactor.
  std::vector<double> s, y;
  for (double r = 4.0; r <= 8.0; r += 1.0) {
    const double sr = std::sqrt(r * r - t * t);
    s.push_back(sr);
    y.push_back(std::log(std::abs(nw_overlap(t, r, m))) + 2.5 * std::log(sr));
  }
  const double alpha = -linear_fit(s, y).slope;
  CHECK(std::abs(alpha - m) <= 0.2 * m);
}

TEST_CASE("two-point validation and CSV") {
  CHECK_THROWS_AS(evaluate({1.0, 0.0, 0.0, TwoPointKind::wightman, {}}), ConfigError);
  CHECK_THROWS_AS(evaluate({-1.0, 0.0, 1.0, TwoPointKind::wightman, {}}), ConfigError);
  QuadratureSettings low;
  low.cutoff = 10.0;
  CHECK_THROWS_AS(evaluate({1.0, 0.0, 1.0, TwoPointKind::wightman, low}), ConfigError);
  QuadratureSettings narrow;
  narrow.sigma = 0.1;
  narrow.cutoff = 50.0;
  CHECK_THROWS_AS(evaluate({1.0, 1.0, 1.0, TwoPointKind::nw_overlap, narrow}), ConfigError);
  QuadratureSettings coarse;
  coarse.nodes = 40;
  CHECK_THROWS_AS(evaluate({5.0, 1.0, 1.0, TwoPointKind::nw_overlap, coarse}),
                  QuadratureError);
  CHECK(two_point_kind_from_string("pauli_jordan") == TwoPointKind::pauli_jordan);
  CHECK_THROWS_AS(two_point_kind_from_string("feynman"), ConfigError);

  std::ostringstream os;
  write_two_point_csv(os, {evaluate({1.0, 0.0, 1.0, TwoPointKind::wightman, {}}),
                           evaluate({2.0, 1.0, 1.0, TwoPointKind::nw_overlap, {}})});
  const auto text = os.str();
  CHECK(text.rfind("r,t,m,kind,re,im,est_error\n", 0) == 0);
  CHECK(text.find(",nw_overlap,") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("single-particle regional state") {
  const auto g = make_grid(1, 64, 0.25);
  const auto R = Region::ball(8.0, 2.0);
  auto place = [&](double c) {
    const auto b = bump_field(g, c, 1.0);
    ComplexField f = b;
    double n = 0;
    for (auto& z : f.values()) n += std::norm(z) * g.spacing;
    for (auto& z : f.values()) z /= std::sqrt(n);
    return f;
  };
  auto in = single_particle_regional_state(place(8.0), R);
  CHECK(in.p == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(in.purity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(in.entropy == doctest::Approx(0.0));
  auto out = single_particle_regional_state(place(13.0), R);
  CHECK(out.p == 0.0);
  CHECK(out.purity == 1.0);
  CHECK(out.entropy == 0.0);

  // Packet symmetric about the midpoint between sites 31 and 32.
  const auto half = Region::site_set([] {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < 32; ++i) s.push_back(i);
    return s;
  }());
  auto edge = single_particle_regional_state(place(31.5 * 0.25), half);
  CHECK(std::abs(edge.p - 0.5) <= 1e-10);
  CHECK(edge.purity == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(edge.entropy == doctest::Approx(std::log(2.0)).epsilon(1e-10));

  ComplexField bad = place(8.0);
  bad.at(3, 0) += 0.1;
  CHECK_THROWS_AS(single_particle_regional_state(bad, R), InvalidStateError);
}

TEST_CASE("Fock regional state: one particle reproduces the single-particle block") {
  const std::size_t L = 12;
  const double h = 0.5;
  const auto one = normalized_packet(L, h, 5.0, 2.5);
  SiteMask inside(L, 0);
  for (std::size_t i = 0; i < 6; ++i) inside[i] = 1;
  const auto st = fock_regional_state(product_state(one, 1, h), inside);
  double p = 0.0;
  for (std::size_t i = 0; i < 6; ++i) p += std::norm(one[i]) * h;
  const auto expect = regional_probability(p);
  const auto dist = st.number_distribution();
  CHECK(dist[0] == doctest::Approx(1 - p).epsilon(1e-12));
  CHECK(dist[1] == doctest::Approx(p).epsilon(1e-12));
  CHECK(std::abs(st.purity() - expect.purity) <= 1e-12);
  CHECK(st.entropy() == doctest::Approx(expect.entropy).epsilon(1e-10));
  CHECK(st.cross_sector_norm() == 0.0);
  // Block entries are psi(x) psi*(x') h on R.
  const auto& blk = st.blocks.at({1, 1});
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b)
      CHECK(std::abs(blk(a, b) - one[a] * std::conj(one[b]) * h) <= 1e-14);
  CHECK_NOTHROW(st.validate());
}

TEST_CASE("Fock regional state: product of two particles gives Binomial(2, p)") {
  const std::size_t L = 10;
  const double h = 1.0;
  const auto one = normalized_packet(L, h, 4.0, 2.0);
  SiteMask inside(L, 0);
  for (std::size_t i = 0; i < L / 2; ++i) inside[i] = 1;
  double p = 0.0;
  for (std::size_t i = 0; i < L / 2; ++i) p += std::norm(one[i]) * h;
  const auto st = fock_regional_state(product_state(one, 2, h), inside);
  CHECK(std::abs(st.trace() - 1.0) <= 1e-10);
  const auto d = st.number_distribution();
  CHECK(d[0] == doctest::Approx((1 - p) * (1 - p)).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(2 * p * (1 - p)).epsilon(1e-12));
  CHECK(d[2] == doctest::Approx(p * p).epsilon(1e-12));
  CHECK(st.min_eigenvalue() >= -1e-10);

  const auto three = fock_regional_state(product_state(one, 3, h), inside);
  CHECK_NOTHROW(three.validate());
  CHECK(three.number_distribution()[3] == doctest::Approx(p * p * p).epsilon(1e-12));
}

TEST_CASE("Fock regional state agrees with the brute-force partial trace") {
  const std::size_t L = 12;
  SiteMask inside(L, 0);
  for (std::size_t i : {1, 2, 3, 7, 8, 11}) inside[i] = 1;
  for (unsigned seed = 1; seed <= 8; ++seed) {
    const auto wf = random_state(L, 0.5, 2, seed);
    const auto st = fock_regional_state(wf, inside);
    CHECK_NOTHROW(st.validate());
    const auto rho = brute_reduced(wf, inside);
    std::size_t dim = 0;
    double worst = 0.0;
    for (std::size_t a = 0; a < st.basis.size(); ++a) {
      dim += st.basis[a].size();
      for (std::size_t b = 0; b < st.basis.size(); ++b) {
        const auto it = st.blocks.find({a, b});
        for (std::size_t i = 0; i < st.basis[a].size(); ++i)
          for (std::size_t j = 0; j < st.basis[b].size(); ++j) {
            const Occ ka(st.basis[a][i].begin(), st.basis[a][i].end());
            const Occ kb(st.basis[b][j].begin(), st.basis[b][j].end());
            const auto r = rho.find({ka, kb});
            const cplx ref = r == rho.end() ? 0.0 : r->second;
            const cplx got = it == st.blocks.end() ? 0.0 : it->second(i, j);
            worst = std::max(worst, std::abs(got - ref));
          }
      }
    }
    CHECK(dim == 28);  // 1 + 6 + 21 occupations of six sites
    CHECK(rho.size() <= dim * dim);
    CHECK(worst <= 1e-10);
    CHECK(st.cross_sector_norm() > 0.0);
  }
}

TEST_CASE("Fock regional state rejects bad input") {
  const std::size_t L = 6;
  SiteMask inside(L, 0);
  inside[0] = inside[1] = 1;
  auto wf = random_state(L, 1.0, 2, 3);
  wf.psi[2][1] += 0.01;  // breaks psi(0,1) = psi(1,0)
  CHECK_THROWS_AS(fock_regional_state(wf, inside), InvalidStateError);
  auto unnorm = random_state(L, 1.0, 2, 4);
  unnorm.psi[1][0] *= 2.0;
  CHECK_THROWS_AS(fock_regional_state(unnorm, inside), InvalidStateError);
  FockWavefunctions four{L, 1.0, std::vector<std::vector<cplx>>(5)};
  CHECK_THROWS_AS(fock_regional_state(four, inside), ConfigError);
  CHECK_THROWS_AS(fock_regional_state(random_state(L, 1.0, 1, 5), SiteMask(3, 0)), ShapeError);
  const auto j = to_json(fock_regional_state(random_state(L, 1.0, 2, 6), inside));
  CHECK(j["trace"].get<double>() == doctest::Approx(1.0));
  CHECK(j["blocks"].size() == 9);
}

TEST_CASE("NW locality probe") {
  const auto g = make_grid(1, 8192, 0.01);
  const double c = g.length() / 2;
  const auto R = Region::ball(c, 3.0);
  const double T = 2.0, m = 1.0;
  ComplexField zero(g, 1);
  CHECK(nw_locality_probe(zero, R, m, T).penetration == 0.0);
  CHECK_THROWS_AS(nw_locality_probe(bump_field(g, c + 2.8, 0.5), R, m, T), PreconditionError);
  CHECK_THROWS_AS(nw_locality_probe(zero, R, m, 3.5), ConeVanishedError);

  // Bump edge at distance d = 3 > T outside R.
  std::vector<double> hs, pen;
  for (std::size_t n : {2048, 4096, 8192}) {
    const auto gn = make_grid(1, n, g.length() / static_cast<double>(n));
    const auto res = nw_locality_probe(bump_field(gn, c + 3.0 + 3.0 + 0.5, 0.5), R, m, T);
    CHECK(res.penetration > 1e-10);
    hs.push_back(gn.spacing);
    pen.push_back(res.penetration);
  }
  CHECK(std::abs(power_law_fit(hs, pen).slope) < 0.5);

  std::vector<double> ds, logp;
  for (double d = 4.0; d <= 16.0; d += 2.0) {
    ds.push_back(d - T);
    logp.push_back(std::log(nw_locality_probe(bump_field(g, c + 3.0 + d + 0.5, 0.5), R, m, T)
                                .penetration));
  }
  CHECK(std::abs(-linear_fit(ds, logp).slope - m) <= 0.2 * m);
}

TEST_CASE("random_fock_state is symmetric, normalised and matches the oracle up to n = 3") {
  const std::size_t L = 6;
  const double h = 0.7;
  const auto wf = random_fock_state(L, h, 3, 9);
  REQUIRE(wf.n_max() == 3);
  double norm = 0.0;
  for (std::size_t n = 0; n <= 3; ++n)
    for (auto z : wf.psi[n]) norm += std::norm(z) * std::pow(h, n);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-13));
  // psi3(x, y, z) = psi3(z, x, y)
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j)
      for (std::size_t k = 0; k < L; ++k)
        CHECK(std::abs(wf.psi[3][(i * L + j) * L + k] - wf.psi[3][(k * L + i) * L + j]) <= 1e-15);
  SiteMask inside(L, 0);
  inside[1] = inside[4] = inside[5] = 1;
  const auto st = fock_regional_state(wf, inside);
  CHECK(conelab::testing::oracle_deviation(wf, inside, st) <= 1e-10);
  CHECK(random_fock_state(L, h, 2, 9).psi[2] == random_fock_state(L, h, 2, 9).psi[2]);
  CHECK_THROWS_AS(random_fock_state(L, h, 4, 1), ConfigError);
}
