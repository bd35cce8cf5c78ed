#include "conelab/localization.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>

#include "conelab/errors.hpp"
#include "conelab/spectral.hpp"

namespace conelab::localization {
namespace {

using std::numbers::pi;
using Integrand = std::function<cplx(double)>;

constexpr std::size_t kGaussPoints = 20;

// Composite Gauss-Legendre over consecutive breakpoints, each panel split in
// `split` equal parts.
cplx integrate(const Integrand& f, const std::vector<double>& breaks, int split) {
  using Rule = boost::math::quadrature::gauss<double, kGaussPoints>;
  const auto& x = Rule::abscissa();
  const auto& w = Rule::weights();
  cplx total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double width = (breaks[i + 1] - breaks[i]) / split;
    for (int s = 0; s < split; ++s) {
      const double a = breaks[i] + s * width;
      const double half = 0.5 * width, mid = a + half;
      // Boost stores the positive half of the symmetric (even) rule.
      cplx panel = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k)
        panel += w[k] * (f(mid + half * x[k]) + f(mid - half * x[k]));
      total += half * panel;
    }
  }
  return total;
}

std::vector<double> auto_breaks(double cutoff, double mass, double omega, double sigma) {
  const double osc = omega > 0.0 ? 2.0 * pi / omega : cutoff;
  const double damp = sigma > 0.0 ? 1.0 / sigma : cutoff;
  std::vector<double> b{0.0};
  while (b.back() < cutoff) {
    const double p = b.back();
    const double w = std::min({osc, damp, 0.5 * std::max(mass, p)});
    b.push_back(std::min(cutoff, p + w));
  }
  return b;
}

std::vector<double> uniform_breaks(double cutoff, std::size_t panels) {
  std::vector<double> b(panels + 1);
  for (std::size_t i = 0; i <= panels; ++i)
    b[i] = cutoff * static_cast<double>(i) / static_cast<double>(panels);
  return b;
}

// sin(p r) / r with its r -> 0 limit.
double sin_over_r(double p, double r) { return r > 0.0 ? std::sin(p * r) / r : p; }

// The subtracted equal-time Wightman integrand g(p) = p / 2E - 1/2 and the two
// derivatives used by the integration-by-parts tail.
struct Subtracted {
  double m;
  double g(double p) const {
    const double e = std::hypot(p, m);
    return -m * m / (2.0 * e * (e + p));
  }
  double tail(double lambda, double r) const {
    const double p = lambda, e = std::hypot(p, m);
    const double u = e * (e + p);
    const double du = 2.0 * p + e + p * p / e;
    const double d2u = 2.0 + 3.0 * p / e - p * p * p / (e * e * e);
    const double g0 = g(p);
    const double g1 = m * m * du / (2.0 * u * u);
    const double g2 = 0.5 * m * m * (d2u / (u * u) - 2.0 * du * du / (u * u * u));
    const double c = std::cos(p * r), s = std::sin(p * r);
    return g0 * c / r - g1 * s / (r * r) - g2 * c / (r * r * r);
  }
};

void resolve(TwoPointQuery& q) {
  auto& s = q.quadrature;
  const double m = q.mass;
  if (s.sigma < 0.0) s.sigma = q.kind == TwoPointKind::wightman ? 0.0 : 0.1 / m;
  if (s.cutoff <= 0.0) {
    if (s.sigma > 0.0)
      s.cutoff = std::max(20.0 * m, 9.0 / s.sigma);
    else
      s.cutoff = std::max(400.0 * m, q.r > 0.0 ? 200.0 / q.r : 0.0);
  }
}

}  // namespace

std::string to_string(TwoPointKind k) {
  switch (k) {
    case TwoPointKind::wightman: return "wightman";
    case TwoPointKind::pauli_jordan: return "pauli_jordan";
    case TwoPointKind::nw_overlap: return "nw_overlap";
  }
  return "?";
}

TwoPointKind two_point_kind_from_string(const std::string& s) {
  for (auto k : {TwoPointKind::wightman, TwoPointKind::pauli_jordan,
                 TwoPointKind::nw_overlap})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown two-point kind '" + s +
                    "' (expected wightman, pauli_jordan or nw_overlap)");
}

void TwoPointQuery::validate() const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("two-point separation r must be >= 0");
  if (!std::isfinite(t)) throw ConfigError("two-point time must be finite");
  if (!(mass > 0.0)) throw ConfigError("two-point functions need mass > 0");
  const auto& s = quadrature;
  if (s.cutoff < 20.0 * mass)
    throw ConfigError("momentum cutoff must be at least 20 m");
  if (s.sigma > 0.0 && s.sigma * s.cutoff < 8.0)
    throw ConfigError("momentum cutoff must satisfy sigma * cutoff >= 8");
  if (!(s.rtol > 0.0) || !(s.atol >= 0.0))
    throw ConfigError("quadrature tolerances must be positive");
}

TwoPointResult evaluate(TwoPointQuery q) {
  resolve(q);
  q.validate();
  const double m = q.mass, r = q.r, t = q.t;
  const double sigma = q.quadrature.sigma, cutoff = q.quadrature.cutoff;
  TwoPointResult res{q, 0.0, 0.0, 1.0};

  if (q.kind == TwoPointKind::nw_overlap && !(sigma > 0.0))
    throw PreconditionError(
        "nw_overlap needs a smearing width sigma > 0: the point-localised "
        "Newton-Wigner kernel is a distribution, not a function");
  if (q.kind == TwoPointKind::wightman && r == 0.0 && sigma == 0.0)
    throw PreconditionError("the unsmeared Wightman function diverges at r = 0");
  if (q.kind == TwoPointKind::pauli_jordan && t == 0.0) return res;  // sin(E t) = 0
  if (sigma == 0.0 && t != 0.0)
    throw ConfigError(to_string(q.kind) + " at t != 0 needs sigma > 0");

  const auto damp = [sigma](double p) { return std::exp(-sigma * sigma * p * p); };
  Integrand f;
  double offset = 0.0;
  bool subtracted = false;
  switch (q.kind) {
    case TwoPointKind::wightman:
      if (sigma == 0.0) {
        subtracted = true;
        const Subtracted sub{m};
        f = [sub, r](double p) { return cplx(sub.g(p) * std::sin(p * r), 0.0); };
        offset = 0.5 / r + sub.tail(cutoff, r);
      } else {
        f = [=](double p) {
          const double e = std::hypot(p, m);
          return p * sin_over_r(p, r) * std::polar(damp(p) / (2.0 * e), -e * t);
        };
      }
      break;
    case TwoPointKind::pauli_jordan:
      f = [=](double p) {
        const double e = std::hypot(p, m);
        return cplx(p * sin_over_r(p, r) * std::sin(e * t) / e * damp(p), 0.0);
      };
      break;
    case TwoPointKind::nw_overlap:
      f = [=](double p) {
        const double e = std::hypot(p, m);
        return p * sin_over_r(p, r) * std::polar(damp(p), -e * t);
      };
      res.normalization = 8.0 * std::pow(pi, 1.5) * sigma * sigma * sigma;
      break;
  }

  const auto breaks =
      q.quadrature.nodes > 0
          ? uniform_breaks(cutoff, std::max<std::size_t>(1, q.quadrature.nodes / kGaussPoints))
          : auto_breaks(cutoff, m, r + std::abs(t), sigma);
  const cplx coarse = integrate(f, breaks, 1);
  const cplx fine = integrate(f, breaks, 2);
  // The subtracted form carries sin(pr) rather than sin(pr)/r.
  const double pref = res.normalization / (2.0 * pi * pi) / (subtracted ? r : 1.0);
  res.value = pref * (fine + offset);
  res.est_error = pref * std::abs(fine - coarse);
  const double tol = std::max(q.quadrature.rtol * std::abs(res.value), q.quadrature.atol);
  if (!(res.est_error <= tol))
    throw QuadratureError(to_string(q.kind) + " quadrature did not converge (r=" +
                          std::to_string(r) + ", t=" + std::to_string(t) +
                          ", estimated error " + std::to_string(res.est_error) + ")");
  return res;
}

double wightman_equal_time(double r, double mass, const QuadratureSettings& q) {
  if (!(r > 0.0)) throw PreconditionError("wightman_equal_time needs r > 0");
  return evaluate({r, 0.0, mass, TwoPointKind::wightman, q}).value.real();
}

cplx wightman(double t, double r, double mass, const QuadratureSettings& q) {
  auto s = q;
  if (s.sigma < 0.0 && t != 0.0) s.sigma = 0.1 / mass;
  return evaluate({r, t, mass, TwoPointKind::wightman, s}).value;
}

double pauli_jordan(double t, double r, double mass, const QuadratureSettings& q) {
  return evaluate({r, t, mass, TwoPointKind::pauli_jordan, q}).value.real();
}

cplx nw_overlap(double t, double r, double mass, const QuadratureSettings& q) {
  return evaluate({r, t, mass, TwoPointKind::nw_overlap, q}).value;
}

void write_two_point_csv(std::ostream& os, const std::vector<TwoPointResult>& rows) {
  os << "r,t,m,kind,re,im,est_error\n";
  char buf[256];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%.17g,%.17g,%.17g\n", row.query.r,
                  row.query.t, row.query.mass, to_string(row.query.kind).c_str(),
                  row.value.real(), row.value.imag(), row.est_error);
    os << buf;
  }
}

// ---------------------------------------------------------------------------

RegionalProbability regional_probability(double p) {
  p = std::clamp(p, 0.0, 1.0);
  const auto xlogx = [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; };
  return {p, p * p + (1.0 - p) * (1.0 - p), -xlogx(p) - xlogx(1.0 - p)};
}

RegionalProbability single_particle_regional_state(const ComplexField& psi,
                                                   const Region& region) {
  const auto& grid = psi.grid();
  if (psi.components() != 1) throw ShapeError("one-particle wave function must be scalar");
  const auto mask = region_mask(grid, region);
  const double dv = grid.cell_volume();
  double total = 0.0, in = 0.0;
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    const double w = std::norm(psi.at(s, 0)) * dv;
    total += w;
    if (mask[s]) in += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidStateError("one-particle wave function is not normalised (norm^2 = " +
                            std::to_string(total) + ")");
  return regional_probability(in);
}

namespace {

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

double factorial(std::size_t n) { return std::tgamma(static_cast<double>(n) + 1.0); }

double binomial(std::size_t n, std::size_t k) {
  return factorial(n) / (factorial(k) * factorial(n - k));
}

// Calls f(tuple) for every tuple in {0..base-1}^len, first entry slowest.
void for_each_tuple(std::size_t base, std::size_t len,
                    const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> t(len, 0);
  const std::size_t total = ipow(base, len);
  for (std::size_t c = 0; c < total; ++c) {
    f(t);
    for (std::size_t i = len; i-- > 0;) {
      if (++t[i] < base) break;
      t[i] = 0;
    }
  }
}

std::size_t flat_index(const std::vector<std::size_t>& sites, std::size_t L) {
  std::size_t idx = 0;
  for (auto s : sites) idx = idx * L + s;
  return idx;
}

// Symmetrises sector n in place; returns the largest change.
double symmetrise(std::vector<cplx>& v, std::size_t L, std::size_t n) {
  if (n < 2) return 0.0;
  std::vector<cplx> out(v.size());
  double worst = 0.0;
  for_each_tuple(L, n, [&](const std::vector<std::size_t>& t) {
    auto perm = t;
    std::sort(perm.begin(), perm.end());
    cplx sum = 0.0;
    std::size_t count = 0;
    do {
      sum += v[flat_index(perm, L)];
      ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    // Distinct permutations only: weight by multiplicity to get the full
    // average over the n! orderings.
    const cplx avg = sum / static_cast<double>(count);
    const auto idx = flat_index(t, L);
    out[idx] = avg;
    worst = std::max(worst, std::abs(v[idx] - avg));
  });
  v = std::move(out);
  return worst;
}

// Non-decreasing tuples of region-local indices with `a` entries.
std::vector<std::vector<std::size_t>> multisets(std::size_t nr, std::size_t a) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (cur.size() == a) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = start; i < nr; ++i) {
      cur.push_back(i);
      rec(i);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

}  // namespace

double RegionalFockState::trace() const {
  double tr = 0.0;
  for (const auto& [key, b] : blocks)
    if (key.first == key.second) tr += b.trace().real();
  return tr;
}

Eigen::MatrixXcd RegionalFockState::dense() const {
  std::vector<Eigen::Index> off{0};
  for (const auto& b : basis) off.push_back(off.back() + static_cast<Eigen::Index>(b.size()));
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(off.back(), off.back());
  for (const auto& [key, b] : blocks)
    m.block(off[key.first], off[key.second], b.rows(), b.cols()) = b;
  return m;
}

double RegionalFockState::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double RegionalFockState::cross_sector_norm() const {
  double s = 0.0;
  for (const auto& [key, b] : blocks)
    if (key.first != key.second) s += b.squaredNorm();
  return std::sqrt(s);
}

std::vector<double> RegionalFockState::number_distribution() const {
  std::vector<double> d(basis.size(), 0.0);
  for (const auto& [key, b] : blocks)
    if (key.first == key.second) d[key.first] = b.trace().real();
  return d;
}

double RegionalFockState::entropy() const {
  double s = 0.0;
  for (const auto& [key, b] : blocks) {
    if (key.first != key.second) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b, Eigen::EigenvaluesOnly);
    for (double l : es.eigenvalues())
      if (l > 0.0) s -= l * std::log(l);
  }
  return s;
}

double RegionalFockState::purity() const {
  double s = 0.0;
  for (const auto& [key, b] : blocks) s += b.squaredNorm();
  return s;
}

void RegionalFockState::validate() const {
  if (std::abs(trace() - 1.0) > 1e-10)
    throw InvalidStateError("regional Fock state has trace " + std::to_string(trace()));
  for (const auto& [key, b] : blocks) {
    const auto mirror = blocks.find({key.second, key.first});
    if (mirror == blocks.end() || (b - mirror->second.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidStateError("regional Fock state is not Hermitian");
  }
  if (min_eigenvalue() < -1e-10)
    throw InvalidStateError("regional Fock state has a negative eigenvalue");
}

RegionalFockState fock_regional_state(const FockWavefunctions& wf, const SiteMask& inside) {
  const std::size_t L = wf.sites;
  const std::size_t n_max = wf.n_max();
  if (n_max > 3) throw ConfigError("regional Fock states support at most 3 particles");
  if (L == 0 || inside.size() != L)
    throw ShapeError("region mask must have one entry per lattice site");
  if (!(wf.spacing > 0.0)) throw ConfigError("lattice spacing must be positive");

  // Lattice amplitudes phi_n = h^{n/2} psi_n, symmetrised, zero sectors filled.
  std::vector<std::vector<cplx>> phi(n_max + 1);
  double norm = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    const std::size_t size = ipow(L, n);
    if (wf.psi[n].empty()) {
      phi[n].assign(size, 0.0);
      continue;
    }
    if (wf.psi[n].size() != size)
      throw ShapeError("sector " + std::to_string(n) + " needs " + std::to_string(size) +
                       " amplitudes");
    phi[n] = wf.psi[n];
    const double asym = symmetrise(phi[n], L, n);
    if (asym > 1e-10)
      throw InvalidStateError("sector " + std::to_string(n) +
                              " wave function is not permutation symmetric (deviation " +
                              std::to_string(asym) + ")");
    const double scale = std::pow(wf.spacing, 0.5 * static_cast<double>(n));
    for (auto& v : phi[n]) {
      v *= scale;
      norm += std::norm(v);
    }
  }
  if (std::abs(norm - 1.0) > 1e-10)
    throw InvalidStateError("Fock state is not normalised (norm^2 = " + std::to_string(norm) +
                            ")");

  RegionalFockState st;
  st.n_max = n_max;
  std::vector<std::size_t> out_sites;
  for (std::size_t s = 0; s < L; ++s) (inside[s] ? st.region_sites : out_sites).push_back(s);
  const std::size_t nr = st.region_sites.size(), no = out_sites.size();

  std::vector<std::vector<std::vector<std::size_t>>> reps(n_max + 1);
  std::vector<std::vector<double>> weight(n_max + 1);  // a! / sqrt(prod occ!)
  for (std::size_t a = 0; a <= n_max; ++a) {
    reps[a] = multisets(nr, a);
    std::vector<Occupation> occs;
    for (const auto& rep : reps[a]) {
      Occupation o(nr, 0);
      for (auto i : rep) ++o[i];
      double prod = 1.0;
      for (auto c : o) prod *= factorial(c);
      weight[a].push_back(factorial(a) / std::sqrt(prod));
      occs.push_back(std::move(o));
    }
    st.basis.push_back(std::move(occs));
  }

  // M[n][l](A, o) = weight_A * phi_n(rep_A, o) over ordered outside tuples o.
  auto amplitude_matrix = [&](std::size_t n, std::size_t l) {
    const std::size_t a = n - l;
    Eigen::MatrixXcd M(static_cast<Eigen::Index>(reps[a].size()),
                       static_cast<Eigen::Index>(ipow(no, l)));
    std::vector<std::size_t> sites(n);
    for (std::size_t A = 0; A < reps[a].size(); ++A) {
      for (std::size_t i = 0; i < a; ++i) sites[i] = st.region_sites[reps[a][A][i]];
      std::size_t col = 0;
      for_each_tuple(no, l, [&](const std::vector<std::size_t>& o) {
        for (std::size_t i = 0; i < l; ++i) sites[a + i] = out_sites[o[i]];
        M(static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(col++)) =
            weight[a][A] * phi[n][flat_index(sites, L)];
      });
    }
    return M;
  };

  for (std::size_t n = 0; n <= n_max; ++n) {
    for (std::size_t m = 0; m <= n_max; ++m) {
      for (std::size_t l = 0; l <= std::min(n, m); ++l) {
        const std::size_t a = n - l, b = m - l;
        // Which l of the n (and m) slots lie outside R, and how the l outside
        // particles pair up between ket and bra.
        const double c = binomial(n, l) * binomial(m, l) * factorial(l) /
                         std::sqrt(factorial(n) * factorial(m));
        auto& blk = st.blocks[{a, b}];
        if (blk.size() == 0)
          blk = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(reps[a].size()),
                                       static_cast<Eigen::Index>(reps[b].size()));
        if (ipow(no, l) == 0) continue;
        blk += c * amplitude_matrix(n, l) * amplitude_matrix(m, l).adjoint();
      }
    }
  }
  return st;
}

FockWavefunctions product_state(const std::vector<cplx>& one, std::size_t n, double spacing) {
  FockWavefunctions wf;
  wf.sites = one.size();
  wf.spacing = spacing;
  wf.psi.assign(n + 1, {});
  auto& v = wf.psi[n];
  v.resize(ipow(wf.sites, n));
  for_each_tuple(wf.sites, n, [&](const std::vector<std::size_t>& t) {
    cplx p = 1.0;
    for (auto s : t) p *= one[s];
    v[flat_index(t, wf.sites)] = p;
  });
  return wf;
}

FockWavefunctions random_fock_state(std::size_t sites, double spacing, std::size_t n_max,
                                    std::uint64_t seed) {
  if (n_max > 3) throw ConfigError("random_fock_state supports n_max <= 3");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  FockWavefunctions wf;
  wf.sites = sites;
  wf.spacing = spacing;
  wf.psi.assign(n_max + 1, {});
  double norm = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    std::vector<cplx> raw(ipow(sites, n));
    for (auto& z : raw) z = {nd(rng), nd(rng)};
    // Average over index permutations.
    auto& v = wf.psi[n];
    v.assign(raw.size(), 0.0);
    std::vector<std::size_t> perm(n);
    for (std::size_t k = 0; k < n; ++k) perm[k] = k;
    double count = 0.0;
    do {
      for_each_tuple(sites, n, [&](const std::vector<std::size_t>& t) {
        std::vector<std::size_t> p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = t[perm[k]];
        v[flat_index(t, sites)] += raw[flat_index(p, sites)];
      });
      count += 1.0;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (auto& z : v) {
      z /= count;
      norm += std::norm(z) * std::pow(spacing, static_cast<double>(n));
    }
  }
  for (auto& sector : wf.psi)
    for (auto& z : sector) z /= std::sqrt(norm);
  return wf;
}

nlohmann::json to_json(const RegionalFockState& s) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [key, b] : s.blocks) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      std::vector<double> rr, ii;
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        rr.push_back(b(i, j).real());
        ii.push_back(b(i, j).imag());
      }
      re.push_back(rr);
      im.push_back(ii);
    }
    blocks.push_back({{"ket_particles", key.first},
                      {"bra_particles", key.second},
                      {"cross_sector", key.first != key.second},
                      {"re", re},
                      {"im", im}});
  }
  return {{"n_max", s.n_max},
          {"region_sites", s.region_sites},
          {"trace", s.trace()},
          {"purity", s.purity()},
          {"entropy_number_diagonal", s.entropy()},
          {"min_eigenvalue", s.min_eigenvalue()},
          {"cross_sector_norm", s.cross_sector_norm()},
          {"number_distribution", s.number_distribution()},
          {"blocks", blocks}};
}

// ---------------------------------------------------------------------------

ProbeResult nw_locality_probe(const ComplexField& psi0, const Region& region, double mass,
                              double T) {
  const auto& grid = psi0.grid();
  if (region.kind != Region::Kind::ball) throw ConfigError("probe region must be a ball");
  if (!(T >= 0.0)) throw ConfigError("probe time must be >= 0");
  const auto inside = region_mask(grid, region);
  std::vector<std::size_t> bad;
  for (std::size_t s = 0; s < grid.sites(); ++s)
    if (inside[s] && std::abs(psi0.at(s, 0)) > 1e-15) bad.push_back(s);
  if (!bad.empty())
    throw PreconditionError("probe initial data must vanish inside the region", std::move(bad));

  const auto slice = cone_slice(region, T, 1.0, ConeDirection::contracting);
  const auto mask = region_mask(grid, slice.region());
  const auto evolved = spectral::evolve_sqrt_kg(spectral::from_field(psi0, mass), T).to_field();
  ProbeResult res;
  res.slice_sites = count(mask);
  for (std::size_t s = 0; s < grid.sites(); ++s)
    if (mask[s]) res.p_inside += std::norm(evolved.at(s, 0)) * grid.cell_volume();
  res.amplitude = std::sqrt(res.p_inside);
  res.penetration = res.p_inside + res.amplitude;
  return res;
}

}  // namespace conelab::localization
