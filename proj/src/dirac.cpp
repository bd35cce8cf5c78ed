#include "conelab/dirac.hpp"

#include <cmath>
#include <complex>

#include "conelab/errors.hpp"
#include "conelab/fft.hpp"

namespace conelab::dirac {
namespace {

constexpr cplx I{0.0, 1.0};

double max_abs(const SpinMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

int spinor_size(const GridSpec& grid) { return grid.dim == 1 ? 2 : 4; }

void require_spinor(const SpinorState& s, const char* what) {
  if (s.psi.grid() != s.grid || s.psi.components() != spinor_size(s.grid))
    throw ShapeError(std::string(what) + ": spinor shape does not match grid");
}

// exp(-i beta m tau); beta is diagonal in both representations.
void mass_rotation(const GammaSet& g, double mass, double tau,
                   ComplexField& psi) {
  if (mass == 0.0 || tau == 0.0) return;
  for (int c = 0; c < g.size; ++c) {
    const cplx phase = std::exp(-I * g.gamma0(c, c).real() * mass * tau);
    for (auto& z : psi.component(c)) z *= phase;
  }
}

double norm_sq(const ComplexField& psi) {
  double acc = 0.0;
  for (const auto& z : psi.values()) acc += std::norm(z);
  return acc;
}

}  // namespace

double GammaSet::anticommutator_defect() const {
  std::vector<SpinMatrix> all{gamma0};
  all.insert(all.end(), gamma.begin(), gamma.end());
  const auto id = SpinMatrix::Identity(size, size);
  double worst = 0.0;
  for (std::size_t mu = 0; mu < all.size(); ++mu)
    for (std::size_t nu = 0; nu < all.size(); ++nu) {
      const double eta = mu != nu ? 0.0 : (mu == 0 ? 1.0 : -1.0);
      const SpinMatrix d = all[mu] * all[nu] + all[nu] * all[mu] - 2.0 * eta * id;
      worst = std::max(worst, max_abs(d));
    }
  return worst;
}

double GammaSet::hermiticity_defect() const {
  double worst = max_abs(gamma0 - gamma0.adjoint());
  for (const auto& g : gamma) worst = std::max(worst, max_abs(g + g.adjoint()));
  return worst;
}

GammaSet gamma_1d() {
  GammaSet g;
  g.size = 2;
  g.gamma0 = SpinMatrix::Zero(2, 2);
  g.gamma0(0, 0) = 1.0;
  g.gamma0(1, 1) = -1.0;
  SpinMatrix g1 = SpinMatrix::Zero(2, 2);
  g1(0, 1) = 1.0;
  g1(1, 0) = -1.0;
  g.gamma = {g1};
  return g;
}

GammaSet gamma_3d() {
  // Pauli matrices embedded as gamma^a = [[0, s_a], [-s_a, 0]].
  std::array<SpinMatrix, 3> sigma;
  for (auto& s : sigma) s = SpinMatrix::Zero(2, 2);
  sigma[0](0, 1) = sigma[0](1, 0) = 1.0;
  sigma[1](0, 1) = -I;
  sigma[1](1, 0) = I;
  sigma[2](0, 0) = 1.0;
  sigma[2](1, 1) = -1.0;

  GammaSet g;
  g.size = 4;
  g.gamma0 = SpinMatrix::Zero(4, 4);
  g.gamma0.diagonal() << 1.0, 1.0, -1.0, -1.0;
  for (int a = 0; a < 3; ++a) {
    SpinMatrix m = SpinMatrix::Zero(4, 4);
    m.block(0, 2, 2, 2) = sigma[a];
    m.block(2, 0, 2, 2) = -sigma[a];
    g.gamma.push_back(m);
  }
  return g;
}

GammaSet gammas_for(const GridSpec& grid) {
  return grid.dim == 1 ? gamma_1d() : gamma_3d();
}

void SpinorState::validate() const {
  grid.validate();
  require_spinor(*this, "spinor state");
  if (!(mass >= 0.0) || !std::isfinite(mass))
    throw ConfigError("spinor mass must be finite and >= 0");
  if (!psi.all_finite()) throw ConfigError("spinor contains NaN or Inf");
}

SpinorState make_spinor(const GridSpec& grid, double mass) {
  grid.validate();
  SpinorState s{grid, ComplexField(grid, spinor_size(grid)), 0.0, mass};
  s.validate();
  return s;
}

double max_stable_dt(const GridSpec& grid) {
  return grid.dim == 1 ? grid.spacing : grid.spacing / std::sqrt(3.0);
}

SpinorState step_fd(const SpinorState& state, double dt) {
  require_spinor(state, "step_fd");
  if (!(dt > 0.0) || dt > max_stable_dt(state.grid) * (1.0 + 1e-12))
    throw ConfigError("step_fd: dt must lie in (0, " +
                      std::to_string(max_stable_dt(state.grid)) + "]");
  const auto& grid = state.grid;
  const GammaSet g = gammas_for(grid);
  const int nc = g.size;
  const int d = grid.dim;
  const double h = grid.spacing;
  const auto nb = neighbor_table(grid);

  SpinorState out = state;
  mass_rotation(g, state.mass, 0.5 * dt, out.psi);

  // Lax-Wendroff: psi - dt sum alpha_a D0_a psi + dt^2/2 sum D2_a psi.
  // (alpha.grad)^2 = lap because the alphas anticommute.
  std::vector<SpinMatrix> alpha;
  for (int a = 0; a < d; ++a) alpha.push_back(g.alpha(a));
  const ComplexField src = out.psi;
  const double c1 = dt / (2.0 * h);
  const double c2 = 0.5 * dt * dt / (h * h);
  auto val = [&](long site, int c) -> cplx {
    return site < 0 ? cplx{} : src.at(static_cast<std::size_t>(site), c);
  };
  std::vector<cplx> diff(nc);
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    for (int c = 0; c < nc; ++c) out.psi.at(s, c) = src.at(s, c);
    for (int a = 0; a < d; ++a) {
      const long lo = nb[(s * d + a) * 2];
      const long hi = nb[(s * d + a) * 2 + 1];
      for (int c = 0; c < nc; ++c) {
        const cplx m = val(lo, c), p = val(hi, c), z = src.at(s, c);
        diff[c] = p - m;
        out.psi.at(s, c) += c2 * (p - 2.0 * z + m);
      }
      for (int r = 0; r < nc; ++r) {
        cplx acc = 0.0;
        for (int c = 0; c < nc; ++c) acc += alpha[a](r, c) * diff[c];
        out.psi.at(s, r) -= c1 * acc;
      }
    }
  }

  mass_rotation(g, state.mass, 0.5 * dt, out.psi);
  out.t = state.t + dt;

  const auto step = static_cast<std::size_t>(std::llround(out.t / dt));
  if (!out.psi.all_finite())
    throw InstabilityError("step_fd produced NaN/Inf", step);
  const double before = norm_sq(state.psi), after = norm_sq(out.psi);
  if (after > 1.21 * before && after > 0.0)
    throw InstabilityError("step_fd norm grew by more than 10%", step);
  return out;
}

SpinorState evolve_spectral(const SpinorState& state, double T) {
  require_spinor(state, "evolve_spectral");
  if (state.grid.boundary != Boundary::periodic)
    throw ConfigError("evolve_spectral needs a periodic grid");
  if (!std::isfinite(T)) throw ConfigError("evolve_spectral: T must be finite");
  SpinorState out = state;
  out.t = state.t + T;
  if (T == 0.0) return out;

  const auto& grid = state.grid;
  const GammaSet g = gammas_for(grid);
  const int nc = g.size;
  Fft fft(grid);
  for (int c = 0; c < nc; ++c) fft.forward(out.psi.component(c));

  const auto kv = fft_wave_vectors(grid);
  std::vector<SpinMatrix> alpha;
  for (int a = 0; a < grid.dim; ++a) alpha.push_back(g.alpha(a));
  const auto id = SpinMatrix::Identity(nc, nc);
  Eigen::VectorXcd v(nc);
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    SpinMatrix H = state.mass * g.beta();
    double k2 = 0.0;
    for (int a = 0; a < grid.dim; ++a) {
      H += kv[s][a] * alpha[a];
      k2 += kv[s][a] * kv[s][a];
    }
    const double E = std::sqrt(k2 + state.mass * state.mass);
    if (E == 0.0) continue;
    const SpinMatrix U = std::cos(E * T) * id - I * (std::sin(E * T) / E) * H;
    for (int c = 0; c < nc; ++c) v(c) = out.psi.at(s, c);
    v = U * v;
    for (int c = 0; c < nc; ++c) out.psi.at(s, c) = v(c);
  }
  for (int c = 0; c < nc; ++c) fft.backward(out.psi.component(c));
  return out;
}

Current probability_current(const SpinorState& state) {
  require_spinor(state, "probability_current");
  const auto& grid = state.grid;
  const GammaSet g = gammas_for(grid);
  const int nc = g.size;
  Current cur{RealField(grid, 1), RealField(grid, grid.dim)};
  std::vector<SpinMatrix> alpha;
  for (int a = 0; a < grid.dim; ++a) alpha.push_back(g.alpha(a));
  Eigen::VectorXcd v(nc);
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    for (int c = 0; c < nc; ++c) v(c) = state.psi.at(s, c);
    const double rho = v.squaredNorm();
    cur.density.at(s, 0) = rho;
    for (int a = 0; a < grid.dim; ++a) {
      const cplx j = v.dot(alpha[a] * v);
      if (std::abs(j.imag()) > 1e-14 * std::max(rho, 1e-300) &&
          std::abs(j.imag()) > 0.0)
        throw InvalidStateError(
            "probability current has an imaginary part; gamma algebra is "
            "corrupted");
      cur.current.at(s, a) = j.real();
    }
  }
  return cur;
}

double total_probability(const SpinorState& state) {
  return norm_sq(state.psi) * state.grid.cell_volume();
}

RealField continuity_residual(const SpinorState& prev, const SpinorState& cur,
                              const SpinorState& next) {
  if (!prev.psi.same_shape(cur.psi) || !cur.psi.same_shape(next.psi))
    throw ShapeError("continuity_residual: states differ in shape");
  const double dt_a = cur.t - prev.t, dt_b = next.t - cur.t;
  if (!(dt_a > 0.0) || std::abs(dt_a - dt_b) > 1e-9 * dt_a)
    throw ConfigError("continuity_residual needs equally spaced increasing times");
  const auto& grid = cur.grid;
  const auto rp = probability_current(prev).density;
  const auto rn = probability_current(next).density;
  const auto jc = probability_current(cur).current;
  const auto nb = neighbor_table(grid);
  const int d = grid.dim;
  const double h = grid.spacing;
  RealField res(grid, 1);
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    double r = (rn.at(s, 0) - rp.at(s, 0)) / (2.0 * dt_a);
    for (int a = 0; a < d; ++a) {
      const long lo = nb[(s * d + a) * 2], hi = nb[(s * d + a) * 2 + 1];
      const double jp = hi < 0 ? 0.0 : jc.at(static_cast<std::size_t>(hi), a);
      const double jm = lo < 0 ? 0.0 : jc.at(static_cast<std::size_t>(lo), a);
      r += (jp - jm) / (2.0 * h);
    }
    res.at(s, 0) = r;
  }
  return res;
}

Eigen::VectorXcd positive_energy_spinor(const GammaSet& g, double p,
                                        double mass) {
  const SpinMatrix H = p * g.alpha(0) + mass * g.beta();
  Eigen::SelfAdjointEigenSolver<SpinMatrix> es(H);
  // Eigenvalues ascend; the last column has E = +sqrt(p^2 + m^2).
  Eigen::VectorXcd u = es.eigenvectors().col(g.size - 1);
  return u / u.norm();
}

}  // namespace conelab::dirac
