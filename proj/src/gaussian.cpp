#include "conelab/gaussian.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "conelab/errors.hpp"

namespace conelab::gaussian {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sqrt_psd(const MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  const VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() <= 1e-12 * std::max(1.0, ev.maxCoeff()))
    throw InvalidStateError(std::string(what) + " is not positive definite");
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

double entropy_term(double nu) {
  const double p = nu + 0.5, q = nu - 0.5;
  double s = p * std::log(p);
  if (q > 0.0) s -= q * std::log(q);
  return std::max(s, 0.0);
}

// Position Verlet on stacked phase-space columns.
void dkd_steps(const Eigen::SparseMatrix<double>& K, double dt, std::size_t steps,
               MatrixXd& x) {
  const Eigen::Index n = K.rows();
  for (std::size_t s = 0; s < steps; ++s) {
    x.topRows(n) += 0.5 * dt * x.bottomRows(n);
    x.bottomRows(n) -= dt * (K * x.topRows(n));
    x.topRows(n) += 0.5 * dt * x.bottomRows(n);
  }
}

void require_full(const GaussianState& s, const char* what) {
  if (!s.is_full())
    throw ConfigError(std::string(what) + " needs a full-lattice state");
}

}  // namespace

void CouplingMatrix::validate() const {
  if (K.rows() == 0 || K.rows() != K.cols())
    throw ConfigError("coupling matrix must be square and non-empty");
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-14)
    throw ConfigError("coupling matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 1e-12 * es.eigenvalues().cwiseAbs().maxCoeff()))
    throw ConfigError("coupling matrix is singular or indefinite; use mass > 0");
}

CouplingMatrix coupling_for(const GridSpec& grid, double mass) {
  grid.validate();
  if (!(mass >= 0.0)) throw ConfigError("mass must be >= 0");
  const std::size_t n = grid.sites();
  const double h2 = grid.spacing * grid.spacing;
  CouplingMatrix c{MatrixXd::Zero(n, n), mass, grid.spacing};
  const auto nb = neighbor_table(grid);
  for (std::size_t s = 0; s < n; ++s) {
    c.K(s, s) += 2.0 * grid.dim / h2 + mass * mass;
    for (int a = 0; a < grid.dim; ++a)
      for (int k = 0; k < 2; ++k) {
        const long t = nb[(s * grid.dim + a) * 2 + k];
        if (t >= 0) c.K(s, t) -= 1.0 / h2;
      }
  }
  return c;
}

CouplingMatrix chain_coupling(std::size_t n, double mass, double spacing) {
  return coupling_for(make_grid(1, n, spacing), mass);
}

void GaussianState::validate() const {
  const auto n = static_cast<Eigen::Index>(modes());
  if (mean_phi.size() != n || mean_pi.size() != n || cov.rows() != 2 * n ||
      cov.cols() != 2 * n)
    throw ShapeError("Gaussian state dimensions disagree with its site map");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidStateError("covariance is not symmetric");
  if (symplectic_eigenvalues(*this).minCoeff() < 0.5 - 1e-10)
    throw InvalidStateError("covariance violates the uncertainty principle");
}

GaussianState vacuum_state(const CouplingMatrix& K) {
  K.validate();
  const auto n = static_cast<Eigen::Index>(K.sites());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K.K);
  const VectorXd w = es.eigenvalues().cwiseSqrt();
  const MatrixXd& V = es.eigenvectors();
  GaussianState s;
  s.mean_phi = VectorXd::Zero(n);
  s.mean_pi = VectorXd::Zero(n);
  s.cov = MatrixXd::Zero(2 * n, 2 * n);
  s.cov.topLeftCorner(n, n) = 0.5 * V * w.cwiseInverse().asDiagonal() * V.transpose();
  s.cov.bottomRightCorner(n, n) = 0.5 * V * w.asDiagonal() * V.transpose();
  // Symmetrise away rounding from the eigen products.
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  s.site_map.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.site_map[i] = static_cast<std::size_t>(i);
  s.lattice_sites = static_cast<std::size_t>(n);
  return s;
}

GaussianState reduce(const GaussianState& state, std::vector<std::size_t> sites) {
  std::sort(sites.begin(), sites.end());
  if (std::adjacent_find(sites.begin(), sites.end()) != sites.end())
    throw ConfigError("reduce: duplicate sites");
  std::vector<Eigen::Index> idx;
  for (auto s : sites) {
    auto it = std::lower_bound(state.site_map.begin(), state.site_map.end(), s);
    if (it == state.site_map.end() || *it != s)
      throw ConfigError("reduce: site " + std::to_string(s) + " is not described by the state");
    idx.push_back(it - state.site_map.begin());
  }
  const auto n = static_cast<Eigen::Index>(state.modes());
  const auto m = static_cast<Eigen::Index>(idx.size());
  GaussianState r;
  r.mean_phi.resize(m);
  r.mean_pi.resize(m);
  r.cov.resize(2 * m, 2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    r.mean_phi(i) = state.mean_phi(idx[i]);
    r.mean_pi(i) = state.mean_pi(idx[i]);
    for (Eigen::Index j = 0; j < m; ++j)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          r.cov(a * m + i, b * m + j) = state.cov(a * n + idx[i], b * n + idx[j]);
  }
  r.site_map = std::move(sites);
  r.lattice_sites = state.lattice_sites;
  return r;
}

GaussianState reduce(const GaussianState& state, const GridSpec& grid,
                     const Region& region) {
  if (grid.sites() != state.lattice_sites)
    throw ConfigError("reduce: grid does not match the state's lattice");
  const auto mask = region_mask(grid, region);
  std::vector<std::size_t> sites;
  for (std::size_t s = 0; s < mask.size(); ++s)
    if (mask[s]) sites.push_back(s);
  return reduce(state, std::move(sites));
}

Eigen::VectorXd symplectic_eigenvalues(const GaussianState& state) {
  const auto n = static_cast<Eigen::Index>(state.modes());
  if (n == 0) return {};
  const MatrixXd& c = state.cov;
  VectorXd nu(n);
  if (c.topRightCorner(n, n).cwiseAbs().maxCoeff() == 0.0) {
    // No phi-pi correlations: nu^2 = eig(X^1/2 P X^1/2).
    const MatrixXd xs = sqrt_psd(c.topLeftCorner(n, n), "phi covariance");
    const MatrixXd m = xs * c.bottomRightCorner(n, n) * xs;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()),
                                                Eigen::EigenvaluesOnly);
    nu = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  } else {
    const MatrixXd ss = sqrt_psd(c, "covariance");
    MatrixXd omega = MatrixXd::Zero(2 * n, 2 * n);
    omega.topRightCorner(n, n) = MatrixXd::Identity(n, n);
    omega.bottomLeftCorner(n, n) = -MatrixXd::Identity(n, n);
    const MatrixXd a = ss * omega * ss;
    const MatrixXd m = -(a * a);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()),
                                                Eigen::EigenvaluesOnly);
    // Eigenvalues come in equal pairs nu^2, nu^2.
    const VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < n; ++i) nu(i) = 0.5 * (ev(2 * i) + ev(2 * i + 1));
  }
  std::sort(nu.begin(), nu.end());
  return nu;
}

EntropyReport entropy(const GaussianState& state) {
  EntropyReport r;
  r.sites = state.site_map;
  const VectorXd nu = symplectic_eigenvalues(state);
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (nu(i) < 0.5 - 1e-8)
      throw InvalidStateError("symplectic eigenvalue " + std::to_string(nu(i)) +
                              " below 1/2");
    r.symplectic_eigenvalues.push_back(nu(i));
    r.entropy += entropy_term(nu(i));
  }
  return r;
}

double mutual_information(const GaussianState& state, const std::vector<std::size_t>& a,
                          const std::vector<std::size_t>& b) {
  std::vector<std::size_t> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  return entropy(reduce(state, a)).entropy + entropy(reduce(state, b)).entropy -
         entropy(reduce(state, ab)).entropy;
}

SpectralPropagator::SpectralPropagator(const CouplingMatrix& K) : K_(K) {
  K_.validate();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K_.K);
  V_ = es.eigenvectors();
  omega_ = es.eigenvalues().cwiseSqrt();
}

Eigen::MatrixXd SpectralPropagator::matrix(double T) const {
  const auto n = omega_.size();
  VectorXd c(n), s_over_w(n), w_s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = omega_(i);
    c(i) = std::cos(w * T);
    s_over_w(i) = std::sin(w * T) / w;
    w_s(i) = w * std::sin(w * T);
  }
  MatrixXd S(2 * n, 2 * n);
  S.topLeftCorner(n, n) = V_ * c.asDiagonal() * V_.transpose();
  S.topRightCorner(n, n) = V_ * s_over_w.asDiagonal() * V_.transpose();
  S.bottomLeftCorner(n, n) = -V_ * w_s.asDiagonal() * V_.transpose();
  S.bottomRightCorner(n, n) = S.topLeftCorner(n, n);
  return S;
}

GaussianState evolve(const GaussianState& state, const SpectralPropagator& prop,
                     double T) {
  require_full(state, "evolve");
  if (state.lattice_sites != prop.coupling().sites())
    throw ConfigError("evolve: state and coupling sizes differ");
  if (T == 0.0) return state;
  const MatrixXd S = prop.matrix(T);
  const auto n = static_cast<Eigen::Index>(state.modes());
  VectorXd x(2 * n);
  x << state.mean_phi, state.mean_pi;
  x = S * x;
  GaussianState out = state;
  out.mean_phi = x.head(n);
  out.mean_pi = x.tail(n);
  out.cov = S * state.cov * S.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

void symplectic_step(const CouplingMatrix& K, double dt, Eigen::Ref<Eigen::VectorXd> x) {
  const Eigen::SparseMatrix<double> ks = K.K.sparseView();
  MatrixXd m = x;
  dkd_steps(ks, dt, 1, m);
  x = m.col(0);
}

GaussianState evolve(const GaussianState& state, const CouplingMatrix& K, double T,
                     Method method, double dt) {
  require_full(state, "evolve");
  if (state.lattice_sites != K.sites())
    throw ConfigError("evolve: state and coupling sizes differ");
  if (method == Method::exact_spectral) return evolve(state, SpectralPropagator(K), T);

  if (!(dt > 0.0)) throw ConfigError("symplectic_steps needs dt > 0");
  const double ratio = T / dt;
  const double steps_d = std::round(ratio);
  if (!(T >= 0.0) || std::abs(ratio - steps_d) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError("symplectic_steps needs T to be a non-negative multiple of dt");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K.K, Eigen::EigenvaluesOnly);
  if (dt * std::sqrt(es.eigenvalues().maxCoeff()) >= 2.0)
    throw ConfigError("symplectic_steps: dt exceeds the stability limit 2/omega_max");
  const auto steps = static_cast<std::size_t>(steps_d);
  const Eigen::SparseMatrix<double> ks = K.K.sparseView();
  const auto n = static_cast<Eigen::Index>(state.modes());

  GaussianState out = state;
  MatrixXd x(2 * n, 1);
  x << state.mean_phi, state.mean_pi;
  dkd_steps(ks, dt, steps, x);
  out.mean_phi = x.col(0).head(n);
  out.mean_pi = x.col(0).tail(n);
  // S cov S^T: propagate the columns, transpose, propagate again.
  MatrixXd c = state.cov;
  dkd_steps(ks, dt, steps, c);
  c.transposeInPlace();
  dkd_steps(ks, dt, steps, c);
  out.cov = c;
  return out;
}

GaussianState displace(const GaussianState& state, std::size_t site, double dphi,
                       double dpi) {
  require_full(state, "displace");
  if (site >= state.lattice_sites)
    throw ConfigError("displace: site " + std::to_string(site) + " out of range");
  GaussianState out = state;
  out.mean_phi(static_cast<Eigen::Index>(site)) += dphi;
  out.mean_pi(static_cast<Eigen::Index>(site)) += dpi;
  return out;
}

double reduced_state_distance(const GaussianState& a, const GaussianState& b) {
  if (a.site_map != b.site_map || a.lattice_sites != b.lattice_sites)
    throw ConfigError("reduced_state_distance: states describe different sites");
  if (a.modes() == 0) return 0.0;
  const double dm = std::max((a.mean_phi - b.mean_phi).cwiseAbs().maxCoeff(),
                             (a.mean_pi - b.mean_pi).cwiseAbs().maxCoeff());
  return std::max(dm, (a.cov - b.cov).cwiseAbs().maxCoeff());
}

double energy(const GaussianState& state, const CouplingMatrix& K) {
  require_full(state, "energy");
  const auto n = static_cast<Eigen::Index>(state.modes());
  const double quantum = 0.5 * (state.cov.bottomRightCorner(n, n).trace() +
                                (K.K * state.cov.topLeftCorner(n, n)).trace());
  const double classical = 0.5 * (state.mean_pi.squaredNorm() +
                                   state.mean_phi.dot(K.K * state.mean_phi));
  return quantum + classical;
}

void write_covariance_csv(std::ostream& os, const GaussianState& state) {
  const auto n = state.cov.rows();
  const auto m = static_cast<Eigen::Index>(state.modes());
  auto label = [&](Eigen::Index i) {
    return std::string(i < m ? "phi_" : "pi_") + std::to_string(state.site_map[i % m]);
  };
  os << "row";
  for (Eigen::Index j = 0; j < n; ++j) os << ',' << label(j);
  os << '\n';
  os.precision(17);
  for (Eigen::Index i = 0; i < n; ++i) {
    os << label(i);
    for (Eigen::Index j = 0; j < n; ++j) os << ',' << state.cov(i, j);
    os << '\n';
  }
}

nlohmann::json to_json(const EntropyReport& r) {
  return {{"sites", r.sites},
          {"symplectic_eigenvalues", r.symplectic_eigenvalues},
          {"entropy", r.entropy}};
}

}  // namespace conelab::gaussian
