#include "conelab/wave.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "conelab/fft.hpp"

namespace conelab::wave {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

// Stride of one step along `axis` and a wrap-aware neighbour lookup that
// avoids the generic unflatten/flatten round trip in hot loops.
struct AxisWalker {
  const GridSpec& g;
  int axis;
  std::size_t stride;
  std::size_t n;

  AxisWalker(const GridSpec& grid, int a)
      : g(grid), axis(a), stride(a == 0 ? 1 : (a == 1 ? grid.extent : grid.extent * grid.extent)),
        n(grid.extent) {}

  std::size_t coord(std::size_t s) const { return (s / stride) % n; }

  // Returns false when the neighbour falls off an absorbing-pad grid.
  bool plus(std::size_t s, std::size_t& out) const {
    const auto i = coord(s);
    if (i + 1 < n) { out = s + stride; return true; }
    if (g.boundary != Boundary::periodic) return false;
    out = s - i * stride;
    return true;
  }
  bool minus(std::size_t s, std::size_t& out) const {
    const auto i = coord(s);
    if (i > 0) { out = s - stride; return true; }
    if (g.boundary != Boundary::periodic) return false;
    out = s + (n - 1) * stride;
    return true;
  }
};

void require_em(const WaveState& s) {
  if (s.components() != kEmComponents)
    throw ShapeError("operation needs a 4-component (phi, A) state, got " +
                     std::to_string(s.components()) + " component(s)");
}

}  // namespace

double WaveState::dt() const {
  return grid.dim == 1 ? cfl * grid.spacing
                       : cfl * grid.spacing / std::sqrt(3.0);
}

void WaveState::validate() const {
  grid.validate();
  if (!u.same_shape(v)) throw ShapeError("u and v shapes differ");
  if (!(u.grid() == grid)) throw ShapeError("field grid differs from state grid");
  if (!(t >= 0.0)) throw ConfigError("state time must be >= 0");
  if (!(mass >= 0.0)) throw ConfigError("mass must be >= 0");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must be in (0,1]");
}

WaveState make_state(const GridSpec& grid, int components, double mass,
                     double cfl) {
  WaveState s{grid, RealField(grid, components), RealField(grid, components),
              0.0, mass, cfl, 0};
  s.validate();
  return s;
}

Point sample_point(const GridSpec& grid, std::size_t site, int component,
                   int components) {
  Point p = grid.coord(site);
  if (components == kEmComponents && component >= 1) {
    const int axis = component - 1;
    if (axis < grid.dim) p[axis] += 0.5 * grid.spacing;
  }
  return p;
}

SourceSpec SourceSpec::from_functions(
    const GridSpec& grid, std::function<double(const Point&, double)> rho,
    std::function<double(const Point&, int, double)> current) {
  SourceSpec spec;
  if (rho) {
    spec.rho = [grid, rho](std::size_t site, double t) {
      return rho(grid.coord(site), t);
    };
  }
  if (current) {
    spec.current = [grid, current](std::size_t site, int axis, double t) {
      return current(sample_point(grid, site, axis + 1, kEmComponents), axis, t);
    };
  }
  return spec;
}

SourceSpec SourceSpec::cached(double t0, double dt, std::vector<RealField> rho,
                              std::vector<RealField> current) {
  if (!(dt > 0.0)) throw ConfigError("cached source dt must be > 0");
  auto index = [t0, dt](double t, std::size_t n) {
    const double k = std::round((t - t0) / dt);
    if (k < 0 || k >= static_cast<double>(n) ||
        std::abs(t - t0 - k * dt) > 1e-9 * dt) {
      std::ostringstream err;
      err << "cached source has no sample at t = " << t;
      throw ConfigError(err.str());
    }
    return static_cast<std::size_t>(k);
  };
  SourceSpec spec;
  if (!rho.empty()) {
    spec.rho = [rho = std::move(rho), index](std::size_t site, double t) {
      return rho[index(t, rho.size())].at(site, 0);
    };
  }
  if (!current.empty()) {
    spec.current = [cur = std::move(current), index](std::size_t site, int axis,
                                                     double t) {
      return cur[index(t, cur.size())].at(site, axis);
    };
  }
  return spec;
}

void forward_diff(const GridSpec& grid, std::span<const double> f, int axis,
                  std::span<double> out) {
  if (axis >= grid.dim) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const AxisWalker w(grid, axis);
  const double inv = 1.0 / grid.spacing;
  for (std::size_t s = 0; s < f.size(); ++s) {
    std::size_t p;
    const double fp = w.plus(s, p) ? f[p] : 0.0;
    out[s] = (fp - f[s]) * inv;
  }
}

void backward_diff(const GridSpec& grid, std::span<const double> f, int axis,
                   std::span<double> out) {
  if (axis >= grid.dim) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const AxisWalker w(grid, axis);
  const double inv = 1.0 / grid.spacing;
  for (std::size_t s = 0; s < f.size(); ++s) {
    std::size_t m;
    const double fm = w.minus(s, m) ? f[m] : 0.0;
    out[s] = (f[s] - fm) * inv;
  }
}

void laplacian(const GridSpec& grid, std::span<const double> f,
               std::span<double> out) {
  const double inv2 = 1.0 / (grid.spacing * grid.spacing);
  if (grid.dim == 1 && grid.boundary == Boundary::periodic) {
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double fm = f[i == 0 ? n - 1 : i - 1];
      const double fp = f[i + 1 == n ? 0 : i + 1];
      out[i] = (fp - 2.0 * f[i] + fm) * inv2;
    }
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (int a = 0; a < grid.dim; ++a) {
    const AxisWalker w(grid, a);
    for (std::size_t s = 0; s < f.size(); ++s) {
      std::size_t p, m;
      const double fp = w.plus(s, p) ? f[p] : 0.0;
      const double fm = w.minus(s, m) ? f[m] : 0.0;
      out[s] += (fp - 2.0 * f[s] + fm) * inv2;
    }
  }
}

RealField acceleration(const WaveState& state, const RealField& u, double t,
                       const SourceSpec& src) {
  const auto& grid = state.grid;
  RealField a(grid, u.components());
  const double m2 = state.mass * state.mass;
  const bool em = u.components() == kEmComponents;
  for (int c = 0; c < u.components(); ++c) {
    auto out = a.component(c);
    const auto in = u.component(c);
    laplacian(grid, in, out);
    if (m2 != 0.0)
      for (std::size_t s = 0; s < out.size(); ++s) out[s] -= m2 * in[s];
    if (!em) continue;
    if (c == 0 && src.rho) {
      for (std::size_t s = 0; s < out.size(); ++s) out[s] += kFourPi * src.rho(s, t);
    } else if (c >= 1 && src.current) {
      for (std::size_t s = 0; s < out.size(); ++s)
        out[s] += kFourPi * src.current(s, c - 1, t);
    }
  }
  return a;
}

WaveState step_leapfrog(const WaveState& state, const SourceSpec& src) {
  const double dt = state.dt();
  const double half_dt2 = 0.5 * dt * dt;
  WaveState next = state;
  const RealField a0 = acceleration(state, state.u, state.t, src);
  auto& u = next.u.values();
  const auto& v0 = state.v.values();
  const auto& acc0 = a0.values();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += dt * v0[i] + half_dt2 * acc0[i];
  next.t = state.t + dt;
  next.step = state.step + 1;
  const RealField a1 = acceleration(next, next.u, next.t, src);
  auto& v = next.v.values();
  const auto& acc1 = a1.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += 0.5 * dt * (acc0[i] + acc1[i]);
  if (!next.u.all_finite() || !next.v.all_finite())
    throw InstabilityError("non-finite value in leapfrog update", next.step);
  return next;
}

EmFields em_fields(const WaveState& state) {
  require_em(state);
  const auto& g = state.grid;
  EmFields f{RealField(g, 3), RealField(g, 3)};
  std::vector<double> tmp(g.sites());
  for (int a = 0; a < 3; ++a) {
    forward_diff(g, state.u.component(0), a, tmp);
    auto e = f.E.component(a);
    const auto va = state.v.component(a + 1);
    for (std::size_t s = 0; s < tmp.size(); ++s) e[s] = -tmp[s] - va[s];
  }
  // B_a = d_{a+1} A_{a+2} - d_{a+2} A_{a+1} (cyclic).
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    auto out = f.B.component(a);
    forward_diff(g, state.u.component(c + 1), b, tmp);
    for (std::size_t s = 0; s < tmp.size(); ++s) out[s] = tmp[s];
    forward_diff(g, state.u.component(b + 1), c, tmp);
    for (std::size_t s = 0; s < tmp.size(); ++s) out[s] -= tmp[s];
  }
  return f;
}

WaveState gauge_transform(const WaveState& state, const WaveState& lambda) {
  require_em(state);
  if (lambda.components() != 1) throw ShapeError("gauge function must have one component");
  if (!(lambda.grid == state.grid)) throw ShapeError("gauge function grid differs from state grid");
  const auto& g = state.grid;
  WaveState out = state;
  const RealField lam_acc = acceleration(lambda, lambda.u, lambda.t, SourceSpec::none());
  const auto lam = lambda.u.component(0);
  const auto lam_v = lambda.v.component(0);
  {
    auto phi = out.u.component(0);
    auto phi_v = out.v.component(0);
    const auto acc = lam_acc.component(0);
    for (std::size_t s = 0; s < phi.size(); ++s) {
      phi[s] -= lam_v[s];
      phi_v[s] -= acc[s];
    }
  }
  std::vector<double> grad(g.sites());
  for (int a = 0; a < 3; ++a) {
    forward_diff(g, lam, a, grad);
    auto A = out.u.component(a + 1);
    for (std::size_t s = 0; s < grad.size(); ++s) A[s] += grad[s];
    forward_diff(g, lam_v, a, grad);
    auto Av = out.v.component(a + 1);
    for (std::size_t s = 0; s < grad.size(); ++s) Av[s] += grad[s];
  }
  return out;
}

RealField lorenz_residual(const WaveState& state) {
  require_em(state);
  const auto& g = state.grid;
  RealField r(g, 1);
  auto out = r.component(0);
  const auto phi_v = state.v.component(0);
  std::copy(phi_v.begin(), phi_v.end(), out.begin());
  std::vector<double> tmp(g.sites());
  for (int a = 0; a < g.dim; ++a) {
    backward_diff(g, state.u.component(a + 1), a, tmp);
    for (std::size_t s = 0; s < tmp.size(); ++s) out[s] += tmp[s];
  }
  return r;
}

RealField continuity_residual(const GridSpec& grid, const SourceSpec& src,
                              double t, double dt) {
  if (!(dt > 0.0)) throw ConfigError("continuity residual needs dt > 0");
  RealField r(grid, 1);
  auto out = r.component(0);
  if (src.rho) {
    for (std::size_t s = 0; s < out.size(); ++s)
      out[s] = (src.rho(s, t + dt) - src.rho(s, t - dt)) / (2.0 * dt);
  }
  if (src.current) {
    std::vector<double> j(grid.sites()), div(grid.sites());
    for (int a = 0; a < grid.dim; ++a) {
      for (std::size_t s = 0; s < j.size(); ++s) j[s] = src.current(s, a, t);
      backward_diff(grid, j, a, div);
      for (std::size_t s = 0; s < div.size(); ++s) out[s] += div[s];
    }
  }
  return r;
}

WaveState lorenz_consistent_state(const GridSpec& grid, const SourceSpec& src,
                                  double t0, double cfl) {
  auto state = make_state(grid, kEmComponents, 0.0, cfl);
  state.t = t0;
  if (!src.rho) return state;
  std::vector<cplx> rhs(grid.sites());
  double net = 0.0, scale = 0.0;
  for (std::size_t s = 0; s < rhs.size(); ++s) {
    const double r = src.rho(s, t0);
    rhs[s] = -kFourPi * r;
    net += r;
    scale += std::abs(r);
  }
  if (std::abs(net) > 1e-10 * std::max(scale, 1.0))
    throw ConfigError("Lorenz-consistent potentials need zero net charge on a periodic grid");
  const Fft fft(grid);
  fft.forward(rhs);
  // Symbol of the compact Laplacian: -sum_a 4 sin^2(k_a h / 2) / h^2.
  const auto kv = fft_wave_vectors(grid);
  const double h = grid.spacing;
  for (std::size_t s = 0; s < rhs.size(); ++s) {
    double sym = 0.0;
    for (int a = 0; a < grid.dim; ++a) {
      const double sn = std::sin(0.5 * kv[s][a] * h);
      sym -= 4.0 * sn * sn / (h * h);
    }
    rhs[s] = sym == 0.0 ? cplx{} : rhs[s] / sym;
  }
  fft.backward(rhs);
  auto phi = state.u.component(0);
  for (std::size_t s = 0; s < phi.size(); ++s) phi[s] = rhs[s].real();
  return state;
}

RealField energy_density(const WaveState& state) {
  const auto& g = state.grid;
  RealField e(g, 1);
  auto out = e.component(0);
  const double m2 = state.mass * state.mass;
  std::vector<double> fw(g.sites()), bw(g.sites());
  for (int c = 0; c < state.components(); ++c) {
    const auto u = state.u.component(c);
    const auto v = state.v.component(c);
    for (std::size_t s = 0; s < out.size(); ++s)
      out[s] += 0.5 * (v[s] * v[s] + m2 * u[s] * u[s]);
    for (int a = 0; a < g.dim; ++a) {
      forward_diff(g, u, a, fw);
      backward_diff(g, u, a, bw);
      for (std::size_t s = 0; s < out.size(); ++s)
        out[s] += 0.25 * (fw[s] * fw[s] + bw[s] * bw[s]);
    }
  }
  return e;
}

double total_energy(const WaveState& state) {
  const auto e = energy_density(state);
  SiteMask all(state.grid.sites(), 1);
  return discrete_integral(state.grid, e.component(0), all);
}

}  // namespace conelab::wave
