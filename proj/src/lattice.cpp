#include "conelab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace conelab {

void GridSpec::validate() const {
  std::ostringstream err;
  if (dim != 1 && dim != 3) err << "dim must be 1 or 3 (got " << dim << "); ";
  if (extent < 4) err << "extent must be >= 4 (got " << extent << "); ";
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    err << "spacing must be > 0; ";
  if (wave_speed != 1.0) err << "wave_speed is fixed to 1; ";
  const auto msg = err.str();
  if (!msg.empty()) throw ConfigError("invalid grid: " + msg.substr(0, msg.size() - 2));
}

std::size_t GridSpec::sites() const {
  return dim == 1 ? extent : extent * extent * extent;
}

double GridSpec::cell_volume() const { return std::pow(spacing, dim); }

std::array<std::size_t, 3> GridSpec::unflatten(std::size_t site) const {
  if (dim == 1) return {site, 0, 0};
  return {site % extent, (site / extent) % extent, site / (extent * extent)};
}

std::size_t GridSpec::flatten(const std::array<std::size_t, 3>& idx) const {
  if (dim == 1) return idx[0];
  return (idx[2] * extent + idx[1]) * extent + idx[0];
}

Point GridSpec::coord(std::size_t site) const {
  const auto idx = unflatten(site);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) p[a] = static_cast<double>(idx[a]) * spacing;
  return p;
}

std::optional<std::size_t> GridSpec::neighbor(std::size_t site, int axis,
                                              long offset) const {
  auto idx = unflatten(site);
  const long n = static_cast<long>(extent);
  long j = static_cast<long>(idx[axis]) + offset;
  if (boundary == Boundary::periodic) {
    j = ((j % n) + n) % n;
  } else if (j < 0 || j >= n) {
    return std::nullopt;
  }
  idx[axis] = static_cast<std::size_t>(j);
  return flatten(idx);
}

GridSpec make_grid(int dim, std::size_t extent, double spacing,
                   Boundary boundary) {
  GridSpec g{dim, extent, spacing, boundary, 1.0};
  g.validate();
  return g;
}

Region Region::ball(Point center, double radius) {
  Region r;
  r.kind = Kind::ball;
  r.center = center;
  r.radius = radius;
  return r;
}

Region Region::ball(double center_x, double radius) {
  return ball(Point{center_x, 0.0, 0.0}, radius);
}

Region Region::site_set(std::vector<std::size_t> sites) {
  Region r;
  r.kind = Kind::site_set;
  r.sites = std::move(sites);
  return r;
}

Region Region::whole(const GridSpec& grid) {
  std::vector<std::size_t> all(grid.sites());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return site_set(std::move(all));
}

namespace {

double dist2(const GridSpec& grid, const Point& a, const Point& b) {
  double s = 0.0;
  for (int k = 0; k < grid.dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

SiteMask ball_mask_clipped(const GridSpec& grid, const Point& center,
                           double radius) {
  SiteMask mask(grid.sites(), 0);
  if (!(radius > 0.0)) return mask;
  const double r2 = radius * radius;
  for (std::size_t s = 0; s < mask.size(); ++s)
    mask[s] = dist2(grid, grid.coord(s), center) <= r2 ? 1 : 0;
  return mask;
}

void require_no_wrap(const GridSpec& grid, const Point& center, double radius,
                     const char* what) {
  const double hi = grid.length() - grid.spacing;
  for (int a = 0; a < grid.dim; ++a) {
    if (center[a] - radius < 0.0 || center[a] + radius > hi) {
      std::ostringstream err;
      err << what << ": ball (center " << center[a] << ", radius " << radius
          << ") leaves [0, " << hi << "] on axis " << a;
      throw ConfigError(err.str());
    }
  }
}

SiteMask region_mask(const GridSpec& grid, const Region& region) {
  grid.validate();
  if (region.kind == Region::Kind::ball) {
    if (!(region.radius > 0.0)) throw ConfigError("ball radius must be > 0");
    require_no_wrap(grid, region.center, region.radius, "region");
    return ball_mask_clipped(grid, region.center, region.radius);
  }
  SiteMask mask(grid.sites(), 0);
  for (auto s : region.sites) {
    if (s >= mask.size())
      throw ConfigError("site " + std::to_string(s) + " outside the grid");
    if (mask[s]) throw ConfigError("duplicate site " + std::to_string(s));
    mask[s] = 1;
  }
  return mask;
}

SiteMask dilate_sites(const GridSpec& grid, const SiteMask& seed,
                      std::size_t radius) {
  SiteMask out = seed;
  // Separable: a Chebyshev ball is the product of 1-D intervals.
  for (int a = 0; a < grid.dim; ++a) {
    SiteMask next(out.size(), 0);
    for (std::size_t s = 0; s < out.size(); ++s) {
      if (!out[s]) continue;
      next[s] = 1;
      for (long k = 1; k <= static_cast<long>(radius); ++k) {
        if (auto n = grid.neighbor(s, a, k)) next[*n] = 1;
        if (auto n = grid.neighbor(s, a, -k)) next[*n] = 1;
      }
    }
    out.swap(next);
  }
  return out;
}

std::size_t count(const SiteMask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

SiteMask complement(const SiteMask& mask) {
  SiteMask out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 0 : 1;
  return out;
}

double ConeSlice::radius() const {
  return direction == ConeDirection::contracting
             ? base.radius - speed * elapsed
             : base.radius + speed * elapsed;
}

ConeSlice cone_slice(const Region& base, double elapsed, double speed,
                     ConeDirection direction) {
  if (base.kind != Region::Kind::ball)
    throw ConfigError("cone slices need a ball base");
  if (!(elapsed >= 0.0)) throw ConfigError("cone slice time must be >= 0");
  if (!(speed > 0.0)) throw ConfigError("cone speed must be > 0");
  ConeSlice slice{base, elapsed, direction, speed};
  if (direction == ConeDirection::contracting && !(slice.radius() > 0.0)) {
    std::ostringstream err;
    err << "contracting cone vanished: t = " << elapsed
        << " >= radius/speed = " << base.radius / speed;
    throw ConeVanishedError(err.str());
  }
  return slice;
}

template <typename T>
bool Field<T>::all_finite() const {
  for (const auto& v : values_) {
    if constexpr (std::is_same_v<T, cplx>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    } else {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template class Field<double>;
template class Field<cplx>;

double discrete_integral(const GridSpec& grid, std::span<const double> f,
                         const SiteMask& mask) {
  if (f.size() != mask.size()) throw ShapeError("integrand/mask size mismatch");
  double sum = 0.0;
  for (std::size_t s = 0; s < f.size(); ++s)
    if (mask[s]) sum += f[s];
  return sum * grid.cell_volume();
}

double discrete_integral(const RealField& f, const Region& region, int component,
                         Quadrature /*rule*/) {
  if (component < 0 || component >= f.components())
    throw ShapeError("component out of range");
  return discrete_integral(f.grid(), f.component(component),
                           region_mask(f.grid(), region));
}

RealField poly_bump(const GridSpec& grid, const Point& center, double width,
                    double amplitude, int order) {
  if (!(width > 0.0)) throw ConfigError("bump width must be > 0");
  RealField f(grid, 1);
  const double w2 = width * width;
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    const double q = dist2(grid, grid.coord(s), center) / w2;
    if (q < 1.0) f.at(s, 0) = amplitude * std::pow(1.0 - q, order);
  }
  return f;
}

std::vector<long> neighbor_table(const GridSpec& grid) {
  const std::size_t n = grid.sites();
  const int d = grid.dim;
  std::vector<long> table(n * d * 2, -1);
  for (std::size_t s = 0; s < n; ++s)
    for (int a = 0; a < d; ++a)
      for (int k = 0; k < 2; ++k)
        if (auto nb = grid.neighbor(s, a, k == 0 ? -1 : 1))
          table[(s * d + a) * 2 + k] = static_cast<long>(*nb);
  return table;
}

}  // namespace conelab
