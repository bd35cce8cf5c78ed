#pragma once

// Grids, regions, light-cone slices and discrete integrals shared by all
// solvers. Sites sit at x = index * spacing along each axis; flattened
// indices run x fastest: site = (iz * N + iy) * N + ix.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "conelab/errors.hpp"

namespace conelab {

using cplx = std::complex<double>;
using Point = std::array<double, 3>;

enum class Boundary { periodic, absorbing_pad };

struct GridSpec {
  int dim = 1;
  std::size_t extent = 0;
  double spacing = 1.0;
  Boundary boundary = Boundary::periodic;
  double wave_speed = 1.0;

  /// Throws ConfigError when extent < 4, spacing <= 0, dim not in {1,3}
  /// or wave_speed != 1.
  void validate() const;

  std::size_t sites() const;
  double length() const { return static_cast<double>(extent) * spacing; }
  double cell_volume() const;

  std::array<std::size_t, 3> unflatten(std::size_t site) const;
  std::size_t flatten(const std::array<std::size_t, 3>& idx) const;
  Point coord(std::size_t site) const;

  /// Neighbour `offset` sites away along `axis`; nullopt when the step
  /// leaves an absorbing-pad grid.
  std::optional<std::size_t> neighbor(std::size_t site, int axis,
                                      long offset) const;

  bool operator==(const GridSpec&) const = default;
};

GridSpec make_grid(int dim, std::size_t extent, double spacing,
                   Boundary boundary = Boundary::periodic);

struct Region {
  enum class Kind { ball, site_set };

  Kind kind = Kind::ball;
  Point center{0.0, 0.0, 0.0};
  double radius = 0.0;
  std::vector<std::size_t> sites;

  static Region ball(Point center, double radius);
  static Region ball(double center_x, double radius);
  static Region site_set(std::vector<std::size_t> sites);
  /// Every site of the grid, as a site set.
  static Region whole(const GridSpec& grid);
};

/// Per-site membership flags.
using SiteMask = std::vector<std::uint8_t>;

/// Membership of each site. Balls use the closed test |x - center| <= radius.
/// Throws ConfigError when a ball does not fit strictly inside the grid or a
/// site set has duplicates / out-of-range entries.
SiteMask region_mask(const GridSpec& grid, const Region& region);

/// Ball membership without the fit check; used for cone slices that may
/// legitimately reach past the grid (expanding slices, guard-band dilation).
/// A radius <= 0 yields the empty mask.
SiteMask ball_mask_clipped(const GridSpec& grid, const Point& center,
                           double radius);

/// Sites within `radius` of every site in `seed` (Chebyshev/stencil metric,
/// in sites along each axis). Periodic grids wrap.
SiteMask dilate_sites(const GridSpec& grid, const SiteMask& seed,
                      std::size_t radius);

std::size_t count(const SiteMask& mask);
SiteMask complement(const SiteMask& mask);

enum class ConeDirection { contracting, expanding };

struct ConeSlice {
  Region base;
  double elapsed = 0.0;
  ConeDirection direction = ConeDirection::contracting;
  double speed = 1.0;

  double radius() const;
  Region region() const { return Region::ball(base.center, radius()); }
};

/// Slice of the light cone over a ball. Contracting slices require
/// elapsed < radius / speed, else ConeVanishedError.
ConeSlice cone_slice(const Region& base, double elapsed, double speed,
                     ConeDirection direction);

/// Real or complex samples per (site, component), stored component-major.
template <typename T>
class Field {
 public:
  Field() = default;
  Field(const GridSpec& grid, int components)
      : grid_(grid),
        components_(components),
        values_(grid.sites() * static_cast<std::size_t>(components), T{}) {
    if (components < 1) throw ShapeError("field needs at least one component");
  }

  const GridSpec& grid() const { return grid_; }
  int components() const { return components_; }
  std::size_t sites() const { return grid_.sites(); }

  T& at(std::size_t site, int c) { return values_[offset(c) + site]; }
  const T& at(std::size_t site, int c) const {
    return values_[offset(c) + site];
  }

  std::span<T> component(int c) {
    return {values_.data() + offset(c), grid_.sites()};
  }
  std::span<const T> component(int c) const {
    return {values_.data() + offset(c), grid_.sites()};
  }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  bool all_finite() const;
  bool same_shape(const Field& other) const {
    return grid_ == other.grid_ && components_ == other.components_;
  }

 private:
  std::size_t offset(int c) const {
    return static_cast<std::size_t>(c) * grid_.sites();
  }

  GridSpec grid_{};
  int components_ = 1;
  std::vector<T> values_;
};

using RealField = Field<double>;
using ComplexField = Field<cplx>;

enum class Quadrature { midpoint };

/// Sum over masked sites of f * spacing^dim for one component.
double discrete_integral(const RealField& f, const Region& region, int component = 0,
                         Quadrature rule = Quadrature::midpoint);
double discrete_integral(const GridSpec& grid, std::span<const double> f,
                         const SiteMask& mask);

/// Compactly supported polynomial bump amp * (1 - (r/width)^2)^order for
/// r < width; order 3 gives a C^2 profile.
RealField poly_bump(const GridSpec& grid, const Point& center, double width,
                    double amplitude, int order = 3);

/// Throws ConfigError unless a ball of `radius` about `center` stays inside
/// [0, L - spacing] on every active axis, i.e. cannot wrap on periodic grids.
void require_no_wrap(const GridSpec& grid, const Point& center, double radius,
                     const char* what);

/// Nearest-neighbour indices: entry [(site * dim + axis) * 2 + {0: -1, 1: +1}],
/// -1 where an absorbing-pad grid has no neighbour.
std::vector<long> neighbor_table(const GridSpec& grid);

}  // namespace conelab
