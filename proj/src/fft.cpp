#include "conelab/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace conelab {

namespace {
// The FFTW planner is not thread-safe; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fft::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

Fft::Fft(const GridSpec& grid) : plans_(std::make_unique<Plans>()), size_(grid.sites()) {
  if (grid.boundary != Boundary::periodic)
    throw ConfigError("spectral transforms need a periodic grid");
  std::vector<cplx> scratch(size_);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  const int n = static_cast<int>(grid.extent);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  if (grid.dim == 1) {
    plans_->fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, flags);
    plans_->bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, flags);
  } else {
    // Our flattening runs x fastest, i.e. row-major [z][y][x].
    plans_->fwd = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_FORWARD, flags);
    plans_->bwd = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_BACKWARD, flags);
  }
  if (!plans_->fwd || !plans_->bwd) throw ConfigError("FFTW planning failed");
}

Fft::~Fft() = default;
Fft::Fft(Fft&&) noexcept = default;
Fft& Fft::operator=(Fft&&) noexcept = default;

void Fft::forward(std::span<cplx> data) const {
  if (data.size() != size_) throw ShapeError("FFT size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plans_->fwd, p, p);
}

void Fft::backward(std::span<cplx> data) const {
  if (data.size() != size_) throw ShapeError("FFT size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plans_->bwd, p, p);
  const double inv = 1.0 / static_cast<double>(size_);
  for (auto& v : data) v *= inv;
}

std::vector<double> fft_wavenumbers(std::size_t extent, double length) {
  std::vector<double> k(extent);
  const double base = 2.0 * std::numbers::pi / length;
  const long n = static_cast<long>(extent);
  for (long i = 0; i < n; ++i) k[i] = base * static_cast<double>(i < (n + 1) / 2 ? i : i - n);
  return k;
}

std::vector<Point> fft_wave_vectors(const GridSpec& grid) {
  const auto k1 = fft_wavenumbers(grid.extent, grid.length());
  std::vector<Point> out(grid.sites());
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto idx = grid.unflatten(s);
    Point k{0.0, 0.0, 0.0};
    for (int a = 0; a < grid.dim; ++a) k[a] = k1[idx[a]];
    out[s] = k;
  }
  return out;
}

std::vector<double> fft_k_squared(const GridSpec& grid) {
  const auto kv = fft_wave_vectors(grid);
  std::vector<double> out(kv.size());
  for (std::size_t s = 0; s < kv.size(); ++s)
    out[s] = kv[s][0] * kv[s][0] + kv[s][1] * kv[s][1] + kv[s][2] * kv[s][2];
  return out;
}

std::string fft_backend_version() { return fftw_version; }

}  // namespace conelab
