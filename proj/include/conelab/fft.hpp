#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "conelab/lattice.hpp"

namespace conelab {

/// Unnormalised complex DFT over a periodic grid (1-D or 3-D cube), backed
/// by FFTW with FFTW_ESTIMATE plans so results do not depend on timing.
class Fft {
 public:
  explicit Fft(const GridSpec& grid);
  ~Fft();
  Fft(Fft&&) noexcept;
  Fft& operator=(Fft&&) noexcept;
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  void forward(std::span<cplx> data) const;
  /// Inverse transform including the 1/N normalisation.
  void backward(std::span<cplx> data) const;

  std::size_t size() const { return size_; }

 private:
  struct Plans;
  std::unique_ptr<Plans> plans_;
  std::size_t size_ = 0;
};

/// Angular wavenumbers 2*pi*n/L in FFT order, n = 0..N/2-1, -N/2..-1.
std::vector<double> fft_wavenumbers(std::size_t extent, double length);

/// |k|^2 per mode of a periodic grid, flattened like the grid.
std::vector<double> fft_k_squared(const GridSpec& grid);

/// Wave vector per mode (components beyond dim are zero).
std::vector<Point> fft_wave_vectors(const GridSpec& grid);

/// Version string reported by the FFT backend.
std::string fft_backend_version();

}  // namespace conelab
