#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "prnu/matrix.hpp"

namespace prnu::detail {

inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

/// In-place 2D DFT. FFTW planning is not thread-safe, so plan creation and
/// destruction are serialized; execution runs concurrently. The inverse is
/// unscaled (caller divides by rows*cols).
inline void fft2d_inplace(std::vector<std::complex<double>>& data, int rows, int cols,
                          bool inverse) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    const std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    plan = fftw_plan_dft_2d(rows, cols, ptr, ptr, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    const std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
}

/// Clamp spectral magnitude peaks to 4x the local median magnitude, taken
/// over a 7x7 window of frequency bins with wrap-around. Phase is preserved,
/// and no bin is ever amplified. Periodic image noise shows up as isolated
/// spectral spikes, which this flattens into the surrounding noise floor.
inline NoisePattern suppress_fft_wiener(const NoisePattern& np) {
  const int h = np.rows(), w = np.cols();
  const std::size_t n = np.size();
  std::vector<std::complex<double>> freq(n);
  for (std::size_t i = 0; i < n; ++i) freq[i] = np[i];
  fft2d_inplace(freq, h, w, false);

  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(freq[i]);

  NoisePattern out(h, w);
  std::vector<double> window;
  window.reserve(49);
  std::vector<std::complex<double>> filtered(n);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      window.clear();
      for (int di = -3; di <= 3; ++di) {
        const int ii = (i + di + h) % h;
        for (int dj = -3; dj <= 3; ++dj) {
          const int jj = (j + dj + w) % w;
          window.push_back(mag[static_cast<std::size_t>(ii) * w + jj]);
        }
      }
      std::nth_element(window.begin(), window.begin() + window.size() / 2, window.end());
      const double median = window[window.size() / 2];
      const std::size_t idx = static_cast<std::size_t>(i) * w + j;
      const double limit = 4.0 * median;
      if (mag[idx] > limit && mag[idx] > 0.0) {
        filtered[idx] = freq[idx] * (limit / mag[idx]);
      } else {
        filtered[idx] = freq[idx];
      }
    }
  }

  fft2d_inplace(filtered, h, w, true);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = filtered[i].real() * scale;
  return out;
}

}  // namespace prnu::detail
