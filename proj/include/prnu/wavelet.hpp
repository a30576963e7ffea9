#pragma once

#include <algorithm>
#include <vector>

#include "prnu/matrix.hpp"

namespace prnu::wavelet {

// 8-tap orthonormal Daubechies analysis low-pass; the high-pass is the
// quadrature mirror g[k] = (-1)^k h[7-k]. Tap values are fixed here so the
// transform — and every fingerprint built on it — is bit-reproducible.
inline constexpr double kLo[8] = {
    0.23037781330885523,  0.71484657055254153,  0.63088076792959036,
    -0.02798376941698385, -0.18703481171888114, 0.03084138183598697,
    0.03288301166698295,  -0.01059740178499728};

inline constexpr double kHi[8] = {
    -0.01059740178499728, -0.03288301166698295, 0.03084138183598697,
    0.18703481171888114,  -0.02798376941698385, -0.63088076792959036,
    0.71484657055254153,  -0.23037781330885523};

struct Level {
  Matrix<double> lh, hl, hh;  // detail subbands (row-lo/col-hi, row-hi/col-lo, hi-hi)
};

struct Pyramid {
  std::vector<Level> levels;
  Matrix<double> approx;
};

namespace detail {

// One analysis step along rows: in (r x c, c even) -> lo, hi (r x c/2).
// Periodic boundary extension.
inline void analyze_rows(const Matrix<double>& in, Matrix<double>& lo, Matrix<double>& hi) {
  const int r = in.rows(), c = in.cols(), half = c / 2;
  lo = Matrix<double>(r, half);
  hi = Matrix<double>(r, half);
  for (int i = 0; i < r; ++i) {
    for (int k = 0; k < half; ++k) {
      double a = 0.0, d = 0.0;
      for (int m = 0; m < 8; ++m) {
        const double v = in(i, (2 * k + m) % c);
        a += kLo[m] * v;
        d += kHi[m] * v;
      }
      lo(i, k) = a;
      hi(i, k) = d;
    }
  }
}

inline void analyze_cols(const Matrix<double>& in, Matrix<double>& lo, Matrix<double>& hi) {
  const int r = in.rows(), c = in.cols(), half = r / 2;
  lo = Matrix<double>(half, c);
  hi = Matrix<double>(half, c);
  for (int k = 0; k < half; ++k) {
    for (int j = 0; j < c; ++j) {
      double a = 0.0, d = 0.0;
      for (int m = 0; m < 8; ++m) {
        const double v = in((2 * k + m) % r, j);
        a += kLo[m] * v;
        d += kHi[m] * v;
      }
      lo(k, j) = a;
      hi(k, j) = d;
    }
  }
}

// Transpose of analyze_rows; the filter bank is orthonormal so this is the
// exact inverse of one analysis step.
inline void synthesize_rows(const Matrix<double>& lo, const Matrix<double>& hi,
                            Matrix<double>& out) {
  const int r = lo.rows(), half = lo.cols(), c = half * 2;
  out = Matrix<double>(r, c, 0.0);
  for (int i = 0; i < r; ++i) {
    for (int k = 0; k < half; ++k) {
      const double a = lo(i, k), d = hi(i, k);
      for (int m = 0; m < 8; ++m) {
        out(i, (2 * k + m) % c) += kLo[m] * a + kHi[m] * d;
      }
    }
  }
}

inline void synthesize_cols(const Matrix<double>& lo, const Matrix<double>& hi,
                            Matrix<double>& out) {
  const int half = lo.rows(), c = lo.cols(), r = half * 2;
  out = Matrix<double>(r, c, 0.0);
  for (int k = 0; k < half; ++k) {
    for (int j = 0; j < c; ++j) {
      const double a = lo(k, j), d = hi(k, j);
      for (int m = 0; m < 8; ++m) {
        out((2 * k + m) % r, j) += kLo[m] * a + kHi[m] * d;
      }
    }
  }
}

}  // namespace detail

/// Separable 2D decomposition. Descends while both sides stay even, up to
/// max_levels; odd sizes simply stop early.
inline Pyramid forward(const Matrix<double>& img, int max_levels = 4) {
  Pyramid pyr;
  Matrix<double> cur = img;
  for (int level = 0; level < max_levels; ++level) {
    if (cur.rows() % 2 != 0 || cur.cols() % 2 != 0 || cur.rows() < 2 || cur.cols() < 2) break;
    Matrix<double> rlo, rhi;
    detail::analyze_rows(cur, rlo, rhi);
    Level lv;
    Matrix<double> ll;
    detail::analyze_cols(rlo, ll, lv.hl);
    detail::analyze_cols(rhi, lv.lh, lv.hh);
    pyr.levels.push_back(std::move(lv));
    cur = std::move(ll);
  }
  pyr.approx = std::move(cur);
  return pyr;
}

inline Matrix<double> inverse(const Pyramid& pyr) {
  Matrix<double> cur = pyr.approx;
  for (auto it = pyr.levels.rbegin(); it != pyr.levels.rend(); ++it) {
    Matrix<double> rlo, rhi;
    detail::synthesize_cols(cur, it->hl, rlo);
    detail::synthesize_cols(it->lh, it->hh, rhi);
    detail::synthesize_rows(rlo, rhi, cur);
  }
  return cur;
}

/// Local-variance Wiener attenuation of one detail subband, in place.
/// Signal variance per coefficient is max(0, windowed mean of squares -
/// sigma0^2), minimized over window sizes 3,5,7,9 (windows clamp at the
/// subband edge). The orthonormal transform keeps white image noise at
/// sigma0 per coefficient in every subband.
inline void wiener_shrink(Matrix<double>& sb, double sigma0) {
  const int r = sb.rows(), c = sb.cols();
  const double noise_var = sigma0 * sigma0;

  // summed-area table of squared coefficients
  std::vector<double> sat(static_cast<std::size_t>(r + 1) * (c + 1), 0.0);
  const auto at = [&](int i, int j) -> double& {
    return sat[static_cast<std::size_t>(i) * (c + 1) + j];
  };
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      const double v = sb(i, j);
      at(i + 1, j + 1) = v * v + at(i, j + 1) + at(i + 1, j) - at(i, j);
    }
  }
  const auto box_mean = [&](int i, int j, int radius) {
    const int r0 = std::max(0, i - radius), r1 = std::min(r - 1, i + radius);
    const int c0 = std::max(0, j - radius), c1 = std::min(c - 1, j + radius);
    const double sum = at(r1 + 1, c1 + 1) - at(r0, c1 + 1) - at(r1 + 1, c0) + at(r0, c0);
    return sum / (static_cast<double>(r1 - r0 + 1) * (c1 - c0 + 1));
  };

  static constexpr int kRadii[4] = {1, 2, 3, 4};  // windows 3,5,7,9
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      double est = std::max(0.0, box_mean(i, j, kRadii[0]) - noise_var);
      for (int k = 1; k < 4; ++k) {
        est = std::min(est, std::max(0.0, box_mean(i, j, kRadii[k]) - noise_var));
      }
      sb(i, j) *= est / (est + noise_var);
    }
  }
}

}  // namespace prnu::wavelet
