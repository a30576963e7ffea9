#pragma once

#include <algorithm>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "prnu/errors.hpp"
#include "prnu/fft.hpp"
#include "prnu/imaging.hpp"
#include "prnu/matrix.hpp"
#include "prnu/wavelet.hpp"

namespace prnu {

enum class FilterKind { Wavelet, SecondOrder, FourthOrder };
enum class SuppressStrategy { None, RowCol, FftWiener, Both };

inline const char* filter_name(FilterKind k) {
  switch (k) {
    case FilterKind::Wavelet: return "wavelet";
    case FilterKind::SecondOrder: return "sod";
    case FilterKind::FourthOrder: return "fod";
  }
  return "?";
}

inline FilterKind filter_from_name(const std::string& s) {
  if (s == "wavelet") return FilterKind::Wavelet;
  if (s == "sod") return FilterKind::SecondOrder;
  if (s == "fod") return FilterKind::FourthOrder;
  throw ValueError("unknown filter kind: " + s);
}

inline const char* suppress_name(SuppressStrategy s) {
  switch (s) {
    case SuppressStrategy::None: return "none";
    case SuppressStrategy::RowCol: return "rowcol";
    case SuppressStrategy::FftWiener: return "fftwiener";
    case SuppressStrategy::Both: return "both";
  }
  return "?";
}

inline SuppressStrategy suppress_from_name(const std::string& s) {
  if (s == "none") return SuppressStrategy::None;
  if (s == "rowcol") return SuppressStrategy::RowCol;
  if (s == "fftwiener") return SuppressStrategy::FftWiener;
  if (s == "both") return SuppressStrategy::Both;
  throw ValueError("unknown suppression strategy: " + s);
}

/// Full extraction configuration. Patterns and fingerprints are only
/// comparable when produced under identical settings, so this struct rides
/// along in fingerprint files and threshold tables.
struct FilterConfig {
  FilterKind filter = FilterKind::SecondOrder;
  double sigma0 = 3.0;  // wavelet noise std, in summed-gray units
  SuppressStrategy suppress = SuppressStrategy::RowCol;
  int crop = 1024;  // 0 disables cropping

  bool operator==(const FilterConfig& o) const {
    return filter == o.filter && sigma0 == o.sigma0 && suppress == o.suppress && crop == o.crop;
  }
  bool operator!=(const FilterConfig& o) const { return !(*this == o); }

  nlohmann::json to_json() const {
    return {{"filter", filter_name(filter)},
            {"sigma0", sigma0},
            {"suppress", suppress_name(suppress)},
            {"crop", crop}};
  }

  static FilterConfig from_json(const nlohmann::json& j) {
    FilterConfig c;
    c.filter = filter_from_name(j.at("filter").get<std::string>());
    c.sigma0 = j.at("sigma0").get<double>();
    c.suppress = suppress_from_name(j.at("suppress").get<std::string>());
    c.crop = j.at("crop").get<int>();
    return c;
  }
};

namespace detail {

/// 5-point Laplacian with edge replication (out-of-range neighbors clamp to
/// the border pixel).
inline GrayImage laplacian_replicate(const GrayImage& img) {
  const int h = img.rows(), w = img.cols();
  GrayImage out(h, w);
  for (int i = 0; i < h; ++i) {
    const int up = std::max(0, i - 1), dn = std::min(h - 1, i + 1);
    for (int j = 0; j < w; ++j) {
      const int lf = std::max(0, j - 1), rt = std::min(w - 1, j + 1);
      out(i, j) = img(up, j) + img(dn, j) + img(i, lf) + img(i, rt) - 4.0 * img(i, j);
    }
  }
  return out;
}

}  // namespace detail

/// High-pass residual of one explicit diffusion smoothing step:
/// noise = img - (img + tau * Lap(img)) = -tau * Lap(img), tau = 1/4.
inline NoisePattern extract_noise_second_order(const GrayImage& img) {
  if (img.rows() < 3 || img.cols() < 3) {
    throw DimensionError("second-order filter needs at least 3x3, got " + img.shape_str());
  }
  NoisePattern out = detail::laplacian_replicate(img);
  for (double& v : out.data()) v *= -0.25;
  return out;
}

/// Biharmonic response: noise = (1/16) * Lap(Lap(img)), edge replication at
/// each application.
inline NoisePattern extract_noise_fourth_order(const GrayImage& img) {
  if (img.rows() < 5 || img.cols() < 5) {
    throw DimensionError("fourth-order filter needs at least 5x5, got " + img.shape_str());
  }
  NoisePattern out = detail::laplacian_replicate(detail::laplacian_replicate(img));
  for (double& v : out.data()) v *= 1.0 / 16.0;
  return out;
}

/// Wavelet-domain extraction: 4-level db4 decomposition with periodic
/// extension, per-coefficient Wiener attenuation of the detail subbands
/// (local variance minimized over windows 3,5,7,9), approximation kept.
/// The residual img - reconstruction is the noise estimate.
inline NoisePattern extract_noise_wavelet(const GrayImage& img, double sigma0) {
  if (img.rows() < 64 || img.cols() < 64) {
    throw DimensionError("wavelet filter needs at least 64x64, got " + img.shape_str());
  }
  if (!(sigma0 > 0.0)) {
    throw ValueError("sigma0 must be positive");
  }
  wavelet::Pyramid pyr = wavelet::forward(img, 4);
  for (auto& lv : pyr.levels) {
    wavelet::wiener_shrink(lv.lh, sigma0);
    wavelet::wiener_shrink(lv.hl, sigma0);
    wavelet::wiener_shrink(lv.hh, sigma0);
  }
  Matrix<double> recon = wavelet::inverse(pyr);
  NoisePattern out(img.rows(), img.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img[i] - recon[i];
  return out;
}

/// Remove structured non-PRNU noise. RowCol subtracts each row's mean, then
/// each column's mean (kills linear row/column banding). FftWiener clamps
/// spectral peaks (kills periodic patterns of any orientation).
inline NoisePattern suppress_periodic(const NoisePattern& np, SuppressStrategy strategy) {
  switch (strategy) {
    case SuppressStrategy::None:
      return np;
    case SuppressStrategy::RowCol: {
      NoisePattern out = np;
      const int h = out.rows(), w = out.cols();
      for (int i = 0; i < h; ++i) {
        double m = 0.0;
        for (int j = 0; j < w; ++j) m += out(i, j);
        m /= w;
        for (int j = 0; j < w; ++j) out(i, j) -= m;
      }
      for (int j = 0; j < w; ++j) {
        double m = 0.0;
        for (int i = 0; i < h; ++i) m += out(i, j);
        m /= h;
        for (int i = 0; i < h; ++i) out(i, j) -= m;
      }
      return out;
    }
    case SuppressStrategy::FftWiener:
      return detail::suppress_fft_wiener(np);
    case SuppressStrategy::Both:
      return detail::suppress_fft_wiener(suppress_periodic(np, SuppressStrategy::RowCol));
  }
  return np;
}

/// Center to zero mean and scale to unit L2 norm. Constant input means a
/// degenerate image (for example a saturated frame) and is rejected so it
/// cannot silently pollute group averages.
inline NoisePattern normalize(const NoisePattern& np) {
  const auto [mn, mx] = std::minmax_element(np.data().begin(), np.data().end());
  if (*mn == *mx) {
    throw DegenerateError("zero pattern: all entries equal");
  }
  NoisePattern out = np;
  const double mu = mean(out);
  for (double& v : out.data()) v -= mu;
  const double norm = l2_norm(out);
  if (norm == 0.0) {
    throw DegenerateError("zero pattern: vanishing norm");
  }
  for (double& v : out.data()) v /= norm;
  return out;
}

/// The full per-image pipeline after gray summation: optional center crop,
/// filter, suppression, normalization.
inline NoisePattern extract_pattern(const GrayImage& gray, const FilterConfig& cfg) {
  GrayImage working = cfg.crop > 0 ? center_crop(gray, cfg.crop) : gray;
  NoisePattern np;
  switch (cfg.filter) {
    case FilterKind::SecondOrder: np = extract_noise_second_order(working); break;
    case FilterKind::FourthOrder: np = extract_noise_fourth_order(working); break;
    case FilterKind::Wavelet: np = extract_noise_wavelet(working, cfg.sigma0); break;
  }
  return normalize(suppress_periodic(np, cfg.suppress));
}

}  // namespace prnu
