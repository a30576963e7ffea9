#pragma once

#include <cstdint>
#include <sstream>
#include <vector>

#include "prnu/errors.hpp"
#include "prnu/matrix.hpp"

namespace prnu {

/// Decoded color image: three planar 8-bit channels, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> r, g, b;

  RgbImage() = default;
  RgbImage(int w, int h)
      : width(w),
        height(h),
        r(static_cast<std::size_t>(w) * h),
        g(static_cast<std::size_t>(w) * h),
        b(static_cast<std::size_t>(w) * h) {}

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

/// Sum the three channels into one gray plane. Values stay unscaled in
/// [0, 765]; correlation downstream is scale-invariant so no averaging.
inline GrayImage to_gray_sum(const RgbImage& img) {
  GrayImage out(img.height, img.width);
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<double>(img.r[i]) + static_cast<double>(img.g[i]) +
             static_cast<double>(img.b[i]);
  }
  return out;
}

/// Extract the central size x size window. Odd margins round down, biasing
/// the crop at most one pixel toward the top-left corner; this is fixed so
/// extracted patterns are reproducible bit for bit.
inline GrayImage center_crop(const GrayImage& img, int size = 1024) {
  if (img.width() < size || img.height() < size) {
    std::ostringstream os;
    os << "image too small for center crop: " << img.shape_str() << " < " << size << "x" << size;
    throw DimensionError(os.str());
  }
  if (img.width() == size && img.height() == size) return img;
  const int r0 = (img.height() - size) / 2;
  const int c0 = (img.width() - size) / 2;
  GrayImage out(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) out(i, j) = img(r0 + i, c0 + j);
  return out;
}

}  // namespace prnu
