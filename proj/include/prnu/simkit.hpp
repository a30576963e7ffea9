#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "prnu/errors.hpp"
#include "prnu/image_io.hpp"
#include "prnu/imaging.hpp"
#include "prnu/matrix.hpp"
#include "prnu/rng.hpp"

namespace prnu {

/// Synthetic sensor: a fixed multiplicative noise field (white Gaussian,
/// normalized to zero mean and unit per-pixel variance so that `strength`
/// is the relative sensitivity variation) plus that modulation strength.
struct SyntheticCamera {
  std::string id;
  NoisePattern prnu;
  double strength = 0.0;
};

namespace detail {

/// i.i.d. standard-normal field, exactly centered and scaled to sample
/// standard deviation 1.
inline NoisePattern white_field(rng::Stream& stream, int size) {
  NoisePattern field(size, size);
  stream.fill_normal(field.data());
  const double m = mean(field);
  for (double& v : field.data()) v -= m;
  const double scale = 1.0 / rms(field);
  for (double& v : field.data()) v *= scale;
  return field;
}

}  // namespace detail

inline SyntheticCamera gen_camera(std::uint64_t rng_seed, int size, double strength,
                                  std::string id = "") {
  if (size < 64) throw ValueError("camera size must be >= 64");
  if (strength < 0.0) throw ValueError("camera strength must be >= 0");
  rng::Stream stream(rng::derive_seed(rng_seed, 0xCA3E7Aull));
  NoisePattern field = detail::white_field(stream, size);
  if (id.empty()) id = "cam_" + std::to_string(rng_seed);
  return {std::move(id), std::move(field), strength};
}

/// scene .* (1 + strength * prnu) + read noise, clamped at the black level.
inline GrayImage gen_image(const SyntheticCamera& camera, const GrayImage& scene,
                           double read_noise_std, rng::Stream& stream) {
  if (!scene.same_shape(camera.prnu)) {
    throw DimensionError("scene " + scene.shape_str() + " does not match sensor " +
                         camera.prnu.shape_str());
  }
  if (read_noise_std < 0.0) throw ValueError("read noise must be >= 0");
  GrayImage out(scene.rows(), scene.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = scene[i] * (1.0 + camera.strength * camera.prnu[i]);
    if (read_noise_std > 0.0) v += read_noise_std * stream.normal();
    out[i] = std::max(0.0, v);
  }
  return out;
}

struct SimDbConfig {
  /// Additive sensor noise in gray units on the 0..765 channel-sum scale.
  double read_noise_std = 30.0;
  /// Relative amplitude of a weak texture shared by every image in the
  /// database, mimicking processing artifacts common to the whole corpus
  /// (non-camera-specific noise). Scaled by a mid-gray level of 400; set
  /// to 0 for fully independent scenes.
  double artifact_strength = 0.015;
  double brightness_lo = 300.0;
  double brightness_hi = 500.0;
  double max_slope = 0.15;  // max brightness gradient, gray levels per pixel
};

struct SyntheticImage {
  std::string id;
  std::string camera;
  GrayImage gray;
};

struct SyntheticDatabase {
  std::vector<SyntheticCamera> cameras;
  std::vector<SyntheticImage> images;
};

namespace detail {

inline std::string padded(const char* prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

}  // namespace detail

/// Images are emitted camera by camera: cam00_img000 .. cam00_img<k-1>,
/// then cam01_..., so consecutive slices of the database span few cameras.
inline SyntheticDatabase gen_database(int n_cameras, int images_per_camera, int size,
                                      double strength, std::uint64_t rng_seed,
                                      const SimDbConfig& config = {}) {
  if (n_cameras < 1 || images_per_camera < 1) {
    throw ValueError("database needs at least one camera and one image per camera");
  }
  if (config.brightness_lo <= 0.0 || config.brightness_hi < config.brightness_lo) {
    throw ValueError("bad brightness range");
  }
  SyntheticDatabase db;
  db.cameras.reserve(n_cameras);
  for (int c = 0; c < n_cameras; ++c) {
    db.cameras.push_back(
        gen_camera(rng::derive_seed(rng_seed, 1, c), size, strength, detail::padded("cam", c, 2)));
  }

  NoisePattern artifact(size, size);
  if (config.artifact_strength > 0.0) {
    rng::Stream stream(rng::derive_seed(rng_seed, 2));
    artifact = detail::white_field(stream, size);
    const double scale = config.artifact_strength * 400.0;
    for (double& v : artifact.data()) v *= scale;
  }

  db.images.reserve(static_cast<std::size_t>(n_cameras) * images_per_camera);
  for (int c = 0; c < n_cameras; ++c) {
    for (int k = 0; k < images_per_camera; ++k) {
      rng::Stream stream(rng::derive_seed(rng_seed, 3, c, k));
      const double brightness = stream.uniform(config.brightness_lo, config.brightness_hi);
      const double sx = stream.uniform(-config.max_slope, config.max_slope);
      const double sy = stream.uniform(-config.max_slope, config.max_slope);
      GrayImage scene(size, size);
      const double ci = 0.5 * (size - 1), cj = 0.5 * (size - 1);
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          scene(i, j) = brightness + sx * (j - cj) + sy * (i - ci) + artifact(i, j);
        }
      }
      db.images.push_back({db.cameras[c].id + "_" + detail::padded("img", k, 3),
                           db.cameras[c].id, gen_image(db.cameras[c], scene,
                                                       config.read_noise_std, stream)});
    }
  }
  return db;
}

namespace detail {

/// Split a gray level in [0, 765] into R+G+B channels that sum back to it.
inline void split_gray(double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
  const long n = std::clamp(std::lround(v), 0l, 765l);
  r = static_cast<std::uint8_t>((n + 2) / 3);
  g = static_cast<std::uint8_t>((n + 1) / 3);
  b = static_cast<std::uint8_t>(n / 3);
}

}  // namespace detail

inline RgbImage gray_to_rgb(const GrayImage& gray) {
  RgbImage img(static_cast<int>(gray.cols()), static_cast<int>(gray.rows()));
  for (std::size_t i = 0; i < gray.size(); ++i) {
    detail::split_gray(gray[i], img.r[i], img.g[i], img.b[i]);
  }
  return img;
}

/// Apply the 8-bit storage roundtrip in place: what extract sees after
/// write_corpus + load is exactly this quantization of the gray channel sum.
inline void quantize_corpus(SyntheticDatabase& db) {
  for (auto& image : db.images) {
    for (double& v : image.gray.data()) {
      v = static_cast<double>(std::clamp(std::lround(v), 0l, 765l));
    }
  }
}

/// Write every image as <id>.png plus a labels.csv mapping relative image
/// paths to camera ids. Returns the labels file path.
inline std::string write_corpus(const SyntheticDatabase& db, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string labels_path = (std::filesystem::path(dir) / "labels.csv").string();
  std::ofstream labels(labels_path);
  if (!labels) throw FileError(labels_path, "cannot open file for writing");
  labels << "path,camera_id\n";
  for (const auto& image : db.images) {
    const std::string name = image.id + ".png";
    save_png(gray_to_rgb(image.gray), (std::filesystem::path(dir) / name).string());
    labels << name << "," << image.camera << "\n";
  }
  return labels_path;
}

}  // namespace prnu
