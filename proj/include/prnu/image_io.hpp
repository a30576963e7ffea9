#pragma once

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "prnu/errors.hpp"
#include "prnu/imaging.hpp"

namespace prnu {

namespace detail {

struct JpegErrorState {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

inline void jpeg_error_trap(j_common_ptr cinfo) {
  auto* state = reinterpret_cast<JpegErrorState*>(cinfo->err);
  std::longjmp(state->jump, 1);
}

inline void jpeg_silence(j_common_ptr, int) {}

inline RgbImage load_jpeg(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw FileError(path, "cannot open file");

  jpeg_decompress_struct cinfo{};
  JpegErrorState err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_trap;
  err.mgr.emit_message = jpeg_silence;

  RgbImage out;
  std::vector<std::uint8_t> row;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw DecodeError(path, "JPEG decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;  // grayscale sources are expanded for us
  jpeg_start_decompress(&cinfo);

  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  const std::size_t n = out.pixel_count();
  out.r.resize(n);
  out.g.resize(n);
  out.b.resize(n);
  row.resize(static_cast<std::size_t>(out.width) * 3);

  std::size_t px = 0;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW rp = row.data();
    jpeg_read_scanlines(&cinfo, &rp, 1);
    for (int x = 0; x < out.width; ++x, ++px) {
      out.r[px] = row[3 * x];
      out.g[px] = row[3 * x + 1];
      out.b[px] = row[3 * x + 2];
    }
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return out;
}

inline RgbImage load_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DecodeError(path, "PNG decode failed");
  }
  image.format = PNG_FORMAT_RGB;  // gray and paletted sources are converted
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DecodeError(path, "PNG decode failed");
  }
  RgbImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  const std::size_t n = out.pixel_count();
  out.r.resize(n);
  out.g.resize(n);
  out.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.r[i] = buffer[3 * i];
    out.g[i] = buffer[3 * i + 1];
    out.b[i] = buffer[3 * i + 2];
  }
  return out;
}

}  // namespace detail

/// Decode a JPEG or PNG file. The container is sniffed from the leading
/// magic bytes, not the file extension. Grayscale sources come back with
/// three identical channels.
inline RgbImage load_image(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw FileError(path, "cannot open file");
  unsigned char magic[8] = {};
  const std::size_t got = std::fread(magic, 1, sizeof(magic), fp);
  std::fclose(fp);

  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (got >= 8 && std::equal(png_sig, png_sig + 8, magic)) return detail::load_png(path);
  if (got >= 3 && magic[0] == 0xff && magic[1] == 0xd8 && magic[2] == 0xff)
    return detail::load_jpeg(path);
  throw DecodeError(path, "not a JPEG or PNG file");
}

/// Write an 8-bit RGB PNG.
inline void save_png(const RgbImage& img, const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  const std::size_t n = img.pixel_count();
  std::vector<std::uint8_t> buffer(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    buffer[3 * i] = img.r[i];
    buffer[3 * i + 1] = img.g[i];
    buffer[3 * i + 2] = img.b[i];
  }
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw FileError(path, "PNG write failed");
  }
}

/// Write a baseline JPEG at the given quality.
inline void save_jpeg(const RgbImage& img, const std::string& path, int quality = 92) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw FileError(path, "cannot open file for writing");

  jpeg_compress_struct cinfo{};
  detail::JpegErrorState err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = detail::jpeg_error_trap;

  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::fclose(fp);
    throw FileError(path, "JPEG write failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, fp);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    const std::size_t base = static_cast<std::size_t>(cinfo.next_scanline) * img.width;
    for (int x = 0; x < img.width; ++x) {
      row[3 * x] = img.r[base + x];
      row[3 * x + 1] = img.g[base + x];
      row[3 * x + 2] = img.b[base + x];
    }
    JSAMPROW rp = row.data();
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(fp);
}

}  // namespace prnu
