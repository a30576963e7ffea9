#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "prnu/errors.hpp"
#include "prnu/filters.hpp"
#include "prnu/matrix.hpp"

namespace prnu {

/// Pearson correlation of two equal-size matrices viewed as vectors:
/// centered dot product over the product of centered norms.
inline double corr2(const NoisePattern& a, const NoisePattern& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("corr2 dimension mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  const std::size_t n = a.size();
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    dot += da * db;
    na += da * da;
    nb += db * db;
  }
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateError("corr2 requires non-constant inputs");
  }
  return dot / std::sqrt(na * nb);
}

/// One averaged image in a fingerprint. Members merged in from a rotated
/// group keep the rotation that maps their stored orientation into the
/// fingerprint's canonical one.
struct Member {
  std::string id;
  Rotation rotation = Rotation::R0;
};

/// Running average of member noise patterns: the PRNU estimate of a camera
/// or group. The pattern is the plain mean of the members' normalized
/// patterns; corr2 re-centers and re-scales at comparison time, so the mean
/// is deliberately not re-normalized after each add.
struct Fingerprint {
  NoisePattern pattern;
  std::vector<Member> members;

  int count() const { return static_cast<int>(members.size()); }

  bool has_member(const std::string& id) const {
    return std::any_of(members.begin(), members.end(),
                       [&](const Member& m) { return m.id == id; });
  }

  static Fingerprint from_pattern(NoisePattern np, std::string id) {
    Fingerprint f;
    f.pattern = std::move(np);
    f.members.push_back({std::move(id), Rotation::R0});
    return f;
  }
};

/// Fold one more pattern into the running average:
/// new = (count*old + np) / (count+1). Count-weighted double arithmetic, so
/// folding the same multiset in any order gives the same mean.
inline void average_into(Fingerprint& f, const NoisePattern& np, const std::string& id) {
  if (!f.pattern.same_shape(np)) {
    throw DimensionError("average_into dimension mismatch: " + f.pattern.shape_str() + " vs " +
                         np.shape_str());
  }
  if (f.has_member(id)) {
    throw MemberError("duplicate member: " + id);
  }
  const double k = static_cast<double>(f.count());
  const double inv = 1.0 / (k + 1.0);
  for (std::size_t i = 0; i < f.pattern.size(); ++i) {
    f.pattern[i] = (k * f.pattern[i] + np[i]) * inv;
  }
  f.members.push_back({id, Rotation::R0});
}

inline constexpr std::array<Rotation, 4> kAllRotations = {Rotation::R0, Rotation::R90,
                                                          Rotation::R180, Rotation::R270};

/// Try all four quarter-turns of f2 against f1 and return the best. Ties
/// resolve to the earliest rotation in enumeration order, so identical
/// inputs always give identical outputs.
inline std::pair<Rotation, double> best_rotation_corr(const Fingerprint& f1,
                                                      const Fingerprint& f2) {
  if (f1.pattern.rows() != f1.pattern.cols() || f2.pattern.rows() != f2.pattern.cols() ||
      !f1.pattern.same_shape(f2.pattern)) {
    throw DimensionError("best_rotation_corr needs square patterns of identical size, got " +
                         f1.pattern.shape_str() + " vs " + f2.pattern.shape_str());
  }
  Rotation best_r = Rotation::R0;
  double best_c = -2.0;
  for (Rotation r : kAllRotations) {
    const double c = corr2(f1.pattern, rotate(f2.pattern, r));
    if (c > best_c) {
      best_c = c;
      best_r = r;
    }
  }
  return {best_r, best_c};
}

namespace detail {

inline Rotation compose(Rotation a, Rotation b) {
  return static_cast<Rotation>((static_cast<int>(a) + static_cast<int>(b)) % 4);
}

}  // namespace detail

/// Count-weighted merge, rotating f2 into f1's orientation (f1 is the
/// canonical orientation of the result). f2's members keep the composed
/// rotation so the result is exactly the mean over all member patterns as
/// expressed in f1's frame.
inline Fingerprint merge_fingerprints(const Fingerprint& f1, const Fingerprint& f2, Rotation r) {
  if (f1.pattern.rows() != f1.pattern.cols() || !f1.pattern.same_shape(f2.pattern)) {
    throw DimensionError("merge_fingerprints needs square patterns of identical size, got " +
                         f1.pattern.shape_str() + " vs " + f2.pattern.shape_str());
  }
  for (const Member& m : f2.members) {
    if (f1.has_member(m.id)) {
      throw MemberError("overlapping member: " + m.id);
    }
  }
  const NoisePattern rotated = rotate(f2.pattern, r);
  const double c1 = f1.count(), c2 = f2.count();
  const double inv = 1.0 / (c1 + c2);
  Fingerprint out;
  out.pattern = NoisePattern(f1.pattern.rows(), f1.pattern.cols());
  for (std::size_t i = 0; i < out.pattern.size(); ++i) {
    out.pattern[i] = (c1 * f1.pattern[i] + c2 * rotated[i]) * inv;
  }
  out.members = f1.members;
  for (const Member& m : f2.members) {
    out.members.push_back({m.id, detail::compose(m.rotation, r)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fingerprint file format (binary, little-endian):
//   "PRNU" | version u16 | width u32 | height u32 | count u32 |
//   config-JSON length u32 | config JSON (UTF-8) |
//   pattern as float32 row-major | member lines, '\n'-terminated UTF-8.
// A member line is the image id, plus "\t<degrees>" when the member was
// merged in under a rotation.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kFingerprintFormatVersion = 1;

struct StoredFingerprint {
  Fingerprint fingerprint;
  FilterConfig config;
};

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  os.write(buf.data(), buf.size());
}

template <typename T>
T read_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> buf;
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

inline std::string member_line(const Member& m) {
  if (m.rotation == Rotation::R0) return m.id;
  return m.id + "\t" + rotation_name(m.rotation);
}

inline Member parse_member_line(const std::string& line) {
  const std::size_t tab = line.rfind('\t');
  if (tab != std::string::npos) {
    const std::string suffix = line.substr(tab + 1);
    for (Rotation r : kAllRotations) {
      if (r != Rotation::R0 && suffix == rotation_name(r)) {
        return {line.substr(0, tab), r};
      }
    }
  }
  return {line, Rotation::R0};
}

}  // namespace detail

inline void write_fingerprint(const StoredFingerprint& sf, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileError(path, "cannot open file for writing");
  os.write("PRNU", 4);
  detail::write_le<std::uint16_t>(os, kFingerprintFormatVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(sf.fingerprint.pattern.width()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(sf.fingerprint.pattern.height()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(sf.fingerprint.count()));
  const std::string cfg = sf.config.to_json().dump();
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.size()));
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  for (double v : sf.fingerprint.pattern.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    detail::write_le<std::uint32_t>(os, bits);
  }
  for (const Member& m : sf.fingerprint.members) {
    const std::string line = detail::member_line(m);
    os.write(line.data(), static_cast<std::streamsize>(line.size()));
    os.put('\n');
  }
  if (!os) throw FileError(path, "fingerprint write failed");
}

inline StoredFingerprint read_fingerprint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError(path, "cannot open file");
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PRNU", 4) != 0) {
    throw ConfigError("bad fingerprint magic in " + path);
  }
  const auto version = detail::read_le<std::uint16_t>(is);
  if (version != kFingerprintFormatVersion) {
    throw ConfigError("unsupported fingerprint version " + std::to_string(version) + " in " +
                      path);
  }
  const auto width = detail::read_le<std::uint32_t>(is);
  const auto height = detail::read_le<std::uint32_t>(is);
  const auto count = detail::read_le<std::uint32_t>(is);
  const auto cfg_len = detail::read_le<std::uint32_t>(is);
  std::string cfg(cfg_len, '\0');
  is.read(cfg.data(), cfg_len);
  if (!is) throw ConfigError("truncated fingerprint file: " + path);

  StoredFingerprint sf;
  try {
    sf.config = FilterConfig::from_json(nlohmann::json::parse(cfg));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad fingerprint config in " + path + ": " + e.what());
  }
  sf.fingerprint.pattern = NoisePattern(static_cast<int>(height), static_cast<int>(width));
  for (double& v : sf.fingerprint.pattern.data()) {
    const auto bits = detail::read_le<std::uint32_t>(is);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    v = static_cast<double>(f);
  }
  if (!is) throw ConfigError("truncated fingerprint file: " + path);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) sf.fingerprint.members.push_back(detail::parse_member_line(line));
  }
  if (sf.fingerprint.count() != static_cast<int>(count)) {
    throw ConfigError("fingerprint member count mismatch in " + path);
  }
  return sf;
}

}  // namespace prnu
