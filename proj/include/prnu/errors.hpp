#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prnu {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing or unreadable input file. Carries the offending path.
class FileError : public Error {
public:
  FileError(std::string path, const std::string& msg)
      : Error(msg + ": " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

/// Corrupt or unsupported image data. Carries the offending path.
class DecodeError : public Error {
public:
  DecodeError(std::string path, const std::string& msg)
      : Error(msg + ": " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

/// Shape problems: mismatched dimensions, inputs too small, empty inputs.
class DimensionError : public Error {
public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Out-of-domain parameter values (nonpositive sigma, invalid error margin, ...).
class ValueError : public Error {
public:
  explicit ValueError(const std::string& msg) : Error(msg) {}
};

/// Degenerate data: constant images, zero noise patterns.
class DegenerateError : public Error {
public:
  explicit DegenerateError(const std::string& msg) : Error(msg) {}
};

/// Membership violations on fingerprints (duplicate or overlapping members).
class MemberError : public Error {
public:
  explicit MemberError(const std::string& msg) : Error(msg) {}
};

/// Calibration cannot be completed. May carry the (a, b) cells that
/// could not be sampled from the provided database.
class CalibrationError : public Error {
public:
  explicit CalibrationError(const std::string& msg) : Error(msg) {}
  CalibrationError(const std::string& msg, std::vector<std::pair<int, int>> cells)
      : Error(msg), skipped_cells_(std::move(cells)) {}
  const std::vector<std::pair<int, int>>& skipped_cells() const { return skipped_cells_; }

private:
  std::vector<std::pair<int, int>> skipped_cells_;
};

/// Incompatible or malformed configuration artifacts (threshold table vs
/// filter settings, unreadable fingerprint files, ...).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace prnu
