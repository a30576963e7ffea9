#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "prnu/errors.hpp"

namespace prnu {

/// Dense row-major matrix. The element type is double everywhere in the
/// pipeline; the template keeps the container usable for byte planes too.
template <typename T>
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 1 || cols < 1) {
      throw DimensionError("matrix dimensions must be positive");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int height() const { return rows_; }
  int width() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << cols_ << "x" << rows_;
    return os.str();
  }

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

/// Single-channel image in summed-gray units (range [0, 765] after channel
/// summation). Same layout as a noise pattern; the aliases mark intent.
using GrayImage = Matrix<double>;

/// Zero-mean noise residual extracted from one image, or an average of them.
using NoisePattern = Matrix<double>;

/// Quarter-turn rotations, clockwise. Composition is the cyclic group C4.
enum class Rotation { R0, R90, R180, R270 };

inline const char* rotation_name(Rotation r) {
  switch (r) {
    case Rotation::R0: return "0";
    case Rotation::R90: return "90";
    case Rotation::R180: return "180";
    case Rotation::R270: return "270";
  }
  return "?";
}

/// Rotate clockwise. R90 maps element (i, j) to (j, height-1-i); non-square
/// inputs come back with transposed dimensions for R90/R270.
template <typename T>
Matrix<T> rotate(const Matrix<T>& m, Rotation r) {
  const int h = m.rows(), w = m.cols();
  switch (r) {
    case Rotation::R0:
      return m;
    case Rotation::R90: {
      Matrix<T> out(w, h);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out(j, h - 1 - i) = m(i, j);
      return out;
    }
    case Rotation::R180: {
      Matrix<T> out(h, w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out(h - 1 - i, w - 1 - j) = m(i, j);
      return out;
    }
    case Rotation::R270: {
      Matrix<T> out(w, h);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out(w - 1 - j, i) = m(i, j);
      return out;
    }
  }
  return m;
}

inline double mean(const Matrix<double>& m) {
  double s = 0.0;
  for (double v : m.data()) s += v;
  return s / static_cast<double>(m.size());
}

inline double l2_norm(const Matrix<double>& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

inline double rms(const Matrix<double>& m) {
  return l2_norm(m) / std::sqrt(static_cast<double>(m.size()));
}

}  // namespace prnu
