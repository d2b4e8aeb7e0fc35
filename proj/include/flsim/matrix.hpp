#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace flsim {

/// Row-major dense matrix. Plain storage; the heavy math lives in nn.hpp.
template <typename Real>
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> values;  // rows * cols, row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, Real(0)) {}

  Real& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  const Real& at(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }

  Real* row(std::size_t r) { return values.data() + r * cols; }
  const Real* row(std::size_t r) const { return values.data() + r * cols; }

  bool all_finite() const {
    for (const Real v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const DenseMatrix&) const = default;
};

}  // namespace flsim
