#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "admarket/rational.hpp"

namespace admarket {

using RationalMatrix = std::vector<std::vector<Rational>>;

/// Gauss-Jordan elimination over the rationals for a square system.
/// Returns nullopt when the matrix is singular.
inline std::optional<std::vector<Rational>> solve_linear_system(RationalMatrix a, std::vector<Rational> b) {
  const auto n = a.size();
  if (b.size() != n) throw std::invalid_argument("right-hand side size mismatch");
  for (const auto& row : a)
    if (row.size() != n) throw std::invalid_argument("matrix must be square");

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && sgn(a[pivot][col]) == 0) ++pivot;
    if (pivot == n) return std::nullopt;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    const Rational inv = 1 / a[col][col];
    for (std::size_t k = col; k < n; ++k) a[col][k] *= inv;
    b[col] *= inv;
    for (std::size_t row = 0; row < n; ++row) {
      if (row == col || sgn(a[row][col]) == 0) continue;
      const Rational factor = a[row][col];
      for (std::size_t k = col; k < n; ++k)
        if (sgn(a[col][k]) != 0) a[row][k] -= factor * a[col][k];
      b[row] -= factor * b[col];
    }
  }
  return b;
}

}  // namespace admarket
