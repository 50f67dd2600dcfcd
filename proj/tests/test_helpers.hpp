#pragma once

#include "operon/rng.hpp"
#include "operon/types.hpp"

namespace operon::testing {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vector random_vector(Rng& rng, Index size) {
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = rng.normal();
  return v;
}

inline Matrix random_spd(Rng& rng, Index n, double ridge = 0.5) {
  const Matrix m = random_matrix(rng, n, n);
  Matrix a = m * m.transpose() / static_cast<double>(n);
  a.diagonal().array() += ridge;
  return a;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace operon::testing
