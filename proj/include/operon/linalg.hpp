#pragma once

#include <cstdint>

#include "operon/types.hpp"

namespace operon {

// Escalating diagonal regularization used when a Gram matrix is numerically
// singular. Levels are relative to the mean diagonal tr(A)/n so the schedule
// is scale-free: {0, base_rel, base_rel*factor, ...} up to max_rel.
struct JitterSchedule {
  bool try_zero = true;
  double base_rel = 1e-10;
  double max_rel = 1e-4;
  double factor = 10.0;

  static JitterSchedule none() { return JitterSchedule{true, 0.0, 0.0, 10.0}; }
};

struct CholeskyFactor {
  Matrix lower;             // lower-triangular L with L*L^T = A + jitter_used*I
  double jitter_used = 0.0;

  Index dim() const { return lower.rows(); }
};

// Factors a symmetric positive (semi-)definite matrix, escalating jitter
// through the schedule until a factorization succeeds.
// Throws DimensionMismatch for non-square input, std::invalid_argument when
// the input is not symmetric to 1e-9 relative, NotPositiveDefinite when every
// level fails.
CholeskyFactor cholesky_with_jitter(const Eigen::Ref<const Matrix>& a,
                                    const JitterSchedule& schedule = JitterSchedule{});

// Solves (A + jitter*I) X = B using a previously computed factor.
Matrix chol_solve(const CholeskyFactor& factor, const Eigen::Ref<const Matrix>& b);

// log|A + jitter*I| = 2 * sum(log diag(L))
double log_det(const CholeskyFactor& factor);

// Explicit inverse of the factored matrix; used where traces against the
// inverse are needed, never for plain solves.
Matrix inverse_spd(const CholeskyFactor& factor);

inline constexpr std::int64_t kDefaultKronMaxElements = 10'000'000;

// Dense Kronecker product. Test oracle only: the training and prediction
// paths never materialize C_phi (x) C_y, and the element cap keeps an
// accidental production use from allocating gigabytes.
Matrix kron_dense(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b,
                  std::int64_t max_elements = kDefaultKronMaxElements);

// vec(X) stacks columns: for the q x N value matrix V this orders the q
// outputs of sample 1 first, then sample 2, matching C_phi (x) C_y.
inline Vector vec(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unvec(const Eigen::Ref<const Vector>& v, Index rows, Index cols) {
  if (v.size() != rows * cols)
    throw DimensionMismatch("unvec: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace operon
