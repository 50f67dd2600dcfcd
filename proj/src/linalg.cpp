#include "operon/linalg.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

namespace operon {

namespace {

void check_square_symmetric(const Eigen::Ref<const Matrix>& a) {
  if (a.rows() != a.cols())
    throw DimensionMismatch("cholesky_with_jitter: matrix is not square (" +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ")");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * scale)
    throw std::invalid_argument("cholesky_with_jitter: matrix is not symmetric");
}

bool try_factor(const Eigen::Ref<const Matrix>& a, double jitter, CholeskyFactor& out) {
  Matrix shifted = a;
  if (jitter > 0.0) shifted.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  // LLT can accept marginally indefinite inputs; insist on positive pivots.
  if ((llt.matrixLLT().diagonal().array() <= 0.0).any()) return false;
  out.lower = llt.matrixL();
  out.jitter_used = jitter;
  return true;
}

}  // namespace

CholeskyFactor cholesky_with_jitter(const Eigen::Ref<const Matrix>& a,
                                    const JitterSchedule& schedule) {
  check_square_symmetric(a);
  const double mean_diag = a.trace() / static_cast<double>(a.rows());

  CholeskyFactor factor;
  if (schedule.try_zero && try_factor(a, 0.0, factor)) return factor;
  if (schedule.base_rel > 0.0) {
    for (double rel = schedule.base_rel; rel <= schedule.max_rel * (1.0 + 1e-12);
         rel *= schedule.factor) {
      if (try_factor(a, rel * mean_diag, factor)) return factor;
    }
  }
  throw NotPositiveDefinite("cholesky_with_jitter: factorization failed at all jitter levels");
}

Matrix chol_solve(const CholeskyFactor& factor, const Eigen::Ref<const Matrix>& b) {
  if (factor.dim() != b.rows())
    throw DimensionMismatch("chol_solve: factor dim " + std::to_string(factor.dim()) +
                            " vs rhs rows " + std::to_string(b.rows()));
  Matrix x = factor.lower.triangularView<Eigen::Lower>().solve(b);
  factor.lower.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

double log_det(const CholeskyFactor& factor) {
  return 2.0 * factor.lower.diagonal().array().log().sum();
}

Matrix inverse_spd(const CholeskyFactor& factor) {
  return chol_solve(factor, Matrix::Identity(factor.dim(), factor.dim()));
}

Matrix kron_dense(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b,
                  std::int64_t max_elements) {
  if (a.size() == 0 || b.size() == 0)
    throw DimensionMismatch("kron_dense: empty operand");
  const std::int64_t rows = static_cast<std::int64_t>(a.rows()) * b.rows();
  const std::int64_t cols = static_cast<std::int64_t>(a.cols()) * b.cols();
  if (rows * cols > max_elements)
    throw AllocationLimit("kron_dense: output of " + std::to_string(rows * cols) +
                          " elements exceeds cap " + std::to_string(max_elements));
  Matrix out(rows, cols);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace operon
