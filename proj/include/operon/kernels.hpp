#pragma once

#include <vector>

#include "operon/types.hpp"

namespace operon {

enum class KernelFamily { Gaussian, Matern12, Matern32, Matern52 };

const char* kernel_family_name(KernelFamily family);
KernelFamily kernel_family_from_name(const std::string& name);

// ARD covariance parameters, kept in log space so any real vector is valid.
struct KernelParams {
  KernelFamily family = KernelFamily::Gaussian;
  Vector log_beta;        // one length-scale per feature dimension
  double log_sigma2 = 0;  // process variance

  Index dim() const { return log_beta.size(); }
  Vector beta() const { return log_beta.array().exp(); }
  double sigma2() const { return std::exp(log_sigma2); }
};

KernelParams make_kernel(KernelFamily family, Index dim, double beta, double sigma2 = 1.0);

// Product kernel c_phi(u,u') * c_y(y,y'). The output factor's variance is
// pinned to 1; only sigma2_phi is a free parameter.
struct SeparableKernelParams {
  KernelParams input;
  KernelParams output;
};

SeparableKernelParams make_separable(KernelFamily input_family, Index input_dim, double beta_phi,
                                     double sigma2_phi, KernelFamily output_family,
                                     Index output_dim, double beta_y);

double kernel_eval(const KernelParams& k, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y);

// Cross-Gram matrix with (i,j) = k(X_i, X'_j); rows of X and Xp are points.
Matrix gram(const KernelParams& k, const Eigen::Ref<const Matrix>& x,
            const Eigen::Ref<const Matrix>& xp);

inline Matrix gram(const KernelParams& k, const Eigen::Ref<const Matrix>& x) {
  return gram(k, x, x);
}

// Value and coordinate derivatives of c(y*, Y_j) with respect to y*.
// Gaussian only; the physics path needs twice-differentiable kernels.
struct KernelCoordinateDerivs {
  Vector value;   // length q
  Matrix first;   // d x q, row i holds d c / d y*_i
  Matrix second;  // d x q, row i holds d^2 c / d y*_i^2
};

KernelCoordinateDerivs kernel_y_derivs(const KernelParams& k, const Eigen::Ref<const Vector>& y,
                                       const Eigen::Ref<const Matrix>& points);

// d Gram / d log beta_i assembled from the cached Gram matrix: O(n^2) per
// dimension, no re-exponentiation. `scaled_dist` is required for the Matern
// families (pass the matrix from scaled_distances) and ignored for Gaussian.
Matrix gram_dlog_beta(const KernelParams& k, const Eigen::Ref<const Matrix>& x,
                      const Eigen::Ref<const Matrix>& c, const Matrix& scaled_dist, Index dim);

// sqrt(sum_i beta_i (x_i - x'_i)^2) for all pairs; cached by Matern callers.
Matrix scaled_distances(const KernelParams& k, const Eigen::Ref<const Matrix>& x);

// All hyperparameter derivatives of the symmetric Gram matrix of X.
struct KernelHyperparamDerivs {
  std::vector<Matrix> d_log_beta;  // one n x n matrix per feature dimension
  Matrix d_log_sigma2;             // equals the Gram matrix itself
};

KernelHyperparamDerivs kernel_hyperparam_derivs(const KernelParams& k,
                                                const Eigen::Ref<const Matrix>& x);

}  // namespace operon
