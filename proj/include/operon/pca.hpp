#pragma once

#include "operon/types.hpp"

namespace operon {

// Truncated principal-component basis of a sample matrix (rows = samples).
struct PcaBasis {
  Vector mean;        // length p, column means of the fitted data
  Matrix components;  // r x p, orthonormal rows, decreasing singular value

  Index rank() const { return components.rows(); }
  Index input_dim() const { return components.cols(); }
};

// Fits by SVD of the centered matrix. If r exceeds the numerical rank the
// basis is shrunk to the rank and a warning is printed to stderr.
// Sign convention: the largest-magnitude entry of each component is positive.
PcaBasis pca_fit(const Eigen::Ref<const Matrix>& x, Index r);

// Projects rows of x onto the basis: (x - mean) * components^T, N x r.
Matrix pca_transform(const PcaBasis& basis, const Eigen::Ref<const Matrix>& x);

// Maps coordinates back: z * components + mean, N x p.
Matrix pca_reconstruct(const PcaBasis& basis, const Eigen::Ref<const Matrix>& z);

}  // namespace operon
