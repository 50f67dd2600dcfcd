#include "operon/pca.hpp"

#include <Eigen/SVD>
#include <iostream>

namespace operon {

PcaBasis pca_fit(const Eigen::Ref<const Matrix>& x, Index r) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (r < 0 || r > std::min(n, p))
    throw DimensionMismatch("pca_fit: r out of range");

  PcaBasis basis;
  basis.mean = x.colwise().mean();
  Matrix centered = x.rowwise() - basis.mean.transpose();

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = sv.size() > 0
                         ? sv(0) * static_cast<double>(std::max(n, p)) *
                               std::numeric_limits<double>::epsilon()
                         : 0.0;
  Index numerical_rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++numerical_rank;

  if (r > numerical_rank) {
    std::cerr << "pca_fit: requested " << r << " components but numerical rank is "
              << numerical_rank << "; shrinking\n";
    r = numerical_rank;
  }

  basis.components = svd.matrixV().leftCols(r).transpose();
  for (Index i = 0; i < r; ++i) {
    Index arg_max = 0;
    basis.components.row(i).cwiseAbs().maxCoeff(&arg_max);
    if (basis.components(i, arg_max) < 0.0) basis.components.row(i) *= -1.0;
  }
  return basis;
}

Matrix pca_transform(const PcaBasis& basis, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != basis.input_dim())
    throw DimensionMismatch("pca_transform: feature dim mismatch");
  return (x.rowwise() - basis.mean.transpose()) * basis.components.transpose();
}

Matrix pca_reconstruct(const PcaBasis& basis, const Eigen::Ref<const Matrix>& z) {
  if (z.cols() != basis.rank())
    throw DimensionMismatch("pca_reconstruct: coordinate dim mismatch");
  return (z * basis.components).rowwise() + basis.mean.transpose();
}

}  // namespace operon
