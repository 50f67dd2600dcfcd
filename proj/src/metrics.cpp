#include "operon/metrics.hpp"

#include <iostream>

namespace operon {

RelativeL2Result relative_l2(const std::vector<Matrix>& pred, const std::vector<Matrix>& truth) {
  if (pred.size() != truth.size())
    throw DimensionMismatch("relative_l2: output count mismatch");
  const auto s_count = static_cast<Index>(pred.size());
  RelativeL2Result result;
  result.per_output.resize(s_count);
  result.per_sample.resize(pred.size());

  for (Index s = 0; s < s_count; ++s) {
    const Matrix& p = pred[s];
    const Matrix& t = truth[s];
    if (p.rows() != t.rows() || p.cols() != t.cols())
      throw DimensionMismatch("relative_l2: shape mismatch");
    std::vector<double> errors;
    errors.reserve(t.cols());
    for (Index i = 0; i < t.cols(); ++i) {
      const double norm = t.col(i).norm();
      if (norm == 0.0) {
        std::cerr << "relative_l2: skipping sample " << i << " of output " << s
                  << " (zero-norm truth)\n";
        ++result.skipped;
        continue;
      }
      errors.push_back((p.col(i) - t.col(i)).norm() / norm);
    }
    result.per_sample[s] =
        Eigen::Map<const Vector>(errors.data(), static_cast<Index>(errors.size()));
    result.per_output(s) =
        errors.empty() ? 0.0 : result.per_sample[s].mean();
  }
  return result;
}

namespace {

// One dense layer (in -> out) on b inputs: matmul, bias add, and (hidden
// layers only) one activation op per value.
double layer_flops(Index in, Index out, Index batch, bool activation) {
  const double matmul = static_cast<double>(out) * batch * (2.0 * static_cast<double>(in) - 1.0);
  const double bias = static_cast<double>(out) * batch;
  const double act = activation ? static_cast<double>(out) * batch : 0.0;
  return matmul + bias + act;
}

double stack_flops(Index in, const std::vector<Index>& hidden, Index out, Index batch) {
  double total = 0;
  Index prev = in;
  for (Index width : hidden) {
    total += layer_flops(prev, width, batch, true);
    prev = width;
  }
  total += layer_flops(prev, out, batch, false);
  return total;
}

}  // namespace

double mean_eval_flops(const MeanArchitecture& mean, Index m_points) {
  switch (mean.variant) {
    case MeanVariant::Zero:
      return 0.0;
    case MeanVariant::Mlp:
      return stack_flops(mean.feature_dim + mean.coord_dim, mean.mlp_hidden,
                         mean.output_count, m_points);
    case MeanVariant::BranchTrunk: {
      const double branch = stack_flops(mean.feature_dim, mean.branch_hidden,
                                        mean.latent_dim * mean.output_count, 1);
      const double trunk =
          stack_flops(mean.coord_dim, mean.trunk_hidden, mean.latent_dim, m_points);
      // inner product + scalar bias per point per head
      const double combine = static_cast<double>(m_points) * mean.output_count *
                             (2.0 * static_cast<double>(mean.latent_dim) - 1.0 + 1.0);
      return branch + trunk + combine;
    }
  }
  return 0.0;
}

FlopsBreakdown inference_cost(Index n_train, Index n_points, Index m_points, Index coord_dim,
                              const MeanArchitecture& mean) {
  FlopsBreakdown cost;
  const double n = static_cast<double>(n_train);
  const double m = static_cast<double>(m_points);
  cost.mean_flops = mean_eval_flops(mean, m_points);
  cost.query_flops = 4.0 * m * m * (static_cast<double>(coord_dim) + 1.0) - 2.0 * m;
  cost.sample_flops = 2.0 * n * (2.0 * static_cast<double>(n_points) + 2.0 * m + 1.0);
  cost.total = cost.mean_flops + cost.query_flops + cost.sample_flops;
  return cost;
}

}  // namespace operon
