#include "operon/gp.hpp"

#include <cmath>

namespace operon {

namespace {

void check_dataset_shapes(const OperatorDataset& data) {
  if (data.v.empty()) throw DimensionMismatch("gp: dataset has no outputs");
  for (const Matrix& vs : data.v)
    if (vs.rows() != data.grid_size() || vs.cols() != data.sample_count())
      throw DimensionMismatch("gp: output matrix shape mismatch");
}

}  // namespace

Vector TrainedOperatorGP::project_input(const Eigen::Ref<const Vector>& u_raw) const {
  if (!pca) {
    if (u_raw.size() != features.cols())
      throw DimensionMismatch("predict: input length does not match training features");
    return u_raw;
  }
  if (u_raw.size() != pca->input_dim())
    throw DimensionMismatch("predict: input length does not match PCA basis");
  return pca_transform(*pca, u_raw.transpose()).row(0).transpose();
}

Matrix TrainedOperatorGP::project_inputs(const Eigen::Ref<const Matrix>& u_raw) const {
  if (!pca) {
    if (u_raw.cols() != features.cols())
      throw DimensionMismatch("predict: input width does not match training features");
    return u_raw;
  }
  return pca_transform(*pca, u_raw);
}

LossValue nll_dense_oracle(const OperatorDataset& data, const SeparableKernelParams& kernel,
                           const MeanFunction& mean, const JitterSchedule& jitter,
                           Index max_joint_size) {
  check_dataset_shapes(data);
  if (data.output_count() != 1)
    throw DimensionMismatch("nll_dense_oracle: single-output only");
  const Index joint = data.sample_count() * data.grid_size();
  if (joint > max_joint_size)
    throw AllocationLimit("nll_dense_oracle: joint size " + std::to_string(joint) +
                          " exceeds cap " + std::to_string(max_joint_size));

  const Matrix c_phi = gram(kernel.input, data.u);
  const Matrix c_y = gram(kernel.output, data.y);
  const Matrix c = kron_dense(c_phi, c_y);
  const CholeskyFactor factor = cholesky_with_jitter(c, jitter);

  const Matrix m = mean_eval(mean, data.u, data.y)[0];
  const Vector residual = vec(data.v[0]) - vec(m);
  const Vector alpha = chol_solve(factor, residual);

  LossValue loss;
  loss.logdet_term = log_det(factor);
  loss.quad_term = residual.dot(alpha);
  loss.total = 0.5 * loss.logdet_term + 0.5 * loss.quad_term;
  return loss;
}

LossValue nll_kron(const OperatorDataset& data, const SeparableKernelParams& kernel,
                   const MeanFunction& mean, const JitterSchedule& jitter) {
  check_dataset_shapes(data);
  const Index n = data.sample_count();
  const Index q = data.grid_size();
  const Index s_count = data.output_count();

  const CholeskyFactor chol_phi = cholesky_with_jitter(gram(kernel.input, data.u), jitter);
  const CholeskyFactor chol_y = cholesky_with_jitter(gram(kernel.output, data.y), jitter);
  const MeanBatch m = mean_eval(mean, data.u, data.y);

  LossValue loss;
  loss.logdet_term = static_cast<double>(s_count) *
                     (static_cast<double>(q) * log_det(chol_phi) +
                      static_cast<double>(n) * log_det(chol_y));
  for (Index s = 0; s < s_count; ++s) {
    const Matrix residual = data.v[s] - m[s];
    // C_y^{-1} R C_phi^{-1} via one solve per factor
    const Matrix left = chol_solve(chol_y, residual);
    const Matrix full = chol_solve(chol_phi, left.transpose()).transpose();
    loss.quad_term += (residual.array() * full.array()).sum();
  }
  loss.total = 0.5 * loss.logdet_term + 0.5 * loss.quad_term;
  return loss;
}

NnMeanLoss loss_nn_mle(const std::vector<Matrix>& v, const MeanBatch& m,
                       const CholeskyFactor& chol_phi, const CholeskyFactor& chol_y) {
  if (v.size() != m.size()) throw DimensionMismatch("loss_nn_mle: output count mismatch");
  NnMeanLoss loss;
  loss.dloss_dmean.resize(v.size());
  for (std::size_t s = 0; s < v.size(); ++s) {
    if (v[s].rows() != m[s].rows() || v[s].cols() != m[s].cols())
      throw DimensionMismatch("loss_nn_mle: residual shape mismatch");
    const Matrix residual = v[s] - m[s];
    const Matrix left = chol_solve(chol_y, residual);
    const Matrix full = chol_solve(chol_phi, left.transpose()).transpose();
    loss.value += (residual.array() * full.array()).sum();
    loss.dloss_dmean[s] = -2.0 * full;
  }
  return loss;
}

NnMeanLoss loss_nn_mse(const std::vector<Matrix>& v, const MeanBatch& m) {
  if (v.size() != m.size()) throw DimensionMismatch("loss_nn_mse: output count mismatch");
  NnMeanLoss loss;
  loss.dloss_dmean.resize(v.size());
  for (std::size_t s = 0; s < v.size(); ++s) {
    const Matrix residual = v[s] - m[s];
    loss.value += residual.squaredNorm();
    loss.dloss_dmean[s] = -2.0 * residual;
  }
  return loss;
}

TrainedOperatorGP fit(const OperatorDataset& data, const SeparableKernelParams& kernel,
                      MeanFunction mean, const FitOptions& options) {
  check_dataset_shapes(data);
  TrainedOperatorGP model;
  if (options.pca_rank) {
    model.pca = pca_fit(data.u, *options.pca_rank);
    model.features = pca_transform(*model.pca, data.u);
  } else {
    model.features = data.u;
  }
  if (kernel.input.dim() != model.features.cols())
    throw DimensionMismatch("fit: kernel input dim does not match features");
  if (kernel.output.dim() != data.coord_dim())
    throw DimensionMismatch("fit: kernel output dim does not match grid");
  if (kernel.output.log_sigma2 != 0.0)
    throw std::invalid_argument("fit: output kernel variance must be pinned to 1");

  model.y = data.y;
  model.v = data.v;
  model.kernel = kernel;
  model.mean = std::move(mean);
  model.chol_phi = cholesky_with_jitter(gram(kernel.input, model.features), options.jitter);
  model.chol_y = cholesky_with_jitter(gram(kernel.output, model.y), options.jitter);
  refit_residuals(model);
  return model;
}

void refit_residuals(TrainedOperatorGP& model) {
  const MeanBatch m = mean_eval(model.mean, model.features, model.y);
  model.w.resize(model.v.size());
  for (std::size_t s = 0; s < model.v.size(); ++s) {
    const Matrix residual = model.v[s] - m[s];
    const Matrix left = chol_solve(model.chol_y, residual);
    model.w[s] = chol_solve(model.chol_phi, left.transpose()).transpose();
  }
}

Matrix predict(const TrainedOperatorGP& model, const Eigen::Ref<const Vector>& u_raw,
               const Eigen::Ref<const Matrix>& y_query) {
  const Vector feat = model.project_input(u_raw);
  const Matrix k_phi = gram(model.kernel.input, model.features, feat.transpose());  // N x 1
  const Matrix k_y = gram(model.kernel.output, y_query, model.y);                   // m x q
  const MeanBatch m = mean_eval(model.mean, feat.transpose(), y_query);

  Matrix out(y_query.rows(), model.output_count());
  for (Index s = 0; s < model.output_count(); ++s)
    out.col(s) = m[s].col(0) + k_y * (model.w[s] * k_phi);
  return out;
}

std::vector<Matrix> predict_batch(const TrainedOperatorGP& model,
                                  const Eigen::Ref<const Matrix>& u_raw,
                                  const Eigen::Ref<const Matrix>& y_query) {
  const Matrix feat = model.project_inputs(u_raw);
  const Matrix k_phi = gram(model.kernel.input, model.features, feat);  // N x N_test
  const Matrix k_y = gram(model.kernel.output, y_query, model.y);      // m x q
  const MeanBatch m = mean_eval(model.mean, feat, y_query);

  std::vector<Matrix> out(model.output_count());
  for (Index s = 0; s < model.output_count(); ++s)
    out[s] = m[s] + k_y * (model.w[s] * k_phi);
  return out;
}

Vector optimal_recovery_predict(const OperatorDataset& data, const KernelParams& c_lambda,
                                const KernelParams& c_nu, const Eigen::Ref<const Vector>& u_star,
                                const Eigen::Ref<const Matrix>& y_query,
                                const JitterSchedule& jitter) {
  check_dataset_shapes(data);
  if (data.output_count() != 1)
    throw DimensionMismatch("optimal_recovery_predict: single-output only");
  const CholeskyFactor chol_lambda = cholesky_with_jitter(gram(c_lambda, data.u), jitter);
  const CholeskyFactor chol_nu = cholesky_with_jitter(gram(c_nu, data.y), jitter);

  const Matrix k_lambda = gram(c_lambda, data.u, u_star.transpose());  // N x 1
  const Matrix k_nu = gram(c_nu, y_query, data.y);                     // m x q

  const Vector right = chol_solve(chol_lambda, k_lambda).col(0);  // C_lambda^{-1} k
  const Matrix middle = chol_solve(chol_nu, data.v[0]);           // C_nu^{-1} V
  return k_nu * (middle * right);
}

}  // namespace operon
