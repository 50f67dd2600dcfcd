#pragma once

#include <optional>
#include <vector>

#include "operon/dataset.hpp"
#include "operon/kernels.hpp"
#include "operon/linalg.hpp"
#include "operon/means.hpp"
#include "operon/pca.hpp"
#include "operon/types.hpp"

namespace operon {

// Negative log likelihood split into its two halves. The 1/2 convention is
// used throughout: total = (logdet_term + quad_term) / 2.
struct LossValue {
  double total = 0;
  double logdet_term = 0;
  double quad_term = 0;
};

struct FitOptions {
  JitterSchedule jitter{};
  std::optional<Index> pca_rank;  // project inputs onto this many PCs
};

// A fitted operator GP: frozen data, kernels, mean, per-factor Cholesky
// factors and the residual matrices W^s = C_y^{-1} (V^s - M^s) C_phi^{-1}
// that make prediction a pair of small matrix products.
struct TrainedOperatorGP {
  Matrix features;  // N x f kernel features (PCA coordinates when pca is set)
  Matrix y;         // q x d
  std::vector<Matrix> v;
  SeparableKernelParams kernel;
  MeanFunction mean;
  std::optional<PcaBasis> pca;
  CholeskyFactor chol_phi;
  CholeskyFactor chol_y;
  std::vector<Matrix> w;  // S matrices, q x N

  Index sample_count() const { return features.rows(); }
  Index grid_size() const { return y.rows(); }
  Index output_count() const { return static_cast<Index>(v.size()); }

  // Maps a raw length-p input to the kernel feature space.
  Vector project_input(const Eigen::Ref<const Vector>& u_raw) const;
  Matrix project_inputs(const Eigen::Ref<const Matrix>& u_raw) const;
};

// Brute-force single-output NLL through the materialized Nq x Nq covariance.
// Exists as the oracle the Kronecker path is checked against.
LossValue nll_dense_oracle(const OperatorDataset& data, const SeparableKernelParams& kernel,
                           const MeanFunction& mean,
                           const JitterSchedule& jitter = JitterSchedule{},
                           Index max_joint_size = 2000);

// Kronecker-factored NLL; never materializes the joint covariance.
LossValue nll_kron(const OperatorDataset& data, const SeparableKernelParams& kernel,
                   const MeanFunction& mean, const JitterSchedule& jitter = JitterSchedule{});

// Frozen-kernel data-fit loss sum_s (v^s-m^s)^T vec(C_y^{-1}(V^s-M^s)C_phi^{-1})
// together with its gradient in the mean evaluations.
struct NnMeanLoss {
  double value = 0;
  MeanBatch dloss_dmean;  // -2 C_y^{-1} (V^s - M^s) C_phi^{-1} per output
};

NnMeanLoss loss_nn_mle(const std::vector<Matrix>& v, const MeanBatch& m,
                       const CholeskyFactor& chol_phi, const CholeskyFactor& chol_y);

// Identity-Gram variant: plain sum of squared residuals (the MSE path).
NnMeanLoss loss_nn_mse(const std::vector<Matrix>& v, const MeanBatch& m);

TrainedOperatorGP fit(const OperatorDataset& data, const SeparableKernelParams& kernel,
                      MeanFunction mean, const FitOptions& options = {});

// Recomputes W^s for new mean parameters, reusing the stored factors.
void refit_residuals(TrainedOperatorGP& model);

// Posterior mean at query points for one raw input function: m x S.
Matrix predict(const TrainedOperatorGP& model, const Eigen::Ref<const Vector>& u_raw,
               const Eigen::Ref<const Matrix>& y_query);

// Batched over test inputs: S matrices of size m x N_test.
std::vector<Matrix> predict_batch(const TrainedOperatorGP& model,
                                  const Eigen::Ref<const Matrix>& u_raw,
                                  const Eigen::Ref<const Matrix>& y_query);

// Diagonal operator-valued-kernel recovery baseline:
// c_nu(Y*,Y) C_nu^{-1} V C_lambda^{-1} c_lambda(U, u*).
Vector optimal_recovery_predict(const OperatorDataset& data, const KernelParams& c_lambda,
                                const KernelParams& c_nu, const Eigen::Ref<const Vector>& u_star,
                                const Eigen::Ref<const Matrix>& y_query,
                                const JitterSchedule& jitter = JitterSchedule{});

void save_model(const std::string& path, const TrainedOperatorGP& model);
TrainedOperatorGP load_model(const std::string& path);

}  // namespace operon
