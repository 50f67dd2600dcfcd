#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "operon/gp.hpp"

namespace operon {

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState create(Index size, double lr);
};

// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, Vector& params, const Vector& grads);

enum class TrainMode { ZeroShot, OneShot, ZeroMeanFull, NnMean };

const char* train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

// beta_y stays large and beta_phi small; see the sweep maps for why these
// defaults land inside the flat optimum region.
struct InitHeuristics {
  double beta_y_init = 3.0;
  double beta_phi_init = 1e-2;
  double sigma2_phi_init = 1.0;
};

struct TrainConfig {
  TrainMode mode = TrainMode::ZeroShot;
  Index epochs = 0;  // forced to 0 / 1 for ZeroShot / OneShot
  double lr = 1e-2;
  std::uint64_t seed = 0;
  bool optimize_beta_y = false;  // ZeroMeanFull only
  bool mse_loss = false;         // NnMean only: identity-Gram MSE
  KernelFamily input_family = KernelFamily::Gaussian;
  KernelFamily output_family = KernelFamily::Gaussian;
  std::optional<Index> pca_rank;
  JitterSchedule jitter{};
};

struct LossRecord {
  Index epoch = 0;
  double total = 0;
  double logdet_term = 0;
  double quad_term = 0;
  double seconds = 0;  // wall clock since training start; not reproducible
};

struct TrainResult {
  TrainedOperatorGP model;
  std::vector<LossRecord> history;
};

// Thrown when a mid-training factorization fails even after one jitter
// escalation retry; carries the history collected so far.
struct TrainingAborted : std::runtime_error {
  TrainingAborted(const std::string& what, std::vector<LossRecord> partial)
      : std::runtime_error(what), history(std::move(partial)) {}
  std::vector<LossRecord> history;
};

// Gradient of the zero-mean Kronecker NLL (1/2 convention) with respect to
// the log-space kernel hyperparameters.
struct NllGradient {
  Vector d_log_beta_phi;
  double d_log_sigma2_phi = 0;
  Vector d_log_beta_y;  // empty unless requested
};

NllGradient grad_nll_kron(const Eigen::Ref<const Matrix>& features,
                          const Eigen::Ref<const Matrix>& y, const std::vector<Matrix>& v,
                          const SeparableKernelParams& kernel, bool with_beta_y,
                          const JitterSchedule& jitter = JitterSchedule{});

// Zero-shot / one-shot / full MLE for zero-mean GPs and the frozen-kernel
// loop for NN-mean GPs.
TrainResult train(const OperatorDataset& data, const TrainConfig& config,
                  const InitHeuristics& init, const MeanArchitecture& mean_arch);

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& history);

// Central-difference validation of the analytic gradients (h = 1e-5 in the
// optimized log/weight parameterization).
struct GradCheckReport {
  double max_rel_error = 0;
  std::vector<double> per_param;
};

GradCheckReport grad_check_kernel(const OperatorDataset& data,
                                  const SeparableKernelParams& kernel, bool with_beta_y);
GradCheckReport grad_check_mean(const OperatorDataset& data,
                                const SeparableKernelParams& kernel, const MeanFunction& mean);

}  // namespace operon
