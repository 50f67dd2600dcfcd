#include "operon/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace operon {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

JitterSchedule escalate(const JitterSchedule& schedule) {
  JitterSchedule out = schedule;
  out.base_rel = std::max(schedule.base_rel, schedule.max_rel);
  if (out.base_rel <= 0.0) out.base_rel = 1e-10;
  out.max_rel = std::max(out.base_rel * 1e2, schedule.max_rel * 1e2);
  return out;
}

SeparableKernelParams init_kernel(const InitHeuristics& init, const TrainConfig& config,
                                  Index feature_dim, Index coord_dim) {
  return make_separable(config.input_family, feature_dim, init.beta_phi_init,
                        init.sigma2_phi_init, config.output_family, coord_dim,
                        init.beta_y_init);
}

// Loss and hyperparameter gradient of the zero-mean Kronecker NLL at the
// current kernel, sharing one factorization per side. A cached output factor
// may be supplied when beta_y is frozen across epochs.
struct ZeroMeanEpoch {
  LossValue loss;
  NllGradient gradient;
  CholeskyFactor chol_phi;
  CholeskyFactor chol_y;
};

ZeroMeanEpoch zero_mean_epoch(const Eigen::Ref<const Matrix>& features,
                              const Eigen::Ref<const Matrix>& y, const std::vector<Matrix>& v,
                              const SeparableKernelParams& kernel, bool with_beta_y,
                              bool want_gradient, const JitterSchedule& jitter,
                              const CholeskyFactor* cached_chol_y = nullptr) {
  const Index n = features.rows();
  const Index q = y.rows();
  const auto s_count = static_cast<double>(v.size());

  ZeroMeanEpoch out;
  const Matrix c_phi = gram(kernel.input, features);
  out.chol_phi = cholesky_with_jitter(c_phi, jitter);
  Matrix c_y;  // only materialized when the beta_y gradient needs it
  if (cached_chol_y) {
    out.chol_y = *cached_chol_y;
  } else {
    c_y = gram(kernel.output, y);
    out.chol_y = cholesky_with_jitter(c_y, jitter);
  }

  out.loss.logdet_term = s_count * (static_cast<double>(q) * log_det(out.chol_phi) +
                                    static_cast<double>(n) * log_det(out.chol_y));

  Matrix b_phi;  // sum_s (V C_phi^-1)^T C_y^-1 (V C_phi^-1)
  Matrix b_y;    // sum_s (C_y^-1 V) C_phi^-1 (C_y^-1 V)^T
  if (want_gradient) {
    b_phi = Matrix::Zero(n, n);
    if (with_beta_y) b_y = Matrix::Zero(q, q);
  }
  for (const Matrix& vs : v) {
    // same solve order as nll_kron so the epoch-0 record of a full run is
    // bit-identical to the zero-shot loss
    const Matrix z = chol_solve(out.chol_y, vs);                     // C_y^-1 V
    const Matrix k = chol_solve(out.chol_phi, z.transpose()).transpose();
    out.loss.quad_term += (vs.array() * k.array()).sum();
    if (want_gradient) {
      const Matrix g = chol_solve(out.chol_phi, vs.transpose()).transpose();  // V C_phi^-1
      b_phi.noalias() += g.transpose() * k;
      if (with_beta_y) b_y.noalias() += z * k.transpose();
    }
  }
  out.loss.total = 0.5 * (out.loss.logdet_term + out.loss.quad_term);
  if (!want_gradient) return out;

  const Matrix p_phi = inverse_spd(out.chol_phi);
  Matrix dist_phi;
  if (kernel.input.family != KernelFamily::Gaussian)
    dist_phi = scaled_distances(kernel.input, features);

  out.gradient.d_log_beta_phi.resize(kernel.input.dim());
  for (Index i = 0; i < kernel.input.dim(); ++i) {
    const Matrix dg = gram_dlog_beta(kernel.input, features, c_phi, dist_phi, i);
    out.gradient.d_log_beta_phi(i) =
        0.5 * (s_count * static_cast<double>(q) * (p_phi.array() * dg.array()).sum() -
               (b_phi.array() * dg.array()).sum());
  }
  // dC_phi / d log sigma2 = C_phi, and tr(C_phi^-1 C_phi) = n
  out.gradient.d_log_sigma2_phi =
      0.5 * (s_count * static_cast<double>(q) * static_cast<double>(n) -
             (b_phi.array() * c_phi.array()).sum());

  if (with_beta_y) {
    if (c_y.size() == 0) c_y = gram(kernel.output, y);
    const Matrix p_y = inverse_spd(out.chol_y);
    Matrix dist_y;
    if (kernel.output.family != KernelFamily::Gaussian)
      dist_y = scaled_distances(kernel.output, y);
    out.gradient.d_log_beta_y.resize(kernel.output.dim());
    for (Index i = 0; i < kernel.output.dim(); ++i) {
      const Matrix dg = gram_dlog_beta(kernel.output, y, c_y, dist_y, i);
      out.gradient.d_log_beta_y(i) =
          0.5 * (s_count * static_cast<double>(n) * (p_y.array() * dg.array()).sum() -
                 (b_y.array() * dg.array()).sum());
    }
  }
  return out;
}

void pack_params(const SeparableKernelParams& kernel, bool with_beta_y, Vector& params) {
  const Index p = kernel.input.dim();
  const Index d = kernel.output.dim();
  params.resize(p + 1 + (with_beta_y ? d : 0));
  params.head(p) = kernel.input.log_beta;
  params(p) = kernel.input.log_sigma2;
  if (with_beta_y) params.tail(d) = kernel.output.log_beta;
}

void unpack_params(const Vector& params, bool with_beta_y, SeparableKernelParams& kernel) {
  const Index p = kernel.input.dim();
  const Index d = kernel.output.dim();
  kernel.input.log_beta = params.head(p);
  kernel.input.log_sigma2 = params(p);
  if (with_beta_y) kernel.output.log_beta = params.tail(d);
}

Vector pack_gradient(const NllGradient& gradient, bool with_beta_y) {
  const Index p = gradient.d_log_beta_phi.size();
  const Index d = with_beta_y ? gradient.d_log_beta_y.size() : 0;
  Vector grads(p + 1 + d);
  grads.head(p) = gradient.d_log_beta_phi;
  grads(p) = gradient.d_log_sigma2_phi;
  if (with_beta_y) grads.tail(d) = gradient.d_log_beta_y;
  return grads;
}

TrainedOperatorGP assemble_model(Matrix features, const OperatorDataset& data,
                                 const SeparableKernelParams& kernel, MeanFunction mean,
                                 std::optional<PcaBasis> pca, CholeskyFactor chol_phi,
                                 CholeskyFactor chol_y) {
  TrainedOperatorGP model;
  model.features = std::move(features);
  model.y = data.y;
  model.v = data.v;
  model.kernel = kernel;
  model.mean = std::move(mean);
  model.pca = std::move(pca);
  model.chol_phi = std::move(chol_phi);
  model.chol_y = std::move(chol_y);
  refit_residuals(model);
  return model;
}

TrainResult train_zero_mean(const OperatorDataset& data, const TrainConfig& config,
                            const InitHeuristics& init, const Matrix& features,
                            std::optional<PcaBasis> pca) {
  const auto start = Clock::now();
  SeparableKernelParams kernel =
      init_kernel(init, config, features.cols(), data.coord_dim());

  const Index epochs = config.mode == TrainMode::ZeroShot  ? 0
                       : config.mode == TrainMode::OneShot ? 1
                                                           : config.epochs;
  const bool with_beta_y = config.mode == TrainMode::ZeroMeanFull && config.optimize_beta_y;

  Vector params;
  pack_params(kernel, with_beta_y, params);
  AdamState adam = AdamState::create(params.size(), config.lr);

  std::vector<LossRecord> history;
  JitterSchedule jitter = config.jitter;
  bool retried = false;

  // beta_y frozen -> the output factor never changes; factor it once
  std::optional<CholeskyFactor> frozen_chol_y;
  if (!with_beta_y)
    frozen_chol_y = cholesky_with_jitter(gram(kernel.output, data.y), jitter);
  const CholeskyFactor* cache = frozen_chol_y ? &*frozen_chol_y : nullptr;

  for (Index epoch = 0; epoch < epochs; ++epoch) {
    ZeroMeanEpoch state;
    try {
      state =
          zero_mean_epoch(features, data.y, data.v, kernel, with_beta_y, true, jitter, cache);
    } catch (const NotPositiveDefinite& err) {
      if (retried) throw TrainingAborted(err.what(), std::move(history));
      retried = true;
      jitter = escalate(jitter);
      --epoch;
      continue;
    }
    history.push_back({epoch, state.loss.total, state.loss.logdet_term, state.loss.quad_term,
                       seconds_since(start)});
    adam_step(adam, params, pack_gradient(state.gradient, with_beta_y));
    unpack_params(params, with_beta_y, kernel);
  }

  ZeroMeanEpoch last;
  try {
    last = zero_mean_epoch(features, data.y, data.v, kernel, with_beta_y, false, jitter, cache);
  } catch (const NotPositiveDefinite& err) {
    if (retried) throw TrainingAborted(err.what(), std::move(history));
    jitter = escalate(jitter);
    last = zero_mean_epoch(features, data.y, data.v, kernel, with_beta_y, false, jitter, cache);
  }
  history.push_back({epochs, last.loss.total, last.loss.logdet_term, last.loss.quad_term,
                     seconds_since(start)});

  TrainResult result{assemble_model(features, data, kernel, make_zero_mean(data.output_count()),
                                    std::move(pca), std::move(last.chol_phi),
                                    std::move(last.chol_y)),
                     std::move(history)};
  return result;
}

TrainResult train_nn_mean(const OperatorDataset& data, const TrainConfig& config,
                          const InitHeuristics& init, const Matrix& features,
                          std::optional<PcaBasis> pca, const MeanArchitecture& mean_arch) {
  const auto start = Clock::now();
  const SeparableKernelParams kernel =
      init_kernel(init, config, features.cols(), data.coord_dim());

  MeanArchitecture arch = mean_arch;
  arch.feature_dim = features.cols();
  arch.coord_dim = data.coord_dim();
  arch.output_count = data.output_count();
  MeanFunction mean = mean_init(arch, config.seed);

  // Kernel parameters are frozen, so both factors are computed exactly once.
  const CholeskyFactor chol_phi =
      cholesky_with_jitter(gram(kernel.input, features), config.jitter);
  const CholeskyFactor chol_y = cholesky_with_jitter(gram(kernel.output, data.y), config.jitter);

  AdamState adam = AdamState::create(mean.theta.size(), config.lr);
  std::vector<LossRecord> history;

  auto evaluate = [&](bool want_gradient) {
    const MeanBatch m = mean_eval(mean, features, data.y);
    NnMeanLoss loss = config.mse_loss ? loss_nn_mse(data.v, m)
                                      : loss_nn_mle(data.v, m, chol_phi, chol_y);
    Vector grads;
    if (want_gradient && mean.theta.size() > 0)
      grads = mean_grad_params(mean, features, data.y, loss.dloss_dmean);
    return std::make_pair(loss.value, std::move(grads));
  };

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    auto [value, grads] = evaluate(true);
    history.push_back({epoch, value, 0.0, value, seconds_since(start)});
    if (mean.theta.size() > 0) adam_step(adam, mean.theta, grads);
  }
  auto [final_value, unused] = evaluate(false);
  history.push_back({config.epochs, final_value, 0.0, final_value, seconds_since(start)});

  TrainResult result{assemble_model(features, data, kernel, std::move(mean), std::move(pca),
                                    chol_phi, chol_y),
                     std::move(history)};
  return result;
}

}  // namespace

AdamState AdamState::create(Index size, double lr) {
  AdamState state;
  state.first_moment = Vector::Zero(size);
  state.second_moment = Vector::Zero(size);
  state.lr = lr;
  return state;
}

void adam_step(AdamState& state, Vector& params, const Vector& grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw DimensionMismatch("adam_step: parameter/gradient length mismatch");
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * grads.array().square().matrix();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params.array() -= state.lr * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.eps);
}

const char* train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::ZeroShot: return "zero-shot";
    case TrainMode::OneShot: return "one-shot";
    case TrainMode::ZeroMeanFull: return "zero-mean";
    case TrainMode::NnMean: return "nn-mean";
  }
  return "unknown";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "zero-shot") return TrainMode::ZeroShot;
  if (name == "one-shot") return TrainMode::OneShot;
  if (name == "zero-mean") return TrainMode::ZeroMeanFull;
  if (name == "nn-mean") return TrainMode::NnMean;
  throw std::invalid_argument("unknown train mode: " + name);
}

NllGradient grad_nll_kron(const Eigen::Ref<const Matrix>& features,
                          const Eigen::Ref<const Matrix>& y, const std::vector<Matrix>& v,
                          const SeparableKernelParams& kernel, bool with_beta_y,
                          const JitterSchedule& jitter) {
  return zero_mean_epoch(features, y, v, kernel, with_beta_y, true, jitter).gradient;
}

TrainResult train(const OperatorDataset& data, const TrainConfig& config,
                  const InitHeuristics& init, const MeanArchitecture& mean_arch) {
  data.validate();
  Matrix features = data.u;
  std::optional<PcaBasis> pca;
  if (config.pca_rank) {
    pca = pca_fit(data.u, *config.pca_rank);
    features = pca_transform(*pca, data.u);
  }
  if (config.mode == TrainMode::NnMean)
    return train_nn_mean(data, config, init, features, std::move(pca), mean_arch);
  return train_zero_mean(data, config, init, features, std::move(pca));
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  out << "epoch,total,logdet,quad,seconds\n";
  for (const LossRecord& record : history)
    out << record.epoch << ',' << record.total << ',' << record.logdet_term << ','
        << record.quad_term << ',' << record.seconds << '\n';
}

namespace {

GradCheckReport report_from(const Vector& analytic, const Vector& numeric) {
  GradCheckReport report;
  report.per_param.resize(analytic.size());
  // Components far below the dominant gradient magnitude are judged against
  // the overall scale; otherwise finite-difference round-off on near-zero
  // entries reports spurious disagreement.
  double global = 0.0;
  for (Index i = 0; i < analytic.size(); ++i)
    global = std::max({global, std::abs(analytic(i)), std::abs(numeric(i))});
  for (Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic(i)), std::abs(numeric(i)), 1e-3 * global});
    const double err = scale < 1e-12 ? 0.0 : std::abs(analytic(i) - numeric(i)) / scale;
    report.per_param[i] = err;
    report.max_rel_error = std::max(report.max_rel_error, err);
  }
  return report;
}

}  // namespace

GradCheckReport grad_check_kernel(const OperatorDataset& data,
                                  const SeparableKernelParams& kernel, bool with_beta_y) {
  const JitterSchedule jitter = JitterSchedule::none();
  const NllGradient gradient =
      grad_nll_kron(data.u, data.y, data.v, kernel, with_beta_y, jitter);
  const Vector analytic = pack_gradient(gradient, with_beta_y);

  const MeanFunction zero = make_zero_mean(data.output_count());
  const double h = 1e-5;
  Vector params;
  SeparableKernelParams probe = kernel;
  pack_params(probe, with_beta_y, params);
  Vector numeric(params.size());
  for (Index i = 0; i < params.size(); ++i) {
    Vector shifted = params;
    shifted(i) += h;
    unpack_params(shifted, with_beta_y, probe);
    const double up = nll_kron(data, probe, zero, jitter).total;
    shifted(i) -= 2 * h;
    unpack_params(shifted, with_beta_y, probe);
    const double down = nll_kron(data, probe, zero, jitter).total;
    numeric(i) = (up - down) / (2 * h);
  }
  return report_from(analytic, numeric);
}

GradCheckReport grad_check_mean(const OperatorDataset& data,
                                const SeparableKernelParams& kernel, const MeanFunction& mean) {
  const JitterSchedule jitter = JitterSchedule::none();
  const CholeskyFactor chol_phi = cholesky_with_jitter(gram(kernel.input, data.u), jitter);
  const CholeskyFactor chol_y = cholesky_with_jitter(gram(kernel.output, data.y), jitter);

  const NnMeanLoss loss =
      loss_nn_mle(data.v, mean_eval(mean, data.u, data.y), chol_phi, chol_y);
  const Vector analytic = mean_grad_params(mean, data.u, data.y, loss.dloss_dmean);

  const double h = 1e-5;
  MeanFunction probe = mean;
  Vector numeric(mean.theta.size());
  for (Index i = 0; i < mean.theta.size(); ++i) {
    probe.theta(i) = mean.theta(i) + h;
    const double up =
        loss_nn_mle(data.v, mean_eval(probe, data.u, data.y), chol_phi, chol_y).value;
    probe.theta(i) = mean.theta(i) - h;
    const double down =
        loss_nn_mle(data.v, mean_eval(probe, data.u, data.y), chol_phi, chol_y).value;
    probe.theta(i) = mean.theta(i);
    numeric(i) = (up - down) / (2 * h);
  }
  return report_from(analytic, numeric);
}

}  // namespace operon
