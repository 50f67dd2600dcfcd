#include "operon/physics.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

namespace operon {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Linear interpolation over a 1-d grid given as a p x 1 matrix.
double lerp_grid(const Eigen::Ref<const Matrix>& grid, const Eigen::Ref<const Vector>& values,
                 double x) {
  const Index p = grid.rows();
  if (x <= grid(0, 0)) return values(0);
  if (x >= grid(p - 1, 0)) return values(p - 1);
  Index low = 0, high = p - 1;
  while (high - low > 1) {
    const Index mid = (low + high) / 2;
    (grid(mid, 0) <= x ? low : high) = mid;
  }
  const double span = grid(high, 0) - grid(low, 0);
  const double frac = span > 0 ? (x - grid(low, 0)) / span : 0.0;
  return (1.0 - frac) * values(low) + frac * values(high);
}

struct StencilLayout {
  // rows: [base; +x; -x; +t; -t], each block of size n
  Matrix points;  // 5n x 2
  Index n = 0;
  double hx = 0, ht = 0;
};

StencilLayout make_stencil(const Eigen::Ref<const Matrix>& base, double hx, double ht,
                           const PdeProblem& problem) {
  StencilLayout stencil;
  stencil.n = base.rows();
  stencil.hx = hx;
  stencil.ht = ht;
  stencil.points.resize(5 * stencil.n, 2);
  for (Index i = 0; i < stencil.n; ++i) {
    const double x = base(i, 0), t = base(i, 1);
    if (x - hx < problem.x_min || x + hx > problem.x_max || t - ht < problem.t_min ||
        t + ht > problem.t_max)
      throw StepOutsideDomain("fd stencil leaves the domain at point " + std::to_string(i));
    stencil.points.row(0 * stencil.n + i) << x, t;
    stencil.points.row(1 * stencil.n + i) << x + hx, t;
    stencil.points.row(2 * stencil.n + i) << x - hx, t;
    stencil.points.row(3 * stencil.n + i) << x, t + ht;
    stencil.points.row(4 * stencil.n + i) << x, t - ht;
  }
  return stencil;
}

FdDerivatives stencil_to_derivs(const StencilLayout& stencil, const Vector& values) {
  const Index n = stencil.n;
  FdDerivatives out;
  out.value = values.segment(0, n);
  out.ddx = (values.segment(n, n) - values.segment(2 * n, n)) / (2.0 * stencil.hx);
  out.ddt = (values.segment(3 * n, n) - values.segment(4 * n, n)) / (2.0 * stencil.ht);
  out.ddx2 = (values.segment(n, n) - 2.0 * out.value + values.segment(2 * n, n)) /
             (stencil.hx * stencil.hx);
  return out;
}

Index grid_side(Index count) {
  return std::max<Index>(1, static_cast<Index>(std::llround(std::sqrt(
                                static_cast<double>(count)))));
}

}  // namespace

CollocationSet collocation_points(const PdeProblem& problem) {
  CollocationSet set;
  const double lx = problem.x_max - problem.x_min;
  const double lt = problem.t_max - problem.t_min;

  const Index gx = grid_side(problem.n_pde);
  const Index gt = std::max<Index>(1, problem.n_pde / gx);
  set.pde.resize(gx * gt, 2);
  for (Index i = 0; i < gx; ++i)
    for (Index j = 0; j < gt; ++j) {
      set.pde(i * gt + j, 0) = problem.x_min + (static_cast<double>(i) + 0.5) * lx / gx;
      set.pde(i * gt + j, 1) = problem.t_min + (static_cast<double>(j) + 0.5) * lt / gt;
    }

  const Index per_side = std::max<Index>(1, problem.n_bc / 2);
  set.bc.resize(2 * per_side, 2);
  set.bc_values.resize(2 * per_side);
  for (Index k = 0; k < per_side; ++k) {
    const double t = problem.t_min + (static_cast<double>(k) + 0.5) * lt / per_side;
    set.bc.row(k) << problem.x_min, t;
    set.bc_values(k) = problem.bc_left(t);
    set.bc.row(per_side + k) << problem.x_max, t;
    set.bc_values(per_side + k) = problem.bc_right(t);
  }

  set.ic.resize(problem.n_ic, 2);
  for (Index k = 0; k < problem.n_ic; ++k) {
    set.ic(k, 0) = problem.x_min + (static_cast<double>(k) + 0.5) * lx / problem.n_ic;
    set.ic(k, 1) = problem.t_min;
  }
  return set;
}

FdDerivatives fd_derivatives(const PointEvaluator& evaluate,
                             const Eigen::Ref<const Matrix>& points, double hx, double ht,
                             double x_min, double x_max, double t_min, double t_max) {
  PdeProblem bounds;
  bounds.x_min = x_min;
  bounds.x_max = x_max;
  bounds.t_min = t_min;
  bounds.t_max = t_max;
  const StencilLayout stencil = make_stencil(points, hx, ht, bounds);
  return stencil_to_derivs(stencil, evaluate(stencil.points));
}

PointEvaluator gp_point_evaluator(const TrainedOperatorGP& model,
                                  const Eigen::Ref<const Vector>& u_raw) {
  const Vector feat = model.project_input(u_raw);
  const Matrix k_phi = gram(model.kernel.input, model.features, feat.transpose());
  const Vector wk = model.w[0] * k_phi.col(0);  // q
  const Matrix feat_row = feat.transpose();
  return [&model, wk, feat_row](const Eigen::Ref<const Matrix>& points) -> Vector {
    const Matrix k_y = gram(model.kernel.output, points, model.y);
    const MeanBatch m = mean_eval(model.mean, feat_row, points);
    return m[0].col(0) + k_y * wk;
  };
}

FdDerivatives predictor_derivatives_fd(const TrainedOperatorGP& model,
                                       const Eigen::Ref<const Vector>& u_raw,
                                       const Eigen::Ref<const Matrix>& points,
                                       const PdeProblem& problem, bool analytic_kernel) {
  const double hx = 1e-3 * (problem.x_max - problem.x_min);
  const double ht = 1e-3 * (problem.t_max - problem.t_min);
  if (!analytic_kernel) {
    return fd_derivatives(gp_point_evaluator(model, u_raw), points, hx, ht, problem.x_min,
                          problem.x_max, problem.t_min, problem.t_max);
  }

  // validation mode: analytic kernel derivatives, mean part still differenced
  const Vector feat = model.project_input(u_raw);
  const Matrix k_phi = gram(model.kernel.input, model.features, feat.transpose());
  const Vector wk = model.w[0] * k_phi.col(0);
  const Matrix feat_row = feat.transpose();

  const PointEvaluator mean_only = [&](const Eigen::Ref<const Matrix>& pts) -> Vector {
    return mean_eval(model.mean, feat_row, pts)[0].col(0);
  };
  FdDerivatives out = fd_derivatives(mean_only, points, hx, ht, problem.x_min, problem.x_max,
                                     problem.t_min, problem.t_max);
  for (Index i = 0; i < points.rows(); ++i) {
    const KernelCoordinateDerivs kd =
        kernel_y_derivs(model.kernel.output, points.row(i).transpose(), model.y);
    out.value(i) += kd.value.dot(wk);
    out.ddx(i) += kd.first.row(0) * wk;
    out.ddt(i) += kd.first.row(1) * wk;
    out.ddx2(i) += kd.second.row(0) * wk;
  }
  return out;
}

PhysicsLossTerms burgers_residual_loss(const TrainedOperatorGP& model, const PdeProblem& problem,
                                       const Eigen::Ref<const Matrix>& u_batch_raw,
                                       const Eigen::Ref<const Matrix>& input_grid) {
  const CollocationSet set = collocation_points(problem);
  const Index n_pi = u_batch_raw.rows();
  PhysicsLossTerms terms;
  for (Index j = 0; j < n_pi; ++j) {
    const Vector u_row = u_batch_raw.row(j).transpose();
    const FdDerivatives d = predictor_derivatives_fd(model, u_row, set.pde, problem);
    const Vector residual =
        d.ddt + d.value.cwiseProduct(d.ddx) - problem.nu * d.ddx2;
    terms.pde += residual.squaredNorm();

    const PointEvaluator eval = gp_point_evaluator(model, u_row);
    terms.bc += (eval(set.bc) - set.bc_values).squaredNorm();
    Vector ic_target(set.ic.rows());
    for (Index k = 0; k < set.ic.rows(); ++k)
      ic_target(k) = lerp_grid(input_grid, u_row, set.ic(k, 0));
    terms.ic += (eval(set.ic) - ic_target).squaredNorm();
  }
  terms.pde /= static_cast<double>(n_pi * set.pde.rows());
  terms.bc /= static_cast<double>(n_pi * set.bc.rows());
  terms.ic /= static_cast<double>(n_pi * set.ic.rows());
  return terms;
}

double aggregate_physics_loss(const PhysicsLossTerms& terms, const LossWeights& weights,
                              double mle) {
  return terms.pde + weights.alpha_bc * terms.bc + weights.alpha_ic * terms.ic +
         weights.alpha_mle * mle;
}

double adaptive_weight_update(double prev_alpha, double grad_ref_maxabs,
                              double grad_term_meanabs, double lambda) {
  if (grad_term_meanabs < 1e-30) {
    std::cerr << "adaptive_weight_update: degenerate term gradient, freezing weight\n";
    return prev_alpha;
  }
  return (1.0 - lambda) * prev_alpha + lambda * grad_ref_maxabs / grad_term_meanabs;
}

PhysicsTrainResult train_physics_informed(const OperatorDataset& data, const PdeProblem& problem,
                                          const MeanArchitecture& mean_arch,
                                          const TrainConfig& config,
                                          const InitHeuristics& init) {
  data.validate();
  if (mean_arch.variant == MeanVariant::Zero)
    throw std::invalid_argument("train_physics_informed: needs a trainable mean");
  if (data.output_count() != 1)
    throw DimensionMismatch("train_physics_informed: single-output only");
  if (config.output_family != KernelFamily::Gaussian)
    throw UnsupportedFamily("train_physics_informed: output kernel must be Gaussian");
  const Index n_pi = std::min(problem.physics_sample_count, data.sample_count());

  const auto start = Clock::now();

  Matrix features = data.u;
  std::optional<PcaBasis> pca;
  if (config.pca_rank) {
    pca = pca_fit(data.u, *config.pca_rank);
    features = pca_transform(*pca, data.u);
  }

  const SeparableKernelParams kernel =
      make_separable(config.input_family, features.cols(), init.beta_phi_init,
                     init.sigma2_phi_init, config.output_family, data.coord_dim(),
                     init.beta_y_init);

  MeanArchitecture arch = mean_arch;
  arch.feature_dim = features.cols();
  arch.coord_dim = data.coord_dim();
  arch.output_count = 1;
  MeanFunction mean = mean_init(arch, config.seed);

  const CholeskyFactor chol_phi =
      cholesky_with_jitter(gram(kernel.input, features), config.jitter);
  const CholeskyFactor chol_y = cholesky_with_jitter(gram(kernel.output, data.y), config.jitter);

  // theta-independent collocation structures, built once
  const CollocationSet set = collocation_points(problem);
  const double hx = 1e-3 * (problem.x_max - problem.x_min);
  const double ht = 1e-3 * (problem.t_max - problem.t_min);
  const StencilLayout stencil = make_stencil(set.pde, hx, ht, problem);
  const Index n_col = stencil.n;

  const Matrix u_pi = features.topRows(n_pi);
  const Matrix ky_st = gram(kernel.output, stencil.points, data.y);  // 5n x q
  const Matrix a_st = chol_solve(chol_y, ky_st.transpose());         // q x 5n
  const Matrix ky_bc = gram(kernel.output, set.bc, data.y);
  const Matrix a_bc = chol_solve(chol_y, ky_bc.transpose());
  const Matrix ky_ic = gram(kernel.output, set.ic, data.y);
  const Matrix a_ic = chol_solve(chol_y, ky_ic.transpose());
  const Matrix k_phi_pi = gram(kernel.input, features, u_pi);  // N x n_pi
  const Matrix b_phi = chol_solve(chol_phi, k_phi_pi);         // N x n_pi

  Matrix ic_targets(set.ic.rows(), n_pi);
  for (Index j = 0; j < n_pi; ++j)
    for (Index k = 0; k < set.ic.rows(); ++k)
      ic_targets(k, j) = lerp_grid(data.input_grid, data.u.row(j).transpose(), set.ic(k, 0));

  LossWeights weights = problem.weights;
  AdamState adam = AdamState::create(mean.theta.size(), config.lr);
  std::vector<PhysicsLossRecord> history;

  const double pde_scale = 2.0 / static_cast<double>(n_pi * n_col);
  const double bc_scale = 2.0 / static_cast<double>(n_pi * set.bc.rows());
  const double ic_scale = 2.0 / static_cast<double>(n_pi * set.ic.rows());

  for (Index epoch = 0; epoch <= config.epochs; ++epoch) {
    // W refit from the cached factors (kernel frozen, mean moved)
    const MeanBatch m_train = mean_eval(mean, features, data.y);
    const NnMeanLoss mle = config.mse_loss
                               ? loss_nn_mse(data.v, m_train)
                               : loss_nn_mle(data.v, m_train, chol_phi, chol_y);
    const Matrix residual_train = data.v[0] - m_train[0];
    const Matrix w =
        chol_solve(chol_phi, chol_solve(chol_y, residual_train).transpose()).transpose();

    const Matrix wk = w * k_phi_pi;  // q x n_pi

    // eta on the PDE stencil, its finite differences and the residual
    const Matrix m_st = mean_eval(mean, u_pi, stencil.points)[0];  // 5n x n_pi
    const Matrix eta_st = m_st + ky_st * wk;
    const auto block = [&](Index b) { return eta_st.middleRows(b * n_col, n_col); };
    const Matrix eta0 = block(0);
    const Matrix eta_x = (block(1) - block(2)) / (2.0 * hx);
    const Matrix eta_t = (block(3) - block(4)) / (2.0 * ht);
    const Matrix eta_xx = (block(1) - 2.0 * eta0 + block(2)) / (hx * hx);
    const Matrix rho = eta_t + eta0.cwiseProduct(eta_x) - problem.nu * eta_xx;
    const double loss_pde = rho.squaredNorm() / static_cast<double>(n_pi * n_col);

    Matrix lambda_st(5 * n_col, n_pi);
    lambda_st.middleRows(0, n_col) =
        pde_scale * (rho.array() * (eta_x.array() + 2.0 * problem.nu / (hx * hx))).matrix();
    lambda_st.middleRows(n_col, n_col) =
        pde_scale * (rho.array() * (eta0.array() / (2.0 * hx) - problem.nu / (hx * hx))).matrix();
    lambda_st.middleRows(2 * n_col, n_col) =
        pde_scale *
        (rho.array() * (-eta0.array() / (2.0 * hx) - problem.nu / (hx * hx))).matrix();
    lambda_st.middleRows(3 * n_col, n_col) = pde_scale / (2.0 * ht) * rho;
    lambda_st.middleRows(4 * n_col, n_col) = -pde_scale / (2.0 * ht) * rho;

    // BC and IC residuals
    const Matrix m_bc = mean_eval(mean, u_pi, set.bc)[0];
    Matrix res_bc = (m_bc + ky_bc * wk).colwise() - set.bc_values;
    const double loss_bc = res_bc.squaredNorm() / static_cast<double>(n_pi * set.bc.rows());
    const Matrix m_ic = mean_eval(mean, u_pi, set.ic)[0];
    Matrix res_ic = (m_ic + ky_ic * wk) - ic_targets;
    const double loss_ic = res_ic.squaredNorm() / static_cast<double>(n_pi * set.ic.rows());

    // per-term parameter gradients: direct mean path + the W refit path
    auto term_gradient = [&](const Matrix& lambda, const Matrix& a_term,
                             const Eigen::Ref<const Matrix>& pts) {
      Vector grad = mean_grad_params(mean, u_pi, pts, {lambda});
      const Matrix dl_dm_train = -(a_term * lambda) * b_phi.transpose();
      grad += mean_grad_params(mean, features, data.y, {dl_dm_train});
      return grad;
    };
    const Vector g_pde = term_gradient(lambda_st, a_st, stencil.points);
    const Vector g_bc = term_gradient(bc_scale * res_bc, a_bc, set.bc);
    const Vector g_ic = term_gradient(ic_scale * res_ic, a_ic, set.ic);
    const Vector g_mle = mean_grad_params(mean, features, data.y, mle.dloss_dmean);

    const double ref_max = g_pde.size() ? g_pde.cwiseAbs().maxCoeff() : 0.0;
    if (g_bc.size()) {
      weights.alpha_bc = adaptive_weight_update(weights.alpha_bc, ref_max,
                                                g_bc.cwiseAbs().mean(), weights.lambda);
      weights.alpha_ic = adaptive_weight_update(weights.alpha_ic, ref_max,
                                                g_ic.cwiseAbs().mean(), weights.lambda);
      weights.alpha_mle = adaptive_weight_update(weights.alpha_mle, ref_max,
                                                 g_mle.cwiseAbs().mean(), weights.lambda);
    }

    const double total =
        aggregate_physics_loss({loss_pde, loss_bc, loss_ic}, weights, mle.value);
    history.push_back({epoch, total, loss_pde, loss_bc, loss_ic, mle.value, weights.alpha_bc,
                       weights.alpha_ic, weights.alpha_mle, seconds_since(start)});

    if (epoch == config.epochs) break;
    Vector grad = g_pde + weights.alpha_bc * g_bc + weights.alpha_ic * g_ic +
                  weights.alpha_mle * g_mle;
    adam_step(adam, mean.theta, grad);
  }

  TrainedOperatorGP model;
  model.features = features;
  model.y = data.y;
  model.v = data.v;
  model.kernel = kernel;
  model.mean = std::move(mean);
  model.pca = std::move(pca);
  model.chol_phi = chol_phi;
  model.chol_y = chol_y;
  refit_residuals(model);
  return {std::move(model), std::move(history)};
}

void write_physics_loss_csv(const std::string& path,
                            const std::vector<PhysicsLossRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  out << "epoch,total,pde,bc,ic,mle,alpha_bc,alpha_ic,alpha_mle,seconds\n";
  for (const PhysicsLossRecord& r : history)
    out << r.epoch << ',' << r.total << ',' << r.pde << ',' << r.bc << ',' << r.ic << ','
        << r.mle << ',' << r.alpha_bc << ',' << r.alpha_ic << ',' << r.alpha_mle << ','
        << r.seconds << '\n';
}

}  // namespace operon
