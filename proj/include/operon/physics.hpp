#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "operon/gp.hpp"
#include "operon/training.hpp"

namespace operon {

enum class PdeResidual { BurgersDirichlet };

struct LossWeights {
  double alpha_bc = 1.0;
  double alpha_ic = 1.0;
  double alpha_mle = 1.0;
  double lambda = 0.9;  // EMA factor of the adaptive weight update
};

// Burgers problem v_t + v v_x - nu v_xx = 0 on (x,t) in [0,1]^2 with
// Dirichlet boundaries and per-sample initial conditions taken from the
// physics batch itself.
struct PdeProblem {
  PdeResidual residual = PdeResidual::BurgersDirichlet;
  double nu = 0.1;
  double x_min = 0.0, x_max = 1.0;
  double t_min = 0.0, t_max = 1.0;
  Index n_pde = 900;  // rounded to a full tensor grid
  Index n_bc = 100;
  Index n_ic = 100;
  Index physics_sample_count = 50;  // N_pi
  std::function<double(double)> bc_left = [](double) { return 0.0; };
  std::function<double(double)> bc_right = [](double) { return 1.0; };
  LossWeights weights;
  std::uint64_t collocation_seed = 0;  // recorded for provenance; grids are uniform
};

// Fixed collocation layout: midpoint tensor grid inside the domain, midpoint
// lines on each x-boundary, midpoints at t = t_min.
struct CollocationSet {
  Matrix pde;        // n x 2 (x, t)
  Matrix bc;         // n_bc x 2
  Vector bc_values;  // target f at the bc points
  Matrix ic;         // n_ic x 2
};

CollocationSet collocation_points(const PdeProblem& problem);

struct FdDerivatives {
  Vector value;
  Vector ddx;
  Vector ddt;
  Vector ddx2;
};

using PointEvaluator = std::function<Vector(const Eigen::Ref<const Matrix>&)>;

// Central differences of an arbitrary scalar field over (x,t) points; the
// generic building block behind predictor_derivatives_fd and the residual
// losses. Throws StepOutsideDomain when a stencil leaves the domain.
FdDerivatives fd_derivatives(const PointEvaluator& evaluate,
                             const Eigen::Ref<const Matrix>& points, double hx, double ht,
                             double x_min, double x_max, double t_min, double t_max);

// Evaluates the GP predictor for one input function at the given points.
PointEvaluator gp_point_evaluator(const TrainedOperatorGP& model,
                                  const Eigen::Ref<const Vector>& u_raw);

// Derivatives of the predictor at interior points. FD step is 1e-3 of the
// domain extent per axis. With analytic_kernel the kernel contribution uses
// closed-form coordinate derivatives and only the mean part is differenced.
FdDerivatives predictor_derivatives_fd(const TrainedOperatorGP& model,
                                       const Eigen::Ref<const Vector>& u_raw,
                                       const Eigen::Ref<const Matrix>& points,
                                       const PdeProblem& problem, bool analytic_kernel = false);

struct PhysicsLossTerms {
  double pde = 0;
  double bc = 0;
  double ic = 0;
};

// Mean squared residual, boundary and initial-condition mismatches of the
// predictor over the physics batch (rows of u_batch_raw, their own ICs).
PhysicsLossTerms burgers_residual_loss(const TrainedOperatorGP& model, const PdeProblem& problem,
                                       const Eigen::Ref<const Matrix>& u_batch_raw,
                                       const Eigen::Ref<const Matrix>& input_grid);

double aggregate_physics_loss(const PhysicsLossTerms& terms, const LossWeights& weights,
                              double mle);

// alpha <- (1 - lambda) alpha + lambda * max|grad ref| / mean|grad term|.
// A degenerate term gradient freezes alpha and warns.
double adaptive_weight_update(double prev_alpha, double grad_ref_maxabs,
                              double grad_term_meanabs, double lambda);

struct PhysicsLossRecord {
  Index epoch = 0;
  double total = 0;
  double pde = 0, bc = 0, ic = 0, mle = 0;
  double alpha_bc = 0, alpha_ic = 0, alpha_mle = 0;
  double seconds = 0;
};

struct PhysicsTrainResult {
  TrainedOperatorGP model;
  std::vector<PhysicsLossRecord> history;
};

// NN-mean GP trained on the weighted physics + data objective with frozen
// kernel parameters; W is refit every epoch from the cached factors.
PhysicsTrainResult train_physics_informed(const OperatorDataset& data, const PdeProblem& problem,
                                          const MeanArchitecture& mean_arch,
                                          const TrainConfig& config,
                                          const InitHeuristics& init = {});

void write_physics_loss_csv(const std::string& path,
                            const std::vector<PhysicsLossRecord>& history);

}  // namespace operon
