#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "operon/types.hpp"

namespace operon {

// Discretized operator-learning data: N input functions sampled at p points,
// S output functions per sample observed on a shared q-point grid.
struct OperatorDataset {
  Matrix u;                // N x p, row i = phi(u_i)
  Matrix y;                // q x d, shared output grid
  std::vector<Matrix> v;   // S matrices, each q x N (column i = psi(v_i))
  Matrix input_grid;       // p x d_u, sampling locations of the input function
  nlohmann::json metadata; // name, seed, generator parameters

  Index sample_count() const { return u.rows(); }
  Index input_dim() const { return u.cols(); }
  Index grid_size() const { return y.rows(); }
  Index coord_dim() const { return y.cols(); }
  Index output_count() const { return static_cast<Index>(v.size()); }

  void validate() const;
};

// Gaussian random field with an RBF kernel over an arbitrary point grid.
struct GrfConfig {
  double length_scale = 0.2;
  double variance = 1.0;
  Matrix grid;  // p x d points
  std::uint64_t seed = 0;
  // Optional affine pinning of 1-d draws to fixed endpoint values.
  bool pin_endpoints = false;
  double pin_start = 0.0;
  double pin_end = 0.0;
};

// Draws `count` field realizations; rows are independent samples L z with L
// the Cholesky factor of the RBF Gram matrix.
Matrix grf_sample(const GrfConfig& config, Index count);

// Square-wave transport: IC -> solution of u_t + u_x = 0 at t = 0.5 on [0,1).
OperatorDataset gen_advection(Index n, Index p, std::uint64_t seed);

enum class BurgersVariant { Periodic, Dirichlet };

// Viscous Burgers data. Periodic: IC -> solution at t = 1 on the same grid
// (q must equal p). Dirichlet: IC -> space-time field on a q-point interior
// grid (q must be a perfect square); BCs v(0,t)=0, v(1,t)=1.
OperatorDataset gen_burgers(BurgersVariant variant, Index n, Index p, Index q, double nu,
                            Index resolution, std::uint64_t seed);

// Darcy flow -div(a grad u) = 1 with zero Dirichlet BCs on a g x g grid;
// a is a thresholded GRF draw (positive -> 12, negative -> 3).
OperatorDataset gen_darcy(Index n, Index g, std::uint64_t seed);

// Two-output synthetic set: antiderivative and derivative of GRF draws.
OperatorDataset gen_calculus_pair(Index n, Index p, std::uint64_t seed);

// Finite-difference solvers behind the generators, exposed for convergence
// tests and manufactured-solution checks.
Vector solve_burgers_periodic(const Eigen::Ref<const Vector>& ic, double nu, double t_end);
// Returns the full space-time trajectory sampled at the requested times;
// row k = solution at snapshot_times[k] on the solver grid (including BCs).
Matrix solve_burgers_dirichlet(const Eigen::Ref<const Vector>& ic, double nu,
                               const std::vector<double>& snapshot_times, double bc_left,
                               double bc_right);
// Solves on the g x g tensor grid over [0,1]^2; a, f and the result are g*g
// vectors in row-major grid order.
Vector solve_darcy(const Eigen::Ref<const Vector>& a, Index g,
                   const Eigen::Ref<const Vector>& f);

// Antiderivative / derivative output pair for given input rows sampled on a
// uniform [0,1] grid; the core of gen_calculus_pair.
OperatorDataset calculus_pair_from(const Eigen::Ref<const Matrix>& u);

// Leading-index split after a seeded shuffle; the permutation is recorded in
// both parts' metadata.
std::pair<OperatorDataset, OperatorDataset> split_dataset(const OperatorDataset& data,
                                                          Index n_train, Index n_test,
                                                          std::uint64_t seed);

// Single-output view of a multi-output dataset.
OperatorDataset select_output(const OperatorDataset& data, Index s);

void save_dataset(const std::string& path, const OperatorDataset& data);
OperatorDataset load_dataset(const std::string& path);

// Assembles a dataset from headerless CSV arrays (one array per file).
OperatorDataset import_csv_dataset(const std::string& u_path, const std::string& y_path,
                                   const std::vector<std::string>& v_paths,
                                   const std::string& input_grid_path = "");

}  // namespace operon
