#pragma once

#include <cstdint>
#include <vector>

#include "operon/types.hpp"

namespace operon {

enum class MeanVariant { Zero, Mlp, BranchTrunk };

const char* mean_variant_name(MeanVariant variant);
MeanVariant mean_variant_from_name(const std::string& name);

// Architecture descriptor for the prior mean m(phi(u), y; theta). Hidden
// layers use tanh; embedding/output layers are linear. BranchTrunk realizes
// the S outputs as heads sharing one trunk: head s reads its own slice of the
// branch embedding and adds a scalar bias.
struct MeanArchitecture {
  MeanVariant variant = MeanVariant::Zero;
  Index feature_dim = 0;  // size of phi(u) as consumed (post-PCA when active)
  Index coord_dim = 0;    // dim of y
  Index output_count = 1;

  std::vector<Index> mlp_hidden;
  std::vector<Index> branch_hidden;
  std::vector<Index> trunk_hidden;
  Index latent_dim = 0;  // per-head embedding width (BranchTrunk)
};

Index parameter_count(const MeanArchitecture& arch);

struct MeanFunction {
  MeanArchitecture arch;
  Vector theta;  // flat parameters, length parameter_count(arch)
};

// One q x N evaluation matrix per output head.
using MeanBatch = std::vector<Matrix>;

MeanFunction make_zero_mean(Index output_count = 1);

// Glorot-uniform weights, zero biases, deterministic in the seed.
MeanFunction mean_init(const MeanArchitecture& arch, std::uint64_t seed);

// Evaluates the mean on the full grid of (sample, query point) pairs:
// result[s](j, i) = m(phi(u_i), y_j)(s).
MeanBatch mean_eval(const MeanFunction& m, const Eigen::Ref<const Matrix>& u,
                    const Eigen::Ref<const Matrix>& y);

// Reverse-mode gradient of sum_{s,i,j} dloss_dmean[s](j,i) * M^s(j,i) with
// respect to theta.
Vector mean_grad_params(const MeanFunction& m, const Eigen::Ref<const Matrix>& u,
                        const Eigen::Ref<const Matrix>& y, const MeanBatch& dloss_dmean);

}  // namespace operon
