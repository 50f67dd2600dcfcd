#pragma once

#include <vector>

#include "operon/means.hpp"
#include "operon/types.hpp"

namespace operon {

struct RelativeL2Result {
  Vector per_output;                // mean over test samples, one entry per output
  std::vector<Vector> per_sample;   // per output, per-sample relative errors
  Index skipped = 0;                // samples dropped for zero-norm truth
};

// (1/N) sum_i ||pred_i - truth_i|| / ||truth_i|| per output. Zero-norm truth
// columns are skipped with a warning and counted.
RelativeL2Result relative_l2(const std::vector<Matrix>& pred, const std::vector<Matrix>& truth);

// Inference FLOPs of the posterior-mean predictor for one test function
// discretized at n points, evaluated at m points, with N stored samples:
// C = C_mean + 4 m^2 (d+1) - 2m + 2N (2n + 2m + 1).
struct FlopsBreakdown {
  double mean_flops = 0;    // C_mean, forward pass of the mean function
  double query_flops = 0;   // 4 m^2 (d+1) - 2m, query-side kernel + combination
  double sample_flops = 0;  // 2 N (2n + 2m + 1), per-training-sample work
  double total = 0;
};

FlopsBreakdown inference_cost(Index n_train, Index n_points, Index m_points, Index coord_dim,
                              const MeanArchitecture& mean);

// Forward-pass FLOPs of the mean alone (the C_mean term).
double mean_eval_flops(const MeanArchitecture& mean, Index m_points);

}  // namespace operon
