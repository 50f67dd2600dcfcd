#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "operon/metrics.hpp"
#include "test_helpers.hpp"

using namespace operon;
using namespace operon::testing;

TEST_CASE("relative l2 of a perfect prediction is zero") {
  Rng rng(1);
  const Matrix truth = random_matrix(rng, 6, 4);
  const RelativeL2Result r = relative_l2({truth}, {truth});
  CHECK(r.per_output(0) == 0.0);
  CHECK(r.skipped == 0);
}

TEST_CASE("doubling the truth gives exactly one") {
  Rng rng(2);
  const Matrix truth = random_matrix(rng, 6, 4);
  const RelativeL2Result r = relative_l2({Matrix(2.0 * truth)}, {truth});
  CHECK(r.per_output(0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("per-sample errors average") {
  // two samples engineered to have errors 0.1 and 0.3
  Matrix truth(2, 2);
  truth << 1, 0, 0, 1;
  Matrix pred = truth;
  pred(0, 0) = 1.1;  // ||e|| / ||t|| = 0.1
  pred(1, 1) = 1.3;  // 0.3
  const RelativeL2Result r = relative_l2({pred}, {truth});
  CHECK(r.per_output(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(r.per_sample[0](0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.per_sample[0](1) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("zero-norm truth samples are skipped and counted") {
  Matrix truth = Matrix::Zero(3, 2);
  truth.col(1) << 1, 2, 3;
  Matrix pred = truth;
  pred(0, 0) = 0.5;
  const RelativeL2Result r = relative_l2({pred}, {truth});
  CHECK(r.skipped == 1);
  CHECK(r.per_sample[0].size() == 1);
}

TEST_CASE("relative l2 is invariant under sample permutation") {
  Rng rng(3);
  const Matrix truth = random_matrix(rng, 5, 6);
  const Matrix pred = truth + 0.01 * random_matrix(rng, 5, 6);
  Matrix truth_p(5, 6), pred_p(5, 6);
  const std::vector<Index> perm = {4, 2, 0, 5, 1, 3};
  for (Index i = 0; i < 6; ++i) {
    truth_p.col(i) = truth.col(perm[i]);
    pred_p.col(i) = pred.col(perm[i]);
  }
  const double a = relative_l2({pred}, {truth}).per_output(0);
  const double b = relative_l2({pred_p}, {truth_p}).per_output(0);
  CHECK(rel_diff(a, b) < 1e-14);
}

TEST_CASE("inference cost matches the closed form for a zero mean") {
  const FlopsBreakdown cost = inference_cost(1000, 128, 128, 1, MeanArchitecture{});
  CHECK(cost.mean_flops == 0.0);
  CHECK(cost.total == doctest::Approx(1156816.0));  // 131072 - 256 + 2000 * 513
}

TEST_CASE("degenerate m = 0 stays formula-consistent") {
  const FlopsBreakdown cost = inference_cost(10, 7, 0, 1, MeanArchitecture{});
  CHECK(cost.total == doctest::Approx(10.0 * (4 * 7 + 2)));  // C = 2N(2n+1)
}

TEST_CASE("doubling N adds exactly the linear term") {
  const Index n_pts = 64, m = 32, d = 2;
  const double c1 = inference_cost(500, n_pts, m, d, MeanArchitecture{}).total;
  const double c2 = inference_cost(1000, n_pts, m, d, MeanArchitecture{}).total;
  // 2N(2n + 2m + 1) evaluated at the extra N = 500
  CHECK(c2 - c1 == doctest::Approx(2.0 * 500.0 * (2 * n_pts + 2 * m + 1)));
}

TEST_CASE("mean forward cost counts layers, biases, and activations") {
  MeanArchitecture mlp;
  mlp.variant = MeanVariant::Mlp;
  mlp.feature_dim = 3;
  mlp.coord_dim = 1;
  mlp.output_count = 1;
  mlp.mlp_hidden = {8};
  // per point: layer1 8*(2*4-1)+8+8, layer2 1*(2*8-1)+1
  const double per_point = 8 * 7 + 16 + 15 + 1;
  CHECK(mean_eval_flops(mlp, 10) == doctest::Approx(10 * per_point));

  MeanArchitecture bt;
  bt.variant = MeanVariant::BranchTrunk;
  bt.feature_dim = 4;
  bt.coord_dim = 2;
  bt.output_count = 2;
  bt.branch_hidden = {8};
  bt.trunk_hidden = {8};
  bt.latent_dim = 3;
  const double branch = 8 * (2 * 4 - 1) + 8 + 8 + 6 * (2 * 8 - 1) + 6;
  const double trunk_pp = 8 * (2 * 2 - 1) + 8 + 8 + 3 * (2 * 8 - 1) + 3;
  const double combine_pp = 2 * (2 * 3 - 1 + 1);
  CHECK(mean_eval_flops(bt, 5) == doctest::Approx(branch + 5 * (trunk_pp + combine_pp)));
}
