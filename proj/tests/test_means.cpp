#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "operon/means.hpp"
#include "test_helpers.hpp"

using namespace operon;
using namespace operon::testing;

namespace {

MeanArchitecture mlp_arch(Index feature_dim, Index coord_dim, std::vector<Index> hidden,
                          Index outputs = 1) {
  MeanArchitecture arch;
  arch.variant = MeanVariant::Mlp;
  arch.feature_dim = feature_dim;
  arch.coord_dim = coord_dim;
  arch.output_count = outputs;
  arch.mlp_hidden = std::move(hidden);
  return arch;
}

MeanArchitecture bt_arch(Index feature_dim, Index coord_dim, Index latent,
                         std::vector<Index> hidden, Index outputs = 1) {
  MeanArchitecture arch;
  arch.variant = MeanVariant::BranchTrunk;
  arch.feature_dim = feature_dim;
  arch.coord_dim = coord_dim;
  arch.output_count = outputs;
  arch.branch_hidden = hidden;
  arch.trunk_hidden = std::move(hidden);
  arch.latent_dim = latent;
  return arch;
}

// loss = sum of weights * mean evaluations; its theta-gradient is checked
// against central differences
double weighted_sum(const MeanFunction& m, const Matrix& u, const Matrix& y,
                    const MeanBatch& weights) {
  const MeanBatch values = mean_eval(m, u, y);
  double total = 0;
  for (std::size_t s = 0; s < values.size(); ++s)
    total += (values[s].array() * weights[s].array()).sum();
  return total;
}

}  // namespace

TEST_CASE("zero mean evaluates to zeros and has no parameters") {
  const MeanFunction zero = make_zero_mean(2);
  CHECK(zero.theta.size() == 0);
  Rng rng(1);
  const Matrix u = random_matrix(rng, 4, 3);
  const Matrix y = random_matrix(rng, 5, 2);
  const MeanBatch batch = mean_eval(zero, u, y);
  REQUIRE(batch.size() == 2);
  for (const Matrix& m : batch) CHECK(m.cwiseAbs().maxCoeff() == 0.0);

  const MeanFunction again = mean_init(zero.arch, 12345);
  CHECK(again.theta.size() == 0);
}

TEST_CASE("branch output of zero makes the branch-trunk mean vanish") {
  const MeanArchitecture arch = bt_arch(3, 2, 4, {5});
  MeanFunction m = mean_init(arch, 7);
  m.theta.setZero();  // zero branch weights -> zero embedding, zero head bias
  Rng rng(2);
  const MeanBatch batch = mean_eval(m, random_matrix(rng, 4, 3), random_matrix(rng, 6, 2));
  CHECK(batch[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer picking the first y coordinate") {
  const MeanArchitecture arch = mlp_arch(2, 1, {});
  MeanFunction m;
  m.arch = arch;
  m.theta = Vector::Zero(parameter_count(arch));
  m.theta(2) = 1.0;  // W is 1x3 column-major over [u0, u1, y0]; pick y0
  Rng rng(3);
  const Matrix u = random_matrix(rng, 3, 2);
  const Matrix y = random_matrix(rng, 4, 1);
  const MeanBatch batch = mean_eval(m, u, y);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) CHECK(batch[0](j, i) == doctest::Approx(y(j, 0)));
}

TEST_CASE("zero sensitivities give a zero gradient") {
  const MeanArchitecture arch = mlp_arch(2, 1, {4});
  const MeanFunction m = mean_init(arch, 11);
  Rng rng(4);
  const Matrix u = random_matrix(rng, 3, 2);
  const Matrix y = random_matrix(rng, 4, 1);
  const Vector grad = mean_grad_params(m, u, y, {Matrix::Zero(4, 3)});
  CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hand chain rule for the single-weight linear model") {
  // m(y) = theta * y with no features; dL/dM = 1 at the point y = 2
  const MeanArchitecture arch = mlp_arch(0, 1, {});
  MeanFunction m;
  m.arch = arch;
  m.theta = Vector::Zero(2);  // weight, bias
  m.theta(0) = 0.7;
  Matrix u(1, 0);
  Matrix y(1, 1);
  y << 2.0;
  const Vector grad = mean_grad_params(m, u, y, {Matrix::Ones(1, 1)});
  CHECK(grad(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(grad(1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gradients match finite differences across the architecture matrix") {
  Rng rng(5);
  std::vector<MeanArchitecture> architectures;
  architectures.push_back(mlp_arch(3, 2, {4}));
  architectures.push_back(mlp_arch(3, 2, {8, 8}));
  architectures.push_back(mlp_arch(3, 2, {32, 16, 8, 4}));
  architectures.push_back(mlp_arch(3, 2, {6, 6}, 2));
  architectures.push_back(bt_arch(3, 2, 4, {6}));
  architectures.push_back(bt_arch(3, 2, 16, {8, 8}, 2));

  for (const MeanArchitecture& arch : architectures) {
    const MeanFunction m = mean_init(arch, 17);
    const Matrix u = random_matrix(rng, 4, 3);
    const Matrix y = random_matrix(rng, 5, 2);
    MeanBatch weights;
    for (Index s = 0; s < arch.output_count; ++s) weights.push_back(random_matrix(rng, 5, 4));

    const Vector analytic = mean_grad_params(m, u, y, weights);

    const double h = 1e-5;
    MeanFunction probe = m;
    double max_err = 0;
    for (Index i = 0; i < m.theta.size(); ++i) {
      probe.theta(i) = m.theta(i) + h;
      const double up = weighted_sum(probe, u, y, weights);
      probe.theta(i) = m.theta(i) - h;
      const double down = weighted_sum(probe, u, y, weights);
      probe.theta(i) = m.theta(i);
      const double fd = (up - down) / (2 * h);
      max_err = std::max(max_err, rel_diff(analytic(i), fd));
    }
    CHECK(max_err < 1e-5);
  }
}

TEST_CASE("branch-trunk batch evaluation equals the naive per-pair loop") {
  const MeanArchitecture arch = bt_arch(3, 2, 5, {7}, 2);
  const MeanFunction m = mean_init(arch, 23);
  Rng rng(6);
  const Matrix u = random_matrix(rng, 4, 3);
  const Matrix y = random_matrix(rng, 6, 2);
  const MeanBatch batch = mean_eval(m, u, y);

  for (Index i = 0; i < u.rows(); ++i)
    for (Index j = 0; j < y.rows(); ++j) {
      const MeanBatch single = mean_eval(m, u.row(i), y.row(j));
      for (Index s = 0; s < arch.output_count; ++s)
        CHECK(std::abs(batch[s](j, i) - single[s](0, 0)) < 1e-12);
    }
}

TEST_CASE("initialization is deterministic and respects the glorot bound") {
  const MeanArchitecture arch = mlp_arch(5, 5, {20});
  const MeanFunction a = mean_init(arch, 99);
  const MeanFunction b = mean_init(arch, 99);
  CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);
  const MeanFunction c = mean_init(arch, 100);
  CHECK((a.theta - c.theta).cwiseAbs().maxCoeff() > 0.0);

  // first layer is 10 -> 20: every weight within +-sqrt(6/30) over many draws
  const double limit = std::sqrt(6.0 / 30.0);
  Index draws = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MeanFunction m = mean_init(arch, seed);
    for (Index k = 0; k < 10 * 20; ++k) {
      CHECK(std::abs(m.theta(k)) <= limit);
      ++draws;
    }
  }
  CHECK(draws == 10000);
}

TEST_CASE("shape validation") {
  const MeanArchitecture arch = mlp_arch(3, 2, {4});
  const MeanFunction m = mean_init(arch, 1);
  Rng rng(7);
  CHECK_THROWS_AS(mean_eval(m, random_matrix(rng, 4, 2), random_matrix(rng, 5, 2)),
                  DimensionMismatch);
  CHECK_THROWS_AS(mean_grad_params(m, random_matrix(rng, 4, 3), random_matrix(rng, 5, 2),
                                   {Matrix::Zero(4, 4)}),
                  DimensionMismatch);
}
