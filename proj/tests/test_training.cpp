#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "operon/dataset.hpp"
#include "operon/training.hpp"
#include "test_helpers.hpp"

using namespace operon;
using namespace operon::testing;

namespace {

OperatorDataset random_dataset(Rng& rng, Index n, Index p, Index q, Index d, Index outputs = 1) {
  OperatorDataset data;
  data.u = random_matrix(rng, n, p);
  data.y = random_matrix(rng, q, d);
  for (Index s = 0; s < outputs; ++s) data.v.push_back(random_matrix(rng, q, n));
  data.metadata = {{"name", "random"}};
  return data;
}

}  // namespace

TEST_CASE("adam leaves parameters alone for zero gradients") {
  AdamState state = AdamState::create(3, 0.1);
  Vector params = Vector::Constant(3, 2.0);
  adam_step(state, params, Vector::Zero(3));
  CHECK((params.array() == 2.0).all());
}

TEST_CASE("first adam step moves by roughly the learning rate") {
  AdamState state = AdamState::create(2, 0.05);
  Vector params = Vector::Zero(2);
  Vector grads(2);
  grads << 4.0, -0.3;
  adam_step(state, params, grads);
  for (Index i = 0; i < 2; ++i) {
    CHECK(std::abs(params(i)) <= 0.05);
    CHECK(std::abs(params(i)) >= 0.999 * 0.05);
    CHECK(params(i) * grads(i) < 0.0);  // moves against the gradient
  }
}

TEST_CASE("two adam steps match the hand-rolled scalar recurrence") {
  const double lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, g = 3.0;
  AdamState state = AdamState::create(1, lr);
  Vector params = Vector::Zero(1);
  Vector grads = Vector::Constant(1, g);

  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 2; ++t) {
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double mhat = m / (1 - std::pow(beta1, t));
    const double vhat = v / (1 - std::pow(beta2, t));
    x -= lr * mhat / (std::sqrt(vhat) + eps);
    adam_step(state, params, grads);
  }
  CHECK(std::abs(params(0) - x) < 1e-12);
  CHECK_THROWS_AS(adam_step(state, params, Vector::Zero(2)), DimensionMismatch);
}

TEST_CASE("zero outputs reduce the gradient to the log-det part") {
  Rng rng(1);
  OperatorDataset data = random_dataset(rng, 4, 2, 3, 1);
  data.v[0].setZero();
  const SeparableKernelParams kernel =
      make_separable(KernelFamily::Gaussian, 2, 0.5, 1.3, KernelFamily::Gaussian, 1, 0.8);
  const NllGradient g =
      grad_nll_kron(data.u, data.y, data.v, kernel, false, JitterSchedule::none());
  // d(log sigma2) of the log-det term alone: S q N / 2
  CHECK(g.d_log_sigma2_phi == doctest::Approx(0.5 * 3.0 * 4.0).epsilon(1e-12));
}

TEST_CASE("kernel gradients match finite differences") {
  Rng rng(2);
  for (KernelFamily family : {KernelFamily::Gaussian, KernelFamily::Matern32}) {
    OperatorDataset data = random_dataset(rng, 4, 2, 3, 1);
    const SeparableKernelParams kernel =
        make_separable(family, 2, 0.7, 1.2, family, 1, 0.9);
    for (bool with_beta_y : {false, true}) {
      const GradCheckReport report = grad_check_kernel(data, kernel, with_beta_y);
      CHECK(report.max_rel_error < 1e-5);
    }
  }
}

TEST_CASE("multi-output kernel gradients match finite differences") {
  Rng rng(3);
  OperatorDataset data = random_dataset(rng, 4, 2, 3, 1, 2);
  const SeparableKernelParams kernel =
      make_separable(KernelFamily::Gaussian, 2, 0.6, 1.0, KernelFamily::Gaussian, 1, 1.1);
  const GradCheckReport report = grad_check_kernel(data, kernel, true);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("mean gradients match finite differences through the nn loss") {
  Rng rng(4);
  OperatorDataset data = random_dataset(rng, 4, 2, 3, 1);
  const SeparableKernelParams kernel =
      make_separable(KernelFamily::Gaussian, 2, 0.5, 1.0, KernelFamily::Gaussian, 1, 0.7);
  MeanArchitecture arch;
  arch.variant = MeanVariant::Mlp;
  arch.feature_dim = 2;
  arch.coord_dim = 1;
  arch.output_count = 1;
  arch.mlp_hidden = {4, 4};
  const GradCheckReport report = grad_check_mean(data, kernel, mean_init(arch, 7));
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("zero-shot keeps the initialization bit-exactly") {
  Rng rng(5);
  const OperatorDataset data = random_dataset(rng, 6, 3, 4, 1);
  TrainConfig config;
  config.mode = TrainMode::ZeroShot;
  const InitHeuristics init;
  const TrainResult result = train(data, config, init, MeanArchitecture{});

  CHECK((result.model.kernel.input.log_beta.array() == std::log(init.beta_phi_init)).all());
  CHECK(result.model.kernel.input.log_sigma2 == std::log(init.sigma2_phi_init));
  CHECK((result.model.kernel.output.log_beta.array() == std::log(init.beta_y_init)).all());
  REQUIRE(result.history.size() == 1);

  // and equals a direct fit with the same parameters, prediction for prediction
  const SeparableKernelParams kernel = make_separable(
      KernelFamily::Gaussian, 3, init.beta_phi_init, init.sigma2_phi_init,
      KernelFamily::Gaussian, 1, init.beta_y_init);
  const TrainedOperatorGP direct = fit(data, kernel, make_zero_mean());
  const Vector u_star = random_vector(rng, 3);
  const Matrix y_star = random_matrix(rng, 3, 1);
  const Matrix a = predict(result.model, u_star, y_star);
  const Matrix b = predict(direct, u_star, y_star);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("epoch-0 loss of a full run equals the zero-shot loss exactly") {
  Rng rng(6);
  const OperatorDataset data = random_dataset(rng, 5, 2, 4, 1);
  TrainConfig zero_shot;
  zero_shot.mode = TrainMode::ZeroShot;
  TrainConfig full;
  full.mode = TrainMode::ZeroMeanFull;
  full.epochs = 3;
  full.lr = 1e-2;
  const InitHeuristics init;
  const TrainResult a = train(data, zero_shot, init, MeanArchitecture{});
  const TrainResult b = train(data, full, init, MeanArchitecture{});
  CHECK(a.history.front().total == b.history.front().total);  // bitwise
  CHECK(b.history.size() == 4);
}

TEST_CASE("one-shot performs exactly one update") {
  Rng rng(7);
  const OperatorDataset data = random_dataset(rng, 5, 2, 4, 1);
  TrainConfig config;
  config.mode = TrainMode::OneShot;
  config.lr = 1e-2;
  const TrainResult result = train(data, config, InitHeuristics{}, MeanArchitecture{});
  CHECK(result.history.size() == 2);
  // parameters moved away from the initialization
  CHECK((result.model.kernel.input.log_beta.array() != std::log(1e-2)).any());
}

TEST_CASE("full zero-mean training decreases the loss on the antiderivative set") {
  const OperatorDataset pair = gen_calculus_pair(20, 24, 31);
  const OperatorDataset data = select_output(pair, 0);
  TrainConfig config;
  config.mode = TrainMode::ZeroMeanFull;
  config.epochs = 50;
  config.lr = 1e-2;
  const TrainResult result = train(data, config, InitHeuristics{}, MeanArchitecture{});
  CHECK(result.history.back().total <= result.history.front().total);
}

TEST_CASE("identical features stay symmetric through ARD training") {
  Rng rng(8);
  OperatorDataset data = random_dataset(rng, 6, 3, 4, 1);
  data.u.col(1) = data.u.col(0);
  data.u.col(2) = data.u.col(0);
  TrainConfig config;
  config.mode = TrainMode::ZeroMeanFull;
  config.epochs = 10;
  config.lr = 1e-2;
  const TrainResult result = train(data, config, InitHeuristics{}, MeanArchitecture{});
  const Vector beta = result.model.kernel.input.log_beta;
  CHECK(std::abs(beta(0) - beta(1)) < 1e-8);
  CHECK(std::abs(beta(0) - beta(2)) < 1e-8);
}

TEST_CASE("nn-mean training never touches the kernel parameters") {
  Rng rng(9);
  const OperatorDataset data = random_dataset(rng, 5, 2, 4, 1);
  TrainConfig config;
  config.mode = TrainMode::NnMean;
  config.epochs = 5;
  config.lr = 1e-3;
  MeanArchitecture arch;
  arch.variant = MeanVariant::Mlp;
  arch.mlp_hidden = {6};
  const InitHeuristics init;
  const TrainResult result = train(data, config, init, arch);
  CHECK((result.model.kernel.input.log_beta.array() == std::log(init.beta_phi_init)).all());
  CHECK(result.model.kernel.input.log_sigma2 == std::log(init.sigma2_phi_init));
  CHECK((result.model.kernel.output.log_beta.array() == std::log(init.beta_y_init)).all());
  CHECK(result.history.size() == 6);
  CHECK(result.history.back().total <= result.history.front().total);
}

TEST_CASE("nn-mean with a zero architecture keeps the loss constant") {
  Rng rng(10);
  const OperatorDataset data = random_dataset(rng, 4, 2, 3, 1);
  TrainConfig config;
  config.mode = TrainMode::NnMean;
  config.epochs = 4;
  MeanArchitecture arch;  // Zero variant
  const TrainResult result = train(data, config, InitHeuristics{}, arch);
  for (const LossRecord& record : result.history)
    CHECK(record.total == result.history.front().total);
}

TEST_CASE("duplicate samples succeed through jitter escalation") {
  Rng rng(11);
  OperatorDataset data = random_dataset(rng, 5, 2, 4, 1);
  data.u.row(1) = data.u.row(0);  // singular C_phi at zero jitter
  data.v[0].col(1) = data.v[0].col(0);
  TrainConfig config;
  config.mode = TrainMode::ZeroShot;
  const TrainResult result = train(data, config, InitHeuristics{}, MeanArchitecture{});
  CHECK(result.model.chol_phi.jitter_used > 0.0);
}

TEST_CASE("mse flag swaps the objective") {
  Rng rng(12);
  const OperatorDataset data = random_dataset(rng, 4, 2, 3, 1);
  TrainConfig config;
  config.mode = TrainMode::NnMean;
  config.epochs = 0;
  config.mse_loss = true;
  MeanArchitecture arch;
  arch.variant = MeanVariant::Mlp;
  arch.mlp_hidden = {4};
  const TrainResult result = train(data, config, InitHeuristics{}, arch);
  const MeanFunction mean = mean_init(result.model.mean.arch, config.seed);
  const double expected = (data.v[0] - mean_eval(mean, data.u, data.y)[0]).squaredNorm();
  CHECK(rel_diff(result.history.front().total, expected) < 1e-12);
}

TEST_CASE("grad_check reports zeros for frozen all-zero gradients") {
  Rng rng(13);
  OperatorDataset data = random_dataset(rng, 4, 2, 3, 1);
  data.v[0].setZero();
  // with V = 0 and sigma2 scaling both terms, beta gradients may still be
  // nonzero; this exercises the report plumbing rather than the values
  const SeparableKernelParams kernel =
      make_separable(KernelFamily::Gaussian, 2, 0.5, 1.0, KernelFamily::Gaussian, 1, 0.9);
  const GradCheckReport report = grad_check_kernel(data, kernel, false);
  CHECK(report.per_param.size() == 3);
  CHECK(report.max_rel_error < 1e-5);
}
