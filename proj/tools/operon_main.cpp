// operon: train and evaluate Gaussian-process operator surrogates with
// Kronecker-factored separable kernels on self-generated PDE benchmarks.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "operon/container_io.hpp"
#include "operon/dataset.hpp"
#include "operon/gp.hpp"
#include "operon/metrics.hpp"
#include "operon/physics.hpp"
#include "operon/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace operon;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct OutputSink {
  fs::path dir;
  json provenance;

  explicit OutputSink(const std::string& out, const std::string& command, const json& config) {
    dir = out;
    fs::create_directories(dir);
    provenance["command"] = command;
    provenance["config"] = config;
    provenance["outputs"] = json::object();
  }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  void record(const std::string& name) {
    provenance["outputs"][name] = file_hash_hex(path(name));
  }

  void finish() {
    std::ofstream out(path("provenance.json"), std::ios::trunc);
    out << provenance.dump(2) << '\n';
  }
};

void write_json(const std::string& path, const json& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << value.dump(2) << '\n';
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string problem;
  Index n = 100;
  Index p = 40;
  Index q = 0;  // defaults to p where applicable
  Index g = 29;
  double nu = 0.1;
  Index resolution = 0;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string csv_u, csv_y, csv_grid;
  std::vector<std::string> csv_v;
};

int run_generate(const GenerateArgs& args) {
  const json config = {{"problem", args.problem}, {"n", args.n},           {"p", args.p},
                       {"q", args.q},             {"g", args.g},           {"nu", args.nu},
                       {"resolution", args.resolution}, {"seed", args.seed}, {"out", args.out}};
  OutputSink sink(args.out, "generate", config);

  OperatorDataset data;
  if (args.problem == "advection") {
    data = gen_advection(args.n, args.p, args.seed);
  } else if (args.problem == "burgers-periodic") {
    data = gen_burgers(BurgersVariant::Periodic, args.n, args.p, args.q ? args.q : args.p,
                       args.nu, args.resolution, args.seed);
  } else if (args.problem == "burgers-dirichlet") {
    data = gen_burgers(BurgersVariant::Dirichlet, args.n, args.p, args.q ? args.q : 144,
                       args.nu, args.resolution, args.seed);
  } else if (args.problem == "darcy") {
    data = gen_darcy(args.n, args.g, args.seed);
  } else if (args.problem == "calculus-pair") {
    data = gen_calculus_pair(args.n, args.p, args.seed);
  } else if (args.problem == "csv-import") {
    if (args.csv_u.empty() || args.csv_y.empty() || args.csv_v.empty())
      throw std::invalid_argument("csv-import needs --csv-u, --csv-y and --csv-v");
    data = import_csv_dataset(args.csv_u, args.csv_y, args.csv_v, args.csv_grid);
  } else {
    throw std::invalid_argument("unknown problem: " + args.problem);
  }

  save_dataset(sink.path("dataset.opds"), data);
  sink.record("dataset.opds");
  write_json(sink.path("metadata.json"), data.metadata);
  sink.record("metadata.json");
  sink.finish();
  std::cout << "wrote " << sink.path("dataset.opds") << " (N=" << data.sample_count()
            << ", p=" << data.input_dim() << ", q=" << data.grid_size()
            << ", S=" << data.output_count() << ")\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string dataset;
  std::string mode = "zero-shot";
  std::string mean = "zero";
  Index epochs = -1;  // default chosen per mode
  double lr = -1.0;
  std::uint64_t seed = 0;
  double beta_y = 3.0;
  double beta_phi = 1e-2;
  double sigma2 = 1.0;
  bool optimize_beta_y = false;
  Index pca = 0;
  bool mse = false;
  std::string physics_config;
  std::vector<Index> hidden = {64, 64};
  Index latent = 16;
  Index train_n = 0;
  Index test_n = 0;
  std::uint64_t split_seed = 0;
  std::string paired_mode;
  bool paired_mse = false;
  std::string out = "out";
};

MeanArchitecture mean_arch_from(const TrainArgs& args) {
  MeanArchitecture arch;
  arch.variant = mean_variant_from_name(args.mean);
  arch.mlp_hidden = args.hidden;
  arch.branch_hidden = args.hidden;
  arch.trunk_hidden = args.hidden;
  arch.latent_dim = args.latent;
  return arch;
}

PdeProblem problem_from_json(const std::string& path) {
  PdeProblem problem;
  if (path.empty()) return problem;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open physics config: " + path);
  json config = json::parse(in);
  problem.nu = config.value("nu", problem.nu);
  problem.n_pde = config.value("n_pde", problem.n_pde);
  problem.n_bc = config.value("n_bc", problem.n_bc);
  problem.n_ic = config.value("n_ic", problem.n_ic);
  problem.physics_sample_count = config.value("n_pi", problem.physics_sample_count);
  problem.weights.alpha_bc = config.value("alpha_bc", problem.weights.alpha_bc);
  problem.weights.alpha_ic = config.value("alpha_ic", problem.weights.alpha_ic);
  problem.weights.alpha_mle = config.value("alpha_mle", problem.weights.alpha_mle);
  problem.weights.lambda = config.value("lambda", problem.weights.lambda);
  const double left = config.value("bc_left", 0.0);
  const double right = config.value("bc_right", 1.0);
  problem.bc_left = [left](double) { return left; };
  problem.bc_right = [right](double) { return right; };
  return problem;
}

struct TrainedBundle {
  TrainedOperatorGP model;
  json metrics;
  std::vector<LossRecord> history;
  std::vector<PhysicsLossRecord> physics_history;
  bool physics = false;
};

json parameter_report(const TrainedOperatorGP& model, const std::string& mode) {
  const Index p = model.kernel.input.dim();
  const Index d = model.kernel.output.dim();
  json report;
  if (mode == "nn-mean" || mode == "physics") {
    report["trainable"] = model.mean.theta.size();
    report["frozen_kernel"] = p + 1 + d;
  } else {
    report["trainable"] = p + 1;  // ARD beta_phi + sigma2_phi
    report["frozen_beta_y"] = d;
  }
  return report;
}

TrainedBundle run_one_training(const OperatorDataset& train_data,
                               const OperatorDataset& test_data, const TrainArgs& args,
                               const std::string& mode, bool mse) {
  TrainConfig config;
  config.mode = mode == "physics" ? TrainMode::NnMean : train_mode_from_name(mode);
  config.seed = args.seed;
  config.mse_loss = mse;
  config.optimize_beta_y = args.optimize_beta_y;
  if (args.pca > 0) config.pca_rank = args.pca;

  const bool nn_like = mode == "nn-mean" || mode == "physics";
  config.epochs = args.epochs >= 0 ? args.epochs : (nn_like ? 3000 : 3000);
  config.lr = args.lr > 0 ? args.lr : (nn_like ? 1e-3 : 1e-2);
  if (mode == "zero-shot") config.epochs = 0;
  if (mode == "one-shot") config.epochs = 1;

  InitHeuristics init;
  init.beta_y_init = args.beta_y;
  init.beta_phi_init = args.beta_phi;
  init.sigma2_phi_init = args.sigma2;

  if (mode == "nn-mean" && args.mean == "zero")
    throw std::invalid_argument("nn-mean mode requires a trainable mean (--mean mlp|branch-trunk)");
  if (mode == "physics" && args.mean == "zero")
    throw std::invalid_argument("physics mode requires a trainable mean (--mean mlp|branch-trunk)");

  TrainedBundle bundle;
  const auto start = Clock::now();
  if (mode == "physics") {
    PdeProblem problem = problem_from_json(args.physics_config);
    problem.nu = train_data.metadata.value("nu", problem.nu);
    PhysicsTrainResult result =
        train_physics_informed(train_data, problem, mean_arch_from(args), config);
    bundle.model = std::move(result.model);
    bundle.physics_history = std::move(result.history);
    bundle.physics = true;
  } else {
    TrainResult result = train(train_data, config, init, mean_arch_from(args));
    bundle.model = std::move(result.model);
    bundle.history = std::move(result.history);
  }
  const double train_seconds = seconds_since(start);

  const auto infer_start = Clock::now();
  const std::vector<Matrix> pred = predict_batch(bundle.model, test_data.u, test_data.y);
  const double infer_seconds = seconds_since(infer_start);
  const RelativeL2Result errors = relative_l2(pred, test_data.v);

  json metrics;
  metrics["mode"] = mode;
  metrics["mse_loss"] = mse;
  metrics["relative_l2"] = std::vector<double>(
      errors.per_output.data(), errors.per_output.data() + errors.per_output.size());
  json per_sample = json::array();
  for (const Vector& v : errors.per_sample)
    per_sample.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  metrics["per_sample_errors"] = per_sample;
  metrics["skipped_zero_norm"] = errors.skipped;
  metrics["train_seconds"] = train_seconds;
  metrics["inference_seconds"] = infer_seconds;
  metrics["parameters"] = parameter_report(bundle.model, mode);
  metrics["jitter_used"] = {{"phi", bundle.model.chol_phi.jitter_used},
                            {"y", bundle.model.chol_y.jitter_used}};
  const FlopsBreakdown cost =
      inference_cost(bundle.model.sample_count(), bundle.model.features.cols(),
                     test_data.grid_size(), test_data.coord_dim(), bundle.model.mean.arch);
  metrics["inference_flops"] = cost.total;
  bundle.metrics = std::move(metrics);
  return bundle;
}

int run_train(const TrainArgs& args) {
  const json config = {{"dataset", args.dataset},
                       {"mode", args.mode},
                       {"mean", args.mean},
                       {"epochs", args.epochs},
                       {"lr", args.lr},
                       {"seed", args.seed},
                       {"beta_y", args.beta_y},
                       {"beta_phi", args.beta_phi},
                       {"sigma2", args.sigma2},
                       {"optimize_beta_y", args.optimize_beta_y},
                       {"pca", args.pca},
                       {"mse", args.mse},
                       {"physics_config", args.physics_config},
                       {"hidden", args.hidden},
                       {"latent", args.latent},
                       {"train_n", args.train_n},
                       {"test_n", args.test_n},
                       {"split_seed", args.split_seed},
                       {"paired_mode", args.paired_mode},
                       {"paired_mse", args.paired_mse},
                       {"out", args.out}};
  OutputSink sink(args.out, "train", config);

  const OperatorDataset full = load_dataset(args.dataset);
  Index train_n = args.train_n;
  Index test_n = args.test_n;
  if (train_n <= 0) {
    test_n = std::min<Index>(std::max<Index>(1, full.sample_count() / 5), 200);
    train_n = full.sample_count() - test_n;
  } else if (test_n <= 0) {
    test_n = full.sample_count() - train_n;
  }
  const auto [train_data, test_data] = split_dataset(full, train_n, test_n, args.split_seed);

  const TrainedBundle primary =
      run_one_training(train_data, test_data, args, args.mode, args.mse);
  save_model(sink.path("model.opgm"), primary.model);
  sink.record("model.opgm");
  if (primary.physics) {
    write_physics_loss_csv(sink.path("loss.csv"), primary.physics_history);
  } else {
    write_loss_csv(sink.path("loss.csv"), primary.history);
  }

  json metrics = primary.metrics;
  metrics["split"] = {{"train_n", train_n}, {"test_n", test_n}, {"seed", args.split_seed}};
  if (!args.paired_mode.empty()) {
    const TrainedBundle paired =
        run_one_training(train_data, test_data, args, args.paired_mode, args.paired_mse);
    save_model(sink.path("model_paired.opgm"), paired.model);
    sink.record("model_paired.opgm");
    if (paired.physics) {
      write_physics_loss_csv(sink.path("loss_paired.csv"), paired.physics_history);
    } else {
      write_loss_csv(sink.path("loss_paired.csv"), paired.history);
    }
    metrics["paired"] = paired.metrics;
    json ratio = json::array();
    const auto& a = primary.metrics["relative_l2"];
    const auto& b = paired.metrics["relative_l2"];
    for (std::size_t s = 0; s < a.size(); ++s)
      ratio.push_back(a[s].get<double>() / b[s].get<double>());
    metrics["relative_l2_ratio_primary_over_paired"] = ratio;
  }
  write_json(sink.path("metrics.json"), metrics);
  sink.record("metrics.json");
  sink.finish();

  std::cout << "relative L2:";
  for (const auto& err : metrics["relative_l2"]) std::cout << ' ' << err.get<double>();
  std::cout << '\n';
  return kExitOk;
}

// -------------------------------------------------------------- eval/predict

struct EvalArgs {
  std::string model;
  std::string dataset;
  std::string out = "out";
};

int run_eval(const EvalArgs& args, bool write_predictions) {
  const json config = {{"model", args.model}, {"dataset", args.dataset}, {"out", args.out}};
  OutputSink sink(args.out, write_predictions ? "predict" : "eval", config);

  const TrainedOperatorGP model = load_model(args.model);
  const OperatorDataset data = load_dataset(args.dataset);

  const auto start = Clock::now();
  const std::vector<Matrix> pred = predict_batch(model, data.u, data.y);
  const double infer_seconds = seconds_since(start);

  if (write_predictions) {
    ArrayContainer box;
    for (std::size_t s = 0; s < pred.size(); ++s)
      box.add("pred" + std::to_string(s), pred[s]);
    box.metadata = {{"model", args.model}, {"dataset", args.dataset}};
    write_container(sink.path("predictions.opds"), kDatasetMagic, box);
    sink.record("predictions.opds");
  }

  const RelativeL2Result errors = relative_l2(pred, data.v);
  json metrics;
  metrics["relative_l2"] = std::vector<double>(
      errors.per_output.data(), errors.per_output.data() + errors.per_output.size());
  metrics["skipped_zero_norm"] = errors.skipped;
  metrics["inference_seconds"] = infer_seconds;
  write_json(sink.path("metrics.json"), metrics);
  sink.record("metrics.json");
  sink.finish();

  std::cout << "relative L2:";
  for (Index s = 0; s < errors.per_output.size(); ++s) std::cout << ' ' << errors.per_output(s);
  std::cout << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  std::string dataset;
  double beta_phi_min = 1e-4, beta_phi_max = 1e2;
  Index beta_phi_count = 7;
  double beta_y_min = 3e-3, beta_y_max = 3e3;
  Index beta_y_count = 7;
  double sigma2 = 1.0;
  Index train_n = 0, test_n = 0;
  std::uint64_t split_seed = 0;
  std::string out = "out";
};

std::vector<double> log_grid(double lo, double hi, Index count) {
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(count - 1);
  for (Index i = 0; i < count; ++i) grid[i] = std::exp(std::log(lo) + step * i);
  return grid;
}

int run_sweep(const SweepArgs& args) {
  const json config = {{"dataset", args.dataset},
                       {"beta_phi", {args.beta_phi_min, args.beta_phi_max, args.beta_phi_count}},
                       {"beta_y", {args.beta_y_min, args.beta_y_max, args.beta_y_count}},
                       {"sigma2", args.sigma2},
                       {"train_n", args.train_n},
                       {"test_n", args.test_n},
                       {"split_seed", args.split_seed},
                       {"out", args.out}};
  OutputSink sink(args.out, "sweep", config);

  const OperatorDataset full = load_dataset(args.dataset);
  Index train_n = args.train_n;
  Index test_n = args.test_n;
  if (train_n <= 0) {
    test_n = std::min<Index>(std::max<Index>(1, full.sample_count() / 5), 200);
    train_n = full.sample_count() - test_n;
  } else if (test_n <= 0) {
    test_n = full.sample_count() - train_n;
  }
  const auto [train_data, test_data] = split_dataset(full, train_n, test_n, args.split_seed);

  std::ofstream csv(sink.path("sweep.csv"), std::ios::trunc);
  csv.precision(17);
  csv << "beta_phi,beta_y,sigma2,loss,error\n";
  for (double beta_phi : log_grid(args.beta_phi_min, args.beta_phi_max, args.beta_phi_count)) {
    for (double beta_y : log_grid(args.beta_y_min, args.beta_y_max, args.beta_y_count)) {
      double loss = std::numeric_limits<double>::quiet_NaN();
      double error = std::numeric_limits<double>::quiet_NaN();
      try {
        const SeparableKernelParams kernel = make_separable(
            KernelFamily::Gaussian, train_data.input_dim(), beta_phi, args.sigma2,
            KernelFamily::Gaussian, train_data.coord_dim(), beta_y);
        loss = nll_kron(train_data, kernel, make_zero_mean(train_data.output_count())).total;
        const TrainedOperatorGP model =
            fit(train_data, kernel, make_zero_mean(train_data.output_count()));
        const std::vector<Matrix> pred = predict_batch(model, test_data.u, test_data.y);
        error = relative_l2(pred, test_data.v).per_output.mean();
      } catch (const NotPositiveDefinite&) {
        // recorded as NaN, sweep continues
      }
      csv << beta_phi << ',' << beta_y << ',' << args.sigma2 << ',' << loss << ',' << error
          << '\n';
    }
  }
  csv.close();
  sink.record("sweep.csv");
  sink.finish();
  std::cout << "wrote " << sink.path("sweep.csv") << '\n';
  return kExitOk;
}

// -------------------------------------------------------------------- cost

struct CostArgs {
  Index n_train = 1000;
  Index n_points = 128;
  Index m_points = 128;
  Index d = 1;
  std::string mean = "zero";
  std::vector<Index> hidden = {64, 64};
  Index latent = 16;
  Index feature_dim = 0;  // defaults to n_points
  std::string out;
};

int run_cost(const CostArgs& args) {
  MeanArchitecture arch;
  arch.variant = mean_variant_from_name(args.mean);
  arch.feature_dim = args.feature_dim > 0 ? args.feature_dim : args.n_points;
  arch.coord_dim = args.d;
  arch.output_count = 1;
  arch.mlp_hidden = args.hidden;
  arch.branch_hidden = args.hidden;
  arch.trunk_hidden = args.hidden;
  arch.latent_dim = args.latent;

  const FlopsBreakdown cost =
      inference_cost(args.n_train, args.n_points, args.m_points, args.d, arch);
  if (args.m_points == 0)
    std::cerr << "warning: m = 0 is degenerate; cost reduces to the training-sample term\n";

  std::cout << "mean-function term:   " << cost.mean_flops << '\n'
            << "query-side term:      " << cost.query_flops << '\n'
            << "training-sample term: " << cost.sample_flops << '\n'
            << "total FLOPs:          " << cost.total << '\n';
  if (!args.out.empty()) {
    const json config = {{"n_train", args.n_train}, {"n_points", args.n_points},
                         {"m_points", args.m_points}, {"d", args.d},
                         {"mean", args.mean},         {"out", args.out}};
    OutputSink sink(args.out, "cost", config);
    write_json(sink.path("cost.json"), {{"mean_flops", cost.mean_flops},
                                        {"query_flops", cost.query_flops},
                                        {"sample_flops", cost.sample_flops},
                                        {"total", cost.total}});
    sink.record("cost.json");
    sink.finish();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("OPERON_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"Gaussian-process operator learning with Kronecker-factored kernels"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "generate a benchmark dataset");
  generate
      ->add_option("problem", gen.problem,
                   "advection | burgers-periodic | burgers-dirichlet | darcy | calculus-pair "
                   "| csv-import")
      ->required();
  generate->add_option("--n", gen.n, "number of samples");
  generate->add_option("--p", gen.p, "input discretization size");
  generate->add_option("--q", gen.q, "output grid size");
  generate->add_option("--g", gen.g, "darcy grid side");
  generate->add_option("--nu", gen.nu, "viscosity");
  generate->add_option("--resolution", gen.resolution, "internal solver resolution");
  generate->add_option("--seed", gen.seed, "rng seed");
  generate->add_option("--out", gen.out, "output directory");
  generate->add_option("--csv-u", gen.csv_u, "csv import: inputs");
  generate->add_option("--csv-y", gen.csv_y, "csv import: output grid");
  generate->add_option("--csv-v", gen.csv_v, "csv import: outputs (repeatable)");
  generate->add_option("--csv-grid", gen.csv_grid, "csv import: input grid");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and report metrics");
  train_cmd->add_option("--dataset", tr.dataset, "dataset container")->required();
  train_cmd->add_option("--mode", tr.mode,
                        "zero-shot | one-shot | zero-mean | nn-mean | physics");
  train_cmd->add_option("--mean", tr.mean, "zero | mlp | branch-trunk");
  train_cmd->add_option("--epochs", tr.epochs, "training epochs");
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--seed", tr.seed, "rng seed");
  train_cmd->add_option("--beta-y", tr.beta_y, "output length-scale (fixed or initial)");
  train_cmd->add_option("--beta-phi", tr.beta_phi, "input length-scale initialization");
  train_cmd->add_option("--sigma2", tr.sigma2, "process variance initialization");
  train_cmd->add_flag("--optimize-beta-y", tr.optimize_beta_y, "optimize beta_y as well");
  train_cmd->add_option("--pca", tr.pca, "project inputs onto this many PCs");
  train_cmd->add_flag("--mse", tr.mse, "replace the MLE data term with plain MSE");
  train_cmd->add_option("--physics-config", tr.physics_config, "physics settings (json)");
  train_cmd->add_option("--hidden", tr.hidden, "hidden layer widths")->delimiter(',');
  train_cmd->add_option("--latent", tr.latent, "branch-trunk latent dimension");
  train_cmd->add_option("--train-n", tr.train_n, "training split size");
  train_cmd->add_option("--test-n", tr.test_n, "held-out split size");
  train_cmd->add_option("--split-seed", tr.split_seed, "split shuffle seed");
  train_cmd->add_option("--paired-mode", tr.paired_mode,
                        "train a second model in this mode on the same split");
  train_cmd->add_flag("--paired-mse", tr.paired_mse, "paired run uses the MSE loss");
  train_cmd->add_option("--out", tr.out, "output directory");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
  eval_cmd->add_option("--model", ev.model, "model container")->required();
  eval_cmd->add_option("--dataset", ev.dataset, "dataset container")->required();
  eval_cmd->add_option("--out", ev.out, "output directory");

  EvalArgs pr;
  CLI::App* predict_cmd = app.add_subcommand("predict", "write predictions for a dataset");
  predict_cmd->add_option("--model", pr.model, "model container")->required();
  predict_cmd->add_option("--dataset", pr.dataset, "dataset container")->required();
  predict_cmd->add_option("--out", pr.out, "output directory");

  SweepArgs sw;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "map loss and error over kernel params");
  sweep_cmd->add_option("--dataset", sw.dataset, "dataset container")->required();
  sweep_cmd->add_option("--beta-phi-min", sw.beta_phi_min, "grid lower bound");
  sweep_cmd->add_option("--beta-phi-max", sw.beta_phi_max, "grid upper bound");
  sweep_cmd->add_option("--beta-phi-count", sw.beta_phi_count, "grid points");
  sweep_cmd->add_option("--beta-y-min", sw.beta_y_min, "grid lower bound");
  sweep_cmd->add_option("--beta-y-max", sw.beta_y_max, "grid upper bound");
  sweep_cmd->add_option("--beta-y-count", sw.beta_y_count, "grid points");
  sweep_cmd->add_option("--sigma2", sw.sigma2, "fixed process variance");
  sweep_cmd->add_option("--train-n", sw.train_n, "training split size");
  sweep_cmd->add_option("--test-n", sw.test_n, "held-out split size");
  sweep_cmd->add_option("--split-seed", sw.split_seed, "split shuffle seed");
  sweep_cmd->add_option("--out", sw.out, "output directory");

  CostArgs co;
  CLI::App* cost_cmd = app.add_subcommand("cost", "inference FLOPs breakdown");
  cost_cmd->add_option("--n-train", co.n_train, "stored training samples N");
  cost_cmd->add_option("--n-points", co.n_points, "input discretization n");
  cost_cmd->add_option("--m-points", co.m_points, "query points m");
  cost_cmd->add_option("--d", co.d, "output coordinate dimension");
  cost_cmd->add_option("--mean", co.mean, "zero | mlp | branch-trunk");
  cost_cmd->add_option("--hidden", co.hidden, "hidden layer widths")->delimiter(',');
  cost_cmd->add_option("--latent", co.latent, "branch-trunk latent dimension");
  cost_cmd->add_option("--feature-dim", co.feature_dim, "mean input features");
  cost_cmd->add_option("--out", co.out, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev, false);
    if (*predict_cmd) return run_eval(pr, true);
    if (*sweep_cmd) return run_sweep(sw);
    if (*cost_cmd) return run_cost(co);
  } catch (const NotPositiveDefinite& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const TrainingAborted& err) {
    std::cerr << "training aborted: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const UnstableStep& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const SolverSingular& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const CorruptManifest& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kExitData;
  } catch (const ShapeMismatch& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kExitData;
  } catch (const UnsupportedVersion& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
