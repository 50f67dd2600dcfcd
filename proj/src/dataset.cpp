#include "operon/dataset.hpp"

#include <Eigen/Sparse>
#include <cmath>

#include "operon/container_io.hpp"
#include "operon/kernels.hpp"
#include "operon/linalg.hpp"
#include "operon/rng.hpp"

namespace operon {

namespace {

// Linear interpolation of values sampled uniformly on [0,1] (inclusive ends).
double lerp_line(const Vector& values, double x) {
  const Index n = values.size();
  if (n == 1) return values(0);
  const double pos = x * static_cast<double>(n - 1);
  const Index k = std::min<Index>(static_cast<Index>(std::floor(pos)), n - 2);
  const double frac = pos - static_cast<double>(k);
  return (1.0 - frac) * values(k) + frac * values(k + 1);
}

Matrix line_grid(Index p, bool inclusive_end) {
  Matrix grid(p, 1);
  const double denom = inclusive_end ? static_cast<double>(p - 1) : static_cast<double>(p);
  for (Index k = 0; k < p; ++k) grid(k, 0) = static_cast<double>(k) / denom;
  return grid;
}

// Chordal circle embedding makes the periodic RBF Gram positive definite.
Matrix circle_grid(Index p) {
  Matrix grid(p, 2);
  for (Index k = 0; k < p; ++k) {
    const double angle = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(p);
    grid(k, 0) = std::cos(angle) / (2.0 * M_PI);
    grid(k, 1) = std::sin(angle) / (2.0 * M_PI);
  }
  return grid;
}

struct BurgersStep {
  double dt;
  Index steps_hint;
};

double rk4_stable_dt(double dx, double nu, double max_speed) {
  const double diffusive = 0.8 * 2.785 * dx * dx / (4.0 * nu);
  const double advective = 0.5 * dx / (max_speed + 1.0);
  return std::min(diffusive, advective);
}

// Conservative-flux RHS of u_t = -(u^2/2)_x + nu u_xx, periodic wrap.
void burgers_rhs_periodic(const Vector& u, double dx, double nu, Vector& out) {
  const Index n = u.size();
  const double inv2dx = 1.0 / (2.0 * dx);
  const double invdx2 = 1.0 / (dx * dx);
  for (Index i = 0; i < n; ++i) {
    const Index ip = i + 1 == n ? 0 : i + 1;
    const Index im = i == 0 ? n - 1 : i - 1;
    const double flux = (0.5 * u(ip) * u(ip) - 0.5 * u(im) * u(im)) * inv2dx;
    const double diffusion = (u(ip) - 2.0 * u(i) + u(im)) * invdx2;
    out(i) = -flux + nu * diffusion;
  }
}

// Interior RHS with fixed Dirichlet end values (derivatives at ends are 0).
void burgers_rhs_dirichlet(const Vector& u, double dx, double nu, Vector& out) {
  const Index n = u.size();
  const double inv2dx = 1.0 / (2.0 * dx);
  const double invdx2 = 1.0 / (dx * dx);
  out(0) = 0.0;
  out(n - 1) = 0.0;
  for (Index i = 1; i + 1 < n; ++i) {
    const double flux = (0.5 * u(i + 1) * u(i + 1) - 0.5 * u(i - 1) * u(i - 1)) * inv2dx;
    const double diffusion = (u(i + 1) - 2.0 * u(i) + u(i - 1)) * invdx2;
    out(i) = -flux + nu * diffusion;
  }
}

template <typename Rhs>
void rk4_advance(Vector& u, double dt, const Rhs& rhs) {
  static thread_local Vector k1, k2, k3, k4, tmp;
  k1.resize(u.size());
  k2.resize(u.size());
  k3.resize(u.size());
  k4.resize(u.size());
  tmp.resize(u.size());
  rhs(u, k1);
  tmp = u + 0.5 * dt * k1;
  rhs(tmp, k2);
  tmp = u + 0.5 * dt * k2;
  rhs(tmp, k3);
  tmp = u + dt * k3;
  rhs(tmp, k4);
  u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

bool blew_up(const Vector& u, double bound) {
  return !u.allFinite() || u.cwiseAbs().maxCoeff() > bound;
}

}  // namespace

void OperatorDataset::validate() const {
  if (v.empty()) throw ShapeMismatch("dataset: no outputs");
  for (const Matrix& vs : v)
    if (vs.rows() != grid_size() || vs.cols() != sample_count())
      throw ShapeMismatch("dataset: output matrix shape mismatch");
  if (input_grid.rows() != 0 && input_grid.rows() != input_dim())
    throw ShapeMismatch("dataset: input grid length mismatch");
  if (!u.allFinite() || !y.allFinite())
    throw ShapeMismatch("dataset: non-finite entries");
  for (const Matrix& vs : v)
    if (!vs.allFinite()) throw ShapeMismatch("dataset: non-finite output entries");
}

Matrix grf_sample(const GrfConfig& config, Index count) {
  if (config.length_scale <= 0.0 || config.variance <= 0.0)
    throw std::invalid_argument("grf_sample: length_scale and variance must be positive");
  const Index p = config.grid.rows();
  const KernelParams rbf = make_kernel(
      KernelFamily::Gaussian, config.grid.cols(),
      1.0 / (2.0 * config.length_scale * config.length_scale), config.variance);
  const CholeskyFactor factor = cholesky_with_jitter(gram(rbf, config.grid));

  Rng rng(config.seed);
  Matrix samples(count, p);
  Vector z(p);
  for (Index i = 0; i < count; ++i) {
    for (Index k = 0; k < p; ++k) z(k) = rng.normal();
    samples.row(i) = (factor.lower.triangularView<Eigen::Lower>() * z).transpose();
  }

  if (config.pin_endpoints) {
    if (config.grid.cols() != 1)
      throw std::invalid_argument("grf_sample: endpoint pinning needs a 1-d grid");
    const double x0 = config.grid(0, 0);
    const double x1 = config.grid(p - 1, 0);
    for (Index i = 0; i < count; ++i) {
      const double shift = config.pin_start - samples(i, 0);
      const double slope =
          (config.pin_end - samples(i, p - 1) - shift) / (x1 - x0);
      for (Index k = 0; k < p; ++k)
        samples(i, k) += shift + slope * (config.grid(k, 0) - x0);
    }
  }
  return samples;
}

OperatorDataset gen_advection(Index n, Index p, std::uint64_t seed) {
  if (p < 8) throw std::invalid_argument("gen_advection: p must be at least 8");
  OperatorDataset data;
  data.input_grid = line_grid(p, false);  // periodic grid on [0,1)
  data.y = data.input_grid;
  data.u.resize(n, p);
  data.v.assign(1, Matrix(p, n));

  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    const double center = rng.uniform(0.3, 0.7);
    const double width = rng.uniform(0.3, 0.6);
    const double height = rng.uniform(1.0, 2.0);
    auto wave = [&](double x) {
      return (x >= center - width / 2.0 && x <= center + width / 2.0) ? height : 0.0;
    };
    for (Index k = 0; k < p; ++k) {
      const double x = data.input_grid(k, 0);
      data.u(i, k) = wave(x);
      // exact transport: v(x) = u0((x - 0.5) mod 1)
      double shifted = x - 0.5;
      shifted -= std::floor(shifted);
      data.v[0](k, i) = wave(shifted);
    }
  }
  data.metadata = {{"name", "advection"}, {"seed", seed}, {"n", n}, {"p", p}};
  return data;
}

Vector solve_burgers_periodic(const Eigen::Ref<const Vector>& ic, double nu, double t_end) {
  const Index n = ic.size();
  const double dx = 1.0 / static_cast<double>(n);
  const double bound = 5.0 * ic.cwiseAbs().maxCoeff() + 5.0;
  auto rhs = [&](const Vector& u, Vector& out) { burgers_rhs_periodic(u, dx, nu, out); };

  for (int attempt = 0; attempt < 2; ++attempt) {
    double dt = rk4_stable_dt(dx, nu, ic.cwiseAbs().maxCoeff()) / (attempt ? 2.0 : 1.0);
    Vector u = ic;
    double t = 0.0;
    bool ok = true;
    while (t < t_end - 1e-14) {
      const double step = std::min(dt, t_end - t);
      rk4_advance(u, step, rhs);
      t += step;
      if (blew_up(u, bound)) {
        ok = false;
        break;
      }
    }
    if (ok) return u;
  }
  throw UnstableStep("solve_burgers_periodic: unstable even after refining the step");
}

Matrix solve_burgers_dirichlet(const Eigen::Ref<const Vector>& ic, double nu,
                               const std::vector<double>& snapshot_times, double bc_left,
                               double bc_right) {
  const Index n = ic.size();
  const double dx = 1.0 / static_cast<double>(n - 1);
  const double bound = 5.0 * ic.cwiseAbs().maxCoeff() + 5.0;
  auto rhs = [&](const Vector& u, Vector& out) { burgers_rhs_dirichlet(u, dx, nu, out); };

  for (int attempt = 0; attempt < 2; ++attempt) {
    double dt = rk4_stable_dt(dx, nu, ic.cwiseAbs().maxCoeff()) / (attempt ? 2.0 : 1.0);
    Matrix snapshots(static_cast<Index>(snapshot_times.size()), n);
    Vector u = ic;
    u(0) = bc_left;
    u(n - 1) = bc_right;
    double t = 0.0;
    bool ok = true;
    for (std::size_t snap = 0; snap < snapshot_times.size() && ok; ++snap) {
      const double target = snapshot_times[snap];
      while (t < target - 1e-14) {
        const double step = std::min(dt, target - t);
        rk4_advance(u, step, rhs);
        u(0) = bc_left;
        u(n - 1) = bc_right;
        t += step;
        if (blew_up(u, bound)) {
          ok = false;
          break;
        }
      }
      snapshots.row(snap) = u.transpose();
    }
    if (ok) return snapshots;
  }
  throw UnstableStep("solve_burgers_dirichlet: unstable even after refining the step");
}

OperatorDataset gen_burgers(BurgersVariant variant, Index n, Index p, Index q, double nu,
                            Index resolution, std::uint64_t seed) {
  OperatorDataset data;
  if (variant == BurgersVariant::Periodic) {
    if (q != p) throw std::invalid_argument("gen_burgers periodic: requires q == p");
    if (resolution == 0) resolution = 4 * q;
    if (resolution < 4 * q || resolution % p != 0)
      throw std::invalid_argument("gen_burgers periodic: resolution must be >= 4q and divisible by p");

    GrfConfig grf;
    grf.grid = circle_grid(resolution);
    grf.length_scale = 0.12;
    grf.variance = 1.0;
    grf.seed = seed;
    const Matrix ics = grf_sample(grf, n);

    const Index stride = resolution / p;
    data.input_grid = line_grid(p, false);
    data.y = data.input_grid;
    data.u.resize(n, p);
    data.v.assign(1, Matrix(q, n));
    for (Index i = 0; i < n; ++i) {
      const Vector fine_ic = ics.row(i).transpose();
      const Vector fine_v = solve_burgers_periodic(fine_ic, nu, 1.0);
      for (Index k = 0; k < p; ++k) {
        data.u(i, k) = fine_ic(k * stride);
        data.v[0](k, i) = fine_v(k * stride);
      }
    }
    data.metadata = {{"name", "burgers-periodic"}, {"seed", seed}, {"n", n},
                     {"p", p},                     {"q", q},       {"nu", nu},
                     {"resolution", resolution}};
    return data;
  }

  // Dirichlet: space-time observations on an interior n_side x n_side grid.
  const auto n_side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(q))));
  if (n_side * n_side != q)
    throw std::invalid_argument("gen_burgers dirichlet: q must be a perfect square");
  if (resolution == 0) resolution = 4 * (p - 1);
  if (resolution < 4 * n_side || resolution % (p - 1) != 0)
    throw std::invalid_argument(
        "gen_burgers dirichlet: resolution must be >= 4*sqrt(q) and divisible by p-1");

  GrfConfig grf;
  grf.grid = line_grid(resolution + 1, true);
  grf.length_scale = 0.15;
  grf.variance = 0.25;
  grf.seed = seed;
  grf.pin_endpoints = true;
  grf.pin_start = 0.0;
  grf.pin_end = 1.0;
  const Matrix ics = grf_sample(grf, n);

  std::vector<double> times(n_side);
  for (Index j = 0; j < n_side; ++j)
    times[j] = static_cast<double>(j + 1) / static_cast<double>(n_side);

  data.input_grid = line_grid(p, true);
  data.y.resize(q, 2);
  for (Index jt = 0; jt < n_side; ++jt)
    for (Index ix = 0; ix < n_side; ++ix) {
      data.y(jt * n_side + ix, 0) =
          static_cast<double>(ix + 1) / static_cast<double>(n_side + 1);  // x, interior
      data.y(jt * n_side + ix, 1) = times[jt];                            // t in (0, 1]
    }

  const Index stride = resolution / (p - 1);
  data.u.resize(n, p);
  data.v.assign(1, Matrix(q, n));
  for (Index i = 0; i < n; ++i) {
    const Vector fine_ic = ics.row(i).transpose();
    const Matrix snaps = solve_burgers_dirichlet(fine_ic, nu, times, 0.0, 1.0);
    for (Index k = 0; k < p; ++k) data.u(i, k) = fine_ic(k * stride);
    for (Index jt = 0; jt < n_side; ++jt) {
      const Vector line = snaps.row(jt).transpose();
      for (Index ix = 0; ix < n_side; ++ix)
        data.v[0](jt * n_side + ix, i) = lerp_line(line, data.y(jt * n_side + ix, 0));
    }
  }
  data.metadata = {{"name", "burgers-dirichlet"}, {"seed", seed}, {"n", n},
                   {"p", p},                      {"q", q},       {"nu", nu},
                   {"resolution", resolution}};
  return data;
}

Vector solve_darcy(const Eigen::Ref<const Vector>& a, Index g,
                   const Eigen::Ref<const Vector>& f) {
  if (a.size() != g * g) throw DimensionMismatch("solve_darcy: coefficient length != g*g");
  if (f.size() != g * g) throw DimensionMismatch("solve_darcy: source length != g*g");
  const Index interior = g - 2;
  const double h = 1.0 / static_cast<double>(g - 1);
  auto node = [&](Index i, Index j) { return i * g + j; };
  auto unknown = [&](Index i, Index j) { return (i - 1) * interior + (j - 1); };
  auto face = [&](Index n1, Index n2) {
    return 2.0 / (1.0 / a(n1) + 1.0 / a(n2));  // harmonic mean, conservative flux
  };

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(interior) * interior * 5);
  Vector rhs(interior * interior);
  for (Index i = 1; i + 1 < g; ++i)
    for (Index j = 1; j + 1 < g; ++j) rhs(unknown(i, j)) = f(node(i, j));
  for (Index i = 1; i + 1 < g; ++i)
    for (Index j = 1; j + 1 < g; ++j) {
      const Index row = unknown(i, j);
      const double an = face(node(i, j), node(i - 1, j));
      const double as = face(node(i, j), node(i + 1, j));
      const double aw = face(node(i, j), node(i, j - 1));
      const double ae = face(node(i, j), node(i, j + 1));
      triplets.emplace_back(row, row, (an + as + aw + ae) / (h * h));
      if (i > 1) triplets.emplace_back(row, unknown(i - 1, j), -an / (h * h));
      if (i + 2 < g) triplets.emplace_back(row, unknown(i + 1, j), -as / (h * h));
      if (j > 1) triplets.emplace_back(row, unknown(i, j - 1), -aw / (h * h));
      if (j + 2 < g) triplets.emplace_back(row, unknown(i, j + 1), -ae / (h * h));
    }

  Eigen::SparseMatrix<double> op(interior * interior, interior * interior);
  op.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(op);
  if (solver.info() != Eigen::Success)
    throw SolverSingular("solve_darcy: factorization failed");
  const Vector solution = solver.solve(rhs);
  if (solver.info() != Eigen::Success)
    throw SolverSingular("solve_darcy: solve failed");

  Vector full = Vector::Zero(g * g);
  for (Index i = 1; i + 1 < g; ++i)
    for (Index j = 1; j + 1 < g; ++j) full(node(i, j)) = solution(unknown(i, j));
  return full;
}

OperatorDataset gen_darcy(Index n, Index g, std::uint64_t seed) {
  if (g < 9) throw std::invalid_argument("gen_darcy: grid must be at least 9x9");
  OperatorDataset data;
  Matrix grid(g * g, 2);
  for (Index i = 0; i < g; ++i)
    for (Index j = 0; j < g; ++j) {
      grid(i * g + j, 0) = static_cast<double>(i) / static_cast<double>(g - 1);
      grid(i * g + j, 1) = static_cast<double>(j) / static_cast<double>(g - 1);
    }

  GrfConfig grf;
  grf.grid = grid;
  grf.length_scale = 0.2;
  grf.variance = 1.0;
  grf.seed = seed;
  const Matrix draws = grf_sample(grf, n);

  data.input_grid = grid;
  data.y = grid;
  data.u.resize(n, g * g);
  data.v.assign(1, Matrix(g * g, n));
  const Vector source = Vector::Ones(g * g);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < g * g; ++k) data.u(i, k) = draws(i, k) > 0.0 ? 12.0 : 3.0;
    data.v[0].col(i) = solve_darcy(data.u.row(i).transpose(), g, source);
  }
  data.metadata = {{"name", "darcy"}, {"seed", seed}, {"n", n}, {"g", g}};
  return data;
}

OperatorDataset calculus_pair_from(const Eigen::Ref<const Matrix>& u) {
  const Index n = u.rows();
  const Index p = u.cols();
  if (p < 3) throw DimensionMismatch("calculus_pair_from: needs at least 3 grid points");
  OperatorDataset data;
  data.u = u;
  data.input_grid = line_grid(p, true);
  data.y = data.input_grid;

  const double dx = 1.0 / static_cast<double>(p - 1);
  data.v.assign(2, Matrix(p, n));
  for (Index i = 0; i < n; ++i) {
    // antiderivative by cumulative trapezoid, zero at x = 0
    data.v[0](0, i) = 0.0;
    for (Index k = 1; k < p; ++k)
      data.v[0](k, i) = data.v[0](k - 1, i) + 0.5 * (data.u(i, k - 1) + data.u(i, k)) * dx;
    // derivative by second-order differences, one-sided at the ends
    data.v[1](0, i) =
        (-3.0 * data.u(i, 0) + 4.0 * data.u(i, 1) - data.u(i, 2)) / (2.0 * dx);
    for (Index k = 1; k + 1 < p; ++k)
      data.v[1](k, i) = (data.u(i, k + 1) - data.u(i, k - 1)) / (2.0 * dx);
    data.v[1](p - 1, i) =
        (3.0 * data.u(i, p - 1) - 4.0 * data.u(i, p - 2) + data.u(i, p - 3)) / (2.0 * dx);
  }
  data.metadata = {{"name", "calculus-pair"}, {"n", n}, {"p", p}};
  return data;
}

OperatorDataset gen_calculus_pair(Index n, Index p, std::uint64_t seed) {
  if (p < 16) throw std::invalid_argument("gen_calculus_pair: p must be at least 16");
  GrfConfig grf;
  grf.grid = line_grid(p, true);
  grf.length_scale = 0.2;
  grf.variance = 1.0;
  grf.seed = seed;
  OperatorDataset data = calculus_pair_from(grf_sample(grf, n));
  data.metadata["seed"] = seed;
  return data;
}

std::pair<OperatorDataset, OperatorDataset> split_dataset(const OperatorDataset& data,
                                                          Index n_train, Index n_test,
                                                          std::uint64_t seed) {
  const Index n = data.sample_count();
  if (n_train + n_test > n)
    throw ShapeMismatch("split_dataset: not enough samples for requested split");

  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }

  auto take = [&](Index offset, Index count, const char* role) {
    OperatorDataset part;
    part.y = data.y;
    part.input_grid = data.input_grid;
    part.u.resize(count, data.input_dim());
    part.v.assign(data.v.size(), Matrix(data.grid_size(), count));
    std::vector<Index> picked(count);
    for (Index i = 0; i < count; ++i) {
      const Index src = order[offset + i];
      picked[i] = src;
      part.u.row(i) = data.u.row(src);
      for (std::size_t s = 0; s < data.v.size(); ++s) part.v[s].col(i) = data.v[s].col(src);
    }
    part.metadata = data.metadata;
    part.metadata["split"] = {{"role", role}, {"seed", seed}, {"indices", picked}};
    return part;
  };
  return {take(0, n_train, "train"), take(n_train, n_test, "test")};
}

OperatorDataset select_output(const OperatorDataset& data, Index s) {
  if (s < 0 || s >= data.output_count())
    throw DimensionMismatch("select_output: index out of range");
  OperatorDataset out = data;
  out.v = {data.v[static_cast<std::size_t>(s)]};
  out.metadata["selected_output"] = s;
  return out;
}

void save_dataset(const std::string& path, const OperatorDataset& data) {
  data.validate();
  ArrayContainer box;
  box.add("u", data.u);
  box.add("y", data.y);
  box.add("input_grid", data.input_grid);
  for (Index s = 0; s < data.output_count(); ++s)
    box.add("v" + std::to_string(s), data.v[static_cast<std::size_t>(s)]);
  box.metadata = data.metadata;
  box.metadata["outputs"] = data.output_count();
  write_container(path, kDatasetMagic, box);
}

OperatorDataset load_dataset(const std::string& path) {
  const ArrayContainer box = read_container(path, kDatasetMagic);
  OperatorDataset data;
  data.u = box.get("u");
  data.y = box.get("y");
  data.input_grid = box.get("input_grid");
  const Index outputs = box.metadata.at("outputs").get<Index>();
  for (Index s = 0; s < outputs; ++s) data.v.push_back(box.get("v" + std::to_string(s)));
  data.metadata = box.metadata;
  data.metadata.erase("outputs");
  data.validate();
  return data;
}

OperatorDataset import_csv_dataset(const std::string& u_path, const std::string& y_path,
                                   const std::vector<std::string>& v_paths,
                                   const std::string& input_grid_path) {
  OperatorDataset data;
  data.u = read_csv_matrix(u_path);
  data.y = read_csv_matrix(y_path);
  for (const std::string& path : v_paths) data.v.push_back(read_csv_matrix(path));
  data.input_grid = input_grid_path.empty() ? Matrix(0, 0) : read_csv_matrix(input_grid_path);
  if (data.input_grid.size() == 0 && data.input_dim() > 0)
    data.input_grid = line_grid(data.input_dim(), true);
  data.metadata = {{"name", "csv-import"}, {"source_u", u_path}, {"source_y", y_path}};
  data.validate();
  return data;
}

}  // namespace operon
