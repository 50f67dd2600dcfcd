#include "operon/means.hpp"

#include <cmath>

#include "operon/rng.hpp"

namespace operon {

namespace {

// Dense feed-forward stack over a flat parameter slice. Per layer the slice
// holds W (out x in, column-major) followed by b (out).
struct MlpLayout {
  Index input_dim = 0;
  std::vector<Index> layer_dims;  // output dim of each layer, last = network out
  std::vector<Index> w_offset, b_offset;
  Index param_count = 0;
};

MlpLayout make_layout(Index input_dim, const std::vector<Index>& hidden, Index out_dim) {
  MlpLayout layout;
  layout.input_dim = input_dim;
  layout.layer_dims = hidden;
  layout.layer_dims.push_back(out_dim);
  Index offset = 0;
  Index in = input_dim;
  for (Index out : layout.layer_dims) {
    layout.w_offset.push_back(offset);
    offset += out * in;
    layout.b_offset.push_back(offset);
    offset += out;
    in = out;
  }
  layout.param_count = offset;
  return layout;
}

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

// Forward pass keeping post-activation values of every layer for backprop.
// activations[0] is the input; hidden layers are tanh, the last is linear.
std::vector<Matrix> mlp_forward(const MlpLayout& layout, const double* theta,
                                Matrix input) {
  std::vector<Matrix> activations;
  activations.reserve(layout.layer_dims.size() + 1);
  activations.push_back(std::move(input));
  Index in = layout.input_dim;
  for (std::size_t l = 0; l < layout.layer_dims.size(); ++l) {
    const Index out = layout.layer_dims[l];
    ConstMap w(theta + layout.w_offset[l], out, in);
    ConstMap b(theta + layout.b_offset[l], out, 1);
    Matrix z = (w * activations.back()).colwise() + b.col(0);
    if (l + 1 < layout.layer_dims.size()) z = z.array().tanh();
    activations.push_back(std::move(z));
    in = out;
  }
  return activations;
}

// Accumulates d loss / d theta given d loss / d output. Consumes dout.
void mlp_backward(const MlpLayout& layout, const double* theta,
                  const std::vector<Matrix>& activations, Matrix dout, double* dtheta) {
  for (Index l = static_cast<Index>(layout.layer_dims.size()) - 1; l >= 0; --l) {
    const Index out = layout.layer_dims[l];
    const Index in = l == 0 ? layout.input_dim : layout.layer_dims[l - 1];
    ConstMap w(theta + layout.w_offset[l], out, in);
    MutMap dw(dtheta + layout.w_offset[l], out, in);
    MutMap db(dtheta + layout.b_offset[l], out, 1);
    dw.noalias() += dout * activations[l].transpose();
    db.col(0) += dout.rowwise().sum();
    if (l > 0) {
      // tanh'(a) = 1 - tanh(a)^2, expressed through the stored activation
      dout = (w.transpose() * dout).array() *
             (1.0 - activations[l].array().square());
    }
  }
}

MlpLayout mlp_layout_of(const MeanArchitecture& arch) {
  return make_layout(arch.feature_dim + arch.coord_dim, arch.mlp_hidden, arch.output_count);
}

MlpLayout branch_layout_of(const MeanArchitecture& arch) {
  return make_layout(arch.feature_dim, arch.branch_hidden,
                     arch.latent_dim * arch.output_count);
}

MlpLayout trunk_layout_of(const MeanArchitecture& arch) {
  return make_layout(arch.coord_dim, arch.trunk_hidden, arch.latent_dim);
}

void check_grid(const MeanArchitecture& arch, const Eigen::Ref<const Matrix>& u,
                const Eigen::Ref<const Matrix>& y) {
  if (arch.variant == MeanVariant::Zero) return;
  if (u.cols() != arch.feature_dim)
    throw DimensionMismatch("mean: feature dim mismatch");
  if (y.cols() != arch.coord_dim)
    throw DimensionMismatch("mean: coordinate dim mismatch");
}

// Stacks the (sample, point) grid into columns ordered point-fastest:
// column i*q + j holds [phi(u_i); y_j].
Matrix grid_inputs(const Eigen::Ref<const Matrix>& u, const Eigen::Ref<const Matrix>& y) {
  const Index n = u.rows(), q = y.rows();
  Matrix input(u.cols() + y.cols(), n * q);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < q; ++j) {
      input.col(i * q + j).head(u.cols()) = u.row(i).transpose();
      input.col(i * q + j).tail(y.cols()) = y.row(j).transpose();
    }
  return input;
}

void glorot_fill(const MlpLayout& layout, double* theta, Rng& rng) {
  Index in = layout.input_dim;
  for (std::size_t l = 0; l < layout.layer_dims.size(); ++l) {
    const Index out = layout.layer_dims[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Index k = 0; k < out * in; ++k)
      theta[layout.w_offset[l] + k] = rng.uniform(-limit, limit);
    for (Index k = 0; k < out; ++k) theta[layout.b_offset[l] + k] = 0.0;
    in = out;
  }
}

}  // namespace

const char* mean_variant_name(MeanVariant variant) {
  switch (variant) {
    case MeanVariant::Zero: return "zero";
    case MeanVariant::Mlp: return "mlp";
    case MeanVariant::BranchTrunk: return "branch-trunk";
  }
  return "unknown";
}

MeanVariant mean_variant_from_name(const std::string& name) {
  if (name == "zero") return MeanVariant::Zero;
  if (name == "mlp") return MeanVariant::Mlp;
  if (name == "branch-trunk") return MeanVariant::BranchTrunk;
  throw std::invalid_argument("unknown mean variant: " + name);
}

Index parameter_count(const MeanArchitecture& arch) {
  switch (arch.variant) {
    case MeanVariant::Zero:
      return 0;
    case MeanVariant::Mlp:
      return mlp_layout_of(arch).param_count;
    case MeanVariant::BranchTrunk:
      return branch_layout_of(arch).param_count + trunk_layout_of(arch).param_count +
             arch.output_count;  // one scalar bias per head
  }
  return 0;
}

MeanFunction make_zero_mean(Index output_count) {
  MeanFunction m;
  m.arch.variant = MeanVariant::Zero;
  m.arch.output_count = output_count;
  return m;
}

MeanFunction mean_init(const MeanArchitecture& arch, std::uint64_t seed) {
  MeanFunction m;
  m.arch = arch;
  m.theta = Vector::Zero(parameter_count(arch));
  Rng rng(seed);
  if (arch.variant == MeanVariant::Mlp) {
    glorot_fill(mlp_layout_of(arch), m.theta.data(), rng);
  } else if (arch.variant == MeanVariant::BranchTrunk) {
    const MlpLayout branch = branch_layout_of(arch);
    glorot_fill(branch, m.theta.data(), rng);
    glorot_fill(trunk_layout_of(arch), m.theta.data() + branch.param_count, rng);
    // trailing head biases stay zero
  }
  return m;
}

MeanBatch mean_eval(const MeanFunction& m, const Eigen::Ref<const Matrix>& u,
                    const Eigen::Ref<const Matrix>& y) {
  check_grid(m.arch, u, y);
  const Index n = u.rows(), q = y.rows(), s_count = m.arch.output_count;
  MeanBatch batch(s_count, Matrix::Zero(q, n));
  if (m.arch.variant == MeanVariant::Zero) return batch;
  if (m.theta.size() != parameter_count(m.arch))
    throw DimensionMismatch("mean_eval: theta length does not match architecture");

  if (m.arch.variant == MeanVariant::Mlp) {
    const MlpLayout layout = mlp_layout_of(m.arch);
    const auto acts = mlp_forward(layout, m.theta.data(), grid_inputs(u, y));
    const Matrix& out = acts.back();  // s_count x (n*q)
    for (Index s = 0; s < s_count; ++s)
      for (Index i = 0; i < n; ++i)
        batch[s].col(i) = out.row(s).segment(i * q, q).transpose();
    return batch;
  }

  const MlpLayout branch = branch_layout_of(m.arch);
  const MlpLayout trunk = trunk_layout_of(m.arch);
  const double* theta = m.theta.data();
  const Matrix bout = mlp_forward(branch, theta, u.transpose()).back();
  const Matrix tout = mlp_forward(trunk, theta + branch.param_count, y.transpose()).back();
  const double* bias = theta + branch.param_count + trunk.param_count;
  for (Index s = 0; s < s_count; ++s) {
    batch[s].noalias() =
        tout.transpose() * bout.middleRows(s * m.arch.latent_dim, m.arch.latent_dim);
    batch[s].array() += bias[s];
  }
  return batch;
}

Vector mean_grad_params(const MeanFunction& m, const Eigen::Ref<const Matrix>& u,
                        const Eigen::Ref<const Matrix>& y, const MeanBatch& dloss_dmean) {
  check_grid(m.arch, u, y);
  const Index n = u.rows(), q = y.rows(), s_count = m.arch.output_count;
  if (static_cast<Index>(dloss_dmean.size()) != s_count)
    throw DimensionMismatch("mean_grad_params: output count mismatch");
  for (const Matrix& g : dloss_dmean)
    if (g.rows() != q || g.cols() != n)
      throw DimensionMismatch("mean_grad_params: sensitivity shape mismatch");

  Vector grad = Vector::Zero(m.theta.size());
  if (m.arch.variant == MeanVariant::Zero) return grad;

  if (m.arch.variant == MeanVariant::Mlp) {
    const MlpLayout layout = mlp_layout_of(m.arch);
    const auto acts = mlp_forward(layout, m.theta.data(), grid_inputs(u, y));
    Matrix dout(s_count, n * q);
    for (Index s = 0; s < s_count; ++s)
      for (Index i = 0; i < n; ++i)
        dout.row(s).segment(i * q, q) = dloss_dmean[s].col(i).transpose();
    mlp_backward(layout, m.theta.data(), acts, std::move(dout), grad.data());
    return grad;
  }

  const MlpLayout branch = branch_layout_of(m.arch);
  const MlpLayout trunk = trunk_layout_of(m.arch);
  const Index latent = m.arch.latent_dim;
  const double* theta = m.theta.data();
  const auto bacts = mlp_forward(branch, theta, u.transpose());
  const auto tacts = mlp_forward(trunk, theta + branch.param_count, y.transpose());
  const Matrix& bout = bacts.back();
  const Matrix& tout = tacts.back();

  Matrix dbout = Matrix::Zero(bout.rows(), bout.cols());
  Matrix dtout = Matrix::Zero(tout.rows(), tout.cols());
  double* dbias = grad.data() + branch.param_count + trunk.param_count;
  for (Index s = 0; s < s_count; ++s) {
    dbout.middleRows(s * latent, latent).noalias() = tout * dloss_dmean[s];
    dtout.noalias() += bout.middleRows(s * latent, latent) * dloss_dmean[s].transpose();
    dbias[s] = dloss_dmean[s].sum();
  }
  mlp_backward(branch, theta, bacts, std::move(dbout), grad.data());
  mlp_backward(trunk, theta + branch.param_count, tacts, std::move(dtout),
               grad.data() + branch.param_count);
  return grad;
}

}  // namespace operon
