#include "operon/kernels.hpp"

#include <cmath>

namespace operon {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.23606797749979;

// Matern closed forms as functions of the scaled distance r.
double matern_of_r(KernelFamily family, double r) {
  switch (family) {
    case KernelFamily::Matern12:
      return std::exp(-r);
    case KernelFamily::Matern32:
      return (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
    case KernelFamily::Matern52:
      return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r);
    default:
      throw UnsupportedFamily("matern_of_r: not a Matern family");
  }
}

// Weighted squared distances sum_i beta_i (x_i - x'_i)^2 for all row pairs.
Matrix weighted_sqdist(const Vector& beta, const Eigen::Ref<const Matrix>& x,
                       const Eigen::Ref<const Matrix>& xp) {
  const Matrix xw = x * beta.array().sqrt().matrix().asDiagonal();
  const Matrix xpw = xp * beta.array().sqrt().matrix().asDiagonal();
  const Vector nx = xw.rowwise().squaredNorm();
  const Vector nxp = xpw.rowwise().squaredNorm();
  Matrix d = (-2.0 * xw * xpw.transpose()).rowwise() + nxp.transpose();
  d.colwise() += nx;
  return d.cwiseMax(0.0);
}

}  // namespace

const char* kernel_family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Matern12: return "matern12";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
  }
  return "unknown";
}

KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "matern12") return KernelFamily::Matern12;
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "matern52") return KernelFamily::Matern52;
  throw UnsupportedFamily("unknown kernel family: " + name);
}

KernelParams make_kernel(KernelFamily family, Index dim, double beta, double sigma2) {
  if (beta <= 0.0 || sigma2 <= 0.0)
    throw std::invalid_argument("make_kernel: beta and sigma2 must be positive");
  KernelParams k;
  k.family = family;
  k.log_beta = Vector::Constant(dim, std::log(beta));
  k.log_sigma2 = std::log(sigma2);
  return k;
}

SeparableKernelParams make_separable(KernelFamily input_family, Index input_dim, double beta_phi,
                                     double sigma2_phi, KernelFamily output_family,
                                     Index output_dim, double beta_y) {
  SeparableKernelParams k;
  k.input = make_kernel(input_family, input_dim, beta_phi, sigma2_phi);
  k.output = make_kernel(output_family, output_dim, beta_y, 1.0);
  return k;
}

double kernel_eval(const KernelParams& k, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y) {
  if (x.size() != k.dim() || y.size() != k.dim())
    throw DimensionMismatch("kernel_eval: point dim does not match kernel dim");
  const double d2 = (k.beta().array() * (x - y).array().square()).sum();
  if (k.family == KernelFamily::Gaussian) return k.sigma2() * std::exp(-d2);
  return k.sigma2() * matern_of_r(k.family, std::sqrt(d2));
}

Matrix gram(const KernelParams& k, const Eigen::Ref<const Matrix>& x,
            const Eigen::Ref<const Matrix>& xp) {
  if (x.cols() != k.dim() || xp.cols() != k.dim())
    throw DimensionMismatch("gram: feature dim does not match kernel dim");
  Matrix d2 = weighted_sqdist(k.beta(), x, xp);
  if (k.family == KernelFamily::Gaussian) return k.sigma2() * (-d2).array().exp();
  const double s2 = k.sigma2();
  return d2.unaryExpr(
      [&](double v) { return s2 * matern_of_r(k.family, std::sqrt(v)); });
}

KernelCoordinateDerivs kernel_y_derivs(const KernelParams& k, const Eigen::Ref<const Vector>& y,
                                       const Eigen::Ref<const Matrix>& points) {
  if (k.family != KernelFamily::Gaussian)
    throw UnsupportedFamily("kernel_y_derivs: analytic coordinate derivatives need Gaussian");
  if (y.size() != k.dim() || points.cols() != k.dim())
    throw DimensionMismatch("kernel_y_derivs: coordinate dim mismatch");

  const Vector beta = k.beta();
  const Index q = points.rows();
  const Index d = k.dim();

  KernelCoordinateDerivs out;
  out.value.resize(q);
  out.first.resize(d, q);
  out.second.resize(d, q);
  for (Index j = 0; j < q; ++j) {
    const Vector diff = y - points.row(j).transpose();
    const double c = k.sigma2() * std::exp(-(beta.array() * diff.array().square()).sum());
    out.value(j) = c;
    for (Index i = 0; i < d; ++i) {
      out.first(i, j) = -2.0 * beta(i) * diff(i) * c;
      out.second(i, j) = (-2.0 * beta(i) + 4.0 * beta(i) * beta(i) * diff(i) * diff(i)) * c;
    }
  }
  return out;
}

Matrix scaled_distances(const KernelParams& k, const Eigen::Ref<const Matrix>& x) {
  return weighted_sqdist(k.beta(), x, x).cwiseSqrt();
}

Matrix gram_dlog_beta(const KernelParams& k, const Eigen::Ref<const Matrix>& x,
                      const Eigen::Ref<const Matrix>& c, const Matrix& scaled_dist, Index dim) {
  if (dim < 0 || dim >= k.dim()) throw DimensionMismatch("gram_dlog_beta: dim out of range");
  if (x.cols() != k.dim()) throw DimensionMismatch("gram_dlog_beta: feature dim mismatch");
  const double beta_i = std::exp(k.log_beta(dim));
  const Vector col = x.col(dim);
  Matrix sq = (col * Vector::Ones(col.size()).transpose() -
               Vector::Ones(col.size()) * col.transpose())
                  .array()
                  .square();

  switch (k.family) {
    case KernelFamily::Gaussian:
      // d/d log beta_i of sigma2 exp(-sum beta d^2) = C * (-beta_i D_i)
      return c.array() * (-beta_i * sq.array());
    case KernelFamily::Matern12: {
      // dc/dr = -sigma2 e^{-r}; dr/dbeta_i = d_i^2 / (2r); zero at r = 0
      const double s2 = k.sigma2();
      Matrix out(sq.rows(), sq.cols());
      for (Index i = 0; i < sq.rows(); ++i)
        for (Index j = 0; j < sq.cols(); ++j) {
          const double r = scaled_dist(i, j);
          out(i, j) = r > 0.0 ? -beta_i * s2 * std::exp(-r) * sq(i, j) / (2.0 * r) : 0.0;
        }
      return out;
    }
    case KernelFamily::Matern32:
      return (-1.5 * beta_i * k.sigma2()) *
             (sq.array() * (-kSqrt3 * scaled_dist.array()).exp());
    case KernelFamily::Matern52:
      return (-5.0 / 6.0 * beta_i * k.sigma2()) *
             (sq.array() * (1.0 + kSqrt5 * scaled_dist.array()) *
              (-kSqrt5 * scaled_dist.array()).exp());
  }
  throw UnsupportedFamily("gram_dlog_beta: unknown family");
}

KernelHyperparamDerivs kernel_hyperparam_derivs(const KernelParams& k,
                                                const Eigen::Ref<const Matrix>& x) {
  if (x.rows() == 0) throw DimensionMismatch("kernel_hyperparam_derivs: empty input");
  KernelHyperparamDerivs out;
  out.d_log_sigma2 = gram(k, x, x);
  Matrix dist;
  if (k.family != KernelFamily::Gaussian) dist = scaled_distances(k, x);
  out.d_log_beta.reserve(k.dim());
  for (Index i = 0; i < k.dim(); ++i)
    out.d_log_beta.push_back(gram_dlog_beta(k, x, out.d_log_sigma2, dist, i));
  return out;
}

}  // namespace operon
