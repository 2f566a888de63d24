#include "mmdopt/kernel.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "mmdopt/errors.hpp"

namespace mmdopt {

KernelConfig::KernelConfig(double sigma_sq) : bandwidth(sigma_sq) {
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq))
    throw std::invalid_argument("kernel bandwidth must be a positive finite number");
}

double rbf(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
           const KernelConfig& cfg) {
  if (x.size() != y.size())
    throw std::invalid_argument("rbf: dimension mismatch");
  return std::exp(-(x - y).squaredNorm() / (2.0 * cfg.bandwidth));
}

double gaussian_rbf_integral(const Eigen::VectorXd& mu,
                             const Eigen::MatrixXd& sigma_cov,
                             const KernelConfig& cfg) {
  const auto d = mu.size();
  if (sigma_cov.rows() != d || sigma_cov.cols() != d)
    throw std::invalid_argument("gaussian_rbf_integral: shape mismatch");
  const double s2 = cfg.bandwidth;

  // Sigma/sigma^2 + I is PD for any PSD Sigma, so Cholesky always works.
  Eigen::MatrixXd m = sigma_cov / s2;
  m.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw InvalidModelError("gaussian_rbf_integral: covariance is not PSD");

  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    log_det += std::log(llt.matrixL()(i, i));

  // mu^T (Sigma + s2 I)^{-1} mu = mu^T (s2 (Sigma/s2 + I))^{-1} mu
  const double quad = mu.dot(llt.solve(mu)) / s2;
  return std::exp(-log_det - 0.5 * quad);
}

GramSums gram_sums(const Sample& x, const Sample& y, const KernelConfig& cfg) {
  if (x.count() < 2 || y.count() < 2)
    throw InsufficientSampleError("gram_sums: need at least 2 points per sample");
  if (x.dim() != y.dim())
    throw std::invalid_argument("gram_sums: dimension mismatch");

  const double inv2s2 = 1.0 / (2.0 * cfg.bandwidth);
  const auto& X = x.points;
  const auto& Y = y.points;
  const int n = x.count(), m = y.count();

  GramSums out;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      row += std::exp(-(X.row(i) - X.row(j)).squaredNorm() * inv2s2);
    }
    out.xx_offdiag += row;
  }
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      row += std::exp(-(Y.row(i) - Y.row(j)).squaredNorm() * inv2s2);
    }
    out.yy_offdiag += row;
  }
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j)
      row += std::exp(-(X.row(i) - Y.row(j)).squaredNorm() * inv2s2);
    out.xy += row;
  }
  return out;
}

namespace detail {

Eigen::MatrixXd rbf_cross_gram(const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& y, double sigma_sq) {
  // ||x_i - y_j||^2 = ||x_i||^2 + ||y_j||^2 - 2 x_i . y_j, assembled with one
  // GEMM so the whole Gram is a few vectorized passes.
  Eigen::VectorXd xsq = x.rowwise().squaredNorm();
  Eigen::VectorXd ysq = y.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (x * y.transpose());
  d2.colwise() += xsq;
  d2.rowwise() += ysq.transpose();
  // cancellation can leave tiny negatives on near-duplicate points
  return (d2.array().max(0.0) * (-1.0 / (2.0 * sigma_sq))).exp().matrix();
}

}  // namespace detail

}  // namespace mmdopt
