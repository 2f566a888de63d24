#pragma once

#include <Eigen/Dense>

#include "mmdopt/models.hpp"

namespace mmdopt {

struct KernelConfig {
  double bandwidth;  // sigma^2, the squared kernel width

  explicit KernelConfig(double sigma_sq);
};

// exp(-||x-y||^2 / (2 sigma^2)); 1 iff x = y.
double rbf(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
           const KernelConfig& cfg);

// E_{Z ~ N(mu, Sigma)}[exp(-||Z||^2/(2 sigma^2))]
//   = |Sigma/sigma^2 + I|^{-1/2} exp(-0.5 mu^T (Sigma + sigma^2 I)^{-1} mu).
// Sigma only needs to be PSD; the shifted matrix is always PD.
double gaussian_rbf_integral(const Eigen::VectorXd& mu,
                             const Eigen::MatrixXd& sigma_cov,
                             const KernelConfig& cfg);

struct GramSums {
  double xx_offdiag = 0.0;  // sum over ordered pairs i != j of k(x_i, x_j)
  double yy_offdiag = 0.0;
  double xy = 0.0;          // sum over all pairs of k(x_i, y_j)
};

// The three unnormalized kernel sums of the finite-sample MMD. Row-major
// accumulation order, so results are exactly reproducible.
GramSums gram_sums(const Sample& x, const Sample& y, const KernelConfig& cfg);

// Internal fast paths shared by the estimators; kept here so all kernel math
// lives in one translation unit.
namespace detail {

// K(i,j) = exp(-||x_i - y_j||^2 / (2 sigma^2)) for row-per-point matrices.
Eigen::MatrixXd rbf_cross_gram(const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& y, double sigma_sq);

}  // namespace detail

}  // namespace mmdopt
