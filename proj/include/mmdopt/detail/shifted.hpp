#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mmdopt/errors.hpp"

namespace mmdopt::detail {

// Cholesky of (scale * Sigma + s2 I) plus log |scale * Sigma / s2 + I|.
// The factor backs the quadratic-form solves and the determinant prefactors
// shared by the closed forms and the one-sample estimators.
struct ShiftedChol {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det_ratio = 0.0;
};

inline ShiftedChol shifted_chol(const Eigen::MatrixXd& sigma, double scale,
                                double s2) {
  const Eigen::Index d = sigma.rows();
  Eigen::MatrixXd m = scale * sigma;
  m.diagonal().array() += s2;
  ShiftedChol out;
  out.llt.compute(m);
  if (out.llt.info() != Eigen::Success)
    throw InvalidModelError("covariance shift is not positive definite");
  const auto& l = out.llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(l(i, i));
  out.log_det_ratio = 2.0 * log_det - static_cast<double>(d) * std::log(s2);
  return out;
}

}  // namespace mmdopt::detail
