#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "mmdopt/kernel.hpp"
#include "mmdopt/models.hpp"

namespace mmdopt {

struct MmdEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::optional<Eigen::MatrixXd> hessian;
};

struct SaddleDescription {
  bool exists = false;
  std::optional<double> radius_sq;  // ||a||^2 on the orthogonal sphere
  std::string constraint;           // "orthogonal-to-a*" / "orthogonal-to-mu*"
};

// Population MMD between N(mu*, Sigma) and N(mu, Sigma):
//   (2/sqrt|2S/s2+I|) (1 - exp(-1/2 (mu-mu*)^T (2S+s2 I)^{-1} (mu-mu*))).
// Quasi-convex in mu with unique stationary point mu*.
MmdEval mmd_mean(const MeanModel& model_star, const Eigen::VectorXd& mu,
                 const KernelConfig& cfg, bool want_hessian = false);

// Population MMD between N(0, a*a*^T+e^2 I) and N(0, aa^T+e^2 I); the three
// determinant terms evaluated through rank-one identities, so eps = 0 works.
MmdEval mmd_cov(const LowRankCovModel& model_star, const Eigen::VectorXd& a,
                const KernelConfig& cfg, bool want_hessian = false);

// Population MMD between the symmetric two-component mixtures at mu* and mu.
// Exact for any PD Sigma; quadratic forms use M = (2 Sigma + s2 I)^{-1}.
MmdEval mmd_gmm(const SymGmmModel& model_star, const Eigen::VectorXd& mu,
                const KernelConfig& cfg, bool want_hessian = false);

// The orthogonal stationary sphere of the covariance objective:
// with c = 2 eps^2 + s2 and s = ||a*||^2, the radius exists iff
// 2 c^{1/3} > (s+c)^{1/3} (i.e. c > s/7) and equals
//   ||a||^2 = c ((s+c)^{1/3} - c^{1/3}) / (2 c^{1/3} - (s+c)^{1/3}).
SaddleDescription cov_orthogonal_saddle(const LowRankCovModel& model_star,
                                        const KernelConfig& cfg);

// Membership test for the off-axis stationary set of the mixture objective.
// In the M-weighted inner product (M = (2 Sigma + s2 I)^{-1}) the set is
//   mu^T M mu* = 0  and  mu^T M mu = (1/3) mu*^T M mu*.
// Note the 1/3: the commonly printed equal-norm condition does not satisfy the
// gradient equation; see the derivative expressions in closed_form.cpp.
bool gmm_saddle_check(const SymGmmModel& model_star, const Eigen::VectorXd& mu,
                      const KernelConfig& cfg);

}  // namespace mmdopt
