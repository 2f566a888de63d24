#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "mmdopt/kernel.hpp"
#include "mmdopt/models.hpp"

namespace mmdopt {

struct EstimatorEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

// Unbiased two-sample U-statistic estimate of the squared population MMD.
// May be negative. Requires at least two points on each side.
double empirical_mmd(const Sample& x, const Sample& y, const KernelConfig& cfg);

// One-sample MMD: the model side of the squared MMD evaluated in closed form
// against an empirical sample y. Gradient is with respect to the model's free
// parameter (mu, a, or mu). Unsupported for the unmixing family.
EstimatorEval osmmd(const ParametricModel& model, const Sample& y,
                    const KernelConfig& cfg);

// Average negative log-likelihood of y under the model, with gradient in the
// free parameter. The rank-one covariance family requires epsilon > 0
// (LikelihoodUndefinedError otherwise); unsupported for unmixing.
EstimatorEval nll(const ParametricModel& model, const Sample& y);

namespace detail {
// Mean off-diagonal kernel value of one point set (the data-only term of the
// one-sample objective). Blocked for large sets.
double mean_offdiag_gram(const Eigen::MatrixXd& pts, double sigma_sq);
// One-sample MMD with the data-only term supplied by the caller, so repeated
// evaluations against the same sample skip the m x m Gram.
EstimatorEval osmmd_with_yy(const ParametricModel& model,
                            const Eigen::MatrixXd& y, const KernelConfig& cfg,
                            double yy_mean);
}  // namespace detail

// Pathwise (reparameterised) empirical-MMD objective: the model sample is
// written as a deterministic map of the parameter and of noise frozen for one
// evaluation, so the U-statistic becomes differentiable in the parameter.
// Construct once per optimisation run; each eval draws its own noise from the
// given stream tag so successive calls see fresh mini-batches.
class ReparamMmd {
 public:
  // `structure` supplies everything but the free parameter (Sigma, epsilon,
  // noise_var, shapes). `n_fake` is the model-side sample size per evaluation.
  ReparamMmd(const ParametricModel& structure, const Sample& y,
             const KernelConfig& cfg, int n_fake);

  // theta is the packed free parameter (column-major for the mixing matrix).
  // When want_value is false the returned value is the cross-and-model part
  // actually computed for the gradient fast path, not the full U-statistic.
  EstimatorEval eval(const Eigen::VectorXd& theta, std::uint64_t noise_seed,
                     bool want_value) const;

  int param_dim() const { return param_dim_; }

 private:
  enum class Kind { mean, cov, gmm, unmix } kind_;
  Eigen::MatrixXd y_;           // m x d
  double sigma_sq_;
  int n_fake_;
  int dim_;
  int rank_ = 0;                // unmixing only
  int param_dim_;
  double yy_offdiag_mean_ = 0;  // sum_{i != j} k(y_i,y_j) / (m(m-1))
  Eigen::MatrixXd chol_l_;      // mean/gmm: lower Cholesky of Sigma
  double epsilon_ = 0;          // cov
  double noise_sd_ = 0;         // unmix
};

}  // namespace mmdopt
