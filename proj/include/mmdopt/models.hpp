#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>

namespace mmdopt {

// N(mu, Sigma) with Sigma known; the estimand is mu.
struct MeanModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma_cov;
};

// N(0, a a^T + eps^2 I); the estimand is a. eps = 0 is allowed and makes the
// covariance singular for d > 1.
struct LowRankCovModel {
  Eigen::VectorXd a;
  double epsilon = 0.0;
};

// 0.5 N(mu, Sigma) + 0.5 N(-mu, Sigma) with Sigma known; the estimand is mu,
// identifiable up to sign.
struct SymGmmModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma_cov;
};

// x = A b + w with b ~ Dirichlet(1_r) and w ~ N(0, noise_var I); the estimand
// is the d x r mixing matrix A. noise_var = 0 is allowed for degenerate tests.
struct UnmixingModel {
  Eigen::MatrixXd a_matrix;  // d x r, columns are endmembers
  double noise_var = 0.0;
};

using ParametricModel =
    std::variant<MeanModel, LowRankCovModel, SymGmmModel, UnmixingModel>;

struct Sample {
  Eigen::MatrixXd points;  // count x d, one point per row
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// i.i.d. draws, deterministic per (model, count, seed).
Sample sample(const ParametricModel& model, int count, std::uint64_t seed);

// Returns the model rewritten with Sigma' = I (mu' = Sigma^{-1/2} mu) together
// with the transform Sigma^{-1/2}.
std::pair<SymGmmModel, Eigen::MatrixXd> whiten_gmm(const SymGmmModel& model);

// One point per row, '.' radix, comma separator, no header.
void save_csv(const Sample& s, const std::string& path);

int param_dim(const ParametricModel& model);

}  // namespace mmdopt
