#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "mmdopt/errors.hpp"
#include "mmdopt/models.hpp"
#include "oracles.hpp"

using namespace mmdopt;

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& pts) {
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  const Eigen::MatrixXd centered = pts.rowwise() - mean;
  return centered.transpose() * centered / (pts.rows() - 1.0);
}

}  // namespace

TEST_CASE("sampling is deterministic per seed and varies across seeds") {
  MeanModel model{Eigen::VectorXd::Ones(3), Eigen::MatrixXd::Identity(3, 3)};
  const Sample a = sample(model, 40, 99);
  const Sample b = sample(model, 40, 99);
  const Sample c = sample(model, 40, 100);
  CHECK(a.points == b.points);
  CHECK(a.points != c.points);
  CHECK(a.count() == 40);
  CHECK(a.dim() == 3);
  CHECK_THROWS_AS(sample(model, 0, 1), std::invalid_argument);
}

TEST_CASE("mean family matches its first two moments") {
  Eigen::VectorXd mu(3);
  mu << 1.0, -0.5, 2.0;
  Eigen::MatrixXd sigma(3, 3);
  sigma << 1.0, 0.3, 0.0, 0.3, 2.0, 0.0, 0.0, 0.0, 0.5;
  const int n = 20000;
  const Sample s = sample(MeanModel{mu, sigma}, n, 7);

  for (int j = 0; j < 3; ++j) {
    const double se = std::sqrt(sigma(j, j) / n);
    CHECK(std::abs(s.points.col(j).mean() - mu(j)) < 5 * se);
  }
  const Eigen::MatrixXd cov = sample_covariance(s.points);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      // Var of a sample covariance entry is (s_ii s_jj + s_ij^2) / n.
      const double se = std::sqrt(
          (sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / n);
      CHECK(std::abs(cov(i, j) - sigma(i, j)) < 5 * se);
    }
}

TEST_CASE("rank-one covariance family: moments and exact degeneracy") {
  Eigen::VectorXd a(3);
  a << 0.6, -0.8, 0.0;

  SUBCASE("noisy covariance matches a a^T + eps^2 I") {
    const double eps = 0.5;
    const int n = 20000;
    const Sample s = sample(LowRankCovModel{a, eps}, n, 11);
    const Eigen::MatrixXd expected =
        a * a.transpose() + eps * eps * Eigen::MatrixXd::Identity(3, 3);
    CHECK(s.points.colwise().mean().norm() < 5 * std::sqrt(3.0 / n));
    const Eigen::MatrixXd cov = sample_covariance(s.points);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double se = std::sqrt((expected(i, i) * expected(j, j) +
                                     expected(i, j) * expected(i, j)) /
                                    n);
        CHECK(std::abs(cov(i, j) - expected(i, j)) < 5 * se);
      }
  }

  SUBCASE("eps = 0 puts every point exactly on span{a}") {
    const Sample s = sample(LowRankCovModel{a, 0.0}, 200, 12);
    const Eigen::VectorXd unit = a / a.norm();
    for (int i = 0; i < s.count(); ++i) {
      const Eigen::VectorXd p = s.points.row(i).transpose();
      CHECK((p - unit * unit.dot(p)).norm() < 1e-12);
    }
  }

  SUBCASE("negative eps is rejected") {
    CHECK_THROWS_AS(sample(LowRankCovModel{a, -0.1}, 5, 1), InvalidModelError);
  }
}

TEST_CASE("symmetric mixture family: sign balance and moments") {
  Eigen::VectorXd mu(2);
  mu << 2.0, -1.0;
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  const int n = 20000;
  const Sample s = sample(SymGmmModel{mu, sigma}, n, 21);

  // Overall mean is zero; covariance is Sigma + mu mu^T.
  const Eigen::MatrixXd expected = sigma + mu * mu.transpose();
  for (int j = 0; j < 2; ++j)
    CHECK(std::abs(s.points.col(j).mean()) <
          5 * std::sqrt(expected(j, j) / n));
  const Eigen::MatrixXd cov = sample_covariance(s.points);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((expected(i, i) * expected(j, j) +
                                   expected(i, j) * expected(i, j)) /
                                  n);
      CHECK(std::abs(cov(i, j) - expected(i, j)) < 5 * se);
    }

  // Roughly half the points sit on each side of the separating hyperplane.
  int positive = 0;
  for (int i = 0; i < n; ++i)
    if (s.points.row(i).dot(mu) > 0) ++positive;
  CHECK(std::abs(positive - n / 2) < 5 * std::sqrt(0.25 * n));
}

TEST_CASE("unmixing family: hull membership and noise scale") {
  Eigen::MatrixXd a(4, 3);
  a << 5, 0, 0, 0, 5, 0, 0, 0, 5, 1, 1, 1;

  SUBCASE("noiseless points lie in the column hull") {
    const Sample s = sample(UnmixingModel{a, 0.0}, 100, 31);
    for (int i = 0; i < s.count(); ++i)
      CHECK(oracles::hull_distance(a, s.points.row(i).transpose()) < 1e-8);
  }

  SUBCASE("noise adds the stated isotropic variance") {
    const double nv = 0.04;
    const int n = 20000;
    const Sample noisy = sample(UnmixingModel{a, nv}, n, 32);
    const Sample clean = sample(UnmixingModel{a, 0.0}, n, 32);
    // Same seed draws the same abundances, so the difference is pure noise.
    const Eigen::MatrixXd diff = noisy.points - clean.points;
    const double var = diff.array().square().mean();
    CHECK(var == doctest::Approx(nv).epsilon(0.05));
  }

  SUBCASE("shape validation") {
    Eigen::MatrixXd thin(2, 3);  // d < r
    thin.setZero();
    CHECK_THROWS_AS(sample(UnmixingModel{thin, 0.0}, 5, 1), InvalidModelError);
    CHECK_THROWS_AS(sample(UnmixingModel{a, -1.0}, 5, 1), InvalidModelError);
  }
}

TEST_CASE("whiten_gmm produces identity covariance coordinates") {
  Eigen::VectorXd mu(2);
  mu << 1.0, 2.0;
  Eigen::MatrixXd sigma(2, 2);
  sigma << 2.0, 0.5, 0.5, 1.0;
  const auto [white, transform] = whiten_gmm(SymGmmModel{mu, sigma});

  CHECK((transform * sigma * transform.transpose() -
         Eigen::MatrixXd::Identity(2, 2))
            .norm() < 1e-12);
  CHECK((white.mu - transform * mu).norm() < 1e-12);
  CHECK((white.sigma_cov - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);

  Eigen::MatrixXd singular(2, 2);
  singular << 1, 1, 1, 1;
  CHECK_THROWS_AS(whiten_gmm(SymGmmModel{mu, singular}), InvalidModelError);
}

TEST_CASE("save_csv round-trips exact doubles") {
  MeanModel model{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  const Sample s = sample(model, 17, 5);
  const std::string path = "test_models_sample.csv";
  save_csv(s, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  Eigen::MatrixXd parsed(17, 3);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) parsed(row, col++) = std::stod(cell);
    CHECK(col == 3);
    ++row;
  }
  CHECK(row == 17);
  CHECK(parsed == s.points);
  std::remove(path.c_str());
}

TEST_CASE("param_dim reflects the free parameter") {
  CHECK(param_dim(MeanModel{Eigen::VectorXd::Zero(4),
                            Eigen::MatrixXd::Identity(4, 4)}) == 4);
  CHECK(param_dim(LowRankCovModel{Eigen::VectorXd::Zero(6), 0.1}) == 6);
  CHECK(param_dim(SymGmmModel{Eigen::VectorXd::Zero(2),
                              Eigen::MatrixXd::Identity(2, 2)}) == 2);
  CHECK(param_dim(UnmixingModel{Eigen::MatrixXd::Zero(5, 3), 0.0}) == 15);
}
