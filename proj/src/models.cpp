#include "mmdopt/models.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mmdopt/errors.hpp"
#include "mmdopt/rng.hpp"

namespace mmdopt {

namespace {

Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& sigma, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw InvalidModelError(std::string(who) + ": covariance is not positive-definite");
  return llt.matrixL();
}

}  // namespace

Sample sample(const ParametricModel& model, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");

  Rng rng(derive_stream(seed, {0xda7a}));
  Sample out;
  out.seed = seed;

  if (const auto* m = std::get_if<MeanModel>(&model)) {
    const int d = static_cast<int>(m->mu.size());
    Eigen::MatrixXd l = chol_lower(m->sigma_cov, "sample(MeanModel)");
    out.points.resize(count, d);
    Eigen::VectorXd w(d);
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j < d; ++j) w[j] = rng.gaussian();
      out.points.row(i) = (m->mu + l * w).transpose();
    }
    return out;
  }
  if (const auto* m = std::get_if<LowRankCovModel>(&model)) {
    // x = a z + eps w; no factorization, so eps = 0 stays valid.
    const int d = static_cast<int>(m->a.size());
    if (m->epsilon < 0.0)
      throw InvalidModelError("sample(LowRankCovModel): epsilon must be >= 0");
    out.points.resize(count, d);
    for (int i = 0; i < count; ++i) {
      const double z = rng.gaussian();
      for (int j = 0; j < d; ++j)
        out.points(i, j) = m->a[j] * z + m->epsilon * rng.gaussian();
    }
    return out;
  }
  if (const auto* m = std::get_if<SymGmmModel>(&model)) {
    const int d = static_cast<int>(m->mu.size());
    Eigen::MatrixXd l = chol_lower(m->sigma_cov, "sample(SymGmmModel)");
    out.points.resize(count, d);
    Eigen::VectorXd w(d);
    for (int i = 0; i < count; ++i) {
      const double s = rng.sign();
      for (int j = 0; j < d; ++j) w[j] = rng.gaussian();
      out.points.row(i) = (s * m->mu + l * w).transpose();
    }
    return out;
  }
  const auto& m = std::get<UnmixingModel>(model);
  const int d = static_cast<int>(m.a_matrix.rows());
  const int r = static_cast<int>(m.a_matrix.cols());
  if (r < 2 || d < r)
    throw InvalidModelError("sample(UnmixingModel): need d >= r >= 2");
  if (m.noise_var < 0.0)
    throw InvalidModelError("sample(UnmixingModel): noise_var must be >= 0");
  const double sw = std::sqrt(m.noise_var);
  out.points.resize(count, d);
  Eigen::VectorXd b(r);
  for (int i = 0; i < count; ++i) {
    // Dirichlet(1_r) = normalized unit-rate exponentials
    double tot = 0.0;
    for (int j = 0; j < r; ++j) {
      b[j] = rng.exponential();
      tot += b[j];
    }
    b /= tot;
    Eigen::VectorXd x = m.a_matrix * b;
    for (int j = 0; j < d; ++j) x[j] += sw * rng.gaussian();
    out.points.row(i) = x.transpose();
  }
  return out;
}

std::pair<SymGmmModel, Eigen::MatrixXd> whiten_gmm(const SymGmmModel& model) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.sigma_cov);
  if (es.info() != Eigen::Success)
    throw InvalidModelError("whiten_gmm: eigensolve failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double floor = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() <= floor)
    throw InvalidModelError("whiten_gmm: covariance is singular");
  Eigen::MatrixXd inv_sqrt = es.eigenvectors() *
                             ev.cwiseSqrt().cwiseInverse().asDiagonal() *
                             es.eigenvectors().transpose();
  SymGmmModel white;
  white.mu = inv_sqrt * model.mu;
  white.sigma_cov = Eigen::MatrixXd::Identity(model.mu.size(), model.mu.size());
  return {white, inv_sqrt};
}

void save_csv(const Sample& s, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_csv: cannot open " + path);
  for (int i = 0; i < s.count(); ++i) {
    for (int j = 0; j < s.dim(); ++j)
      std::fprintf(f, "%s%.17g", j ? "," : "", s.points(i, j));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

int param_dim(const ParametricModel& model) {
  if (const auto* m = std::get_if<MeanModel>(&model))
    return static_cast<int>(m->mu.size());
  if (const auto* m = std::get_if<LowRankCovModel>(&model))
    return static_cast<int>(m->a.size());
  if (const auto* m = std::get_if<SymGmmModel>(&model))
    return static_cast<int>(m->mu.size());
  const auto& m = std::get<UnmixingModel>(model);
  return static_cast<int>(m.a_matrix.size());
}

}  // namespace mmdopt
