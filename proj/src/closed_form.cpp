#include "mmdopt/closed_form.hpp"

#include <cmath>
#include <stdexcept>

#include "mmdopt/detail/shifted.hpp"
#include "mmdopt/errors.hpp"

namespace mmdopt {
namespace {

using detail::shifted_chol;
using detail::ShiftedChol;

void check_dim(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& v,
               const char* what) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != v.size())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

MmdEval mmd_mean(const MeanModel& model_star, const Eigen::VectorXd& mu,
                 const KernelConfig& cfg, bool want_hessian) {
  check_dim(model_star.sigma_cov, model_star.mu, "mmd_mean");
  check_dim(model_star.sigma_cov, mu, "mmd_mean");
  const double s2 = cfg.bandwidth;

  const ShiftedChol sc = shifted_chol(model_star.sigma_cov, 2.0, s2);
  const double prefactor = 2.0 * std::exp(-0.5 * sc.log_det_ratio);

  const Eigen::VectorXd u = mu - model_star.mu;
  const Eigen::VectorXd wu = sc.llt.solve(u);  // (2 Sigma + s2 I)^{-1} u
  const double q = u.dot(wu);
  const double e = std::exp(-0.5 * q);

  MmdEval out;
  out.value = prefactor * (1.0 - e);
  out.gradient = prefactor * e * wu;
  if (want_hessian) {
    Eigen::MatrixXd w = sc.llt.solve(
        Eigen::MatrixXd::Identity(mu.size(), mu.size()));
    out.hessian = prefactor * e * (w - wu * wu.transpose());
  }
  return out;
}

MmdEval mmd_cov(const LowRankCovModel& model_star, const Eigen::VectorXd& a,
                const KernelConfig& cfg, bool want_hessian) {
  if (model_star.a.size() != a.size())
    throw std::invalid_argument("mmd_cov: dimension mismatch");
  const double s2 = cfg.bandwidth;
  const double eps = model_star.epsilon;
  const Eigen::Index d = a.size();

  // All three determinants reduce to powers of c/s2 times rank-one updates.
  const double c = 2.0 * eps * eps + s2;
  const double s = model_star.a.squaredNorm();
  const double r = a.squaredNorm();
  const double ip = a.dot(model_star.a);
  const double t = std::pow(c / s2, static_cast<double>(d)) / c;  // (c/s2)^d / c

  const double det_aa = t * (c + 2.0 * r);
  const double det_ss = t * (c + 2.0 * s);
  const double cross_quad = r - ip * ip / (c + s);
  // |D3| = (c/s2)^d (1 + s/c)(1 + cross_quad/c)
  const double det3 = (t * c) * (1.0 + s / c) * (1.0 + cross_quad / c);

  const double k1 = std::pow(det_aa, -1.5);
  const double k3 = std::pow(det3, -1.5);

  MmdEval out;
  out.value = 1.0 / std::sqrt(det_aa) + 1.0 / std::sqrt(det_ss) -
              2.0 / std::sqrt(det3);

  // B = a*a*^T + c I appears inside the cross term; Sherman-Morrison gives
  // B^{-1} x = (x - a* (a*^T x)/(c+s)) / c.
  const Eigen::VectorXd binv_a = (a - model_star.a * (ip / (c + s))) / c;
  const double big_k = 2.0 * t;
  out.gradient = big_k * (-k1 * a + (s + c) * k3 * binv_a);

  if (want_hessian) {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd binv =
        (eye - model_star.a * model_star.a.transpose() / (c + s)) / c;
    Eigen::MatrixXd h = -k1 * eye;
    h += 3.0 * t * std::pow(det_aa, -2.5) * (2.0 * a) * a.transpose();
    h += (s + c) * k3 * binv;
    h -= 3.0 * t * (s + c) * (s + c) * std::pow(det3, -2.5) * binv_a *
         binv_a.transpose();
    out.hessian = big_k * h;
  }
  return out;
}

MmdEval mmd_gmm(const SymGmmModel& model_star, const Eigen::VectorXd& mu,
                const KernelConfig& cfg, bool want_hessian) {
  check_dim(model_star.sigma_cov, model_star.mu, "mmd_gmm");
  check_dim(model_star.sigma_cov, mu, "mmd_gmm");
  const double s2 = cfg.bandwidth;

  const ShiftedChol sc = shifted_chol(model_star.sigma_cov, 2.0, s2);
  const double prefactor = std::exp(-0.5 * sc.log_det_ratio);

  // All quadratic forms share M = (2 Sigma + s2 I)^{-1}.
  const Eigen::VectorXd m_mu = sc.llt.solve(mu);
  const Eigen::VectorXd m_star = sc.llt.solve(model_star.mu);
  const Eigen::VectorXd u_minus = mu - model_star.mu;
  const Eigen::VectorXd u_plus = mu + model_star.mu;
  const Eigen::VectorXd m_minus = m_mu - m_star;
  const Eigen::VectorXd m_plus = m_mu + m_star;

  const double e_self = std::exp(-2.0 * mu.dot(m_mu));        // exp(-2 mu'M mu)
  const double e_star = std::exp(-2.0 * model_star.mu.dot(m_star));
  const double e_minus = std::exp(-0.5 * u_minus.dot(m_minus));
  const double e_plus = std::exp(-0.5 * u_plus.dot(m_plus));

  MmdEval out;
  out.value = 0.5 * prefactor *
              (e_self + 1.0 + e_star + 1.0 - 2.0 * e_minus - 2.0 * e_plus);
  out.gradient =
      prefactor * (e_minus * m_minus + e_plus * m_plus - 2.0 * e_self * m_mu);

  if (want_hessian) {
    const Eigen::Index d = mu.size();
    const Eigen::MatrixXd m =
        sc.llt.solve(Eigen::MatrixXd::Identity(d, d));
    Eigen::MatrixXd h = e_minus * (m - m_minus * m_minus.transpose());
    h += e_plus * (m - m_plus * m_plus.transpose());
    h -= 2.0 * e_self * (m - 4.0 * m_mu * m_mu.transpose());
    out.hessian = prefactor * h;
  }
  return out;
}

SaddleDescription cov_orthogonal_saddle(const LowRankCovModel& model_star,
                                        const KernelConfig& cfg) {
  const double s = model_star.a.squaredNorm();
  if (s <= 0.0)
    throw InvalidModelError("cov_orthogonal_saddle: a* must be nonzero");
  const double c = 2.0 * model_star.epsilon * model_star.epsilon + cfg.bandwidth;

  const double beta = std::cbrt(c);
  const double gamma = std::cbrt(s + c);
  const double denom = 2.0 * beta - gamma;

  SaddleDescription out;
  out.constraint = "orthogonal-to-a*";
  if (denom <= 1e-12 * std::max(beta, gamma)) {
    out.exists = false;
    return out;
  }
  out.exists = true;
  out.radius_sq = c * (gamma - beta) / denom;
  return out;
}

bool gmm_saddle_check(const SymGmmModel& model_star, const Eigen::VectorXd& mu,
                      const KernelConfig& cfg) {
  check_dim(model_star.sigma_cov, model_star.mu, "gmm_saddle_check");
  check_dim(model_star.sigma_cov, mu, "gmm_saddle_check");
  const ShiftedChol sc = shifted_chol(model_star.sigma_cov, 2.0, cfg.bandwidth);

  const Eigen::VectorXd m_mu = sc.llt.solve(mu);
  const double ip = model_star.mu.dot(m_mu);
  const double nm = mu.dot(m_mu);
  const double ns = model_star.mu.dot(sc.llt.solve(model_star.mu));

  constexpr double tol = 1e-8;
  const bool orthogonal = std::abs(ip) <= tol * std::sqrt(std::max(nm * ns, 0.0));
  const bool on_sphere = std::abs(nm - ns / 3.0) <= tol * std::max(ns, 1e-300);
  return orthogonal && on_sphere;
}

}  // namespace mmdopt
