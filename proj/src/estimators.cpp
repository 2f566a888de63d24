#include "mmdopt/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <variant>

#include "mmdopt/detail/shifted.hpp"
#include "mmdopt/errors.hpp"
#include "mmdopt/rng.hpp"

namespace mmdopt {
namespace {

using detail::shifted_chol;

// Row-wise dot products of two equally shaped matrices.
Eigen::VectorXd row_dots(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a.array() * b.array()).rowwise().sum().matrix();
}

struct OsmmdImpl {
  const Eigen::MatrixXd& y;
  const KernelConfig& cfg;
  double yy_mean;

  EstimatorEval operator()(const MeanModel& model) const {
    const Eigen::Index m = y.rows();
    const double s2 = cfg.bandwidth;
    if (model.sigma_cov.rows() != y.cols() || model.mu.size() != y.cols())
      throw std::invalid_argument("osmmd: dimension mismatch");

    const auto two = shifted_chol(model.sigma_cov, 2.0, s2);
    const auto one = shifted_chol(model.sigma_cov, 1.0, s2);
    const double exx = std::exp(-0.5 * two.log_det_ratio);
    const double cross_pref = std::exp(-0.5 * one.log_det_ratio);

    Eigen::MatrixXd u = (-y).rowwise() + model.mu.transpose();  // mu - y_j
    Eigen::MatrixXd v = one.llt.solve(u.transpose()).transpose();
    Eigen::ArrayXd e = (-0.5 * row_dots(u, v).array()).exp();

    EstimatorEval out;
    out.value = exx + yy_mean - 2.0 * cross_pref * e.mean();
    out.gradient =
        (2.0 * cross_pref / static_cast<double>(m)) * (v.transpose() * e.matrix());
    return out;
  }

  EstimatorEval operator()(const LowRankCovModel& model) const {
    const Eigen::Index m = y.rows();
    const Eigen::Index d = y.cols();
    if (model.a.size() != d)
      throw std::invalid_argument("osmmd: dimension mismatch");
    const double s2 = cfg.bandwidth;
    const double eps = model.epsilon;
    const Eigen::VectorXd& a = model.a;
    const double r = a.squaredNorm();

    // Model-model term: same rank-one determinant as the population formula.
    const double c = 2.0 * eps * eps + s2;
    const double tc = std::pow(c / s2, static_cast<double>(d)) / c;
    const double det_xx = tc * (c + 2.0 * r);
    const double exx = 1.0 / std::sqrt(det_xx);

    // Cross terms against single points: B = a a^T + c1 I with c1 = eps^2+s2.
    const double c1 = eps * eps + s2;
    const double t1 = std::pow(c1 / s2, static_cast<double>(d)) / c1;
    const double det_x = t1 * (c1 + r);
    const double dinv = 1.0 / std::sqrt(det_x);

    const Eigen::VectorXd ya = y * a;  // a^T y_j
    Eigen::MatrixXd by = (y - ya * (a.transpose() / (c1 + r))) / c1;
    Eigen::ArrayXd e = (-0.5 * row_dots(y, by).array()).exp();

    EstimatorEval out;
    out.value = exx + yy_mean - 2.0 * dinv * e.mean();

    const Eigen::VectorXd grad_xx = -2.0 * tc * std::pow(det_xx, -1.5) * a;
    Eigen::VectorXd sum_cross =
        -t1 * std::pow(det_x, -1.5) * e.sum() * a +
        (dinv / (c1 + r)) * (by.transpose() * (ya.array() * e).matrix());
    out.gradient = grad_xx - (2.0 / static_cast<double>(m)) * sum_cross;
    return out;
  }

  EstimatorEval operator()(const SymGmmModel& model) const {
    const Eigen::Index m = y.rows();
    const double s2 = cfg.bandwidth;
    if (model.sigma_cov.rows() != y.cols() || model.mu.size() != y.cols())
      throw std::invalid_argument("osmmd: dimension mismatch");

    const auto two = shifted_chol(model.sigma_cov, 2.0, s2);
    const auto one = shifted_chol(model.sigma_cov, 1.0, s2);
    const double pref2 = std::exp(-0.5 * two.log_det_ratio);
    const double pref1 = std::exp(-0.5 * one.log_det_ratio);

    const Eigen::VectorXd m_mu = two.llt.solve(model.mu);
    const double e_self = std::exp(-2.0 * model.mu.dot(m_mu));
    const double exx = 0.5 * pref2 * (1.0 + e_self);

    Eigen::MatrixXd um = (-y).rowwise() + model.mu.transpose();  // mu - y_j
    Eigen::MatrixXd up = y.rowwise() + model.mu.transpose();     // mu + y_j
    Eigen::MatrixXd vm = one.llt.solve(um.transpose()).transpose();
    Eigen::MatrixXd vp = one.llt.solve(up.transpose()).transpose();
    Eigen::ArrayXd em = (-0.5 * row_dots(um, vm).array()).exp();
    Eigen::ArrayXd ep = (-0.5 * row_dots(up, vp).array()).exp();

    EstimatorEval out;
    out.value = exx + yy_mean -
                (pref1 / static_cast<double>(m)) * (em.sum() + ep.sum());
    out.gradient = -2.0 * pref2 * e_self * m_mu +
                   (pref1 / static_cast<double>(m)) *
                       (vm.transpose() * em.matrix() +
                        vp.transpose() * ep.matrix());
    return out;
  }

  EstimatorEval operator()(const UnmixingModel&) const {
    throw std::invalid_argument("osmmd: unsupported for the unmixing family");
  }
};

struct NllImpl {
  const Eigen::MatrixXd& y;

  EstimatorEval operator()(const MeanModel& model) const {
    const Eigen::Index m = y.rows();
    const Eigen::Index d = y.cols();
    if (model.sigma_cov.rows() != d || model.mu.size() != d)
      throw std::invalid_argument("nll: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(model.sigma_cov);
    if (llt.info() != Eigen::Success)
      throw InvalidModelError("nll: covariance is not positive definite");
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      log_det += 2.0 * std::log(llt.matrixLLT()(i, i));

    Eigen::MatrixXd u = (-y).rowwise() + model.mu.transpose();
    Eigen::MatrixXd v = llt.solve(u.transpose()).transpose();
    const double mean_q = row_dots(u, v).mean();

    EstimatorEval out;
    out.value = 0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) +
                0.5 * log_det + 0.5 * mean_q;
    out.gradient = v.colwise().mean().transpose();
    (void)m;
    return out;
  }

  EstimatorEval operator()(const LowRankCovModel& model) const {
    const Eigen::Index d = y.cols();
    if (model.a.size() != d)
      throw std::invalid_argument("nll: dimension mismatch");
    const double eps = model.epsilon;
    if (!(eps > 0.0))
      throw LikelihoodUndefinedError(
          "nll: rank-one covariance is singular at epsilon = 0");
    const Eigen::VectorXd& a = model.a;
    const double r = a.squaredNorm();
    const double e2 = eps * eps;
    const double denom = e2 + r;

    const Eigen::VectorXd ya = y * a;
    Eigen::MatrixXd cy = (y - ya * (a.transpose() / denom)) / e2;
    const double mean_q = row_dots(y, cy).mean();

    EstimatorEval out;
    out.value = 0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) +
                0.5 * (static_cast<double>(d - 1) * std::log(e2) +
                       std::log(denom)) +
                0.5 * mean_q;
    out.gradient =
        a / denom -
        (cy.transpose() * ya).eval() / (denom * static_cast<double>(y.rows()));
    return out;
  }

  EstimatorEval operator()(const SymGmmModel& model) const {
    const Eigen::Index m = y.rows();
    const Eigen::Index d = y.cols();
    if (model.sigma_cov.rows() != d || model.mu.size() != d)
      throw std::invalid_argument("nll: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(model.sigma_cov);
    if (llt.info() != Eigen::Success)
      throw InvalidModelError("nll: covariance is not positive definite");
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      log_det += 2.0 * std::log(llt.matrixLLT()(i, i));

    Eigen::MatrixXd um = y.rowwise() - model.mu.transpose();  // y_j - mu
    Eigen::MatrixXd up = y.rowwise() + model.mu.transpose();  // y_j + mu
    Eigen::MatrixXd vm = llt.solve(um.transpose()).transpose();
    Eigen::MatrixXd vp = llt.solve(up.transpose()).transpose();
    Eigen::ArrayXd hm = -0.5 * row_dots(um, vm).array();
    Eigen::ArrayXd hp = -0.5 * row_dots(up, vp).array();

    Eigen::ArrayXd hi = hm.max(hp);
    Eigen::ArrayXd lse = hi + ((hm - hi).exp() + (hp - hi).exp()).log();
    Eigen::ArrayXd wm = (hm - lse).exp();
    Eigen::ArrayXd wp = (hp - lse).exp();

    EstimatorEval out;
    out.value = 0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) +
                0.5 * log_det + std::log(2.0) - lse.mean();
    out.gradient = -(vm.transpose() * wm.matrix() -
                     vp.transpose() * wp.matrix()) /
                   static_cast<double>(m);
    return out;
  }

  EstimatorEval operator()(const UnmixingModel&) const {
    throw std::invalid_argument("nll: unsupported for the unmixing family");
  }
};

}  // namespace

namespace detail {

constexpr Eigen::Index kGramBlock = 2048;

// Mean of the off-diagonal kernel entries of one point set, i.e.
// sum_{i != j} k(p_i, p_j) / (m (m-1)). Blocked so large m stays in cache.
double mean_offdiag_gram(const Eigen::MatrixXd& pts, double sigma_sq) {
  const Eigen::Index m = pts.rows();
  double total = 0.0;
  for (Eigen::Index i0 = 0; i0 < m; i0 += kGramBlock) {
    const Eigen::Index ib = std::min(kGramBlock, m - i0);
    for (Eigen::Index j0 = 0; j0 < m; j0 += kGramBlock) {
      const Eigen::Index jb = std::min(kGramBlock, m - j0);
      total += rbf_cross_gram(pts.middleRows(i0, ib), pts.middleRows(j0, jb),
                              sigma_sq)
                   .sum();
    }
  }
  total -= static_cast<double>(m);  // remove the unit diagonal
  return total / (static_cast<double>(m) * static_cast<double>(m - 1));
}

EstimatorEval osmmd_with_yy(const ParametricModel& model,
                            const Eigen::MatrixXd& y, const KernelConfig& cfg,
                            double yy_mean) {
  return std::visit(OsmmdImpl{y, cfg, yy_mean}, model);
}

}  // namespace detail

double empirical_mmd(const Sample& x, const Sample& y,
                     const KernelConfig& cfg) {
  const GramSums sums = gram_sums(x, y, cfg);
  const double n = static_cast<double>(x.count());
  const double m = static_cast<double>(y.count());
  return sums.xx_offdiag / (n * (n - 1.0)) + sums.yy_offdiag / (m * (m - 1.0)) -
         2.0 * sums.xy / (n * m);
}

EstimatorEval osmmd(const ParametricModel& model, const Sample& y,
                    const KernelConfig& cfg) {
  if (y.count() < 2)
    throw InsufficientSampleError("osmmd: need at least two data points");
  const double yy = detail::mean_offdiag_gram(y.points, cfg.bandwidth);
  return detail::osmmd_with_yy(model, y.points, cfg, yy);
}

EstimatorEval nll(const ParametricModel& model, const Sample& y) {
  if (y.count() < 1)
    throw InsufficientSampleError("nll: need at least one data point");
  return std::visit(NllImpl{y.points}, model);
}

ReparamMmd::ReparamMmd(const ParametricModel& structure, const Sample& y,
                       const KernelConfig& cfg, int n_fake)
    : y_(y.points), sigma_sq_(cfg.bandwidth), n_fake_(n_fake),
      dim_(static_cast<int>(y.dim())) {
  if (y.count() < 2)
    throw InsufficientSampleError("ReparamMmd: need at least two data points");
  if (n_fake < 2)
    throw std::invalid_argument("ReparamMmd: need at least two model points");

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanModel>) {
          kind_ = Kind::mean;
          if (m.sigma_cov.rows() != dim_)
            throw std::invalid_argument("ReparamMmd: dimension mismatch");
          Eigen::LLT<Eigen::MatrixXd> llt(m.sigma_cov);
          if (llt.info() != Eigen::Success)
            throw InvalidModelError("ReparamMmd: covariance not PD");
          chol_l_ = llt.matrixL();
          param_dim_ = dim_;
        } else if constexpr (std::is_same_v<T, LowRankCovModel>) {
          kind_ = Kind::cov;
          if (m.a.size() != dim_)
            throw std::invalid_argument("ReparamMmd: dimension mismatch");
          if (m.epsilon < 0.0)
            throw InvalidModelError("ReparamMmd: negative epsilon");
          epsilon_ = m.epsilon;
          param_dim_ = dim_;
        } else if constexpr (std::is_same_v<T, SymGmmModel>) {
          kind_ = Kind::gmm;
          if (m.sigma_cov.rows() != dim_)
            throw std::invalid_argument("ReparamMmd: dimension mismatch");
          Eigen::LLT<Eigen::MatrixXd> llt(m.sigma_cov);
          if (llt.info() != Eigen::Success)
            throw InvalidModelError("ReparamMmd: covariance not PD");
          chol_l_ = llt.matrixL();
          param_dim_ = dim_;
        } else {
          kind_ = Kind::unmix;
          if (m.a_matrix.rows() != dim_)
            throw std::invalid_argument("ReparamMmd: dimension mismatch");
          if (m.noise_var < 0.0)
            throw InvalidModelError("ReparamMmd: negative noise variance");
          rank_ = static_cast<int>(m.a_matrix.cols());
          noise_sd_ = std::sqrt(m.noise_var);
          param_dim_ = dim_ * rank_;
        }
      },
      structure);

  yy_offdiag_mean_ = detail::mean_offdiag_gram(y_, sigma_sq_);
}

EstimatorEval ReparamMmd::eval(const Eigen::VectorXd& theta,
                               std::uint64_t noise_seed,
                               bool want_value) const {
  if (theta.size() != param_dim_)
    throw std::invalid_argument("ReparamMmd: parameter size mismatch");
  const Eigen::Index n = n_fake_;
  const Eigen::Index m = y_.rows();
  const Eigen::Index d = dim_;
  Rng rng(noise_seed);

  Eigen::MatrixXd w(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) w(i, j) = rng.gaussian();

  // Deterministic map from (theta, noise) to the model-side points, plus the
  // latent that the chain rule needs.
  Eigen::MatrixXd x;
  Eigen::VectorXd latent;   // per-point scalar (cov z, gmm sign)
  Eigen::MatrixXd weights;  // unmixing Dirichlet rows
  switch (kind_) {
    case Kind::mean:
      x = w * chol_l_.transpose();
      x.rowwise() += theta.transpose();
      break;
    case Kind::gmm: {
      latent.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) latent(i) = rng.sign();
      x = w * chol_l_.transpose() + latent * theta.transpose();
      break;
    }
    case Kind::cov: {
      latent.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) latent(i) = rng.gaussian();
      x = latent * theta.transpose() + epsilon_ * w;
      break;
    }
    case Kind::unmix: {
      weights.resize(n, rank_);
      for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (int j = 0; j < rank_; ++j) {
          weights(i, j) = rng.exponential();
          total += weights(i, j);
        }
        weights.row(i) /= total;
      }
      const Eigen::Map<const Eigen::MatrixXd> a(theta.data(), d, rank_);
      x = weights * a.transpose();
      if (noise_sd_ > 0.0) x += noise_sd_ * w;
      break;
    }
  }

  const Eigen::MatrixXd kxy = detail::rbf_cross_gram(x, y_, sigma_sq_);
  const Eigen::VectorXd row_xy = kxy.rowwise().sum();
  const double inv_s2 = 1.0 / sigma_sq_;
  const double nn = static_cast<double>(n) * static_cast<double>(n - 1);
  const double nm = static_cast<double>(n) * static_cast<double>(m);

  EstimatorEval out;
  out.value = yy_offdiag_mean_ - 2.0 * kxy.sum() / nm;

  if (kind_ == Kind::mean && !want_value) {
    // The within-model part of the chained gradient cancels exactly (the
    // kernel difference k(x_i,x_j)(x_i - x_j) is antisymmetric), so the mean
    // family only ever needs the cross Gram.
    out.gradient = (2.0 * inv_s2 / nm) *
                   (x.transpose() * row_xy - y_.transpose() * kxy.colwise().sum().transpose());
    return out;
  }

  const Eigen::MatrixXd kxx = detail::rbf_cross_gram(x, x, sigma_sq_);
  const Eigen::VectorXd row_xx = kxx.rowwise().sum();
  out.value += (kxx.sum() - static_cast<double>(n)) / nn;

  // Per-point derivative of the U-statistic; the unit diagonal of kxx is
  // harmless because its difference factor vanishes.
  Eigen::MatrixXd g =
      (2.0 / nn) * (row_xx.asDiagonal() * x - kxx * x) -
      (2.0 / nm) * (row_xy.asDiagonal() * x - kxy * y_);
  g *= -inv_s2;

  switch (kind_) {
    case Kind::mean:
      out.gradient = g.colwise().sum().transpose();
      break;
    case Kind::gmm:
    case Kind::cov:
      out.gradient = g.transpose() * latent;
      break;
    case Kind::unmix: {
      Eigen::MatrixXd ga = g.transpose() * weights;  // d x r
      out.gradient = Eigen::Map<Eigen::VectorXd>(ga.data(), param_dim_);
      break;
    }
  }
  return out;
}

}  // namespace mmdopt
