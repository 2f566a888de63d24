#include "mmdopt/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mmdopt/errors.hpp"
#include "mmdopt/rng.hpp"

namespace mmdopt {
namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

void append_point(Trajectory& traj, int step, const Eigen::VectorXd& theta,
                  double value, double grad_norm) {
  traj.steps.push_back(step);
  traj.params.push_back(theta);
  traj.values.push_back(value);
  traj.grad_norms.push_back(grad_norm);
}

}  // namespace

DescentState::DescentState(const OptimizerConfig& c, int dim) : cfg(c) {
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("optimizer: learning rate must be positive");
  if (cfg.iterations < 0)
    throw std::invalid_argument("optimizer: negative iteration count");
  if (cfg.method == OptimizerConfig::Method::adam) {
    m1 = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
  }
}

void DescentState::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (cfg.method == OptimizerConfig::Method::gd) {
    theta -= cfg.learning_rate * grad;
    return;
  }
  ++t;
  m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * grad;
  m2 = cfg.adam_beta2 * m2 + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  theta.array() -= cfg.learning_rate * (m1.array() / c1) /
                   ((m2.array() / c2).sqrt() + cfg.adam_eps);
}

Trajectory run_descent(const Objective& objective, const Eigen::VectorXd& init,
                       const OptimizerConfig& cfg) {
  if (init.size() != objective.dim)
    throw std::invalid_argument("run_descent: init size mismatch");

  Trajectory traj;
  Eigen::VectorXd theta = init;
  Eigen::VectorXd grad(objective.dim);
  DescentState state(cfg, objective.dim);

  for (int step = 0; step <= cfg.iterations; ++step) {
    const double value = objective.eval(theta, &grad);
    if (!std::isfinite(value) || !all_finite(grad) || !all_finite(theta))
      throw DivergedError("run_descent: non-finite state at step " +
                              std::to_string(step),
                          step);
    append_point(traj, step, theta, value, grad.norm());
    if (step == cfg.iterations) break;
    state.step(theta, grad);
  }
  return traj;
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("save_trajectory_csv: cannot open " + path);
  const Eigen::Index d = traj.params.empty() ? 0 : traj.params.front().size();
  std::fprintf(f, "step");
  for (Eigen::Index j = 0; j < d; ++j)
    std::fprintf(f, ",param_%ld", static_cast<long>(j));
  std::fprintf(f, ",value,grad_norm\n");
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    std::fprintf(f, "%d", traj.steps[i]);
    for (Eigen::Index j = 0; j < d; ++j)
      std::fprintf(f, ",%.17g", traj.params[i](j));
    std::fprintf(f, ",%.17g,%.17g\n", traj.values[i], traj.grad_norms[i]);
  }
  std::fclose(f);
}

Eigen::VectorXd finite_diff_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& point) {
  Eigen::VectorXd grad(point.size());
  Eigen::VectorXd p = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(point(i)));
    p(i) = point(i) + h;
    const double up = f(p);
    p(i) = point(i) - h;
    const double down = f(p);
    p(i) = point(i);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

CriticalPoint classify_critical(const Objective& objective,
                                const Eigen::VectorXd& point) {
  if (!objective.hessian)
    throw std::invalid_argument("classify_critical: objective lacks a Hessian");
  Eigen::VectorXd grad(objective.dim);
  const double value = objective.eval(point, &grad);
  const double gn = grad.norm();
  if (!(gn <= 1e-6))
    throw NotCriticalError("classify_critical: gradient norm " +
                           std::to_string(gn) + " exceeds 1e-6");

  CriticalPoint out;
  out.location = point;
  out.value = value;
  out.grad_norm = gn;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      objective.hessian(point), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double op_norm = ev.cwiseAbs().maxCoeff();
  if (op_norm < 1e-300) {
    out.min_eig = ev.minCoeff();
    out.max_eig = ev.maxCoeff();
    out.label = "unresolved";
    return out;
  }
  out.min_eig = ev.minCoeff() / op_norm;
  out.max_eig = ev.maxCoeff() / op_norm;

  constexpr double tol = 1e-10;
  if (out.min_eig >= -tol && value <= 1e-10) {
    out.label = "global-min-candidate";
  } else if (out.max_eig < tol && out.min_eig < -tol) {
    out.label = "local-max";
  } else if (out.min_eig < -tol) {
    out.label = "strict-saddle";
  } else {
    out.label = "unresolved";
  }
  return out;
}

std::vector<CriticalPoint> scan_stationary(const Objective& objective,
                                           double domain_radius, int starts,
                                           std::uint64_t seed, int* dropped) {
  if (!objective.hessian)
    throw std::invalid_argument("scan_stationary: objective lacks a Hessian");
  if (domain_radius <= 0.0)
    throw std::invalid_argument("scan_stationary: radius must be positive");
  if (starts < 1)
    throw std::invalid_argument("scan_stationary: need at least one start");

  const int d = objective.dim;
  Rng rng(derive_stream(seed, {0x5ca7u}));
  int drop_count = 0;
  std::vector<Eigen::VectorXd> roots;
  std::vector<double> root_grads;

  constexpr int kMaxOuter = 200;
  constexpr double kGradTol = 1e-8;

  for (int s = 0; s < starts; ++s) {
    // Uniform draw in the ball: Gaussian direction, radius by inverse CDF.
    Eigen::VectorXd theta(d);
    for (int i = 0; i < d; ++i) theta(i) = rng.gaussian();
    const double nrm = theta.norm();
    if (nrm > 0.0)
      theta *= domain_radius *
               std::pow(rng.uniform_pos(), 1.0 / static_cast<double>(d)) / nrm;

    // Levenberg-Marquardt on the residual g(theta) with the analytic Hessian
    // as Jacobian.
    Eigen::VectorXd grad(d);
    objective.eval(theta, &grad);
    double lambda = 1e-3;
    bool converged = grad.norm() <= kGradTol;
    bool escaped = false;

    for (int it = 0; it < kMaxOuter && !converged && !escaped; ++it) {
      const Eigen::MatrixXd h = objective.hessian(theta);
      const Eigen::MatrixXd hth = h.transpose() * h;
      const Eigen::VectorXd htg = h.transpose() * grad;
      bool accepted = false;
      for (int inner = 0; inner < 60; ++inner) {
        Eigen::MatrixXd lhs = hth;
        lhs.diagonal().array() += lambda;
        const Eigen::VectorXd delta = lhs.ldlt().solve(-htg);
        const Eigen::VectorXd cand = theta + delta;
        Eigen::VectorXd cand_grad(d);
        objective.eval(cand, &cand_grad);
        if (cand_grad.allFinite() && cand_grad.squaredNorm() < grad.squaredNorm()) {
          theta = cand;
          grad = cand_grad;
          lambda = std::max(lambda / 3.0, 1e-12);
          accepted = true;
          break;
        }
        lambda *= 10.0;
        if (lambda > 1e12) break;
      }
      if (theta.norm() > 3.0 * domain_radius) escaped = true;
      if (grad.norm() <= kGradTol) converged = true;
      if (!accepted && !converged) break;  // stalled
    }

    if (!converged || escaped || theta.norm() > 3.0 * domain_radius) {
      ++drop_count;
      continue;
    }

    // Deduplicate: keep the representative with the smaller gradient norm.
    bool merged = false;
    for (std::size_t k = 0; k < roots.size(); ++k) {
      if ((roots[k] - theta).norm() < 1e-4) {
        if (grad.norm() < root_grads[k]) {
          roots[k] = theta;
          root_grads[k] = grad.norm();
        }
        merged = true;
        break;
      }
    }
    if (!merged) {
      roots.push_back(theta);
      root_grads.push_back(grad.norm());
    }
  }

  if (dropped) *dropped = drop_count;
  std::vector<CriticalPoint> out;
  out.reserve(roots.size());
  for (const auto& root : roots) out.push_back(classify_critical(objective, root));
  return out;
}

}  // namespace mmdopt
