#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mmdopt {

// A smooth objective with optional analytic curvature. `eval` must fill the
// gradient when the pointer is non-null. `hessian` may be left empty; the
// stationary-point scanner requires it.
struct Objective {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> eval;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
};

struct OptimizerConfig {
  enum class Method { gd, adam };
  Method method = Method::gd;
  double learning_rate = 0.1;
  int iterations = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// One recorded optimisation path: parameters, objective value and gradient
// norm at every step, the initial point included.
struct Trajectory {
  std::vector<int> steps;
  std::vector<Eigen::VectorXd> params;
  std::vector<double> values;
  std::vector<double> grad_norms;

  const Eigen::VectorXd& final_param() const { return params.back(); }
  double final_value() const { return values.back(); }
};

// First-order stepper state shared by the descent driver and the experiment
// harness, so both loops take bit-identical steps.
struct DescentState {
  explicit DescentState(const OptimizerConfig& cfg, int dim);
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);

  OptimizerConfig cfg;
  Eigen::VectorXd m1, m2;  // Adam moment accumulators
  int t = 0;
};

// Runs the configured first-order method and records the full trajectory.
// Throws DivergedError when the value or gradient stops being finite.
Trajectory run_descent(const Objective& objective, const Eigen::VectorXd& init,
                       const OptimizerConfig& cfg);

void save_trajectory_csv(const Trajectory& traj, const std::string& path);

// Central finite differences with per-coordinate step 1e-5 (1 + |theta_i|).
Eigen::VectorXd finite_diff_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& point);

struct CriticalPoint {
  Eigen::VectorXd location;
  double value = 0.0;
  double grad_norm = 0.0;
  // Extreme Hessian eigenvalues after scaling the Hessian to unit operator
  // norm, so the classification tolerance is scale-free.
  double min_eig = 0.0;
  double max_eig = 0.0;
  std::string label;  // global-min-candidate / local-max / strict-saddle / unresolved
};

// Classifies an (approximately) stationary point through the analytic
// Hessian. The gradient norm must already be <= 1e-6 (NotCriticalError).
CriticalPoint classify_critical(const Objective& objective,
                                const Eigen::VectorXd& point);

// Multi-start Newton-type search for roots of the gradient inside a ball.
// Starts are uniform in the ball of the given radius; runs that leave three
// radii or fail to reach gradient norm 1e-8 are dropped (and counted when the
// caller passes a slot). Survivors are deduplicated at distance 1e-4 and
// classified.
std::vector<CriticalPoint> scan_stationary(const Objective& objective,
                                           double domain_radius, int starts,
                                           std::uint64_t seed,
                                           int* dropped = nullptr);

}  // namespace mmdopt
