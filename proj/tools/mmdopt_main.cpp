// Command-line front end: gradient checks, landscape scans, recovery trials,
// success-rate sweeps and the unmixing experiment.
#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmdopt/closed_form.hpp"
#include "mmdopt/errors.hpp"
#include "mmdopt/estimators.hpp"
#include "mmdopt/harness.hpp"
#include "mmdopt/kernel.hpp"
#include "mmdopt/models.hpp"
#include "mmdopt/optimize.hpp"
#include "mmdopt/rng.hpp"

namespace {

using namespace mmdopt;

Eigen::VectorXd gaussian_vec(Rng& rng, int d, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * rng.gaussian();
  return v;
}

// Truth conventions shared with the sweep harness: mean/gmm targets are
// standard Gaussian draws, covariance directions live on the unit sphere.
ParametricModel draw_truth(Family family, int d, double epsilon, Rng& rng) {
  switch (family) {
    case Family::mean:
      return MeanModel{gaussian_vec(rng, d), Eigen::MatrixXd::Identity(d, d)};
    case Family::cov: {
      Eigen::VectorXd a = gaussian_vec(rng, d);
      const double nrm = a.norm();
      if (nrm > 0.0) a /= nrm;
      else a(0) = 1.0;
      return LowRankCovModel{a, epsilon};
    }
    case Family::gmm:
      return SymGmmModel{gaussian_vec(rng, d),
                         Eigen::MatrixXd::Identity(d, d)};
  }
  throw std::logic_error("draw_truth: unreachable");
}

Objective closed_form_objective(const ParametricModel& star,
                                const KernelConfig& cfg) {
  Objective obj;
  obj.dim = param_dim(star);
  obj.eval = [star, cfg](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
    MmdEval e;
    if (const auto* m = std::get_if<MeanModel>(&star)) e = mmd_mean(*m, p, cfg);
    else if (const auto* c = std::get_if<LowRankCovModel>(&star))
      e = mmd_cov(*c, p, cfg);
    else e = mmd_gmm(std::get<SymGmmModel>(star), p, cfg);
    if (g) *g = e.gradient;
    return e.value;
  };
  obj.hessian = [star, cfg](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
    if (const auto* m = std::get_if<MeanModel>(&star))
      return *mmd_mean(*m, p, cfg, true).hessian;
    if (const auto* c = std::get_if<LowRankCovModel>(&star))
      return *mmd_cov(*c, p, cfg, true).hessian;
    return *mmd_gmm(std::get<SymGmmModel>(star), p, cfg, true).hessian;
  };
  return obj;
}

Eigen::MatrixXd fd_hessian(const Objective& obj, const Eigen::VectorXd& p) {
  const int d = static_cast<int>(p.size());
  Eigen::MatrixXd h(d, d);
  Eigen::VectorXd probe = p, up(d), down(d);
  for (int i = 0; i < d; ++i) {
    const double step = 1e-5 * (1.0 + std::abs(p(i)));
    probe(i) = p(i) + step;
    obj.eval(probe, &up);
    probe(i) = p(i) - step;
    obj.eval(probe, &down);
    probe(i) = p(i);
    h.col(i) = (up - down) / (2.0 * step);
  }
  return h;
}

double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

int run_check_grad(const std::string& family_arg, int dim, double bandwidth,
                   double epsilon, int points, std::uint64_t seed) {
  std::vector<Family> families;
  if (family_arg.empty())
    families = {Family::mean, Family::cov, Family::gmm};
  else
    families = {family_from_string(family_arg)};

  const KernelConfig cfg(bandwidth);
  bool ok = true;
  Rng rng(derive_stream(seed, {0xcafeu}));

  for (Family family : families) {
    const ParametricModel star = draw_truth(family, dim, epsilon, rng);
    const Objective obj = closed_form_objective(star, cfg);
    const Sample y = sample(star, 40, derive_stream(seed, {0xdau}));

    double worst_grad = 0.0, worst_hess = 0.0;
    double worst_osmmd = 0.0, worst_nll = 0.0;
    for (int k = 0; k < points; ++k) {
      const Eigen::VectorXd theta = gaussian_vec(rng, dim);
      Eigen::VectorXd grad(dim);
      obj.eval(theta, &grad);
      const Eigen::VectorXd fd = finite_diff_gradient(
          [&](const Eigen::VectorXd& p) { return obj.eval(p, nullptr); },
          theta);
      worst_grad = std::max(worst_grad, rel_err(grad, fd));

      const Eigen::MatrixXd h = obj.hessian(theta);
      const Eigen::MatrixXd hfd = fd_hessian(obj, theta);
      worst_hess = std::max(
          worst_hess, (h - hfd).norm() / std::max(1.0, hfd.norm()));

      const auto model_at = [&](const Eigen::VectorXd& p) -> ParametricModel {
        if (const auto* m = std::get_if<MeanModel>(&star))
          return MeanModel{p, m->sigma_cov};
        if (const auto* c = std::get_if<LowRankCovModel>(&star))
          return LowRankCovModel{p, c->epsilon};
        return SymGmmModel{p, std::get<SymGmmModel>(star).sigma_cov};
      };
      worst_osmmd = std::max(
          worst_osmmd,
          rel_err(osmmd(model_at(theta), y, cfg).gradient,
                  finite_diff_gradient(
                      [&](const Eigen::VectorXd& p) {
                        return osmmd(model_at(p), y, cfg).value;
                      },
                      theta)));
      const bool nll_defined =
          family != Family::cov ||
          std::get<LowRankCovModel>(star).epsilon > 0.0;
      if (nll_defined)
        worst_nll = std::max(
            worst_nll,
            rel_err(nll(model_at(theta), y).gradient,
                    finite_diff_gradient(
                        [&](const Eigen::VectorXd& p) {
                          return nll(model_at(p), y).value;
                        },
                        theta)));
    }

    const bool pass = worst_grad <= 1e-5 && worst_hess <= 1e-4 &&
                      worst_osmmd <= 1e-5 && worst_nll <= 1e-5;
    ok = ok && pass;
    std::printf(
        "%-4s  grad %.3e  hessian %.3e  osmmd %.3e  nll %.3e  %s\n",
        to_string(family).c_str(), worst_grad, worst_hess, worst_osmmd,
        worst_nll, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

int run_landscape(const std::string& family_arg, int dim, double bandwidth,
                  double epsilon, double truth_norm, int starts, double radius,
                  std::uint64_t seed, const std::string& out) {
  const Family family = family_from_string(family_arg);
  const KernelConfig cfg(bandwidth);

  // Canonical truth along the first axis; the objectives are rotation
  // equivariant so this loses no generality.
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(dim);
  e1(0) = truth_norm;
  ParametricModel star;
  switch (family) {
    case Family::mean:
      star = MeanModel{e1, Eigen::MatrixXd::Identity(dim, dim)};
      break;
    case Family::cov: star = LowRankCovModel{e1, epsilon}; break;
    case Family::gmm:
      star = SymGmmModel{e1, Eigen::MatrixXd::Identity(dim, dim)};
      break;
  }

  const Objective obj = closed_form_objective(star, cfg);
  int dropped = 0;
  const std::vector<CriticalPoint> found =
      scan_stationary(obj, radius, starts, seed, &dropped);

  std::printf("family=%s dim=%d bandwidth=%g starts=%d radius=%g dropped=%d\n",
              to_string(family).c_str(), dim, bandwidth, starts, radius,
              dropped);
  if (family == Family::cov) {
    const auto sd =
        cov_orthogonal_saddle(std::get<LowRankCovModel>(star), cfg);
    if (sd.exists)
      std::printf("predicted orthogonal saddle radius^2 = %.12g\n",
                  *sd.radius_sq);
    else
      std::printf("no orthogonal saddle predicted for this configuration\n");
  }
  for (const CriticalPoint& cp : found) {
    std::printf("%-22s value=%.6e |grad|=%.2e min_eig=%+.3e max_eig=%+.3e",
                cp.label.c_str(), cp.value, cp.grad_norm, cp.min_eig,
                cp.max_eig);
    std::printf(" at (");
    for (int i = 0; i < cp.location.size(); ++i)
      std::printf("%s%.6g", i ? ", " : "", cp.location(i));
    std::printf(")");
    if (family == Family::gmm) {
      const bool sb = gmm_saddle_check(std::get<SymGmmModel>(star),
                                       cp.location, cfg);
      std::printf(" ring-saddle=%s", sb ? "yes" : "no");
    }
    std::printf("\n");
  }

  if (!out.empty()) {
    std::FILE* f = std::fopen(out.c_str(), "w");
    if (!f) throw std::runtime_error("landscape: cannot open " + out);
    std::fprintf(f, "label,value,grad_norm,min_eig,max_eig");
    for (int i = 0; i < dim; ++i) std::fprintf(f, ",x%d", i);
    std::fprintf(f, "\n");
    for (const CriticalPoint& cp : found) {
      std::fprintf(f, "%s,%.17g,%.17g,%.17g,%.17g", cp.label.c_str(), cp.value,
                   cp.grad_norm, cp.min_eig, cp.max_eig);
      for (int i = 0; i < dim; ++i) std::fprintf(f, ",%.17g", cp.location(i));
      std::fprintf(f, "\n");
    }
    std::fclose(f);
  }
  return 0;
}

int run_recover(const std::string& family_arg, const std::string& est_arg,
                int dim, int m, int n_fake, double bandwidth, double lr,
                int iters, const std::string& method, double epsilon,
                double threshold, std::uint64_t seed, const std::string& out) {
  const Family family = family_from_string(family_arg);
  const Estimator est = estimator_from_string(est_arg);
  const HyperDefaults hyper = default_hyper(family, est);

  Rng truth_rng(derive_stream(seed, {0u}));
  TrialSpec spec;
  spec.theta_star = draw_truth(family, dim, epsilon, truth_rng);
  spec.estimator = est;
  spec.m = m;
  spec.n_fake = n_fake;
  spec.kernel = KernelConfig(bandwidth > 0.0 ? bandwidth : hyper.bandwidth);
  spec.opt.learning_rate = lr > 0.0 ? lr : hyper.learning_rate;
  spec.opt.iterations = iters > 0 ? iters : hyper.iterations;
  spec.opt.method = method.empty()
                        ? hyper.method
                        : (method == "gd" ? OptimizerConfig::Method::gd
                                          : OptimizerConfig::Method::adam);
  spec.seed = seed;
  spec.threshold = threshold;

  const TrialReport rep = recovery_trial(spec);
  std::printf(
      "family=%s estimator=%s m=%d error=%.6g success=%d diverged=%d "
      "seconds=%.3f\n",
      to_string(rep.family).c_str(), to_string(rep.estimator).c_str(), rep.m,
      rep.error_metric, rep.success ? 1 : 0, rep.diverged ? 1 : 0,
      rep.seconds);
  if (!out.empty()) emit_outputs(std::vector<TrialReport>{rep}, out);
  return 0;
}

int run_sweep(const std::string& config_path, CLI::App* cmd,
              const std::string& family_arg, const std::string& axis,
              const std::vector<double>& values,
              const std::vector<std::string>& estimators, int repeats, int dim,
              int m, double epsilon, double bandwidth, double lr, int iters,
              const std::string& method, int n_fake, std::uint64_t seed,
              const std::string& out, int threads) {
  SweepConfig cfg;
  if (!config_path.empty()) cfg = sweep_config_from_json_file(config_path);

  if (cmd->count("--family")) cfg.family = family_from_string(family_arg);
  if (cmd->count("--axis")) cfg.axis_name = axis;
  if (cmd->count("--values")) cfg.axis_values = values;
  if (cmd->count("--estimators")) {
    cfg.estimators.clear();
    for (const std::string& e : estimators)
      cfg.estimators.push_back(estimator_from_string(e));
  }
  if (cmd->count("--repeats")) cfg.repeats = repeats;
  if (cmd->count("--dim")) cfg.dim = dim;
  if (cmd->count("--m")) cfg.m = m;
  if (cmd->count("--epsilon")) cfg.epsilon = epsilon;
  if (cmd->count("--bandwidth")) cfg.bandwidth = bandwidth;
  if (cmd->count("--lr")) cfg.learning_rate = lr;
  if (cmd->count("--iters")) cfg.iterations = iters;
  if (cmd->count("--method")) cfg.method = method;
  if (cmd->count("--n")) cfg.n_fake = n_fake;
  if (cmd->count("--seed")) cfg.seed = seed;
  if (cmd->count("--out")) cfg.out_dir = out;
  if (cmd->count("--threads")) cfg.threads = threads;

  const SweepReport rep = success_sweep(cfg);
  for (const SweepPoint& p : rep.points)
    std::printf("%s=%-8g %-6s rate=%.3f (%d/%d) +-%.3f\n",
                rep.axis_name.c_str(), p.axis_value,
                to_string(p.estimator).c_str(), p.rate, p.successes, p.repeats,
                p.half_width);
  if (!cfg.out_dir.empty())
    std::printf("wrote %s/results.csv and plot.svg\n", cfg.out_dir.c_str());
  return 0;
}

int run_unmix(const UnmixConfig& cfg) {
  const UnmixingReport rep = unmixing_experiment(cfg);
  for (const auto& ms : rep.methods)
    std::printf("%-4s mean_dist=%.4f std=%.4f trials=%d\n", ms.method.c_str(),
                ms.mean_dist, ms.std_dist, ms.trials);
  if (!cfg.out_dir.empty()) {
    emit_outputs(rep, cfg.out_dir);
    std::printf("wrote %s/unmix.csv\n", cfg.out_dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-form MMD objectives: landscape checks and recovery experiments"};
  app.require_subcommand(1);

  std::string family, estimator = "osmmd", method, out, config_path, axis;
  std::vector<double> values;
  std::vector<std::string> estimators;
  int dim = 2, m = 200, n_fake = 0, iters = 0, points = 20, starts = 100;
  int repeats = 20, threads = 0;
  double bandwidth = 0.0, lr = 0.0, epsilon = 0.0, radius = 3.0;
  double threshold = 0.0, truth_norm = 1.0;
  double check_bandwidth = 2.0, check_epsilon = 0.4, land_bandwidth = 1.0;
  std::uint64_t seed = 1;

  auto* check = app.add_subcommand("check-grad",
                                   "finite-difference gradient/Hessian suites");
  check->add_option("--family", family, "mean|cov|gmm (default: all)");
  check->add_option("--dim", dim, "parameter dimension");
  check->add_option("--bandwidth", check_bandwidth, "kernel bandwidth sigma^2");
  check->add_option("--epsilon", check_epsilon, "covariance noise scale");
  check->add_option("--points", points, "random evaluation points");
  check->add_option("--seed", seed, "master seed");

  auto* land = app.add_subcommand("landscape",
                                  "stationary-point scan and classification");
  land->add_option("--family", family, "mean|cov|gmm")->required();
  land->add_option("--dim", dim, "parameter dimension");
  land->add_option("--bandwidth", land_bandwidth, "kernel bandwidth sigma^2");
  land->add_option("--epsilon", epsilon, "covariance noise scale");
  land->add_option("--truth-norm", truth_norm, "norm of the planted truth");
  land->add_option("--starts", starts, "scan starts");
  land->add_option("--radius", radius, "scan ball radius");
  land->add_option("--seed", seed, "master seed");
  land->add_option("--out", out, "critical-point csv path");

  auto* rec = app.add_subcommand("recover", "single parameter-recovery trial");
  rec->add_option("--family", family, "mean|cov|gmm")->required();
  rec->add_option("--estimator", estimator, "mmd|osmmd|mle");
  rec->add_option("--dim", dim, "parameter dimension");
  rec->add_option("--m", m, "data sample size");
  rec->add_option("--n", n_fake, "model-side sample size (mmd)");
  rec->add_option("--bandwidth", bandwidth, "kernel bandwidth sigma^2");
  rec->add_option("--lr", lr, "learning rate");
  rec->add_option("--iters", iters, "iterations");
  rec->add_option("--method", method, "gd|adam");
  rec->add_option("--epsilon", epsilon, "covariance noise scale");
  rec->add_option("--threshold", threshold, "success threshold override");
  rec->add_option("--seed", seed, "master seed");
  rec->add_option("--out", out, "output directory for trials.csv");

  auto* sw = app.add_subcommand("sweep", "success-rate sweep over m or epsilon");
  sw->add_option("--config", config_path, "JSON config file");
  sw->add_option("--family", family, "mean|cov|gmm");
  sw->add_option("--axis", axis, "m|epsilon");
  sw->add_option("--values", values, "axis values")->delimiter(',');
  sw->add_option("--estimators", estimators, "subset of mmd,osmmd,mle")
      ->delimiter(',');
  sw->add_option("--repeats", repeats, "trials per point");
  sw->add_option("--dim", dim, "parameter dimension");
  sw->add_option("--m", m, "data size when the axis is epsilon");
  sw->add_option("--epsilon", epsilon, "noise scale when the axis is m");
  sw->add_option("--bandwidth", bandwidth, "kernel bandwidth sigma^2");
  sw->add_option("--lr", lr, "learning rate");
  sw->add_option("--iters", iters, "iterations");
  sw->add_option("--method", method, "gd|adam");
  sw->add_option("--n", n_fake, "model-side sample size (mmd)");
  sw->add_option("--seed", seed, "master seed");
  sw->add_option("--out", out, "output directory");
  sw->add_option("--threads", threads, "worker threads (0 = hardware)");

  UnmixConfig ucfg;
  auto* un = app.add_subcommand("unmix", "linear unmixing experiment");
  un->add_option("--dim", ucfg.dim, "observation dimension");
  un->add_option("--rank", ucfg.rank, "number of endmembers");
  un->add_option("--n", ucfg.n, "data sample size");
  un->add_option("--noise", ucfg.noise_var, "noise variance");
  un->add_option("--trials", ucfg.trials, "independent trials");
  un->add_option("--epochs", ucfg.epochs, "refinement epochs");
  un->add_option("--n-fake", ucfg.n_fake, "model-side sample size");
  un->add_option("--lr", ucfg.learning_rate, "learning rate");
  un->add_option("--bandwidth", ucfg.bandwidth, "kernel bandwidth sigma^2");
  un->add_option("--seed", ucfg.seed, "master seed");
  un->add_option("--threads", ucfg.threads, "worker threads (0 = hardware)");
  un->add_option("--out", ucfg.out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed())
      return run_check_grad(family, dim, check_bandwidth, check_epsilon,
                            points, seed);
    if (land->parsed())
      return run_landscape(family, dim, land_bandwidth, epsilon, truth_norm,
                           starts, radius, seed, out);
    if (rec->parsed())
      return run_recover(family, estimator, dim, m, n_fake, bandwidth, lr,
                         iters, method, epsilon, threshold, seed, out);
    if (sw->parsed())
      return run_sweep(config_path, sw, family, axis, values, estimators,
                       repeats, dim, m, epsilon, bandwidth, lr, iters, method,
                       n_fake, seed, out, threads);
    if (un->parsed()) return run_unmix(ucfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
