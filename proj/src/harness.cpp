#include "mmdopt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

#include "mmdopt/errors.hpp"
#include "mmdopt/estimators.hpp"
#include "mmdopt/rng.hpp"

namespace mmdopt {
namespace {

using json = nlohmann::json;

// Fixed tags for deriving independent substreams of one trial seed.
constexpr std::uint64_t kTagTruth = 0;
constexpr std::uint64_t kTagData = 1;
constexpr std::uint64_t kTagInit = 2;
constexpr std::uint64_t kTagEpoch = 3;

void run_parallel(int n_tasks, int threads,
                  const std::function<void(int)>& fn) {
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, n_tasks);
  if (threads <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_tasks) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

Eigen::VectorXd gaussian_vector(Rng& rng, int d, double scale) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * rng.gaussian();
  return v;
}

ParametricModel model_at(const ParametricModel& star,
                         const Eigen::VectorXd& theta) {
  return std::visit(
      [&](const auto& s) -> ParametricModel {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MeanModel>) {
          return MeanModel{theta, s.sigma_cov};
        } else if constexpr (std::is_same_v<T, LowRankCovModel>) {
          return LowRankCovModel{theta, s.epsilon};
        } else if constexpr (std::is_same_v<T, SymGmmModel>) {
          return SymGmmModel{theta, s.sigma_cov};
        } else {
          throw std::invalid_argument("recovery: unsupported family");
        }
      },
      star);
}

Eigen::VectorXd free_param(const ParametricModel& model) {
  return std::visit(
      [](const auto& s) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MeanModel>) {
          return s.mu;
        } else if constexpr (std::is_same_v<T, LowRankCovModel>) {
          return s.a;
        } else if constexpr (std::is_same_v<T, SymGmmModel>) {
          return s.mu;
        } else {
          throw std::invalid_argument("recovery: unsupported family");
        }
      },
      model);
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::mean: return "mean";
    case Family::cov: return "cov";
    case Family::gmm: return "gmm";
  }
  return "?";
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::mmd: return "mmd";
    case Estimator::osmmd: return "osmmd";
    case Estimator::mle: return "mle";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "mean") return Family::mean;
  if (s == "cov") return Family::cov;
  if (s == "gmm") return Family::gmm;
  throw ConfigError("unknown family '" + s + "'");
}

Estimator estimator_from_string(const std::string& s) {
  if (s == "mmd") return Estimator::mmd;
  if (s == "osmmd") return Estimator::osmmd;
  if (s == "mle") return Estimator::mle;
  throw ConfigError("unknown estimator '" + s + "'");
}

Family family_of(const ParametricModel& model) {
  return std::visit(
      [](const auto& s) -> Family {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MeanModel>) {
          return Family::mean;
        } else if constexpr (std::is_same_v<T, LowRankCovModel>) {
          return Family::cov;
        } else if constexpr (std::is_same_v<T, SymGmmModel>) {
          return Family::gmm;
        } else {
          throw std::invalid_argument(
              "family_of: unmixing has no recovery family");
        }
      },
      model);
}

HyperDefaults default_hyper(Family family, Estimator estimator) {
  HyperDefaults h{10.0, 0.1, 500, OptimizerConfig::Method::adam};
  switch (family) {
    case Family::mean:
      h.iterations = 500;
      break;
    case Family::cov:
      h.iterations = 1000;
      if (estimator == Estimator::mmd) h.bandwidth = 100.0;
      if (estimator == Estimator::mle) h.iterations = 2000;
      break;
    case Family::gmm:
      h.iterations = 1000;
      break;
  }
  return h;
}

double recovery_error(const ParametricModel& theta_star,
                      const Eigen::VectorXd& theta) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        const double d = static_cast<double>(theta.size());
        if constexpr (std::is_same_v<T, MeanModel>) {
          return (theta - s.mu).norm() / d;
        } else if constexpr (std::is_same_v<T, LowRankCovModel>) {
          // || a a^T - a* a*^T ||_F via the rank-one identity.
          const double r = theta.squaredNorm();
          const double ss = s.a.squaredNorm();
          const double ip = theta.dot(s.a);
          const double fro2 =
              std::max(r * r + ss * ss - 2.0 * ip * ip, 0.0);
          return std::sqrt(fro2) / d;
        } else if constexpr (std::is_same_v<T, SymGmmModel>) {
          return std::min((theta - s.mu).norm(), (theta + s.mu).norm()) / d;
        } else {
          throw std::invalid_argument("recovery_error: unsupported family");
        }
      },
      theta_star);
}

double success_threshold(Family family) {
  switch (family) {
    case Family::mean: return 0.02;
    case Family::cov: return 0.05;
    case Family::gmm: return 0.02;
  }
  return 0.02;
}

TrialReport recovery_trial(const TrialSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const Family family = family_of(spec.theta_star);
  if (spec.m < 2)
    throw std::invalid_argument("recovery_trial: need at least two data points");
  const int d = static_cast<int>(free_param(spec.theta_star).size());
  const int n_fake = spec.n_fake > 0 ? spec.n_fake : spec.m;

  const Sample y =
      sample(spec.theta_star, spec.m, derive_stream(spec.seed, {kTagData}));

  Eigen::VectorXd theta;
  if (spec.init) {
    if (spec.init->size() != d)
      throw std::invalid_argument("recovery_trial: init size mismatch");
    theta = *spec.init;
  } else if (family == Family::mean) {
    theta = Eigen::VectorXd::Zero(d);
  } else {
    Rng rng(derive_stream(spec.seed, {kTagInit}));
    theta = gaussian_vector(rng, d, 1.0 / std::sqrt(static_cast<double>(d)));
  }

  // Evaluation hooks per estimator; the data-only Gram term is cached once.
  std::optional<ReparamMmd> reparam;
  double yy_mean = 0.0;
  if (spec.estimator == Estimator::mmd) {
    reparam.emplace(spec.theta_star, y, spec.kernel, n_fake);
  } else if (spec.estimator == Estimator::osmmd) {
    yy_mean = detail::mean_offdiag_gram(y.points, spec.kernel.bandwidth);
  }

  DescentState state(spec.opt, d);
  bool diverged = false;
  for (int step = 0; step < spec.opt.iterations; ++step) {
    Eigen::VectorXd grad;
    switch (spec.estimator) {
      case Estimator::mmd:
        grad = reparam
                   ->eval(theta, derive_stream(spec.seed, {kTagEpoch,
                                               static_cast<std::uint64_t>(step)}),
                          false)
                   .gradient;
        break;
      case Estimator::osmmd:
        grad = detail::osmmd_with_yy(model_at(spec.theta_star, theta), y.points,
                                     spec.kernel, yy_mean)
                   .gradient;
        break;
      case Estimator::mle:
        grad = nll(model_at(spec.theta_star, theta), y).gradient;
        break;
    }
    if (!grad.allFinite() || !theta.allFinite()) {
      diverged = true;
      break;
    }
    state.step(theta, grad);
  }
  if (!theta.allFinite()) diverged = true;

  TrialReport report;
  report.family = family;
  report.estimator = spec.estimator;
  report.m = spec.m;
  report.n_fake = spec.estimator == Estimator::mmd ? n_fake : 0;
  report.seed = spec.seed;
  report.final_param = theta;
  report.diverged = diverged;
  report.error_metric =
      diverged ? std::numeric_limits<double>::infinity()
               : recovery_error(spec.theta_star, theta);
  const double thr =
      spec.threshold > 0.0 ? spec.threshold : success_threshold(family);
  report.success = !diverged && report.error_metric <= thr;
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return report;
}

namespace {

SweepConfig sweep_config_from_json(const json& j) {
  SweepConfig cfg;
  try {
    if (!j.contains("family")) throw ConfigError("sweep config: missing 'family'");
    cfg.family = family_from_string(j.at("family").get<std::string>());

    if (j.contains("axis")) {
      const auto& axis = j.at("axis");
      cfg.axis_name = axis.at("name").get<std::string>();
      cfg.axis_values = axis.at("values").get<std::vector<double>>();
    } else {
      if (!j.contains("axis_name") || !j.contains("axis_values"))
        throw ConfigError("sweep config: missing 'axis_name'/'axis_values'");
      cfg.axis_name = j.at("axis_name").get<std::string>();
      cfg.axis_values = j.at("axis_values").get<std::vector<double>>();
    }

    if (!j.contains("estimators"))
      throw ConfigError("sweep config: missing 'estimators'");
    for (const auto& e : j.at("estimators"))
      cfg.estimators.push_back(estimator_from_string(e.get<std::string>()));

    if (!j.contains("repeats")) throw ConfigError("sweep config: missing 'repeats'");
    cfg.repeats = j.at("repeats").get<int>();

    cfg.dim = j.value("dim", cfg.dim);
    cfg.m = j.value("m", cfg.m);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.bandwidth = j.value("bandwidth", cfg.bandwidth);
    cfg.learning_rate = j.value("learning_rate", j.value("lr", cfg.learning_rate));
    cfg.iterations = j.value("iterations", j.value("iters", cfg.iterations));
    cfg.method = j.value("method", cfg.method);
    cfg.n_fake = j.value("n_fake", j.value("n", cfg.n_fake));
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", j.value("out", cfg.out_dir));
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  return cfg;
}

void validate_sweep(const SweepConfig& cfg) {
  if (cfg.repeats < 1) throw ConfigError("sweep config: repeats must be >= 1");
  if (cfg.dim < 1) throw ConfigError("sweep config: dim must be >= 1");
  if (cfg.axis_values.empty())
    throw ConfigError("sweep config: empty axis_values");
  if (cfg.estimators.empty())
    throw ConfigError("sweep config: empty estimators");
  if (cfg.axis_name != "m" && cfg.axis_name != "epsilon")
    throw ConfigError("sweep config: axis must be 'm' or 'epsilon'");
  if (cfg.axis_name == "epsilon" && cfg.family != Family::cov)
    throw ConfigError("sweep config: epsilon axis needs the cov family");
  if (cfg.axis_name == "m") {
    for (double v : cfg.axis_values)
      if (!(v >= 2.0) || v != std::floor(v))
        throw ConfigError("sweep config: m values must be integers >= 2");
  } else {
    for (double v : cfg.axis_values)
      if (!(v >= 0.0)) throw ConfigError("sweep config: epsilon must be >= 0");
  }
  const bool has_mle =
      std::find(cfg.estimators.begin(), cfg.estimators.end(), Estimator::mle) !=
      cfg.estimators.end();
  if (has_mle && cfg.family == Family::cov) {
    const bool eps_zero =
        cfg.axis_name == "epsilon"
            ? std::any_of(cfg.axis_values.begin(), cfg.axis_values.end(),
                          [](double v) { return v == 0.0; })
            : cfg.epsilon == 0.0;
    if (eps_zero)
      throw ConfigError("sweep config: mle needs epsilon > 0");
  }
  if (!(cfg.method.empty() || cfg.method == "gd" || cfg.method == "adam"))
    throw ConfigError("sweep config: method must be 'gd' or 'adam'");
}

ParametricModel draw_truth(Family family, int dim, double epsilon, Rng& rng) {
  switch (family) {
    case Family::mean: {
      Eigen::VectorXd mu = gaussian_vector(rng, dim, 1.0);
      return MeanModel{mu, Eigen::MatrixXd::Identity(dim, dim)};
    }
    case Family::cov: {
      Eigen::VectorXd a = gaussian_vector(rng, dim, 1.0);
      const double nrm = a.norm();
      if (nrm > 0.0) a /= nrm;
      else a(0) = 1.0;
      return LowRankCovModel{a, epsilon};
    }
    case Family::gmm: {
      Eigen::VectorXd mu = gaussian_vector(rng, dim, 1.0);
      return SymGmmModel{mu, Eigen::MatrixXd::Identity(dim, dim)};
    }
  }
  throw std::logic_error("draw_truth: unreachable");
}

}  // namespace

SweepConfig sweep_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep config: invalid JSON: ") + e.what());
  }
  SweepConfig cfg = sweep_config_from_json(j);
  validate_sweep(cfg);
  return cfg;
}

SweepConfig sweep_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("sweep config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sweep_config_from_json_text(ss.str());
}

SweepReport success_sweep(const SweepConfig& config) {
  validate_sweep(config);
  const int n_axis = static_cast<int>(config.axis_values.size());
  const int n_est = static_cast<int>(config.estimators.size());
  const int n_tasks = n_axis * config.repeats;

  std::vector<std::vector<std::vector<TrialReport>>> results(
      n_axis, std::vector<std::vector<TrialReport>>(
                  n_est, std::vector<TrialReport>(config.repeats)));

  run_parallel(n_tasks, config.threads, [&](int task) {
    const int axis_idx = task / config.repeats;
    const int rep = task % config.repeats;
    const double axis_value = config.axis_values[axis_idx];

    const std::uint64_t trial_seed = derive_stream(
        config.seed, {0x5eedu, static_cast<std::uint64_t>(axis_idx),
                      static_cast<std::uint64_t>(rep)});
    const double epsilon =
        config.axis_name == "epsilon" ? axis_value : config.epsilon;
    const int m = config.axis_name == "m" ? static_cast<int>(axis_value)
                                          : config.m;

    Rng truth_rng(derive_stream(trial_seed, {kTagTruth}));
    const ParametricModel star =
        draw_truth(config.family, config.dim, epsilon, truth_rng);

    for (int e = 0; e < n_est; ++e) {
      const Estimator est = config.estimators[e];
      const HyperDefaults hyper = default_hyper(config.family, est);
      TrialSpec spec;
      spec.theta_star = star;
      spec.estimator = est;
      spec.m = m;
      spec.n_fake = config.n_fake;
      spec.kernel = KernelConfig(
          config.bandwidth > 0.0 ? config.bandwidth : hyper.bandwidth);
      spec.opt.method = config.method.empty()
                            ? hyper.method
                            : (config.method == "gd"
                                   ? OptimizerConfig::Method::gd
                                   : OptimizerConfig::Method::adam);
      spec.opt.learning_rate = config.learning_rate > 0.0
                                   ? config.learning_rate
                                   : hyper.learning_rate;
      spec.opt.iterations =
          config.iterations > 0 ? config.iterations : hyper.iterations;
      spec.seed = trial_seed;
      results[axis_idx][e][rep] = recovery_trial(spec);
    }
  });

  SweepReport report;
  report.axis_name = config.axis_name;
  for (int a = 0; a < n_axis; ++a) {
    for (int e = 0; e < n_est; ++e) {
      SweepPoint pt;
      pt.axis_value = config.axis_values[a];
      pt.estimator = config.estimators[e];
      pt.repeats = config.repeats;
      for (const auto& r : results[a][e]) pt.successes += r.success ? 1 : 0;
      const double p =
          static_cast<double>(pt.successes) / static_cast<double>(pt.repeats);
      pt.rate = p;
      pt.half_width =
          1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(pt.repeats));
      report.points.push_back(pt);
    }
  }
  if (!config.out_dir.empty()) emit_outputs(report, config.out_dir);
  return report;
}

UnmixingReport unmixing_experiment(const UnmixConfig& config) {
  if (config.rank < 2 || config.dim < config.rank)
    throw ConfigError("unmix config: need dim >= rank >= 2");
  if (config.n < config.rank)
    throw ConfigError("unmix config: need n >= rank");
  if (config.trials < 1) throw ConfigError("unmix config: trials must be >= 1");
  if (config.noise_var < 0.0)
    throw ConfigError("unmix config: negative noise variance");
  if (config.n_fake < 2)
    throw ConfigError("unmix config: need at least two model points");
  if (!(config.learning_rate > 0.0) || !(config.bandwidth > 0.0))
    throw ConfigError("unmix config: rate and bandwidth must be positive");

  const int d = config.dim;
  const int r = config.rank;
  std::vector<double> dist_vca(config.trials);
  std::vector<double> dist_mmd(config.trials);

  run_parallel(config.trials, config.threads, [&](int t) {
    const std::uint64_t stream = derive_stream(
        config.seed, {0xabu, static_cast<std::uint64_t>(t)});

    Rng truth_rng(derive_stream(stream, {kTagTruth}));
    Eigen::MatrixXd a_star(d, r);
    for (int attempt = 0;; ++attempt) {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) a_star(i, j) = truth_rng.gaussian();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(a_star);
      if (svd.singularValues()(r - 1) >
          1e-8 * svd.singularValues()(0))
        break;
      if (attempt > 100)
        throw InitError("unmixing: could not draw a full-rank mixing matrix");
    }

    const UnmixingModel truth{a_star, config.noise_var};
    const Sample data =
        sample(truth, config.n, derive_stream(stream, {kTagData}));

    const Eigen::MatrixXd a0 =
        vca_init(data, r, derive_stream(stream, {kTagInit}));
    dist_vca[t] = permutation_distance(a0, a_star);

    const ReparamMmd objective(UnmixingModel{a0, config.noise_var}, data,
                               KernelConfig(config.bandwidth), config.n_fake);
    OptimizerConfig opt;
    opt.method = OptimizerConfig::Method::adam;
    opt.learning_rate = config.learning_rate;
    opt.iterations = config.epochs;
    DescentState state(opt, d * r);

    Eigen::VectorXd theta =
        Eigen::Map<const Eigen::VectorXd>(a0.data(), d * r);
    Eigen::VectorXd last_good = theta;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const Eigen::VectorXd grad =
          objective
              .eval(theta, derive_stream(stream, {kTagEpoch,
                                        static_cast<std::uint64_t>(epoch)}),
                    false)
              .gradient;
      if (!grad.allFinite() || !theta.allFinite()) break;
      last_good = theta;
      state.step(theta, grad);
    }
    if (!theta.allFinite()) theta = last_good;
    const Eigen::Map<const Eigen::MatrixXd> a_hat(theta.data(), d, r);
    dist_mmd[t] = permutation_distance(a_hat, a_star);
  });

  auto stats = [&](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = v.size() > 1 ? var / (n - 1.0) : 0.0;
    return std::pair<double, double>(mean, std::sqrt(var));
  };

  UnmixingReport report;
  report.noise_var = config.noise_var;
  const auto [vm, vs] = stats(dist_vca);
  const auto [mm, ms] = stats(dist_mmd);
  report.methods.push_back({"vca", vm, vs, config.trials});
  report.methods.push_back({"mmd", mm, ms, config.trials});
  if (!config.out_dir.empty()) emit_outputs(report, config.out_dir);
  return report;
}

}  // namespace mmdopt
