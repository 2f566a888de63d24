#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmdopt/kernel.hpp"
#include "mmdopt/models.hpp"
#include "mmdopt/optimize.hpp"

namespace mmdopt {

enum class Family { mean, cov, gmm };
enum class Estimator { mmd, osmmd, mle };

std::string to_string(Family f);
std::string to_string(Estimator e);
Family family_from_string(const std::string& s);        // ConfigError
Estimator estimator_from_string(const std::string& s);  // ConfigError

Family family_of(const ParametricModel& model);  // unmixing -> invalid_argument

// Hyper-parameters used when a sweep or trial leaves a field unset.
struct HyperDefaults {
  double bandwidth;
  double learning_rate;
  int iterations;
  OptimizerConfig::Method method;
};
HyperDefaults default_hyper(Family family, Estimator estimator);

// Normalised parameter-recovery distance: mean and mixture means divide the
// (sign-minimised) Euclidean error by the dimension, the covariance family
// compares the induced rank-one matrices in Frobenius norm over dimension.
double recovery_error(const ParametricModel& theta_star,
                      const Eigen::VectorXd& theta);
double success_threshold(Family family);

struct TrialReport {
  Family family = Family::mean;
  Estimator estimator = Estimator::osmmd;
  int m = 0;       // data points
  int n_fake = 0;  // model-side points per evaluation (mmd only)
  std::uint64_t seed = 0;
  Eigen::VectorXd final_param;
  double error_metric = 0.0;
  bool success = false;
  bool diverged = false;
  double seconds = 0.0;
};

struct TrialSpec {
  ParametricModel theta_star;
  Estimator estimator = Estimator::osmmd;
  int m = 0;
  int n_fake = 0;  // 0 -> m
  OptimizerConfig opt;
  KernelConfig kernel{1.0};
  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> init;  // override the default initial point
  double threshold = 0.0;               // 0 -> family default
};

// Draws data from theta_star, optimises the chosen estimator from the
// family's standard initial point, and scores the recovered parameter.
// A diverged optimisation counts as failure, never as an exception.
TrialReport recovery_trial(const TrialSpec& spec);

struct SweepConfig {
  Family family = Family::mean;
  std::string axis_name;  // "m" or "epsilon"
  std::vector<double> axis_values;
  std::vector<Estimator> estimators;
  int repeats = 0;
  int dim = 2;
  int m = 200;             // data size when the axis is not m
  double epsilon = 1e-5;   // covariance noise when the axis is not epsilon
  double bandwidth = 0.0;  // 0 -> per-family default
  double learning_rate = 0.0;
  int iterations = 0;
  std::string method;  // "", "gd", "adam"
  int n_fake = 0;      // 0 -> n = m
  std::uint64_t seed = 1;
  std::string out_dir;  // empty -> nothing written
  int threads = 0;      // 0 -> hardware count
};

// Parses the JSON object form of SweepConfig (same keys as the fields;
// estimators and axis values as arrays). Unknown family/estimator names,
// missing required keys, or repeats < 1 raise ConfigError.
SweepConfig sweep_config_from_json_text(const std::string& text);
SweepConfig sweep_config_from_json_file(const std::string& path);

struct SweepPoint {
  double axis_value = 0.0;
  Estimator estimator = Estimator::osmmd;
  int repeats = 0;
  int successes = 0;
  double rate = 0.0;
  double half_width = 0.0;  // normal-approximation 95% half width
};

struct SweepReport {
  std::string axis_name;
  std::vector<SweepPoint> points;
};

// Runs repeats x axis x estimator recovery trials (thread pool, deterministic
// per-trial seeding) and aggregates success rates. Writes results.csv and
// plot.svg into out_dir when set.
SweepReport success_sweep(const SweepConfig& config);

// Simplified vertex-component initialisation: project onto the top-r
// principal subspace of the (uncentered) data, then repeatedly pick the point
// extreme along a random direction orthogonal to the vertices found so far.
// Returns the chosen points as the d x r column matrix. Rank-deficient data
// raises InitError.
Eigen::MatrixXd vca_init(const Sample& x, int r, std::uint64_t seed);

// Smallest sum of squared column distances over all column permutations.
// Column counts above 8 raise UnsupportedError.
double permutation_distance(const Eigen::MatrixXd& a_hat,
                            const Eigen::MatrixXd& a_star);

struct UnmixConfig {
  int dim = 10;
  int rank = 3;
  int n = 100;
  double noise_var = 0.001;
  int trials = 50;
  int epochs = 5000;
  int n_fake = 256;
  double learning_rate = 0.1;
  double bandwidth = 1.0;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir;
};

struct UnmixingReport {
  double noise_var = 0.0;
  struct MethodStat {
    std::string method;  // "vca" (initialisation) or "mmd" (refined)
    double mean_dist = 0.0;
    double std_dist = 0.0;
    int trials = 0;
  };
  std::vector<MethodStat> methods;
};

// Random ground-truth mixing matrices, VCA initialisation, pathwise-MMD
// refinement, permutation-matched recovery distances.
UnmixingReport unmixing_experiment(const UnmixConfig& config);

// CSV/SVG emission. Empty reports produce a header-only CSV and a warning on
// stderr. Numeric cells use max-precision round-trip formatting.
void emit_outputs(const SweepReport& report, const std::string& out_dir);
void emit_outputs(const std::vector<TrialReport>& trials,
                  const std::string& out_dir);
void emit_outputs(const UnmixingReport& report, const std::string& out_dir);

// Re-parses a sweep results.csv (for round-trip checks and plotting reuse).
SweepReport read_sweep_csv(const std::string& path);

}  // namespace mmdopt
