#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mmdopt/errors.hpp"
#include "mmdopt/harness.hpp"
#include "mmdopt/models.hpp"
#include "mmdopt/rng.hpp"

using namespace mmdopt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const SweepPoint& point_at(const SweepReport& rep, double axis_value) {
  for (const SweepPoint& p : rep.points)
    if (p.axis_value == axis_value) return p;
  REQUIRE(false);
  return rep.points.front();
}

}  // namespace

TEST_CASE("family and estimator names round-trip") {
  for (Family f : {Family::mean, Family::cov, Family::gmm})
    CHECK(family_from_string(to_string(f)) == f);
  for (Estimator e : {Estimator::mmd, Estimator::osmmd, Estimator::mle})
    CHECK(estimator_from_string(to_string(e)) == e);
  CHECK_THROWS_AS(family_from_string("laplace"), ConfigError);
  CHECK_THROWS_AS(estimator_from_string("map"), ConfigError);

  CHECK(family_of(MeanModel{Eigen::VectorXd::Zero(2),
                            Eigen::MatrixXd::Identity(2, 2)}) == Family::mean);
  CHECK(family_of(LowRankCovModel{Eigen::VectorXd::Ones(2), 0.1}) ==
        Family::cov);
  CHECK(family_of(SymGmmModel{Eigen::VectorXd::Ones(2),
                              Eigen::MatrixXd::Identity(2, 2)}) == Family::gmm);
  CHECK_THROWS_AS(family_of(UnmixingModel{Eigen::MatrixXd::Ones(2, 2), 0.0}),
                  std::invalid_argument);
}

TEST_CASE("per-family hyper defaults") {
  CHECK(default_hyper(Family::mean, Estimator::osmmd).bandwidth == 10.0);
  CHECK(default_hyper(Family::mean, Estimator::osmmd).iterations == 500);
  CHECK(default_hyper(Family::cov, Estimator::mmd).bandwidth == 100.0);
  CHECK(default_hyper(Family::cov, Estimator::mle).iterations == 2000);
  CHECK(default_hyper(Family::gmm, Estimator::mmd).iterations == 1000);
  CHECK(default_hyper(Family::mean, Estimator::mle).method ==
        OptimizerConfig::Method::adam);
}

TEST_CASE("recovery error metric") {
  Eigen::VectorXd mu(2);
  mu << 1.0, -2.0;
  const ParametricModel mean_star =
      MeanModel{mu, Eigen::MatrixXd::Identity(2, 2)};
  CHECK(recovery_error(mean_star, mu) == 0.0);
  Eigen::VectorXd off = mu;
  off(0) += 1.0;
  CHECK(recovery_error(mean_star, off) == doctest::Approx(0.5));

  const ParametricModel gmm_star =
      SymGmmModel{mu, Eigen::MatrixXd::Identity(2, 2)};
  CHECK(recovery_error(gmm_star, -mu) == 0.0);
  Eigen::VectorXd probe(2);
  probe << 0.3, 0.4;
  CHECK(recovery_error(gmm_star, probe) ==
        doctest::Approx(recovery_error(gmm_star, -probe)));

  Eigen::VectorXd a_star(2);
  a_star << 1.0, 0.0;
  const ParametricModel cov_star = LowRankCovModel{a_star, 0.0};
  CHECK(recovery_error(cov_star, -a_star) == 0.0);
  CHECK(recovery_error(cov_star, Eigen::VectorXd::Zero(2)) ==
        doctest::Approx(0.5));

  CHECK(success_threshold(Family::mean) == 0.02);
  CHECK(success_threshold(Family::cov) == 0.05);
  CHECK(success_threshold(Family::gmm) == 0.02);
}

TEST_CASE("recovery trial at the truth with zero steps scores exactly zero") {
  Eigen::VectorXd mu(3);
  mu << 0.4, -1.1, 0.9;
  TrialSpec spec;
  spec.theta_star = MeanModel{mu, Eigen::MatrixXd::Identity(3, 3)};
  spec.estimator = Estimator::osmmd;
  spec.m = 50;
  spec.opt.iterations = 0;
  spec.kernel = KernelConfig(10.0);
  spec.seed = 4;
  spec.init = mu;
  const TrialReport rep = recovery_trial(spec);
  CHECK(rep.error_metric == 0.0);
  CHECK(rep.success);
  CHECK(!rep.diverged);
  CHECK(rep.m == 50);
  CHECK(rep.final_param == mu);
  CHECK(rep.seconds >= 0.0);

  spec.init = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(recovery_trial(spec), std::invalid_argument);
  spec.init.reset();
  spec.m = 1;
  CHECK_THROWS_AS(recovery_trial(spec), std::invalid_argument);
}

TEST_CASE("recovery trials succeed at comfortable sample sizes") {
  SUBCASE("mean family, one-sample objective, plain descent") {
    Eigen::VectorXd mu(4);
    mu << 1.0, -0.5, 0.25, 2.0;
    TrialSpec spec;
    spec.theta_star = MeanModel{mu, Eigen::MatrixXd::Identity(4, 4)};
    spec.estimator = Estimator::osmmd;
    spec.m = 4000;
    spec.kernel = KernelConfig(10.0);
    spec.opt.method = OptimizerConfig::Method::gd;
    spec.opt.learning_rate = 5.0;
    spec.opt.iterations = 300;
    spec.seed = 11;
    const TrialReport rep = recovery_trial(spec);
    CHECK(!rep.diverged);
    CHECK(rep.error_metric < 0.02);
    CHECK(rep.success);
  }

  SUBCASE("mean family, likelihood estimator lands on the sample mean") {
    Eigen::VectorXd mu(4);
    mu << -0.3, 0.8, 0.1, -1.2;
    TrialSpec spec;
    spec.theta_star = MeanModel{mu, Eigen::MatrixXd::Identity(4, 4)};
    spec.estimator = Estimator::mle;
    spec.m = 4000;
    spec.opt.method = OptimizerConfig::Method::gd;
    spec.opt.learning_rate = 0.5;
    spec.opt.iterations = 200;
    spec.seed = 12;
    const TrialReport rep = recovery_trial(spec);

    const Sample y = sample(spec.theta_star, spec.m,
                            derive_stream(spec.seed, {1u}));  // data tag
    const Eigen::VectorXd ybar = y.points.colwise().mean().transpose();
    CHECK((rep.final_param - ybar).norm() < 1e-8);
    CHECK(rep.success);
  }

  SUBCASE("mixture family, one-sample objective, sign-insensitive score") {
    Eigen::VectorXd mu(2);
    mu << 0.9, -1.4;
    TrialSpec spec;
    spec.theta_star = SymGmmModel{mu, Eigen::MatrixXd::Identity(2, 2)};
    spec.estimator = Estimator::osmmd;
    spec.m = 4000;
    spec.kernel = KernelConfig(10.0);
    spec.opt.method = OptimizerConfig::Method::gd;
    spec.opt.learning_rate = 5.0;
    spec.opt.iterations = 400;
    spec.seed = 13;
    const TrialReport rep = recovery_trial(spec);
    CHECK(!rep.diverged);
    CHECK(rep.error_metric < 0.02);
  }
}

TEST_CASE("sweep configuration parsing") {
  SUBCASE("full object with canonical keys") {
    const SweepConfig cfg = sweep_config_from_json_text(R"({
      "family": "cov",
      "axis_name": "epsilon",
      "axis_values": [1e-5, 0.5],
      "estimators": ["mmd", "osmmd", "mle"],
      "repeats": 10,
      "dim": 3,
      "m": 150,
      "bandwidth": 5.0,
      "learning_rate": 0.2,
      "iterations": 50,
      "method": "gd",
      "n_fake": 64,
      "seed": 9,
      "out_dir": "somewhere",
      "threads": 2
    })");
    CHECK(cfg.family == Family::cov);
    CHECK(cfg.axis_name == "epsilon");
    CHECK(cfg.axis_values == std::vector<double>{1e-5, 0.5});
    CHECK(cfg.estimators ==
          std::vector<Estimator>{Estimator::mmd, Estimator::osmmd,
                                 Estimator::mle});
    CHECK(cfg.repeats == 10);
    CHECK(cfg.dim == 3);
    CHECK(cfg.m == 150);
    CHECK(cfg.bandwidth == 5.0);
    CHECK(cfg.learning_rate == 0.2);
    CHECK(cfg.iterations == 50);
    CHECK(cfg.method == "gd");
    CHECK(cfg.n_fake == 64);
    CHECK(cfg.seed == 9);
    CHECK(cfg.out_dir == "somewhere");
    CHECK(cfg.threads == 2);
  }

  SUBCASE("short aliases and the nested axis form") {
    const SweepConfig cfg = sweep_config_from_json_text(R"({
      "family": "mean",
      "axis": {"name": "m", "values": [10, 100]},
      "estimators": ["osmmd"],
      "repeats": 3,
      "lr": 0.25,
      "iters": 77,
      "n": 32,
      "out": "short"
    })");
    CHECK(cfg.axis_name == "m");
    CHECK(cfg.learning_rate == 0.25);
    CHECK(cfg.iterations == 77);
    CHECK(cfg.n_fake == 32);
    CHECK(cfg.out_dir == "short");
  }

  SUBCASE("rejected configurations") {
    const auto bad = [](const std::string& text) {
      CHECK_THROWS_AS(sweep_config_from_json_text(text), ConfigError);
    };
    bad("not json at all");
    bad(R"({"axis_name":"m","axis_values":[10],"estimators":["mmd"],"repeats":1})");
    bad(R"({"family":"mean","axis_name":"m","axis_values":[10],"estimators":["map"],"repeats":1})");
    bad(R"({"family":"mean","axis_name":"m","axis_values":[10],"estimators":["mmd"],"repeats":0})");
    bad(R"({"family":"mean","axis_name":"sigma","axis_values":[1],"estimators":["mmd"],"repeats":1})");
    bad(R"({"family":"mean","axis_name":"epsilon","axis_values":[0.1],"estimators":["mmd"],"repeats":1})");
    bad(R"({"family":"mean","axis_name":"m","axis_values":[10.5],"estimators":["mmd"],"repeats":1})");
    bad(R"({"family":"cov","axis_name":"epsilon","axis_values":[0.0],"estimators":["mle"],"repeats":1})");
    bad(R"({"family":"cov","axis_name":"m","axis_values":[10],"estimators":["mle"],"repeats":1,"epsilon":0.0})");
    bad(R"({"family":"mean","axis_name":"m","axis_values":[10],"estimators":["mmd"],"repeats":1,"method":"newton"})");
    CHECK_THROWS_AS(sweep_config_from_json_file("no_such_config.json"),
                    ConfigError);
  }
}

TEST_CASE("success sweep: more data means more successes") {
  SweepConfig cfg;
  cfg.family = Family::mean;
  cfg.axis_name = "m";
  cfg.axis_values = {50, 2000};
  cfg.estimators = {Estimator::osmmd};
  cfg.repeats = 20;
  cfg.dim = 1;
  cfg.bandwidth = 10.0;
  cfg.learning_rate = 5.0;
  cfg.iterations = 200;
  cfg.method = "gd";
  cfg.seed = 321;
  cfg.threads = 1;

  const SweepReport rep = success_sweep(cfg);
  REQUIRE(rep.points.size() == 2);
  CHECK(rep.axis_name == "m");
  const SweepPoint& small = point_at(rep, 50);
  const SweepPoint& large = point_at(rep, 2000);
  CHECK(small.repeats == 20);
  CHECK(large.successes >= small.successes);
  CHECK(large.rate > 0.3);
  CHECK(small.rate < large.rate);
  for (const SweepPoint& p : rep.points) {
    CHECK(p.rate == doctest::Approx(p.successes / 20.0));
    CHECK(p.half_width ==
          doctest::Approx(1.96 * std::sqrt(p.rate * (1 - p.rate) / 20.0)));
  }
}

TEST_CASE("sweep outputs are deterministic and re-parse exactly") {
  SweepConfig cfg;
  cfg.family = Family::mean;
  cfg.axis_name = "m";
  cfg.axis_values = {50, 200};
  cfg.estimators = {Estimator::osmmd, Estimator::mle};
  cfg.repeats = 5;
  cfg.dim = 2;
  cfg.bandwidth = 10.0;
  cfg.learning_rate = 1.0;
  cfg.iterations = 60;
  cfg.method = "gd";
  cfg.seed = 77;
  cfg.threads = 2;

  const fs::path dir_a = "sweep_tmp_a";
  const fs::path dir_b = "sweep_tmp_b";
  cfg.out_dir = dir_a.string();
  const SweepReport rep_a = success_sweep(cfg);
  cfg.out_dir = dir_b.string();
  const SweepReport rep_b = success_sweep(cfg);

  CHECK(slurp(dir_a / "results.csv") == slurp(dir_b / "results.csv"));
  CHECK(fs::exists(dir_a / "plot.svg"));
  CHECK(slurp(dir_a / "plot.svg") == slurp(dir_b / "plot.svg"));

  const SweepReport reread = read_sweep_csv((dir_a / "results.csv").string());
  REQUIRE(reread.points.size() == rep_a.points.size());
  CHECK(reread.axis_name == rep_a.axis_name);
  for (std::size_t i = 0; i < reread.points.size(); ++i) {
    CHECK(reread.points[i].axis_value == rep_a.points[i].axis_value);
    CHECK(reread.points[i].estimator == rep_a.points[i].estimator);
    CHECK(reread.points[i].repeats == rep_a.points[i].repeats);
    CHECK(reread.points[i].successes == rep_a.points[i].successes);
    CHECK(reread.points[i].rate == rep_a.points[i].rate);
    CHECK(reread.points[i].half_width == rep_a.points[i].half_width);
  }

  CHECK_THROWS_AS(read_sweep_csv("no_such_results.csv"), std::runtime_error);

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("empty sweep report writes a header-only csv and no plot") {
  SweepReport empty;
  empty.axis_name = "m";
  const fs::path dir = "sweep_tmp_empty";
  emit_outputs(empty, dir.string());
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv ==
        "axis_name,axis_value,estimator,repeats,successes,rate,half_width\n");
  CHECK(!fs::exists(dir / "plot.svg"));
  fs::remove_all(dir);
}

TEST_CASE("vertex initialisation picks hull corners out of interior clutter") {
  Rng rng(2024);
  const int d = 3, r = 3;
  Eigen::MatrixXd corners = 3.0 * Eigen::MatrixXd::Identity(d, r);

  std::vector<Eigen::VectorXd> rows;
  for (int c = 0; c < r; ++c)
    for (int k = 0; k < 4; ++k) rows.push_back(corners.col(c));  // duplicates
  for (int i = 0; i < 30; ++i) {
    Eigen::VectorXd w(r);
    for (int j = 0; j < r; ++j) w(j) = rng.exponential();
    w /= w.sum();
    rows.push_back(corners * w);
  }
  Sample x;
  x.points.resize(static_cast<int>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    x.points.row(static_cast<int>(i)) = rows[i].transpose();

  const Eigen::MatrixXd picked = vca_init(x, r, 9);
  CHECK(permutation_distance(picked, corners) < 1e-20);
}

TEST_CASE("vertex initialisation edge cases") {
  SUBCASE("rank one returns the farthest point along the top direction") {
    Sample x;
    x.points.resize(4, 2);
    x.points << 5, 0, -5, 0.1, 1, 0.2, -2, 0;
    const Eigen::MatrixXd picked = vca_init(x, 1, 3);
    CHECK(std::abs(picked(0, 0)) == 5.0);
  }

  SUBCASE("collinear data cannot seed two vertices") {
    Sample x;
    x.points.resize(6, 3);
    for (int i = 0; i < 6; ++i)
      x.points.row(i) << i + 1.0, i + 1.0, 0.0;
    CHECK_THROWS_AS(vca_init(x, 2, 1), InitError);
  }

  SUBCASE("shape validation") {
    Sample x;
    x.points = Eigen::MatrixXd::Identity(1, 3);
    CHECK_THROWS_AS(vca_init(x, 2, 1), std::invalid_argument);  // n < r
    x.points = Eigen::MatrixXd::Identity(5, 2);
    CHECK_THROWS_AS(vca_init(x, 3, 1), std::invalid_argument);  // d < r
    CHECK_THROWS_AS(vca_init(x, 0, 1), std::invalid_argument);
  }
}

TEST_CASE("permutation-matched column distance") {
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd swapped(2, 2);
  swapped << 0, 1, 1, 0;
  CHECK(permutation_distance(id, swapped) == 0.0);

  Eigen::MatrixXd stretched = id;
  stretched(1, 1) = 2.0;
  CHECK(permutation_distance(id, stretched) == doctest::Approx(1.0));

  CHECK_THROWS_AS(permutation_distance(id, Eigen::MatrixXd::Identity(3, 3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(permutation_distance(Eigen::MatrixXd::Identity(9, 9),
                                       Eigen::MatrixXd::Identity(9, 9)),
                  UnsupportedError);
}

TEST_CASE("small unmixing experiment is deterministic and well-formed") {
  UnmixConfig cfg;
  cfg.dim = 4;
  cfg.rank = 2;
  cfg.n = 40;
  cfg.noise_var = 0.001;
  cfg.trials = 2;
  cfg.epochs = 40;
  cfg.n_fake = 32;
  cfg.learning_rate = 0.1;
  cfg.bandwidth = 0.1;
  cfg.seed = 3;
  cfg.threads = 1;

  const UnmixingReport rep = unmixing_experiment(cfg);
  REQUIRE(rep.methods.size() == 2);
  CHECK(rep.methods[0].method == "vca");
  CHECK(rep.methods[1].method == "mmd");
  for (const auto& m : rep.methods) {
    CHECK(m.trials == 2);
    CHECK(std::isfinite(m.mean_dist));
    CHECK(m.mean_dist >= 0.0);
    CHECK(m.std_dist >= 0.0);
  }
  CHECK(rep.noise_var == 0.001);

  const UnmixingReport again = unmixing_experiment(cfg);
  CHECK(again.methods[0].mean_dist == rep.methods[0].mean_dist);
  CHECK(again.methods[1].mean_dist == rep.methods[1].mean_dist);

  const fs::path dir = "unmix_tmp_out";
  emit_outputs(rep, dir.string());
  const std::string csv = slurp(dir / "unmix.csv");
  CHECK(csv.rfind("noise_var,method,mean_dist,std_dist,trials\n", 0) == 0);
  fs::remove_all(dir);

  UnmixConfig bad = cfg;
  bad.rank = 1;
  CHECK_THROWS_AS(unmixing_experiment(bad), ConfigError);
  bad = cfg;
  bad.n = 1;
  CHECK_THROWS_AS(unmixing_experiment(bad), ConfigError);
  bad = cfg;
  bad.n_fake = 1;
  CHECK_THROWS_AS(unmixing_experiment(bad), ConfigError);
}
