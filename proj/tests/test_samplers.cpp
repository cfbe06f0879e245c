#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qpaths/error.hpp"
#include "qpaths/kernels.hpp"
#include "qpaths/parallel.hpp"
#include "qpaths/samplers.hpp"

using namespace qpaths;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

BoundEnergy std_normal() {
  return [](const Point& z, Eigen::VectorXd& g) {
    g = -z;
    return -0.5 * z.squaredNorm();
  };
}

MoveConfig hmc_moves(int moves = 1) {
  MoveConfig m;
  m.moves_per_step = moves;
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("leapfrog basics") {
  const BoundEnergy flat = [](const Point& z, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(z.size());
    return 0.0;
  };
  HmcConfig cfg;
  cfg.step_size = 0.3;
  cfg.n_leapfrog = 7;
  const Point z = vec({1.0, -2.0});
  LeapfrogState s = leapfrog(z, Eigen::VectorXd::Zero(2), flat, cfg);
  CHECK(s.z == z);
  CHECK_FALSE(s.divergent);

  // Reversibility: integrate, flip momentum, integrate back.
  const BoundEnergy quartic = [](const Point& x, Eigen::VectorXd& g) {
    g = -x.array().cube().matrix() - 0.5 * x;
    return -0.25 * x.array().pow(4).sum() - 0.25 * x.squaredNorm();
  };
  cfg.step_size = 0.05;
  cfg.n_leapfrog = 40;
  const Eigen::VectorXd p0 = vec({0.7, -0.4});
  s = leapfrog(z, p0, quartic, cfg);
  LeapfrogState back = leapfrog(s.z, -s.momentum, quartic, cfg);
  CHECK((back.z - z).norm() < 1e-8);
  CHECK((back.momentum + p0).norm() < 1e-8);
}

TEST_CASE("leapfrog energy error is second order") {
  const Point z = vec({1.2});
  const Eigen::VectorXd p = vec({0.4});
  auto max_dh = [&](double eps) {
    HmcConfig cfg;
    cfg.step_size = eps;
    cfg.n_leapfrog = 1;
    const double h0 = 0.5 * z.squaredNorm() + 0.5 * p.squaredNorm();
    Point x = z;
    Eigen::VectorXd m = p;
    double worst = 0.0;
    const int steps = static_cast<int>(std::lround(2.0 / eps));
    for (int i = 0; i < steps; ++i) {
      const LeapfrogState s = leapfrog(x, m, std_normal(), cfg);
      x = s.z;
      m = s.momentum;
      worst = std::max(worst, std::fabs(0.5 * x.squaredNorm() + 0.5 * m.squaredNorm() - h0));
    }
    return worst;
  };
  const double r1 = max_dh(0.1) / max_dh(0.05);
  const double r2 = max_dh(0.05) / max_dh(0.025);
  CHECK(r1 == doctest::Approx(4.0).epsilon(0.1));
  CHECK(r2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("HMC step edge cases") {
  const BoundEnergy flat = [](const Point& z, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(z.size());
    return 0.0;
  };
  HmcConfig cfg;
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const HmcStep s = hmc_step(vec({0.0}), flat, cfg, rng);
    CHECK(s.accepted);
    CHECK(s.accept_prob == 1.0);
  }
  const BoundEnergy spike = [](const Point& z, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(z.size());
    return z(0) == 0.5 ? 0.0 : -INFINITY;
  };
  for (int i = 0; i < 20; ++i) {
    const HmcStep s = hmc_step(vec({0.5}), spike, cfg, rng);
    CHECK_FALSE(s.accepted);
    CHECK(s.z(0) == 0.5);
  }
  CHECK_THROWS_AS(hmc_step(vec({1.0}), spike, cfg, rng), DomainError);
  HmcConfig bad;
  bad.step_size = -1.0;
  CHECK_THROWS_AS(hmc_step(vec({0.0}), flat, bad, rng), DomainError);
  bad = HmcConfig{};
  bad.mass = vec({1.0, -1.0});
  CHECK_THROWS_AS(bad.validate(2), DomainError);
}

TEST_CASE("HMC leaves a Gaussian invariant") {
  HmcConfig cfg;
  cfg.step_size = 0.5;
  cfg.n_leapfrog = 10;
  Rng rng(11);
  Point z = vec({0.0});
  const int n = 100000, batches = 100;
  std::vector<double> x2(n);
  int accepted = 0;
  for (int i = 0; i < n; ++i) {
    const HmcStep s = hmc_step(z, std_normal(), cfg, rng);
    z = s.z;
    accepted += s.accepted;
    x2[i] = z(0) * z(0);
  }
  CHECK(accepted > n / 2);
  // Batch means standard error of E[x^2].
  std::vector<double> means(batches, 0.0);
  for (int i = 0; i < n; ++i) means[i / (n / batches)] += x2[i] / (n / batches);
  double m = 0.0, v = 0.0;
  for (double b : means) m += b / batches;
  for (double b : means) v += (b - m) * (b - m) / (batches - 1);
  const double se = std::sqrt(v / batches);
  CHECK(std::fabs(m - 1.0) < 4.0 * se);
}

TEST_CASE("systematic resampling") {
  const std::vector<double> one{0.0, -INFINITY, -INFINITY};
  for (double u : {0.0, 0.3, 0.999}) {
    const auto idx = systematic_resample(one, u);
    CHECK(idx == std::vector<std::size_t>{0, 0, 0});
  }
  const std::vector<double> flat(7, -2.0);
  for (double u : {0.0, 0.5, 0.999999}) {
    const auto idx = systematic_resample(flat, u);
    for (std::size_t i = 0; i < 7; ++i) CHECK(idx[i] == i);
  }
  const std::vector<double> w{std::log(0.75), std::log(0.25), -INFINITY, -INFINITY};
  for (double u : {0.0, 0.1, 0.5, 0.9, 0.999999}) {
    const auto idx = systematic_resample(w, u);
    CHECK(std::count(idx.begin(), idx.end(), 0u) == 3);
    CHECK(std::count(idx.begin(), idx.end(), 1u) == 1);
  }
  CHECK_THROWS_AS(systematic_resample(std::vector<double>{-INFINITY, -INFINITY}, 0.5), DomainError);
  CHECK_THROWS_AS(systematic_resample(flat, 1.0), DomainError);

  // Expected counts are proportional to the weights.
  const std::vector<double> lw{0.0, std::log(2.0), std::log(5.0), std::log(0.5)};
  std::vector<double> counts(4, 0.0);
  Rng rng(5);
  for (int t = 0; t < 20000; ++t)
    for (std::size_t i : systematic_resample(lw, rng)) counts[i] += 1.0;
  const double total = 1.0 + 2.0 + 5.0 + 0.5;
  const double expect[4] = {1.0 / total, 2.0 / total, 5.0 / total, 0.5 / total};
  for (int i = 0; i < 4; ++i) CHECK(counts[i] / (20000.0 * 4.0) == doctest::Approx(expect[i]).epsilon(0.01));
}

TEST_CASE("ESS of log-weights") {
  CHECK(ess_of_log_weights(std::vector<double>(9, 3.0)) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(ess_of_log_weights(std::vector<double>{1.0, -INFINITY}) == 1.0);
  CHECK(ess_of_log_weights(std::vector<double>{std::log(2.0), 0.0}) == doctest::Approx(1.8).epsilon(1e-14));
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> lw(5);
    double s = 0.0, s2 = 0.0;
    for (double& x : lw) {
      x = 3.0 * rng.normal();
      s += std::exp(x);
      s2 += std::exp(2.0 * x);
    }
    CHECK(ess_of_log_weights(lw) == doctest::Approx(s * s / s2).epsilon(1e-12));
  }
  CHECK(ess_of_log_weights(std::vector<double>{1e4, 1e4 - 1.0}) == doctest::Approx(std::pow(1.0 + std::exp(-1.0), 2) / (1.0 + std::exp(-2.0))).epsilon(1e-12));
  CHECK_THROWS_AS(ess_of_log_weights(std::vector<double>{-INFINITY}), DomainError);
  CHECK_THROWS_AS(ess_of_log_weights(std::vector<double>{}), DomainError);
}

TEST_CASE("AIS with identical endpoints is exactly zero") {
  const auto g = make_gaussian(vec({1.0}), m1(2.0));
  for (double q : {0.0, 0.5, 1.0, 2.0}) {
    const QPath p(g, g, OrderQ(q));
    const AisResult f = ais_forward(p, linear_schedule(10), 50, hmc_moves(), 1);
    for (double lw : f.per_chain_log_w) CHECK(lw == 0.0);
    CHECK(f.log_Z_estimate == 0.0);
    std::vector<Point> exact;
    for (int i = 0; i < 50; ++i) {
      Rng rng = Rng::stream(9, i);
      exact.push_back(g.sample(rng));
    }
    const AisResult r = ais_reverse(p, linear_schedule(10), exact, hmc_moves(), 2);
    CHECK(r.log_Z_estimate == 0.0);
    CHECK(bdmc_gap(f, r) == 0.0);
    CHECK(bdmc_gap(f, r, GapEstimator::kChainAverage) == 0.0);
    CHECK_THROWS_AS(bdmc_gap(r, f), DomainError);
  }
}

TEST_CASE("AIS with K = 1 is importance sampling") {
  const auto b = make_gaussian(vec({0.0}), m1(4.0));
  const auto t = scaled(make_gaussian(vec({1.0}), m1(1.0)), 0.7);
  const QPath p(b, t, OrderQ(0.9));
  const AisResult f = ais_forward(p, linear_schedule(1), 200, hmc_moves(), 17);
  std::vector<double> lw;
  for (std::size_t i = 0; i < 200; ++i) {
    // The initial draw stream is (seed, unit, 0).
    Rng rng = Rng::stream(17, i, 0);
    const Point z = b.sample(rng);
    lw.push_back(t.log_density(z) - b.log_density(z));
  }
  for (std::size_t i = 0; i < 200; ++i) CHECK(f.per_chain_log_w[i] == doctest::Approx(lw[i]).epsilon(1e-14));
  CHECK(f.log_Z_estimate == doctest::Approx(kernels::log_mean_exp(lw)).epsilon(1e-13));
  CHECK(f.acceptance_trace.empty());

  std::vector<Point> exact;
  std::vector<double> rw;
  for (int i = 0; i < 200; ++i) {
    Rng rng = Rng::stream(3, i);
    exact.push_back(t.sample(rng));
    rw.push_back(b.log_density(exact.back()) - t.log_density(exact.back()));
  }
  const AisResult r = ais_reverse(p, linear_schedule(1), exact, hmc_moves(), 4);
  CHECK(r.log_Z_estimate == doctest::Approx(-kernels::log_mean_exp(rw)).epsilon(1e-13));
}

TEST_CASE("AIS recovers a constructed log Z = 2") {
  const auto b = make_gaussian(vec({-4.0}), m1(1.0));
  const auto t = scaled(make_gaussian(vec({4.0}), m1(1.0)), 2.0);
  const QPath p(b, t, OrderQ(1.0));
  const AisResult f = ais_forward(p, linear_schedule(100), 1000, hmc_moves(), 5);
  CHECK(f.dropped == 0);
  CHECK(f.stderr_estimate > 0.0);
  CHECK(std::fabs(f.log_Z_estimate - 2.0) < 3.0 * f.stderr_estimate);
  CHECK(f.ess_trace.size() == 100);
  CHECK(f.acceptance_trace.size() == 99);
  CHECK(f.step_size_trace.size() == 99);
  CHECK(f.chain_average_bound <= f.log_Z_estimate);
}

TEST_CASE("AIS sandwich and lower-bound direction over seeds") {
  const auto b = make_gaussian(vec({-4.0}), m1(1.0));
  const auto t = scaled(make_gaussian(vec({4.0}), m1(1.0)), 2.0);
  const QPath p(b, t, OrderQ(1.0));
  std::vector<double> lower, upper, gaps;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const AisResult f = ais_forward(p, linear_schedule(20), 100, hmc_moves(), 100 + s);
    lower.push_back(f.log_Z_estimate);
    if (s < 10) {
      std::vector<Point> exact;
      for (int i = 0; i < 100; ++i) {
        Rng rng = Rng::stream(200 + s, i);
        exact.push_back(t.sample(rng));
      }
      const AisResult r = ais_reverse(p, linear_schedule(20), exact, hmc_moves(), 300 + s);
      upper.push_back(r.log_Z_estimate);
      gaps.push_back(bdmc_gap(f, r, GapEstimator::kChainAverage));
    }
  }
  double mean = 0.0, var = 0.0;
  for (double x : lower) mean += x / lower.size();
  for (double x : lower) var += (x - mean) * (x - mean) / (lower.size() - 1);
  CHECK(mean <= 2.0 + 2.0 * std::sqrt(var / lower.size()));
  CHECK(median(upper) >= median(std::vector<double>(lower.begin(), lower.begin() + 10)));
  for (double g : gaps) CHECK(g > 0.0);
}

TEST_CASE("AIS drops chains that end with zero weight") {
  // Target mass only on z > 0; forward chains starting at z <= 0 collapse at beta = 1 for q = 1.
  UnnormalizedDensity::Spec s;
  s.name = "half";
  s.dim = 1;
  s.log_density = [](const Point& z) { return z(0) > 0.0 ? -0.5 * z(0) * z(0) : -INFINITY; };
  s.value_and_gradient = [](const Point& z, Eigen::VectorXd& g) {
    g = -z;
    return z(0) > 0.0 ? -0.5 * z(0) * z(0) : -INFINITY;
  };
  const QPath p(make_gaussian(vec({0.0}), m1(1.0)), UnnormalizedDensity(s), OrderQ(0.0));
  const AisResult f = ais_forward(p, linear_schedule(1), 400, hmc_moves(), 6);
  CHECK(f.dropped > 100);
  CHECK(f.dropped < 300);
  CHECK(std::isfinite(f.log_Z_estimate));
}

TEST_CASE("SMC with identical endpoints is exactly zero") {
  const auto g = make_gaussian(vec({1.0, 2.0}), Eigen::MatrixXd::Identity(2, 2));
  SmcConfig cfg;
  cfg.particles = 100;
  for (ScheduleMode mode : {ScheduleMode::kFixed, ScheduleMode::kAdaptive}) {
    cfg.mode = mode;
    cfg.schedule = linear_schedule(5);
    const SmcResult r = smc_run(QPath(g, g, OrderQ(0.5)), cfg);
    CHECK(r.log_Z == 0.0);
    if (mode == ScheduleMode::kAdaptive) CHECK(r.beta_trace == std::vector<double>{0.0, 1.0});
  }
}

TEST_CASE("SMC is reproducible and thread-count invariant") {
  const auto b = make_gaussian(vec({-4.0}), m1(3.0));
  const auto t = scaled(make_gaussian(vec({4.0}), m1(1.0)), 1.5);
  const QPath p(b, t, OrderQ(0.99));
  SmcConfig cfg;
  cfg.particles = 500;
  cfg.moves = hmc_moves(2);
  cfg.seed = 42;
  set_num_threads(1);
  const SmcResult a = smc_run(p, cfg);
  set_num_threads(4);
  const SmcResult c = smc_run(p, cfg);
  const SmcResult d = smc_run(p, cfg);
  set_num_threads(0);
  CHECK(a.log_Z == c.log_Z);
  CHECK(c.log_Z == d.log_Z);
  CHECK(a.beta_trace == c.beta_trace);
  CHECK(a.ess_trace == c.ess_trace);
  CHECK(std::fabs(a.log_Z - 1.5) < 0.3);
  // Adaptive steps hit the ESS target except for the final capped step.
  for (std::size_t i = 0; i + 1 < a.ess_trace.size(); ++i) CHECK(std::fabs(a.ess_trace[i] - 250.0) <= 0.5 + 1e-9);

  cfg.mode = ScheduleMode::kFixed;
  cfg.schedule = linear_schedule(20);
  const SmcResult f = smc_run(p, cfg);
  CHECK(f.beta_trace == linear_schedule(20).betas);
  CHECK(std::fabs(f.log_Z - 1.5) < 0.5);
  for (std::size_t i = 0; i < f.resampled.size(); ++i) CHECK(f.resampled[i] == (f.ess_trace[i] < 250.0 ? 1 : 0));
}

TEST_CASE("AIS is thread-count invariant") {
  const QPath p(make_gaussian(vec({-4.0}), m1(3.0)), make_gaussian(vec({4.0}), m1(1.0)), OrderQ(0.97));
  set_num_threads(1);
  const AisResult a = ais_forward(p, linear_schedule(16), 300, hmc_moves(), 8);
  set_num_threads(3);
  const AisResult b = ais_forward(p, linear_schedule(16), 300, hmc_moves(), 8);
  set_num_threads(0);
  CHECK(a.per_chain_log_w == b.per_chain_log_w);
}

TEST_CASE("SMC failure and validation") {
  // Every base draw lands where the target has no mass.
  UnnormalizedDensity::Spec s;
  s.name = "far";
  s.dim = 1;
  s.log_density = [](const Point& z) { return z(0) > 100.0 ? 0.0 : -INFINITY; };
  s.value_and_gradient = [](const Point& z, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(1);
    return z(0) > 100.0 ? 0.0 : -INFINITY;
  };
  SmcConfig cfg;
  cfg.particles = 50;
  cfg.mode = ScheduleMode::kFixed;
  cfg.schedule = linear_schedule(1);
  CHECK_THROWS_AS(smc_run(QPath(make_gaussian(vec({0.0}), m1(1.0)), UnnormalizedDensity(s), OrderQ(1.0)), cfg), SamplerFailure);
  cfg.particles = 1;
  CHECK_THROWS_AS(smc_run(QPath(make_gaussian(vec({0.0}), m1(1.0)), make_gaussian(vec({0.0}), m1(1.0)), OrderQ(1.0)), cfg), DomainError);
}
