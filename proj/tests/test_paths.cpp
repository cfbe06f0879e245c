#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qpaths/error.hpp"
#include "qpaths/paths.hpp"

using namespace qpaths;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

UnnormalizedDensity flat(int dim) {
  UnnormalizedDensity::Spec s;
  s.name = "flat";
  s.dim = dim;
  s.log_density = [](const Point&) { return 0.0; };
  s.value_and_gradient = [dim](const Point&, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(dim);
    return 0.0;
  };
  return UnnormalizedDensity(std::move(s));
}

Eigen::VectorXd quad_stats(const Point& z) { return vec({z(0), z(0) * z(0)}); }
Eigen::MatrixXd quad_jac(const Point& z) {
  Eigen::MatrixXd J(2, 1);
  J << 1.0, 2.0 * z(0);
  return J;
}

// Max deviation of a - b from its mean over the grid (equality up to a constant).
double spread(const std::vector<double>& a, const std::vector<double>& b) {
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(a.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i] - mean));
  return worst;
}

std::vector<double> grid50(double lo, double hi) {
  std::vector<double> g(50);
  for (int i = 0; i < 50; ++i) g[i] = lo + (hi - lo) * i / 49.0;
  return g;
}

}  // namespace

TEST_CASE("endpoint recovery is bit-exact") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-800.0, 50.0);
  for (double q : {-1.0, 0.0, 0.5, 0.97, 1.0, 1.0 + 1e-7, 2.0, 3.0})
    for (int t = 0; t < 500; ++t) {
      const double a = u(gen), b = u(gen);
      CHECK(qpath_log_energy(a, b, 0.0, OrderQ(q)) == a);
      CHECK(qpath_log_energy(a, b, 1.0, OrderQ(q)) == b);
    }
  const QPath p(make_gaussian(vec({-4.0}), m1(3.0)), make_gaussian(vec({4.0}), m1(1.0)), OrderQ(0.3));
  for (double z = -10.0; z <= 10.0; z += 0.5) {
    CHECK(qpath_log_density(p, vec({z}), 0.0) == p.base().log_density(vec({z})));
    CHECK(qpath_log_density(p, vec({z}), 1.0) == p.target().log_density(vec({z})));
  }
}

TEST_CASE("q-path examples and special cases") {
  // Arithmetic mixture at q = 0.
  CHECK(qpath_log_energy(std::log(0.2), std::log(0.6), 0.5, OrderQ(0.0)) == doctest::Approx(std::log(0.4)).epsilon(1e-15));
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-30.0, 5.0), ub(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const double a = u(gen), b = u(gen), beta = ub(gen);
    const double mix = std::log((1.0 - beta) * std::exp(a) + beta * std::exp(b));
    CHECK(std::fabs(qpath_log_energy(a, b, beta, OrderQ(0.0)) - mix) < 1e-12 * std::max(1.0, std::fabs(mix)));
    const double geo = (1.0 - beta) * a + beta * b;
    CHECK(std::fabs(qpath_log_energy(a, b, beta, OrderQ(1.0)) - geo) < 1e-12 * std::max(1.0, std::fabs(geo)));
    // q = 2: harmonic mean.
    const double harm = -std::log((1.0 - beta) * std::exp(-a) + beta * std::exp(-b));
    CHECK(std::fabs(qpath_log_energy(a, b, beta, OrderQ(2.0)) - harm) < 1e-12 * std::max(1.0, std::fabs(harm)));
  }
  // Zero-mass endpoints.
  CHECK(qpath_log_energy(-INFINITY, 0.0, 0.5, OrderQ(0.0)) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(qpath_log_energy(-INFINITY, 0.0, 0.5, OrderQ(1.0)) == -INFINITY);
  CHECK(qpath_log_energy(-INFINITY, 0.0, 0.5, OrderQ(2.0)) == -INFINITY);
  CHECK(qpath_log_energy(-INFINITY, -INFINITY, 0.5, OrderQ(0.5)) == -INFINITY);
  CHECK_THROWS_AS(qpath_log_energy(0.0, 0.0, 1.5, OrderQ(0.5)), DomainError);
  CHECK_THROWS_AS(qpath_log_energy(0.0, 0.0, -0.1, OrderQ(0.5)), DomainError);
}

TEST_CASE("q -> 1 continuity on Gaussian endpoints") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> um(-5.0, 5.0), uv(0.5, 4.0), ub(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const auto b = make_gaussian(vec({um(gen)}), m1(uv(gen)));
    const auto g = make_gaussian(vec({um(gen)}), m1(uv(gen)));
    const QPath geo(b, g, OrderQ(1.0)), up(b, g, OrderQ(1.0 + 1e-6)), dn(b, g, OrderQ(1.0 - 1e-6));
    const double beta = ub(gen);
    for (double z = -8.0; z <= 8.0; z += 0.25) {
      const double e = geo.log_energy(vec({z}), beta);
      const double r = g.log_density(vec({z})) - b.log_density(vec({z}));
      // Leading term of the expansion in 1 - q is beta (1 - beta) (1 - q) r^2 / 2.
      const double first_order = 0.5 * beta * (1.0 - beta) * 1e-6 * r * r;
      const double du = std::fabs(up.log_energy(vec({z}), beta) - e);
      const double dd = std::fabs(dn.log_energy(vec({z}), beta) - e);
      CHECK(du <= 1.01 * first_order + 1e-12);
      CHECK(dd <= 1.01 * first_order + 1e-12);
      if (std::fabs(r) <= 25.0) {
        CHECK(du < 1e-4);
        CHECK(dd < 1e-4);
      }
    }
  }
}

TEST_CASE("ln_q mixture identity") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-6.0, 3.0), ub(0.0, 1.0);
  for (double q : {-0.5, 0.0, 0.3, 0.9, 0.999, 1.5, 2.0, 3.0})
    for (int t = 0; t < 1000; ++t) {
      const double a = u(gen), b = u(gen), beta = ub(gen);
      const OrderQ oq(q);
      const double inner = (1.0 - beta) * ln_q(std::exp(a), oq) + beta * ln_q(std::exp(b), oq);
      const double direct = exp_q(inner, oq);
      if (!(direct > 0.0) || !std::isfinite(direct)) continue;
      CHECK(std::fabs(qpath_log_energy(a, b, beta, oq) - std::log(direct)) < 1e-10);
    }
}

TEST_CASE("batched energies agree with the pointwise energy") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n;
  std::vector<Point> pts(1001);
  for (auto& p : pts) p = vec({6.0 * n(gen)});
  for (double q : {0.0, 0.5, 0.97, 1.0, 2.0}) {
    const QPath p(make_gaussian(vec({-4.0}), m1(3.0)), scaled(make_gaussian(vec({4.0}), m1(1.0)), 3.0), OrderQ(q));
    const auto cache = p.prepare(pts);
    std::vector<double> out(pts.size());
    for (double beta : {0.0, 0.2, 0.7, 1.0}) {
      p.energies(cache, beta, out);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double e = p.log_energy(pts[i], beta);
        CHECK(std::fabs(out[i] - e) <= 1e-13 * std::max(1.0, std::fabs(e)));
      }
    }
  }
}

TEST_CASE("q-path gradient matches central differences") {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> ub(0.0, 1.0);

  LogisticModel lm;
  lm.features.resize(20, 3);
  lm.labels.resize(20);
  for (int i = 0; i < 20; ++i) {
    lm.features.row(i) << 1.0, n(gen), n(gen);
    lm.labels(i) = (n(gen) > 0.0) ? 1.0 : 0.0;
  }
  const PosteriorPair post = make_logistic_posterior(lm);

  struct Case {
    UnnormalizedDensity a, b;
    double spread;
  };
  Eigen::Matrix2d S0, S1;
  S0 << 2.0, 0.3, 0.3, 1.0;
  S1 << 0.5, -0.1, -0.1, 1.5;
  const std::vector<Case> cases{
      {make_gaussian(vec({-1.0, 0.5}), S0), make_gaussian(vec({2.0, -1.0}), S1), 2.0},
      {make_student_t({vec({-1.0, 0.5}), S0, 1.0}), make_student_t({vec({2.0, -1.0}), S1, 4.0}), 3.0},
      {post.prior, post.target, 1.0},
  };
  for (const Case& c : cases)
    for (double q : {0.0, 0.5, 0.97, 1.0, 2.0}) {
      const QPath p(c.a, c.b, OrderQ(q));
      for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd z(p.dim());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = c.spread * n(gen);
        const double beta = ub(gen);
        const Eigen::VectorXd g = qpath_gradient(p, z, beta);
        const Eigen::VectorXd fd =
            oracle::central_difference([&](const Eigen::VectorXd& x) { return qpath_log_density(p, x, beta); }, z);
        CHECK(oracle::rel_err(g, fd) < 1e-5);
      }
    }
}

TEST_CASE("q-path gradient endpoints and geometric form") {
  const auto a = make_gaussian(vec({-1.0}), m1(2.0));
  const auto b = make_student_t({vec({3.0}), m1(0.5), 2.0});
  const Point z = vec({0.7});
  for (double q : {0.0, 0.5, 2.0}) {
    const QPath p(a, b, OrderQ(q));
    CHECK(qpath_gradient(p, z, 0.0)(0) == doctest::Approx(a.gradient(z)(0)).epsilon(1e-15));
    CHECK(qpath_gradient(p, z, 1.0)(0) == doctest::Approx(b.gradient(z)(0)).epsilon(1e-15));
  }
  const QPath geo(a, b, OrderQ(1.0));
  CHECK(qpath_gradient(geo, z, 0.3)(0) == doctest::Approx(0.7 * a.gradient(z)(0) + 0.3 * b.gradient(z)(0)).epsilon(1e-14));

  const QPath cut(make_pareto({0.0, 1.0, 0.5}), a, OrderQ(1.0));
  CHECK(qpath_log_density(cut, vec({-1.0}), 0.5) == -INFINITY);
  CHECK_THROWS_AS(qpath_gradient(cut, vec({-1.0}), 0.5), DomainError);
  CHECK_THROWS_AS(QPath(a, make_gaussian(vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)), OrderQ(1.0)), DomainError);
}

TEST_CASE("same-family closure: exponential family (q = 1)") {
  // Gaussian as g(z) exp(theta . (z, z^2)) with flat g.
  auto theta = [](double mu, double var) { return vec({mu / var, -0.5 / var}); };
  const Eigen::VectorXd t0 = theta(-4.0, 3.0), t1 = theta(4.0, 1.0);
  const QPath p(make_gaussian(vec({-4.0}), m1(3.0)), make_gaussian(vec({4.0}), m1(1.0)), OrderQ(1.0));
  for (double beta : {0.0, 0.3, 0.5, 0.9, 1.0}) {
    const Eigen::VectorXd tb = same_family_qpath_params(t0, t1, beta, OrderQ(1.0));
    const auto fam = make_qexp_family_density({flat(1), tb, quad_stats, quad_jac, OrderQ(1.0)});
    std::vector<double> a, b;
    for (double z : grid50(-8.0, 8.0)) {
      a.push_back(p.log_energy(vec({z}), beta));
      b.push_back(fam.log_density(vec({z})));
    }
    CHECK(spread(a, b) < 1e-10);
  }
}

TEST_CASE("same-family closure: q = 2 Student-t endpoints") {
  // nu = 1, d = 1 gives q = 2. The Cauchy density c / (1 + (x - mu)^2 / s) with
  // c = 1 / (pi sqrt(s)) equals exp_2(theta . (x, x^2) - psi) with
  // theta = (2 mu / (c s), -1 / (c s)) and psi = (1 + mu^2 / s) / c - 1.
  const OrderQ q(q_from_nu(1.0, 1));
  REQUIRE(q.value() == 2.0);
  struct Ep {
    double mu, s;
  };
  const Ep e0{-4.0, 3.0}, e1{4.0, 1.0};
  auto psi_form = [](Ep e) {
    const double c = 1.0 / (std::numbers::pi * std::sqrt(e.s));
    return std::pair{vec({2.0 * e.mu / (c * e.s), -1.0 / (c * e.s)}), (1.0 + e.mu * e.mu / e.s) / c - 1.0};
  };
  const auto [th0, psi0] = psi_form(e0);
  const auto [th1, psi1] = psi_form(e1);
  const MultiplicativeForm m0 = psi_to_multiplicative(th0, psi0, q);
  const MultiplicativeForm m1_ = psi_to_multiplicative(th1, psi1, q);

  const auto t0 = make_student_t({vec({e0.mu}), m1(e0.s), 1.0});
  const auto t1 = make_student_t({vec({e1.mu}), m1(e1.s), 1.0});
  const auto f0 = make_qexp_family_density({flat(1), m0.beta, quad_stats, quad_jac, q});
  const auto f1 = make_qexp_family_density({flat(1), m1_.beta, quad_stats, quad_jac, q});
  // The multiplicative form reproduces the normalized densities up to Z.
  for (double z : grid50(-10.0, 10.0)) {
    CHECK(f0.log_density(vec({z})) - std::log(m0.Z) == doctest::Approx(t0.log_density(vec({z}))).epsilon(1e-12));
    CHECK(f1.log_density(vec({z})) - std::log(m1_.Z) == doctest::Approx(t1.log_density(vec({z}))).epsilon(1e-12));
  }

  const QPath p(f0, f1, q);
  for (double beta : {0.0, 0.1, 0.3, 0.5, 0.8, 1.0}) {
    const Eigen::VectorXd tb = same_family_qpath_params(m0.beta, m1_.beta, beta, q);
    const auto fam = make_qexp_family_density({flat(1), tb, quad_stats, quad_jac, q});
    std::vector<double> a, b;
    for (double z : grid50(-10.0, 10.0)) {
      a.push_back(p.log_energy(vec({z}), beta));
      b.push_back(fam.log_density(vec({z})));
    }
    CHECK(spread(a, b) < 1e-10);
  }
  // Normalized endpoints scale each power by Z_i^{q-1}, which keeps the mixture in the family.
  const QPath pn(t0, t1, q);
  std::vector<double> a, b;
  const double beta = 0.3;
  const double w0 = (1.0 - beta) * std::pow(m0.Z, q.value() - 1.0), w1 = beta * std::pow(m1_.Z, q.value() - 1.0);
  const Eigen::VectorXd tb = same_family_qpath_params(m0.beta, m1_.beta, w1 / (w0 + w1), q);
  const auto fam = make_qexp_family_density({flat(1), tb, quad_stats, quad_jac, q});
  for (double z : grid50(-10.0, 10.0)) {
    a.push_back(pn.log_energy(vec({z}), beta));
    b.push_back(fam.log_density(vec({z})));
  }
  CHECK(spread(a, b) < 1e-10);
  CHECK_THROWS_AS(same_family_qpath_params(vec({1.0}), vec({1.0, 2.0}), 0.5, q), DomainError);
  CHECK(same_family_qpath_params(th0, th0, 0.37, q) == th0);
}

TEST_CASE("q-exponential family gradient") {
  const auto f = make_qexp_family_density({make_gaussian(vec({0.0}), m1(4.0)), vec({0.3, -0.2}), quad_stats, quad_jac, OrderQ(1.5)});
  for (double z = -1.5; z <= 1.5; z += 0.1) {
    const Eigen::VectorXd g = f.gradient(vec({z}));
    const Eigen::VectorXd fd = oracle::central_difference([&](const Eigen::VectorXd& x) { return f.log_density(x); }, vec({z}));
    CHECK(oracle::rel_err(g, fd) < 1e-5);
  }
}

TEST_CASE("moment path parameters") {
  GaussianMomentPath g{vec({-4.0}), vec({4.0}), m1(3.0), m1(1.0), INFINITY};
  MomentParams m = moment_path_params(g, 0.5);
  CHECK(m.mu(0) == 0.0);
  CHECK(m.Sigma(0, 0) == doctest::Approx(18.0).epsilon(1e-15));
  g.nu = 1.0;
  CHECK(moment_path_params(g, 0.5, EscortCovariance::kScaleMatched).Sigma(0, 0) == doctest::Approx(50.0).epsilon(1e-15));
  CHECK(moment_path_params(g, 0.5).Sigma(0, 0) == doctest::Approx(18.0).epsilon(1e-15));
  m = moment_path_params(g, 0.0);
  CHECK(m.mu(0) == -4.0);
  CHECK(m.Sigma(0, 0) == 3.0);
  m = moment_path_params(g, 1.0);
  CHECK(m.mu(0) == 4.0);
  CHECK(m.Sigma(0, 0) == 1.0);
  CHECK_THROWS_AS(moment_path_params(g, 1.1), DomainError);
}

TEST_CASE("escort moments of the escort-moment path by quadrature") {
  // Escort of t_nu(mu, s) in 1-d is proportional to t^q with q = (nu + 3) / (nu + 1).
  // Quadrature in x = mu + sqrt(scale) tan(theta) integrates t^q directly.
  auto escort_moments = [](double mu, double s, double nu) {
    const double q = q_from_nu(nu, 1);
    const auto t = make_student_t({vec({mu}), m1(s), nu});
    const double h = std::numbers::pi / 2.0;
    auto integrand = [&](int power) {
      return oracle::integrate(
          [&, power](double th) {
            const double x = mu + std::sqrt(s) * std::tan(th);
            const double c = std::cos(th);
            return std::pow(x, power) * std::exp(q * t.log_density(vec({x}))) * std::sqrt(s) / (c * c);
          },
          -h, h, 400, 20);
    };
    const double z = integrand(0);
    return std::pair{integrand(1) / z, integrand(2) / z};
  };
  for (double nu : {1.0, 3.0, 10.0}) {
    const GaussianMomentPath g{vec({-4.0}), vec({4.0}), m1(3.0), m1(1.0), nu};
    const auto [e0, s0] = escort_moments(-4.0, 3.0, nu);
    const auto [e1, s1] = escort_moments(4.0, 1.0, nu);
    for (double beta : {0.1, 0.5, 0.8}) {
      const MomentParams m = moment_path_params(g, beta);
      const auto [eb, sb] = escort_moments(m.mu(0), m.Sigma(0, 0), nu);
      CHECK(std::fabs(eb - ((1.0 - beta) * e0 + beta * e1)) < 1e-6);
      CHECK(std::fabs(sb - ((1.0 - beta) * s0 + beta * s1)) < 1e-6);

      // The (nu + 2) / nu mixing factor misses the escort second moment.
      const MomentParams w = moment_path_params(g, beta, EscortCovariance::kScaleMatched);
      const auto [ew, sw] = escort_moments(w.mu(0), w.Sigma(0, 0), nu);
      CHECK(std::fabs(sw - ((1.0 - beta) * s0 + beta * s1)) > 1.0);
    }
  }
}

TEST_CASE("moment-averaged path energies") {
  const GaussianMomentPath g{vec({-4.0}), vec({4.0}), m1(3.0), m1(1.0), INFINITY};
  const MomentAveragedPath p(g, 2.0);
  CHECK(p.kind() == "moment");
  for (double z = -6.0; z <= 6.0; z += 0.5) {
    CHECK(p.log_energy(vec({z}), 0.0) == p.base().log_density(vec({z})));
    CHECK(p.log_energy(vec({z}), 1.0) == p.target().log_density(vec({z})));
    const double want = make_gaussian(vec({0.0}), m1(18.0)).log_density(vec({z})) + 1.0;
    CHECK(p.log_energy(vec({z}), 0.5) == doctest::Approx(want).epsilon(1e-14));
  }
  const MomentAveragedPath e({vec({-1.0, 0.0}), vec({2.0, 1.0}), Eigen::MatrixXd::Identity(2, 2),
                              2.0 * Eigen::MatrixXd::Identity(2, 2), 3.0});
  CHECK(e.kind() == "escort");
  for (double beta : {0.2, 0.6}) {
    const Point z = vec({0.3, -0.4});
    Eigen::VectorXd g2;
    e.log_energy_and_gradient(z, beta, g2);
    const Eigen::VectorXd fd =
        oracle::central_difference([&](const Eigen::VectorXd& x) { return e.log_energy(x, beta); }, z);
    CHECK(oracle::rel_err(g2, fd) < 1e-5);
  }
}
