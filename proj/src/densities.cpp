#include "qpaths/densities.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "qpaths/error.hpp"
#include "qpaths/kernels.hpp"

namespace qpaths {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct CholeskyFactor {
  Eigen::MatrixXd L;
  double log_det = 0.0;
};

CholeskyFactor factor_spd(const Eigen::MatrixXd& S, const char* what) {
  if (S.rows() != S.cols() || S.rows() == 0)
    throw DomainError(std::string(what) + " must be a nonempty square matrix");
  if (!S.allFinite()) throw DomainError(std::string(what) + " has non-finite entries");
  const double scale = S.cwiseAbs().maxCoeff();
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
    throw DomainError(std::string(what) + " must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw DomainError(std::string(what) + " must be positive definite");
  CholeskyFactor f;
  f.L = llt.matrixL();
  for (Eigen::Index i = 0; i < f.L.rows(); ++i) {
    if (!(f.L(i, i) > 0.0)) throw DomainError(std::string(what) + " must be positive definite");
    f.log_det += 2.0 * std::log(f.L(i, i));
  }
  return f;
}

void check_dim(const Point& z, int dim) {
  if (z.size() != dim) throw DomainError("point dimension does not match density");
}

}  // namespace

UnnormalizedDensity::UnnormalizedDensity(Spec spec) {
  if (spec.dim < 1) throw DomainError("density dimension must be positive");
  if (!spec.log_density || !spec.value_and_gradient)
    throw DomainError("density needs log_density and value_and_gradient");
  spec_ = std::make_shared<const Spec>(std::move(spec));
}

Eigen::VectorXd UnnormalizedDensity::gradient(const Point& z) const {
  Eigen::VectorXd g(dim());
  spec_->value_and_gradient(z, g);
  return g;
}

Point UnnormalizedDensity::sample(Rng& rng) const {
  if (!spec_->sampler) throw DomainError("density '" + name() + "' has no exact sampler");
  return spec_->sampler(rng);
}

UnnormalizedDensity scaled(const UnnormalizedDensity& f, double log_c) {
  if (!std::isfinite(log_c)) throw DomainError("log scale must be finite");
  UnnormalizedDensity::Spec s;
  s.name = f.name() + "*scaled";
  s.dim = f.dim();
  s.log_density = [f, log_c](const Point& z) { return f.log_density(z) + log_c; };
  s.value_and_gradient = [f, log_c](const Point& z, Eigen::VectorXd& g) {
    return f.value_and_gradient(z, g) + log_c;
  };
  if (f.has_sampler()) s.sampler = [f](Rng& rng) { return f.sample(rng); };
  if (auto ln = f.known_log_normalizer()) s.log_normalizer = *ln + log_c;
  return UnnormalizedDensity(std::move(s));
}

UnnormalizedDensity make_gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma) {
  if (mu.size() == 0 || Sigma.rows() != mu.size())
    throw DomainError("Gaussian mean and covariance dimensions differ");
  if (!mu.allFinite()) throw DomainError("Gaussian mean must be finite");
  const auto f = std::make_shared<const CholeskyFactor>(factor_spd(Sigma, "Gaussian covariance"));
  const int d = static_cast<int>(mu.size());
  const double log_c = -0.5 * (d * kLog2Pi + f->log_det);

  UnnormalizedDensity::Spec s;
  s.name = "gaussian";
  s.dim = d;
  s.log_density = [=](const Point& z) {
    check_dim(z, d);
    const Eigen::VectorXd w = f->L.triangularView<Eigen::Lower>().solve(z - mu);
    return log_c - 0.5 * w.squaredNorm();
  };
  s.value_and_gradient = [=](const Point& z, Eigen::VectorXd& g) {
    check_dim(z, d);
    const Eigen::VectorXd w = f->L.triangularView<Eigen::Lower>().solve(z - mu);
    g = -f->L.transpose().triangularView<Eigen::Upper>().solve(w);
    return log_c - 0.5 * w.squaredNorm();
  };
  s.sampler = [=](Rng& rng) {
    Eigen::VectorXd n(d);
    for (int i = 0; i < d; ++i) n(i) = rng.normal();
    return Point(mu + f->L * n);
  };
  s.log_normalizer = 0.0;
  return UnnormalizedDensity(std::move(s));
}

UnnormalizedDensity make_student_t(const StudentTParams& p) {
  if (std::isinf(p.nu) && p.nu > 0) return make_gaussian(p.mu, p.Sigma);
  if (!(p.nu > 0.0)) throw DomainError("Student-t degrees of freedom must be positive");
  if (p.mu.size() == 0 || p.Sigma.rows() != p.mu.size())
    throw DomainError("Student-t location and scale dimensions differ");
  if (!p.mu.allFinite()) throw DomainError("Student-t location must be finite");
  const auto f = std::make_shared<const CholeskyFactor>(factor_spd(p.Sigma, "Student-t scale"));
  const int d = static_cast<int>(p.mu.size());
  const double nu = p.nu;
  const Eigen::VectorXd mu = p.mu;
  const double log_c = std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * f->log_det -
                       0.5 * d * std::log(nu * std::numbers::pi);
  const double power = 0.5 * (nu + d);

  UnnormalizedDensity::Spec s;
  s.name = "student_t";
  s.dim = d;
  s.log_density = [=](const Point& z) {
    check_dim(z, d);
    const Eigen::VectorXd w = f->L.triangularView<Eigen::Lower>().solve(z - mu);
    return log_c - power * std::log1p(w.squaredNorm() / nu);
  };
  s.value_and_gradient = [=](const Point& z, Eigen::VectorXd& g) {
    check_dim(z, d);
    const Eigen::VectorXd w = f->L.triangularView<Eigen::Lower>().solve(z - mu);
    const double m = w.squaredNorm();
    g = -((nu + d) / (nu + m)) * f->L.transpose().triangularView<Eigen::Upper>().solve(w);
    return log_c - power * std::log1p(m / nu);
  };
  s.sampler = [=](Rng& rng) {
    Eigen::VectorXd n(d);
    for (int i = 0; i < d; ++i) n(i) = rng.normal();
    const double chi2 = 2.0 * rng.gamma(0.5 * nu);
    return Point(mu + f->L * n / std::sqrt(chi2 / nu));
  };
  s.log_normalizer = 0.0;
  return UnnormalizedDensity(std::move(s));
}

double q_from_nu(double nu, int d) {
  if (!(nu > 0.0) || d < 1) throw DomainError("need nu > 0 and d >= 1");
  if (std::isinf(nu)) return 1.0;
  return (nu + d + 2.0) / (nu + d);
}

double nu_from_q(double q, int d) {
  if (d < 1) throw DomainError("need d >= 1");
  if (!(q > 1.0)) throw DomainError("Student-t order needs q > 1");
  const double nu = (d - d * q + 2.0) / (q - 1.0);
  if (!(nu > 0.0)) throw DomainError("q implies nonpositive degrees of freedom");
  return nu;
}

UnnormalizedDensity make_pareto(const ParetoParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw DomainError("Pareto scale must be positive");
  if (!std::isfinite(p.x_min) || !std::isfinite(p.xi)) throw DomainError("Pareto parameters must be finite");
  const ParetoParams c = p;
  const double log_sigma = std::log(c.sigma);

  // t = (x - x_min)/sigma; support t >= 0 and, for xi < 0, 1 + xi t > 0.
  auto in_support = [c](double t) { return t >= 0.0 && (c.xi >= 0.0 || 1.0 + c.xi * t > 0.0); };
  auto logp = [c, log_sigma, in_support](double x) -> double {
    const double t = (x - c.x_min) / c.sigma;
    if (!in_support(t)) return -INFINITY;
    if (c.xi == 0.0) return -log_sigma - t;
    return -log_sigma - (1.0 / c.xi + 1.0) * std::log1p(c.xi * t);
  };

  UnnormalizedDensity::Spec s;
  s.name = "pareto";
  s.dim = 1;
  s.log_density = [logp](const Point& z) {
    check_dim(z, 1);
    return logp(z(0));
  };
  s.value_and_gradient = [c, logp, in_support](const Point& z, Eigen::VectorXd& g) {
    check_dim(z, 1);
    g.resize(1);
    const double t = (z(0) - c.x_min) / c.sigma;
    g(0) = in_support(t) ? -(1.0 + c.xi) / (c.sigma * (1.0 + c.xi * t)) : 0.0;
    return logp(z(0));
  };
  s.sampler = [c](Rng& rng) {
    const double u = rng.uniform_open();
    Point x(1);
    if (c.xi == 0.0)
      x(0) = c.x_min - c.sigma * std::log(u);
    else
      x(0) = c.x_min + c.sigma * std::expm1(-c.xi * std::log(u)) / c.xi;
    return x;
  };
  s.log_normalizer = 0.0;
  return UnnormalizedDensity(std::move(s));
}

double q_from_xi(double xi) {
  if (xi == -1.0) throw DomainError("q is undefined at xi = -1");
  return (2.0 * xi + 1.0) / (xi + 1.0);
}

double xi_from_q(double q) {
  if (q == 2.0) throw DomainError("xi is undefined at q = 2");
  return (1.0 - q) / (q - 2.0);
}

void LogisticModel::validate() const {
  if (features.cols() < 1) throw DomainError("logistic model needs at least one column");
  if (features.rows() != labels.size()) throw DomainError("feature rows and labels differ in length");
  if (!features.allFinite()) throw DomainError("feature matrix must be finite");
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels(i) != 0.0 && labels(i) != 1.0) throw DomainError("labels must be 0 or 1");
  if (!(prior_sd > 0.0) || !std::isfinite(prior_sd)) throw DomainError("prior_sd must be positive");
}

PosteriorPair make_logistic_posterior(const LogisticModel& m) {
  m.validate();
  const int d = static_cast<int>(m.features.cols());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * (m.prior_sd * m.prior_sd);
  UnnormalizedDensity prior = make_gaussian(zero, cov);

  const auto X = std::make_shared<const Eigen::MatrixXd>(m.features);
  const auto y = std::make_shared<const Eigen::VectorXd>(m.labels);
  const std::size_t n = static_cast<std::size_t>(m.labels.size());

  auto loglik = [X, y, n](const Point& w, Eigen::VectorXd* grad) {
    const Eigen::VectorXd logits = (*X) * w;
    Eigen::VectorXd residual(static_cast<Eigen::Index>(n));
    const double ll = kernels::active().logistic_loglik(logits.data(), y->data(), residual.data(), n);
    if (grad != nullptr) *grad = X->transpose() * residual;
    return ll;
  };

  UnnormalizedDensity::Spec s;
  s.name = "logistic_posterior";
  s.dim = d;
  s.log_density = [prior, loglik, d](const Point& w) {
    check_dim(w, d);
    return prior.log_density(w) + loglik(w, nullptr);
  };
  s.value_and_gradient = [prior, loglik, d](const Point& w, Eigen::VectorXd& g) {
    check_dim(w, d);
    Eigen::VectorXd gl;
    const double lp = prior.value_and_gradient(w, g);
    const double ll = loglik(w, &gl);
    g += gl;
    return lp + ll;
  };
  if (n == 0) {
    s.sampler = [prior](Rng& rng) { return prior.sample(rng); };
    s.log_normalizer = 0.0;
  }
  return {prior, UnnormalizedDensity(std::move(s))};
}

UnnormalizedDensity make_categorical(const std::vector<double>& log_masses) {
  if (log_masses.empty()) throw DomainError("categorical density needs at least one atom");
  for (double lm : log_masses)
    if (std::isnan(lm) || lm == INFINITY) throw DomainError("categorical log-mass must be < +inf");
  const double log_z = kernels::log_sum_exp(log_masses);
  if (log_z == -INFINITY) throw DomainError("categorical masses are all zero");
  const auto lm = std::make_shared<const std::vector<double>>(log_masses);
  std::vector<double> cdf(log_masses.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < log_masses.size(); ++i) {
    acc += std::exp(log_masses[i] - log_z);
    cdf[i] = acc;
  }
  const auto cdf_ptr = std::make_shared<const std::vector<double>>(std::move(cdf));

  auto logp = [lm](const Point& z) -> double {
    check_dim(z, 1);
    const double r = std::round(z(0));
    if (r != z(0) || r < 0.0 || r >= static_cast<double>(lm->size())) return -INFINITY;
    return (*lm)[static_cast<std::size_t>(r)];
  };

  UnnormalizedDensity::Spec s;
  s.name = "categorical";
  s.dim = 1;
  s.log_density = logp;
  s.value_and_gradient = [logp](const Point& z, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(1);
    return logp(z);
  };
  s.sampler = [cdf_ptr](Rng& rng) {
    const double u = rng.uniform() * cdf_ptr->back();
    std::size_t i = 0;
    while (i + 1 < cdf_ptr->size() && (*cdf_ptr)[i] <= u) ++i;
    return Point(Point::Constant(1, static_cast<double>(i)));
  };
  s.log_normalizer = log_z;
  return UnnormalizedDensity(std::move(s));
}

void GridDensity::validate() const {
  if (mass.size() == 0) throw DomainError("grid density needs at least one atom");
  if (!atoms.empty() && atoms.size() != size()) throw DomainError("grid atoms and masses differ in length");
  bool any = false;
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    if (!(mass(i) >= 0.0) || !std::isfinite(mass(i)))
      throw DomainError("grid masses must be finite and nonnegative");
    any = any || mass(i) > 0.0;
  }
  if (!any) throw DomainError("grid density is degenerate: every mass is zero");
}

GridDensity grid_from_density(const UnnormalizedDensity& f, const std::vector<Point>& atoms) {
  if (atoms.empty()) throw DomainError("grid needs at least one atom");
  GridDensity g;
  g.atoms = atoms;
  g.mass.resize(static_cast<Eigen::Index>(atoms.size()));
  for (std::size_t i = 0; i < atoms.size(); ++i)
    g.mass(static_cast<Eigen::Index>(i)) = std::exp(f.log_density(atoms[i]));
  g.validate();
  return g;
}

}  // namespace qpaths
