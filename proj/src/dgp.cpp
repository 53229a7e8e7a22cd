#include "cindes/dgp.hpp"

#include <Eigen/Cholesky>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "cindes/errors.hpp"

namespace cindes {
namespace {

constexpr double kPi = std::numbers::pi;

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

double nonlinear_slope(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::tanh(std::sin(x(0)) + x(1) * x(1) - 0.5 * x(2));
}

double mixture_weight(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return 1.0 / (1.0 + std::exp(-0.2 - 1.2 * x(0) + 0.8 * x(1) - 0.6 * x(2) + 0.4 * x(3)));
}

double mixture_mean1(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return 0.6 * x(0) - 0.3 * x(1) + 0.2 * x(2) + 0.4 * std::sin(2 * kPi * x(0)) + 0.2 * std::cos(2 * kPi * x(1));
}

// cos(2 pi x_3) here, against cos(2 pi x_2) in the first mean, as printed.
double mixture_mean2(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return -0.5 * x(0) + 0.2 * x(1) - 0.25 * x(2) + 0.1 * x(3) - 0.35 * std::sin(2 * kPi * x(0)) +
         0.25 * std::cos(2 * kPi * x(2));
}

double additive_mean(const DgpSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x) {
  double mu = 0.0;
  for (int j = 0; j < 5; ++j) mu += additive_term(spec.additive_terms[j], x(j));
  return mu;
}

double gaussian_pdf(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                    const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd z = llt.matrixL().solve(y - mean);
  const double log_det = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return std::exp(-0.5 * z.squaredNorm() - 0.5 * log_det -
                  0.5 * static_cast<double>(y.size()) * std::log(2.0 * kPi));
}

bool in_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const Eigen::Ref<const Eigen::VectorXd>& y) {
  return (y.array() >= lo.array()).all() && (y.array() <= hi.array()).all();
}

double sample_nonlinear(double slope, double u) {
  // F(y) = ((y + 1) - slope * (y^2 - 1) / 2) / 2 on [-1, 1]; stable root of F(y) = u.
  const double c = u - 0.5 - 0.25 * slope;
  return 2.0 * c / (0.5 + std::sqrt(std::max(0.0, 0.25 - slope * c)));
}

Eigen::VectorXd sample_response(const DgpSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                                RandomEngine& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd y(spec.dy);
  switch (spec.kind) {
    case DgpKind::SphericalMixture:
    case DgpKind::EllipticalMixture: {
      std::uniform_int_distribution<std::size_t> pick(0, spec.means.size() - 1);
      const std::size_t j = pick(rng);
      const Eigen::LLT<Eigen::MatrixXd> llt(spec.covariances[j]);
      y = spec.means[j] + llt.matrixL() * standard_normal(spec.dy, rng);
      break;
    }
    case DgpKind::Nonlinear:
      y(0) = sample_nonlinear(nonlinear_slope(x), unit(rng));
      break;
    case DgpKind::Additive:
      y(0) = TruncatedNormal{additive_mean(spec, x), 2.0, 1.0}.sample(rng);
      break;
    case DgpKind::CondGaussianMixture: {
      const bool second = unit(rng) < mixture_weight(x);
      const TruncatedNormal tn = second ? TruncatedNormal{mixture_mean2(x), 0.12, 0.85}
                                        : TruncatedNormal{mixture_mean1(x), 0.15, 0.85};
      y(0) = tn.sample(rng);
      break;
    }
    case DgpKind::MultivariateLinear: {
      const Eigen::VectorXd mean = spec.linear_weights * x;
      for (int j = 0; j < spec.dy; ++j) y(j) = TruncatedNormal{mean(j), 1.0, 1.0}.sample(rng);
      break;
    }
  }
  return y;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double TruncatedNormal::pdf(double y) const {
  if (y < -bound || y > bound) return 0.0;
  const double a = (-bound - mu) / sigma;
  const double b = (bound - mu) / sigma;
  // Mass of [a, b] computed in whichever tail keeps precision.
  const double mass = a > 0.0 ? normal_cdf(-a) - normal_cdf(-b) : normal_cdf(b) - normal_cdf(a);
  return normal_pdf((y - mu) / sigma) / (sigma * mass);
}

double TruncatedNormal::quantile(double u) const {
  double a = (-bound - mu) / sigma;
  double b = (bound - mu) / sigma;
  // Sample the mirrored law when the interval sits in the upper tail.
  const bool mirror = a > 0.0;
  if (mirror) {
    std::swap(a, b);
    a = -a;
    b = -b;
  }
  const double lo = normal_cdf(a);
  const double hi = normal_cdf(b);
  const double p = std::clamp(lo + u * (hi - lo), std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
  double z = normal_quantile(p);
  z = std::clamp(z, a, b);
  const double y = mirror ? mu - sigma * z : mu + sigma * z;
  return std::clamp(y, -bound, bound);
}

double additive_term(AdditiveTerm term, double x) {
  switch (term) {
    case AdditiveTerm::CosPi: return std::cos(kPi * x);
    case AdditiveTerm::Sin: return std::sin(x);
    case AdditiveTerm::SquaredTent: return (1.0 - std::abs(x)) * (1.0 - std::abs(x));
    case AdditiveTerm::Logistic: return 1.0 / (1.0 + std::exp(-x));
    case AdditiveTerm::SqrtAbs: return 2.0 * std::sqrt(std::abs(x)) - 1.0;
  }
  return 0.0;
}

std::string_view additive_term_name(AdditiveTerm term) {
  switch (term) {
    case AdditiveTerm::CosPi: return "cos(pi x)";
    case AdditiveTerm::Sin: return "sin(x)";
    case AdditiveTerm::SquaredTent: return "(1-|x|)^2";
    case AdditiveTerm::Logistic: return "1/(1+exp(-x))";
    case AdditiveTerm::SqrtAbs: return "2 sqrt(|x|)-1";
  }
  return "";
}

std::string DgpSpec::name() const {
  switch (kind) {
    case DgpKind::SphericalMixture: return "spherical";
    case DgpKind::EllipticalMixture: return "elliptical";
    case DgpKind::Nonlinear: return "nonlinear";
    case DgpKind::Additive: return "additive";
    case DgpKind::CondGaussianMixture: return "cond-mixture";
    case DgpKind::MultivariateLinear: return "linear";
  }
  return "";
}

std::string DgpSpec::label() const {
  switch (kind) {
    case DgpKind::Nonlinear: return "I(a)";
    case DgpKind::Additive: return "I(b)";
    case DgpKind::CondGaussianMixture: return "I(c)";
    case DgpKind::MultivariateLinear: return "II";
    default: return name();
  }
}

std::vector<std::string> dgp_names() {
  return {"spherical", "elliptical", "nonlinear", "additive", "cond-mixture", "linear"};
}

DgpSpec make_dgp(DgpKind kind, std::uint64_t structure_seed) {
  DgpSpec spec;
  spec.kind = kind;
  spec.structure_seed = structure_seed;
  auto box = [](int d, double lo, double hi) {
    return std::pair{Eigen::VectorXd::Constant(d, lo).eval(), Eigen::VectorXd::Constant(d, hi).eval()};
  };
  switch (kind) {
    case DgpKind::SphericalMixture: {
      spec.dx = 0;
      spec.dy = 2;
      std::tie(spec.y_lo, spec.y_hi) = box(2, -1.0, 1.0);
      for (int j = 1; j <= 6; ++j) {
        const double angle = 2.0 * kPi * j / 6.0;
        spec.means.push_back(Eigen::Vector2d(0.5 * std::cos(angle), 0.5 * std::sin(angle)));
        spec.covariances.push_back(0.01 * Eigen::MatrixXd::Identity(2, 2));
      }
      break;
    }
    case DgpKind::EllipticalMixture: {
      spec.dx = 0;
      spec.dy = 2;
      std::tie(spec.y_lo, spec.y_hi) = box(2, -7.0, 7.0);
      constexpr double minor = 0.16 * 0.16;
      for (int j = 1; j <= 8; ++j) {
        const double angle = kPi * j / 4.0;
        const double c = std::cos(angle), s = std::sin(angle);
        spec.means.push_back(Eigen::Vector2d(3.0 * c, 3.0 * s));
        Eigen::MatrixXd cov(2, 2);
        cov << c * c + minor * s * s, (1.0 - minor) * s * c, (1.0 - minor) * s * c, s * s + minor * c * c;
        spec.covariances.push_back(cov);
      }
      break;
    }
    case DgpKind::Nonlinear:
      spec.dx = 4;
      spec.dy = 1;
      std::tie(spec.x_lo, spec.x_hi) = box(4, -1.0, 1.0);
      std::tie(spec.y_lo, spec.y_hi) = box(1, -1.0, 1.0);
      break;
    case DgpKind::Additive: {
      spec.dx = 20;
      spec.dy = 1;
      std::tie(spec.x_lo, spec.x_hi) = box(20, 0.0, 1.0);
      std::tie(spec.y_lo, spec.y_hi) = box(1, -1.0, 1.0);
      std::array<AdditiveTerm, 5> terms{AdditiveTerm::CosPi, AdditiveTerm::Sin, AdditiveTerm::SquaredTent,
                                        AdditiveTerm::Logistic, AdditiveTerm::SqrtAbs};
      RandomEngine rng = make_engine(structure_seed, "additive-terms");
      std::shuffle(terms.begin(), terms.end(), rng);
      spec.additive_terms = terms;
      break;
    }
    case DgpKind::CondGaussianMixture:
      spec.dx = 4;
      spec.dy = 1;
      std::tie(spec.x_lo, spec.x_hi) = box(4, 0.0, 1.0);
      std::tie(spec.y_lo, spec.y_hi) = box(1, -0.85, 0.85);
      break;
    case DgpKind::MultivariateLinear: {
      spec.dx = 16;
      spec.dy = 4;
      std::tie(spec.x_lo, spec.x_hi) = box(16, 0.0, 1.0);
      std::tie(spec.y_lo, spec.y_hi) = box(4, -1.0, 1.0);
      // Dirichlet(1, ..., 1) rows: normalized unit exponentials.
      RandomEngine rng = make_engine(structure_seed, "dirichlet-rows");
      std::exponential_distribution<double> expo(1.0);
      spec.linear_weights.resize(4, 16);
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 16; ++c) spec.linear_weights(r, c) = expo(rng);
        spec.linear_weights.row(r) /= spec.linear_weights.row(r).sum();
      }
      break;
    }
  }
  return spec;
}

DgpSpec make_dgp(std::string_view name, std::uint64_t structure_seed) {
  if (name == "spherical") return make_dgp(DgpKind::SphericalMixture, structure_seed);
  if (name == "elliptical") return make_dgp(DgpKind::EllipticalMixture, structure_seed);
  if (name == "nonlinear" || name == "I(a)") return make_dgp(DgpKind::Nonlinear, structure_seed);
  if (name == "additive" || name == "I(b)") return make_dgp(DgpKind::Additive, structure_seed);
  if (name == "cond-mixture" || name == "I(c)") return make_dgp(DgpKind::CondGaussianMixture, structure_seed);
  if (name == "linear" || name == "II") return make_dgp(DgpKind::MultivariateLinear, structure_seed);
  throw UsageError("unknown data-generating process '" + std::string(name) + "'");
}

Eigen::MatrixXd sample_covariates(const DgpSpec& spec, Eigen::Index n, RandomEngine& rng) {
  if (spec.dx == 0) return Eigen::MatrixXd(n, 0);
  return uniform_box(n, spec.x_lo, spec.x_hi, rng);
}

Dataset sample_joint(const DgpSpec& spec, Eigen::Index n, RandomEngine& rng) {
  if (n < 1) throw DomainError("sample_joint needs n >= 1");
  Dataset data;
  data.X.resize(n, spec.dx);
  data.Y.resize(n, spec.dy);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < spec.dx; ++j) data.X(i, j) = spec.x_lo(j) + (spec.x_hi(j) - spec.x_lo(j)) * unit(rng);
    data.Y.row(i) = sample_response(spec, data.X.row(i).transpose(), rng).transpose();
  }
  return data;
}

Eigen::MatrixXd true_sampler_reference(const DgpSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       Eigen::Index n, RandomEngine& rng) {
  if (x.size() != spec.dx) throw ShapeError("covariate has the wrong dimension for " + spec.name());
  Eigen::MatrixXd out(n, spec.dy);
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = sample_response(spec, x, rng).transpose();
  return out;
}

double true_density(const DgpSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (y.size() != spec.dy || x.size() != spec.dx)
    throw ShapeError("true_density: dimension mismatch for " + spec.name());
  switch (spec.kind) {
    case DgpKind::SphericalMixture:
    case DgpKind::EllipticalMixture: {
      double p = 0.0;
      for (std::size_t j = 0; j < spec.means.size(); ++j) p += gaussian_pdf(spec.means[j], spec.covariances[j], y);
      return p / static_cast<double>(spec.means.size());
    }
    case DgpKind::Nonlinear:
      if (y(0) < -1.0 || y(0) > 1.0) return 0.0;
      return 0.5 * (1.0 - y(0) * nonlinear_slope(x));
    case DgpKind::Additive:
      return TruncatedNormal{additive_mean(spec, x), 2.0, 1.0}.pdf(y(0));
    case DgpKind::CondGaussianMixture: {
      const double w = mixture_weight(x);
      return (1.0 - w) * TruncatedNormal{mixture_mean1(x), 0.15, 0.85}.pdf(y(0)) +
             w * TruncatedNormal{mixture_mean2(x), 0.12, 0.85}.pdf(y(0));
    }
    case DgpKind::MultivariateLinear: {
      if (!in_box(spec.y_lo, spec.y_hi, y)) return 0.0;
      const Eigen::VectorXd mean = spec.linear_weights * x;
      double p = 1.0;
      for (int j = 0; j < spec.dy; ++j) p *= TruncatedNormal{mean(j), 1.0, 1.0}.pdf(y(j));
      return p;
    }
  }
  return 0.0;
}

Eigen::VectorXd true_density_batch(const DgpSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                   const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != spec.dx || (spec.dx > 0 && X.rows() != Y.rows()))
    throw ShapeError("true_density_batch: covariates do not match responses");
  if (Y.cols() != spec.dy) throw ShapeError("true_density_batch: responses have the wrong dimension");
  Eigen::VectorXd out(Y.rows());
  if (spec.kind == DgpKind::SphericalMixture || spec.kind == DgpKind::EllipticalMixture) {
    // Factor every component once for the whole batch.
    out.setZero();
    const double k = static_cast<double>(spec.means.size());
    for (std::size_t j = 0; j < spec.means.size(); ++j) {
      const Eigen::LLT<Eigen::MatrixXd> llt(spec.covariances[j]);
      const Eigen::MatrixXd L = llt.matrixL();
      const double log_norm = -L.diagonal().array().log().sum() - 0.5 * spec.dy * std::log(2.0 * kPi);
      const Eigen::MatrixXd centered = (Y.rowwise() - spec.means[j].transpose()).transpose();
      const Eigen::MatrixXd z = L.triangularView<Eigen::Lower>().solve(centered);
      out.array() += (log_norm - 0.5 * z.colwise().squaredNorm().transpose().array()).exp() / k;
    }
    return out;
  }
  const Eigen::VectorXd empty(0);
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    out(i) = spec.dx == 0 ? true_density(spec, Y.row(i).transpose(), empty)
                          : true_density(spec, Y.row(i).transpose(), X.row(i).transpose());
  return out;
}

}  // namespace cindes
