#include "cindes/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cindes/errors.hpp"

namespace cindes {
namespace {

// Rows per forward pass when batching many covariates against shared draws.
constexpr Eigen::Index kNllBatchRows = 8192;

double log_mean_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double hi = v.maxCoeff();
  return hi + std::log((v.array() - hi).exp().mean());
}

void check_finite(const Eigen::VectorXd& values, const char* which) {
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (!std::isfinite(values(i)))
      throw NumericError(std::string(which) + " density is not finite at test point " + std::to_string(i));
}

}  // namespace

double empirical_tv(const DensityFn& est, const DensityFn& truth, const TestPoints& points) {
  if (points.Y.rows() == 0) throw DomainError("empirical_tv needs at least one test point");
  const Eigen::VectorXd a = est(points.Y, points.X);
  const Eigen::VectorXd b = truth(points.Y, points.X);
  if (a.size() != points.Y.rows() || b.size() != points.Y.rows())
    throw ShapeError("density function returned the wrong number of values");
  check_finite(a, "estimated");
  check_finite(b, "true");
  return (a - b).cwiseAbs().mean();
}

NllResult normalized_nll(const DensityModel& model, const Dataset& test,
                         const Eigen::Ref<const Eigen::MatrixXd>& ref_draws) {
  if (ref_draws.rows() < 1) throw DomainError("normalized_nll needs at least one reference draw");
  if (test.dy() != model.dy() || test.dx() != model.dx())
    throw ShapeError("normalized_nll: test set dimensions do not match the model");
  const Eigen::Index n = test.size();
  const Eigen::Index k = ref_draws.rows();
  const int dx = model.dx();
  const int dy = model.dy();

  // log Z(x_i) = log mean_j exp f(ytilde_j, x_i); one value for unconditional models.
  Eigen::VectorXd log_z(dx == 0 ? 1 : n);
  if (dx == 0) {
    log_z(0) = log_mean_exp(model.logit_batch(ref_draws, Eigen::VectorXd(0)));
  } else {
    const Eigen::Index per_batch = std::max<Eigen::Index>(1, kNllBatchRows / k);
    Eigen::MatrixXd inputs;
    for (Eigen::Index start = 0; start < n; start += per_batch) {
      const Eigen::Index len = std::min(per_batch, n - start);
      inputs.resize(len * k, dy + dx);
      for (Eigen::Index i = 0; i < len; ++i) {
        inputs.block(i * k, 0, k, dy) = ref_draws;
        inputs.block(i * k, dy, k, dx) = test.X.row(start + i).replicate(k, 1);
      }
      const Eigen::VectorXd f = forward_batch(model.params(), inputs);
      for (Eigen::Index i = 0; i < len; ++i) log_z(start + i) = log_mean_exp(f.segment(i * k, k));
    }
  }
  for (Eigen::Index i = 0; i < log_z.size(); ++i)
    if (!std::isfinite(log_z(i))) throw NumericError("normalized_nll: normalizer is zero or not finite");

  Eigen::MatrixXd inputs(n, dy + dx);
  inputs.leftCols(dy) = test.Y;
  if (dx > 0) inputs.rightCols(dx) = test.X;
  const Eigen::VectorXd f = forward_batch(model.params(), inputs);
  const Eigen::VectorXd log_ref = model.reference().log_density_batch(test.Y);

  NllResult out;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(log_ref(i))) {
      ++out.outside_support;
      continue;
    }
    sum += f(i) + log_ref(i) - log_z(dx == 0 ? 0 : i);
    ++out.evaluated;
  }
  if (out.evaluated == 0) throw DomainError("normalized_nll: no test response lies inside the model support");
  out.nll = -sum / static_cast<double>(out.evaluated);
  return out;
}

NllResult normalized_nll(const DensityModel& model, const Dataset& test, int n_ref, RandomEngine& rng) {
  if (n_ref < 1) throw DomainError("normalized_nll needs n_ref >= 1");
  return normalized_nll(model, test, model.reference().sample(n_ref, rng));
}

double histogram_tv(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& truth, int bins,
                    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const Eigen::Index d = samples.cols();
  if (samples.rows() == 0) throw DomainError("histogram_tv needs at least one sample");
  if (d < 1 || d > 2) throw ShapeError("histogram_tv supports one or two dimensions");
  if (lo.size() != d || hi.size() != d) throw ShapeError("histogram_tv: grid bounds have the wrong dimension");
  if (bins < 1) throw DomainError("histogram_tv needs bins >= 1");
  if (!((hi.array() > lo.array()).all())) throw DomainError("histogram_tv needs lo < hi");

  constexpr int kSub = 8;
  const Eigen::Index cells = d == 1 ? bins : static_cast<Eigen::Index>(bins) * bins;
  const Eigen::VectorXd width = (hi - lo) / bins;

  Eigen::VectorXd empirical = Eigen::VectorXd::Zero(cells);
  Eigen::Index outside = 0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    Eigen::Index cell = 0;
    bool in = true;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = samples(i, j);
      if (!(v >= lo(j) && v <= hi(j))) {
        in = false;
        break;
      }
      const auto b = std::min<Eigen::Index>(static_cast<Eigen::Index>((v - lo(j)) / width(j)), bins - 1);
      cell = cell * bins + b;
    }
    if (in)
      empirical(cell) += 1.0;
    else
      ++outside;
  }
  const double n = static_cast<double>(samples.rows());
  empirical /= n;

  // Midpoint quadrature: kSub points per axis inside every cell.
  const Eigen::Index per_axis = static_cast<Eigen::Index>(bins) * kSub;
  const Eigen::Index points = d == 1 ? per_axis : per_axis * per_axis;
  Eigen::MatrixXd grid(points, d);
  for (Eigen::Index p = 0; p < points; ++p) {
    Eigen::Index rest = p;
    for (Eigen::Index j = d - 1; j >= 0; --j) {
      const Eigen::Index q = rest % per_axis;
      rest /= per_axis;
      grid(p, j) = lo(j) + (static_cast<double>(q) + 0.5) * width(j) / kSub;
    }
  }
  const Eigen::VectorXd dens = truth(grid);
  if (dens.size() != points) throw ShapeError("histogram_tv: truth returned the wrong number of values");
  check_finite(dens, "true");
  const double point_volume = width.prod() / std::pow(static_cast<double>(kSub), static_cast<double>(d));

  Eigen::VectorXd expected = Eigen::VectorXd::Zero(cells);
  for (Eigen::Index p = 0; p < points; ++p) {
    Eigen::Index cell = 0;
    Eigen::Index rest = p;
    Eigen::Index mult = 1;
    for (Eigen::Index j = d - 1; j >= 0; --j) {
      cell += ((rest % per_axis) / kSub) * mult;
      rest /= per_axis;
      mult *= bins;
    }
    expected(cell) += dens(p) * point_volume;
  }
  const double outside_mass = std::max(0.0, 1.0 - expected.sum());
  const double tv = 0.5 * ((empirical - expected).cwiseAbs().sum() +
                           std::abs(static_cast<double>(outside) / n - outside_mass));
  return std::clamp(tv, 0.0, 1.0);
}

MomentErrors moment_diagnostics(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                const Eigen::Ref<const Eigen::MatrixXd>& reference_samples) {
  if (samples.cols() != reference_samples.cols())
    throw ShapeError("moment_diagnostics: sample sets have different dimensions");
  if (samples.rows() == 0 || reference_samples.rows() == 0)
    throw DomainError("moment_diagnostics needs non-empty sample sets");
  auto moments = [](const Eigen::Ref<const Eigen::MatrixXd>& s) {
    const Eigen::RowVectorXd mean = s.colwise().mean();
    const Eigen::MatrixXd centered = s.rowwise() - mean;
    const double denom = s.rows() > 1 ? static_cast<double>(s.rows() - 1) : 1.0;
    return std::pair<Eigen::VectorXd, Eigen::MatrixXd>{mean.transpose(),
                                                        centered.transpose() * centered / denom};
  };
  const auto [m1, c1] = moments(samples);
  const auto [m2, c2] = moments(reference_samples);
  return MomentErrors{m1 - m2, (c1 - c2).norm()};
}

TvDesign default_tv_design(const DgpSpec& spec) {
  if (spec.dx == 0) return TvDesign{1, 100000, 4096};
  if (spec.dy == 1) return TvDesign{500, 500, 4096};
  return TvDesign{250, 400, 4096};
}

TestPoints tv_test_points(const DgpSpec& spec, const TvDesign& design, RandomEngine& rng) {
  if (design.n_covariates < 1 || design.n_responses < 1)
    throw DomainError("TV design needs at least one covariate and one response");
  const Eigen::Index n = design.n_covariates * design.n_responses;
  TestPoints pts;
  pts.X.resize(n, spec.dx);
  pts.Y.resize(n, spec.dy);
  const Eigen::MatrixXd xs = sample_covariates(spec, design.n_covariates, rng);
  for (Eigen::Index c = 0; c < design.n_covariates; ++c) {
    const Eigen::Index start = c * design.n_responses;
    if (spec.dx > 0) pts.X.middleRows(start, design.n_responses) = xs.row(c).replicate(design.n_responses, 1);
    pts.Y.middleRows(start, design.n_responses) = uniform_box(design.n_responses, spec.y_lo, spec.y_hi, rng);
  }
  return pts;
}

double model_tv(const DensityModel& model, const DgpSpec& spec, const TvDesign& design, RandomEngine& rng) {
  if (model.dx() != spec.dx || model.dy() != spec.dy)
    throw ShapeError("model dimensions do not match the data-generating process");
  const TestPoints pts = tv_test_points(spec, design, rng);
  const Eigen::Index r = design.n_responses;
  double sum = 0.0;
  for (Eigen::Index c = 0; c < design.n_covariates; ++c) {
    const Eigen::VectorXd x = pts.X.row(c * r).transpose();
    const double z = normalizing_constant(model, x, design.norm_samples, rng);
    const auto ys = pts.Y.middleRows(c * r, r);
    const Eigen::VectorXd est = (model.log_density_batch(ys, x).array() - std::log(z)).exp();
    const Eigen::VectorXd truth = true_density_batch(spec, ys, pts.X.middleRows(c * r, r));
    check_finite(est, "estimated");
    check_finite(truth, "true");
    sum += (est - truth).cwiseAbs().sum();
  }
  return sum / static_cast<double>(pts.Y.rows());
}

}  // namespace cindes
