#include "trf/surrogate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace trf {

std::string_view short_name(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::Linear: return "l";
    case SurrogateKind::Quadratic: return "q";
    case SurrogateKind::SimplifiedQuadratic: return "sq";
    case SurrogateKind::GaussianProcess: return "gp";
    case SurrogateKind::TaylorSeries: return "ts";
    case SurrogateKind::Hybrid: return "h";
  }
  return "?";
}

std::string_view long_name(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::Linear: return "linear";
    case SurrogateKind::Quadratic: return "quadratic";
    case SurrogateKind::SimplifiedQuadratic: return "simplified_quadratic";
    case SurrogateKind::GaussianProcess: return "gaussian_process";
    case SurrogateKind::TaylorSeries: return "taylor_series";
    case SurrogateKind::Hybrid: return "hybrid";
  }
  return "?";
}

SurrogateKind parse_surrogate_kind(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  for (SurrogateKind k : kAllSurrogateKinds)
    if (t == short_name(k) || t == long_name(k)) return k;
  if (t == "taylor") return SurrogateKind::TaylorSeries;
  if (t == "gaussian" || t == "gaussianprocess") return SurrogateKind::GaussianProcess;
  if (t == "simplifiedquadratic" || t == "simplified") return SurrogateKind::SimplifiedQuadratic;
  throw ConfigError("unknown surrogate kind '" + t + "'");
}

// ---- GP -------------------------------------------------------------------

double KernelSpec::operator()(const Vector& a, const Vector& b) const {
  return signal_variance * std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale * lengthscale));
}

GaussianProcess::GaussianProcess(Matrix training_inputs, Vector targets, KernelSpec kernel)
    : inputs_(std::move(training_inputs)), kernel_(kernel) {
  const Eigen::Index n = inputs_.rows();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel_(inputs_.row(i).transpose(), inputs_.row(j).transpose());
  double nugget = kernel_.nugget;
  for (;;) {
    Matrix kn = k;
    kn.diagonal().array() += nugget * kernel_.signal_variance;
    chol_.compute(kn);
    if (chol_.info() == Eigen::Success) {
      // A factorization can "succeed" with a numerically zero pivot.
      const double dmin = chol_.matrixLLT().diagonal().minCoeff();
      if (dmin > 1e-14 * std::sqrt(kernel_.signal_variance)) break;
    }
    nugget = nugget > 0.0 ? nugget * 10.0 : 1e-10;
    if (nugget > 1e-4 * (1.0 + 1e-9)) throw Error("kernel matrix is not positive definite even with nugget 1e-4");
  }
  kernel_.nugget = nugget;
  alpha_ = chol_.solve(targets);
}

double GaussianProcess::mean(const Vector& w) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) s += alpha_[i] * kernel_(w, inputs_.row(i).transpose());
  return s;
}

Vector GaussianProcess::mean_gradient(const Vector& w) const {
  Vector g = Vector::Zero(w.size());
  const double inv_l2 = 1.0 / (kernel_.lengthscale * kernel_.lengthscale);
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
    const Vector wi = inputs_.row(i).transpose();
    g -= alpha_[i] * kernel_(w, wi) * inv_l2 * (w - wi);
  }
  return g;
}

double GaussianProcess::variance(const Vector& w) const {
  Vector ks(inputs_.rows());
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) ks[i] = kernel_(w, inputs_.row(i).transpose());
  return std::max(0.0, kernel_(w, w) - ks.dot(chol_.solve(ks)));
}

Matrix GaussianProcess::mean_hessian(const Vector& w) const {
  const double l2 = kernel_.lengthscale * kernel_.lengthscale;
  const Eigen::Index m = w.size();
  Matrix h = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
    const Vector r = w - inputs_.row(i).transpose();
    const double k = kernel_(w, inputs_.row(i).transpose());
    h += alpha_[i] * k * (r * r.transpose() / (l2 * l2) - Matrix::Identity(m, m) / l2);
  }
  return h;
}

// ---- design ---------------------------------------------------------------

int required_samples(SurrogateKind kind, int m) {
  switch (kind) {
    case SurrogateKind::Linear: return m + 1;
    case SurrogateKind::Quadratic: return (m + 1) * (m + 2) / 2;
    case SurrogateKind::SimplifiedQuadratic:
    case SurrogateKind::GaussianProcess:
    case SurrogateKind::Hybrid: return 2 * m + 1;
    case SurrogateKind::TaylorSeries: return 1;
  }
  return 1;
}

namespace {

struct AxisOffsets {
  double first = 0.0;
  double second = 0.0;
};

AxisOffsets choose_offsets(double center, double lo, double hi, double sigma) {
  const double up = std::max(0.0, hi - center);
  const double down = std::max(0.0, center - lo);
  std::vector<double> picked;
  auto fits = [&](double o) { return o > 0 ? o <= up : -o <= down; };
  for (double o : {sigma, -sigma, 0.5 * sigma, -0.5 * sigma}) {
    if (picked.size() == 2) break;
    if (fits(o)) picked.push_back(o);
  }
  if (picked.size() < 2) {
    picked.clear();
    if (up > 0 && down > 0) {
      picked = {std::min(up, sigma), -std::min(down, sigma)};
    } else if (up > 0) {
      picked = {std::min(up, sigma), 0.5 * std::min(up, sigma)};
    } else if (down > 0) {
      picked = {-std::min(down, sigma), -0.5 * std::min(down, sigma)};
    } else {
      throw IllPoisedDesign("black-box input is fixed by its bounds; no poised design exists", kInf);
    }
  }
  return {picked[0], picked[1]};
}

std::vector<Vector> stencil(SurrogateKind kind, const Vector& c, double sigma, const Vector& lo,
                            const Vector& hi) {
  const int m = static_cast<int>(c.size());
  std::vector<Vector> pts{c};
  if (kind == SurrogateKind::TaylorSeries) return pts;
  std::vector<AxisOffsets> off(m);
  for (int i = 0; i < m; ++i) off[i] = choose_offsets(c[i], lo[i], hi[i], sigma);
  for (int i = 0; i < m; ++i) {
    Vector p = c;
    p[i] += off[i].first;
    pts.push_back(p);
  }
  if (kind == SurrogateKind::Linear) return pts;
  for (int i = 0; i < m; ++i) {
    Vector p = c;
    p[i] += off[i].second;
    pts.push_back(p);
  }
  if (kind == SurrogateKind::Quadratic) {
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        Vector p = c;
        p[i] += s * off[i].first;
        p[j] += s * off[j].first;
        pts.push_back(p);
      }
  }
  return pts;
}

// Rows: non-center points. Columns: polynomial features in u = (w - c) / sigma.
Matrix polynomial_design(SurrogateKind kind, const std::vector<Vector>& points, const Vector& c, double sigma) {
  const int m = static_cast<int>(c.size());
  int cols = m;
  if (kind == SurrogateKind::SimplifiedQuadratic) cols = 2 * m;
  if (kind == SurrogateKind::Quadratic) cols = 2 * m + m * (m - 1) / 2;
  Matrix a(static_cast<Eigen::Index>(points.size()) - 1, cols);
  for (std::size_t r = 1; r < points.size(); ++r) {
    const Vector u = (points[r] - c) / sigma;
    const auto row = static_cast<Eigen::Index>(r - 1);
    for (int i = 0; i < m; ++i) a(row, i) = u[i];
    if (kind == SurrogateKind::Linear) continue;
    for (int i = 0; i < m; ++i) a(row, m + i) = u[i] * u[i];
    if (kind != SurrogateKind::Quadratic) continue;
    int k = 2 * m;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) a(row, k++) = u[i] * u[j];
  }
  return a;
}

double condition_number(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 1.0;
  if (a.rows() < a.cols()) return kInf;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (!(smin > 0.0)) return kInf;
  return s[0] / smin;
}

double design_condition_for(SurrogateKind kind, const std::vector<Vector>& points, const Vector& c, double sigma) {
  switch (kind) {
    case SurrogateKind::TaylorSeries:
    case SurrogateKind::Hybrid: return 1.0;
    case SurrogateKind::GaussianProcess:
      return condition_number(polynomial_design(SurrogateKind::Linear, points, c, sigma));
    default: return condition_number(polynomial_design(kind, points, c, sigma));
  }
}

Vector project(const Vector& x, const Vector& lo, const Vector& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

}  // namespace

SampleSet design_samples(SurrogateKind kind, GreyBoxProblem& problem, const Vector& center, double sigma,
                         std::uint64_t seed) {
  if (!(sigma > 0.0)) throw ConfigError("sampling radius must be positive");
  const Vector lo = problem.w_lower(), hi = problem.w_upper();
  SampleSet s;
  s.center = center;
  s.radius = sigma;
  s.seed = seed;
  s.points = stencil(kind, center, sigma, lo, hi);
  s.values.reserve(s.points.size());
  for (const Vector& p : s.points) s.values.push_back(evaluate_blackbox(problem, p));
  s.design_condition = design_condition_for(kind, s.points, center, sigma);
  return s;
}

// ---- SurrogateModel -------------------------------------------------------

SurrogateModel::SurrogateModel(SurrogateKind kind, Vector center, double radius, Polynomial poly)
    : kind_(kind), center_(std::move(center)), radius_(radius), params_(std::move(poly)) {}
SurrogateModel::SurrogateModel(SurrogateKind kind, Vector center, double radius, Taylor taylor)
    : kind_(kind), center_(std::move(center)), radius_(radius), params_(std::move(taylor)) {}
SurrogateModel::SurrogateModel(SurrogateKind kind, Vector center, double radius, Gp gp)
    : kind_(kind), center_(std::move(center)), radius_(radius), params_(std::move(gp)) {}

int SurrogateModel::outputs() const {
  if (auto* p = polynomial()) return static_cast<int>(p->b0.size());
  if (auto* t = taylor()) return static_cast<int>(t->value.size());
  return static_cast<int>(gp()->mean.value.size());
}

bool SurrogateModel::has_curvature() const {
  return kind_ == SurrogateKind::Quadratic || kind_ == SurrogateKind::SimplifiedQuadratic;
}

namespace {

Vector taylor_value(const SurrogateModel::Taylor& t, const Vector& c, const Vector& w) {
  return t.value + t.jacobian * (w - c);
}

}  // namespace

Vector SurrogateModel::evaluate(const Vector& w) const {
  if (auto* poly = polynomial()) {
    const Vector u = (w - center_) / radius_;
    Vector out = poly->b0 + poly->linear * u + poly->square * u.cwiseProduct(u);
    for (std::size_t j = 0; j < poly->cross.size(); ++j)
      out[static_cast<Eigen::Index>(j)] += u.dot(poly->cross[j] * u);
    return out;
  }
  if (auto* t = taylor()) return taylor_value(*t, center_, w);
  const Gp& g = *gp();
  Vector out = taylor_value(g.mean, center_, w) + g.offset;
  for (std::size_t j = 0; j < g.residual.size(); ++j) out[static_cast<Eigen::Index>(j)] += g.residual[j].mean(w);
  return out;
}

Matrix SurrogateModel::gradient(const Vector& w) const {
  if (auto* poly = polynomial()) {
    const Vector u = (w - center_) / radius_;
    Matrix jac = poly->linear;
    jac += 2.0 * poly->square * u.asDiagonal();
    for (std::size_t j = 0; j < poly->cross.size(); ++j) {
      const Matrix& c = poly->cross[j];
      jac.row(static_cast<Eigen::Index>(j)) += ((c + c.transpose()) * u).transpose();
    }
    return jac / radius_;
  }
  if (auto* t = taylor()) return t->jacobian;
  const Gp& g = *gp();
  Matrix jac = g.mean.jacobian;
  for (std::size_t j = 0; j < g.residual.size(); ++j)
    jac.row(static_cast<Eigen::Index>(j)) += g.residual[j].mean_gradient(w).transpose();
  return jac;
}

Matrix SurrogateModel::weighted_hessian(const Vector& w, const Vector& weights) const {
  const Eigen::Index m = center_.size();
  Matrix h = Matrix::Zero(m, m);
  if (auto* poly = polynomial()) {
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
      Matrix hj = 2.0 * poly->square.row(j).transpose().asDiagonal().toDenseMatrix();
      if (!poly->cross.empty()) hj += poly->cross[j] + poly->cross[j].transpose();
      h += weights[j] * hj;
    }
    return h / (radius_ * radius_);
  }
  if (taylor()) return h;
  const Gp& g = *gp();
  for (std::size_t j = 0; j < g.residual.size(); ++j) {
    const double wj = weights[static_cast<Eigen::Index>(j)];
    if (wj == 0.0) continue;
    h += wj * g.residual[j].mean_hessian(w);
  }
  return h;
}

// ---- fitting --------------------------------------------------------------

namespace {

constexpr double kMaxCondition = 1e8;

SurrogateModel::Polynomial solve_polynomial(SurrogateKind kind, const std::vector<Vector>& points,
                                            const std::vector<Vector>& values, const Vector& c, double sigma,
                                            double* condition) {
  const Matrix a = polynomial_design(kind, points, c, sigma);
  *condition = condition_number(a);
  const Eigen::Index m = c.size();
  const Eigen::Index p = values[0].size();
  Matrix rhs(a.rows(), p);
  for (Eigen::Index r = 0; r < a.rows(); ++r) rhs.row(r) = (values[r + 1] - values[0]).transpose();
  SurrogateModel::Polynomial poly;
  poly.b0 = values[0];
  poly.linear = Matrix::Zero(p, m);
  poly.square = Matrix::Zero(p, m);
  if (!(*condition <= kMaxCondition)) return poly;
  const Matrix coef = a.colPivHouseholderQr().solve(rhs);  // cols x p
  poly.linear = coef.topRows(m).transpose();
  if (kind == SurrogateKind::Linear) return poly;
  poly.square = coef.middleRows(m, m).transpose();
  if (kind != SurrogateKind::Quadratic) return poly;
  poly.cross.assign(static_cast<std::size_t>(p), Matrix::Zero(m, m));
  Eigen::Index k = 2 * m;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j, ++k)
      for (Eigen::Index o = 0; o < p; ++o) poly.cross[static_cast<std::size_t>(o)](i, j) = coef(k, o);
  return poly;
}

// Residual GP over `mean`, trained on all samples; the lengthscale follows sigma.
SurrogateModel::Gp fit_residual_gp(SurrogateModel::Taylor mean, const std::vector<Vector>& points,
                                   const std::vector<Vector>& values, const Vector& c, double sigma) {
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  const Eigen::Index m = c.size();
  const Eigen::Index p = mean.value.size();
  Matrix inputs(n, m);
  Matrix resid(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.row(i) = points[static_cast<std::size_t>(i)].transpose();
    resid.row(i) = (values[static_cast<std::size_t>(i)] - taylor_value(mean, c, points[static_cast<std::size_t>(i)])).transpose();
  }
  SurrogateModel::Gp gp;
  gp.offset = Vector::Zero(p);
  for (Eigen::Index o = 0; o < p; ++o) {
    const Vector r = resid.col(o);
    const double var = n > 1 ? (r.array() - r.mean()).square().sum() / static_cast<double>(n) : 0.0;
    KernelSpec k{sigma, std::max(var, 1e-12), 1e-10};
    gp.residual.emplace_back(inputs, r, k);
    gp.offset[o] = -gp.residual.back().mean(c);
  }
  gp.mean = std::move(mean);
  return gp;
}

void jitter(SampleSet& s, GreyBoxProblem& problem) {
  std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-0.05 * s.radius, 0.05 * s.radius);
  const Vector lo = problem.w_lower(), hi = problem.w_upper();
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    Vector p = s.points[i];
    for (Eigen::Index k = 0; k < p.size(); ++k) p[k] += u(rng);
    p = project(p, lo, hi);
    s.points[i] = p;
    s.values[i] = evaluate_blackbox(problem, p);
  }
}

}  // namespace

SurrogateModel fit(SurrogateKind kind, const SampleSet& samples, GreyBoxProblem& problem) {
  const int m = static_cast<int>(samples.center.size());
  const bool taylor_only = kind == SurrogateKind::TaylorSeries;
  if (static_cast<int>(samples.points.size()) < required_samples(kind, m))
    throw IllPoisedDesign("not enough sample points for " + std::string(long_name(kind)), kInf);
  if (samples.points.empty() || samples.points[0] != samples.center)
    throw IllPoisedDesign("the sample center must be the first point", kInf);
  const Vector& c = samples.center;
  const double sigma = samples.radius;

  switch (kind) {
    case SurrogateKind::Linear:
    case SurrogateKind::Quadratic:
    case SurrogateKind::SimplifiedQuadratic: {
      double cond = 0.0;
      auto poly = solve_polynomial(kind, samples.points, samples.values, c, sigma, &cond);
      if (!(cond <= kMaxCondition)) {
        SampleSet retry = samples;
        jitter(retry, problem);
        poly = solve_polynomial(kind, retry.points, retry.values, c, sigma, &cond);
        if (!(cond <= kMaxCondition)) throw IllPoisedDesign("ill-poised sample design", cond);
      }
      return {kind, c, sigma, std::move(poly)};
    }
    case SurrogateKind::TaylorSeries:
    case SurrogateKind::Hybrid: {
      SurrogateModel::Taylor t{samples.values[0], blackbox_gradient(problem, c)};
      if (taylor_only) return {kind, c, sigma, std::move(t)};
      return {kind, c, sigma, fit_residual_gp(std::move(t), samples.points, samples.values, c, sigma)};
    }
    case SurrogateKind::GaussianProcess: {
      double cond = 0.0;
      SampleSet used = samples;
      auto plane = solve_polynomial(SurrogateKind::Linear, used.points, used.values, c, sigma, &cond);
      if (!(cond <= kMaxCondition)) {
        jitter(used, problem);
        plane = solve_polynomial(SurrogateKind::Linear, used.points, used.values, c, sigma, &cond);
        if (!(cond <= kMaxCondition)) throw IllPoisedDesign("ill-poised sample design", cond);
      }
      SurrogateModel::Taylor mean{used.values[0], plane.linear / sigma};
      return {kind, c, sigma, fit_residual_gp(std::move(mean), used.points, used.values, c, sigma)};
    }
  }
  throw ConfigError("unhandled surrogate kind");
}

SurrogateModel build_surrogate(SurrogateKind kind, GreyBoxProblem& problem, const Vector& center, double sigma,
                               std::uint64_t seed) {
  return fit(kind, design_samples(kind, problem, center, sigma, seed), problem);
}

FullyLinearReport fully_linear_diagnostic(const SurrogateModel& model, GreyBoxProblem& problem, double sigma,
                                          int n_probe, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vector lo = problem.w_lower(), hi = problem.w_upper();
  FullyLinearReport rep;
  const bool grad = problem.black.has_gradient();
  if (grad) rep.gradient_error = 0.0;
  for (int k = 0; k < n_probe; ++k) {
    Vector w = model.center();
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += sigma * u(rng);
    w = project(w, lo, hi);
    const Vector d = evaluate_blackbox(problem, w);
    rep.value_error = std::max(rep.value_error, (model.evaluate(w) - d).norm());
    if (grad) {
      const Matrix gd = *problem.black.analytic_gradient(w);
      rep.gradient_error = std::max(*rep.gradient_error, (model.gradient(w) - gd).norm());
    }
  }
  return rep;
}

}  // namespace trf
