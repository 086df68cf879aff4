#include "trf/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace trf {

Matrix local_hessian(const GreyBoxProblem& problem, const Vector& x, const Duals& duals,
                     const SurrogateModel* surrogate) {
  const auto& glass = problem.glass;
  Matrix h = hessian_of(glass.objective, x);
  if (duals.eq.size() && !glass.equalities.empty()) h += weighted_hessian_of(glass.equalities, x, duals.eq);
  if (duals.ineq.size() && !glass.inequalities.empty())
    h += weighted_hessian_of(glass.inequalities, x, duals.ineq);
  if (surrogate && surrogate->has_curvature() && duals.surrogate.size()) {
    const auto& part = problem.partition;
    const Matrix hs = surrogate->weighted_hessian(part.gather_w(x), duals.surrogate);
    for (int i = 0; i < part.m(); ++i)
      for (int j = 0; j < part.m(); ++j) h(part.w_indices[i], part.w_indices[j]) -= hs(i, j);
  }
  h = 0.5 * (h + h.transpose());
  if (!h.allFinite()) throw SpectralFault("local Hessian has non-finite entries");
  return h;
}

EigenDecomposition eigendecompose(const Matrix& h) {
  if (h.rows() != h.cols()) throw SpectralFault("eigendecomposition needs a square matrix");
  if (!h.allFinite()) throw SpectralFault("eigendecomposition of a matrix with non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw SpectralFault("symmetric eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace {

double floor_with_allowance(const EigenDecomposition& e, double eps) {
  const double scale = e.values.size() ? e.values.cwiseAbs().maxCoeff() : 0.0;
  const double u = std::numeric_limits<double>::epsilon();
  return eps + 16.0 * static_cast<double>(e.values.size()) * u * std::max(scale, eps);
}

Matrix rebuild(const EigenDecomposition& e, const Vector& values) {
  Matrix out = e.vectors * values.asDiagonal() * e.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

void check_floor(double eps) {
  if (!(eps > 0.0)) throw ConfigError("projection floor must be positive");
}

}  // namespace

Matrix project_diagonal_loading(const Matrix& h, double eps) {
  check_floor(eps);
  const EigenDecomposition e = eigendecompose(h);
  if (e.values.size() == 0 || e.values[0] >= eps) return h;
  const double tau = floor_with_allowance(e, eps) - e.values[0];
  Matrix out = h;
  out.diagonal().array() += tau;
  return out;
}

Matrix project_clamp(const Matrix& h, double eps) {
  check_floor(eps);
  const EigenDecomposition e = eigendecompose(h);
  if (e.values.size() == 0 || e.values[0] > eps) return h;
  const double floor = floor_with_allowance(e, eps);
  Vector v = e.values;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] <= eps) v[i] = floor;
  return rebuild(e, v);
}

Matrix project_absolute(const Matrix& h, double eps) {
  check_floor(eps);
  const EigenDecomposition e = eigendecompose(h);
  if (e.values.size() == 0 || e.values[0] > eps) return h;
  const double floor = floor_with_allowance(e, eps);
  Vector v = e.values;
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::abs(v[i]) <= eps ? floor : std::abs(v[i]);
  return rebuild(e, v);
}

std::string_view policy_name(ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::None: return "none";
    case ProjectionKind::DiagonalLoading: return "dl";
    case ProjectionKind::Clamp: return "clamp";
    case ProjectionKind::Absolute: return "abs";
    case ProjectionKind::Adaptive: return "adaptive";
  }
  return "?";
}

Matrix apply_projection(const ProjectionPolicy& policy, const Matrix& h, double eps1, double eps2, double eps3) {
  switch (policy.effective()) {
    case ProjectionKind::None: return h;
    case ProjectionKind::DiagonalLoading: return project_diagonal_loading(h, eps1);
    case ProjectionKind::Clamp: return project_clamp(h, eps2);
    case ProjectionKind::Absolute: return project_absolute(h, eps3);
    case ProjectionKind::Adaptive: break;
  }
  throw ConfigError("adaptive policy without an inner projection");
}

ProjectionPolicy adaptive_select(ProjectionPolicy policy, StepKind outcome, std::optional<double> rho, double eta2) {
  if (policy.kind != ProjectionKind::Adaptive) return policy;
  bool strong = false;
  switch (outcome) {
    case StepKind::FType: strong = true; break;
    case StepKind::Rejected: strong = false; break;
    case StepKind::ThetaType:
    case StepKind::Restoration: strong = rho.has_value() && *rho >= eta2; break;
  }
  policy.current = strong ? ProjectionKind::Clamp : ProjectionKind::Absolute;
  return policy;
}

}  // namespace trf
