#pragma once

// Local Hessian assembly and positive-definite projections used to shape
// the ellipsoidal trust region of the Hessian-based variants.

#include "trf/problem.hpp"
#include "trf/surrogate.hpp"
#include "trf/types.hpp"

#include <optional>
#include <string_view>

namespace trf {

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns
};

/// Hessian of f + eq'h + ineq'g at x. When the surrogate carries curvature
/// (Quadratic family) and surrogate multipliers are given, the w-block also
/// receives -sum_i nu_i Hess s_i(w). Symmetrized; throws SpectralFault on
/// non-finite entries.
Matrix local_hessian(const GreyBoxProblem& problem, const Vector& x, const Duals& duals,
                     const SurrogateModel* surrogate = nullptr);

/// Throws SpectralFault on non-finite input or solver failure.
EigenDecomposition eigendecompose(const Matrix& h);

// The projections below raise the floor eps by a rounding allowance of
// order n * machine-epsilon * ||H||, so that the computed spectrum of the
// output clears eps. Inputs whose spectrum is already valid come back
// unchanged (bitwise).

/// H + tau I with tau = max(eps - lambda_min, 0).
Matrix project_diagonal_loading(const Matrix& h, double eps);
/// Q diag(max(lambda, eps)) Q'.
Matrix project_clamp(const Matrix& h, double eps);
/// Q diag(|lambda| if |lambda| > eps else eps) Q'.
Matrix project_absolute(const Matrix& h, double eps);

enum class ProjectionKind { None, DiagonalLoading, Clamp, Absolute, Adaptive };

/// Step classification used by the driver and by the adaptive selector.
enum class StepKind { FType, ThetaType, Rejected, Restoration };

struct ProjectionPolicy {
  ProjectionKind kind = ProjectionKind::None;
  /// For Adaptive: the projection in force (Clamp or Absolute).
  ProjectionKind current = ProjectionKind::None;

  static ProjectionPolicy none() { return {ProjectionKind::None, ProjectionKind::None}; }
  static ProjectionPolicy diagonal_loading() { return {ProjectionKind::DiagonalLoading, ProjectionKind::DiagonalLoading}; }
  static ProjectionPolicy clamp() { return {ProjectionKind::Clamp, ProjectionKind::Clamp}; }
  static ProjectionPolicy absolute() { return {ProjectionKind::Absolute, ProjectionKind::Absolute}; }
  static ProjectionPolicy adaptive() { return {ProjectionKind::Adaptive, ProjectionKind::Absolute}; }

  /// The projection actually applied this iteration.
  ProjectionKind effective() const { return kind == ProjectionKind::Adaptive ? current : kind; }
};

/// Short tag for traces: none, dl, clamp, abs.
std::string_view policy_name(ProjectionKind kind);

/// Applies the effective projection with the matching floor.
/// Returns h unchanged for ProjectionKind::None.
Matrix apply_projection(const ProjectionPolicy& policy, const Matrix& h, double eps1, double eps2,
                        double eps3);

/// Next inner policy of an Adaptive policy: FType -> Clamp; ThetaType or
/// Restoration with rho >= eta2 -> Clamp; Rejected, or rho < eta2, or rho
/// absent -> Absolute. Non-adaptive policies are returned unchanged.
ProjectionPolicy adaptive_select(ProjectionPolicy policy, StepKind outcome, std::optional<double> rho,
                                 double eta2);

}  // namespace trf
