#pragma once

// Dense solvers for the smooth subproblems of the filter method: a general
// NLP solver (augmented Lagrangian outer loop, box-constrained trust-region
// Newton inner loop), a simplex LP for the criticality measure, and the
// compatibility / trust-region subproblem builders.
//
// Multiplier convention: L = f + lambda'h + mu'g with mu >= 0. Variable
// bounds are handled directly; their multipliers are reported as
// zeta = grad L - (x - P(x - grad L)), positive at a lower bound.

#include "trf/problem.hpp"
#include "trf/surrogate.hpp"
#include "trf/types.hpp"

#include <functional>
#include <optional>
#include <string_view>

namespace trf {

enum class TrustShape { Box, Ellipsoid };

/// ||x - center|| <= shrink * radius, in the infinity norm (Box) or in the
/// metric norm sqrt((x-c)' H (x-c)) (Ellipsoid).
struct TrustConstraint {
  TrustShape shape = TrustShape::Box;
  Vector center;
  double radius = 1.0;
  Matrix metric;  // Ellipsoid only, PSD
  double shrink = 1.0;

  static TrustConstraint box(Vector center, double radius);
  static TrustConstraint ellipsoid(Vector center, Matrix metric, double radius);

  double effective_radius() const { return shrink * radius; }
  /// Step length in this constraint's norm.
  double norm(const Vector& step) const;
  /// Throws ConfigError unless radius > 0, shrink in (0, 1] and dimensions agree.
  void validate(int dimension) const;
};

struct NlpSubproblem {
  ScalarFunction objective;
  VectorFunction equalities;
  VectorFunction inequalities;
  Vector lower;
  Vector upper;
  std::optional<TrustConstraint> trust;
  Vector start;

  int dimension() const { return static_cast<int>(start.size()); }
};

enum class SubStatus { Optimal, Infeasible, IterLimit, NumericFail };
std::string_view status_name(SubStatus status);

struct SubSolution {
  Vector x_star;
  Vector eq_multipliers;
  Vector ineq_multipliers;
  double trust_multiplier = 0.0;  // Ellipsoid: for (x-c)'H(x-c)/R^2 - 1 <= 0
  Vector bound_multipliers;
  SubStatus status = SubStatus::NumericFail;
  double kkt_residual = kInf;
  double constraint_violation = kInf;
  int iterations = 0;
};

struct SolverOptions {
  double tol_kkt = 1e-8;
  double tol_feas = 1e-8;
  int max_inner = 200;
};

/// Seam for an external engine. Must honour the SubSolution contract.
using SolverProvider = std::function<SubSolution(const NlpSubproblem&, const SolverOptions&)>;

/// Built-in dense solver; dimension up to a few dozen variables.
SubSolution solve_nlp(const NlpSubproblem& sub, const SolverOptions& options = {});

struct KktReport {
  double stationarity = 0.0;     // ||x - P(x - grad L)||_inf / max(1, ||grad f||_inf)
  double complementarity = 0.0;  // max_j mu_j |g_j|, same scaling; negative mu counts as violation
  double violation = 0.0;        // max(|h|, g+, bound excess), absolute
};

/// Recomputes the optimality measures of `sol` from its multipliers.
KktReport kkt_check(const NlpSubproblem& sub, const SubSolution& sol);

// ---- linear programming ---------------------------------------------------

struct LpResult {
  bool feasible = false;
  Vector x;
  double objective = 0.0;
};

/// min c'x s.t. a_eq x = b_eq, a_ub x <= b_ub, lo <= x <= hi (finite bounds).
/// Dense two-phase simplex with Bland's rule.
LpResult solve_lp(const Vector& c, const Matrix& a_eq, const Vector& b_eq, const Matrix& a_ub, const Vector& b_ub,
                  const Vector& lo, const Vector& hi);

// ---- subproblems of the filter method -------------------------------------

struct CriticalityResult {
  double chi = 0.0;
  bool degenerate = false;  // linearization infeasible; chi is +inf
  Vector direction;         // the minimizing unit step v
};

/// chi = |min grad f' v| over the linearized constraints, the surrogate
/// linearization v_y = grad s(w) v_w, variable bounds, and ||v||_inf <= 1.
/// Inactive inequality rows use max(-g, 0) so that v = 0 stays feasible.
CriticalityResult solve_criticality(const GreyBoxProblem& problem, const SurrogateModel& surrogate,
                                    const Vector& x);

/// kappa_delta * min(1, kappa_mu * delta^mu).
double compatibility_shrink(double delta, double kappa_delta, double kappa_mu, double mu);

struct CompatibilityResult {
  double alpha = kInf;
  Vector step;
  SubSolution solution;
};

/// min 0.5 ||y - s(w)||^2 subject to h = 0, g <= 0, bounds and `trust`
/// (whose shrink carries the compatibility factor), starting at x_k. A
/// positive `proximal` adds 0.5 * proximal * ||x - x_k||^2, which picks the
/// shortest of many equally good steps.
CompatibilityResult solve_compatibility(const GreyBoxProblem& problem, const SurrogateModel& surrogate,
                                        const Vector& x_k, const TrustConstraint& trust,
                                        const SolverOptions& options = {}, const SolverProvider& provider = {},
                                        double proximal = 0.0);

struct TrspResult {
  Vector step;  // x_star - x_k
  SubSolution solution;
  Duals duals;
};

/// min f subject to h = 0, g <= 0, y = s(w), bounds and `trust`, started at x_start.
TrspResult solve_trsp(const GreyBoxProblem& problem, const SurrogateModel& surrogate, const Vector& x_start,
                      const Vector& x_k, const TrustConstraint& trust, const SolverOptions& options = {},
                      const SolverProvider& provider = {});

/// f(x+d) - f(x+r) >= kappa * chi * min(chi / beta, delta). Diagnostic only.
bool cauchy_decrease_diagnostic(double f_at_d, double f_at_r, double chi, double delta, double beta,
                                double kappa);

}  // namespace trf
