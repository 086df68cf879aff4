#pragma once

// Grey-box benchmark library: five engineering case studies and a
// 25-member synthetic suite, each with a glass-box oracle optimum.

#include "trf/problem.hpp"
#include "trf/trf_core.hpp"
#include "trf/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

namespace trf {

/// Scalar and vector expressions over x = (w, y, z), evaluated both in
/// double and in ad::Jet. Built from generic lambdas by bench::scalar_expr
/// and bench::vector_expr.
struct ScalarExpr {
  std::function<double(const std::vector<double>&)> value;
  std::function<ad::Jet(const std::vector<ad::Jet>&)> jet;
};
struct VectorExpr {
  int size = 0;
  std::function<std::vector<double>(const std::vector<double>&)> value;
  std::function<std::vector<ad::Jet>(const std::vector<ad::Jet>&)> jet;
};

/// A grey-box model written once: the hidden black-box expression d(w) and
/// the glass-box parts over the contiguous layout x = (w, y, z).
struct ProblemDefinition {
  std::string name;
  std::string source;  // "engineering" or "synthetic"
  std::string note;
  int m = 0;
  int p = 0;
  int n = 0;
  VectorExpr blackbox;  // over w only
  ScalarExpr objective;
  VectorExpr equalities;
  VectorExpr inequalities;
  Vector lower;
  Vector upper;
  Vector x0;
};

struct BenchmarkProblem {
  std::string name;
  std::string source;
  std::string note;
  int n_w = 0;
  int n_y = 0;
  int n_z = 0;
  double oracle_f = 0.0;
  double oracle_tol = 1e-3;
  Vector oracle_x;
  std::uint64_t seed = 0;
  std::shared_ptr<const ProblemDefinition> definition;

  /// A new grey-box instance with a zeroed ledger.
  GreyBoxProblem fresh() const;
  /// The glass-box version: y = d(w) appended to the equalities, all exact.
  GlassBoxModel glass_box() const;
  /// d(w) evaluated directly from the hidden expression (uncounted).
  Vector hidden(const Vector& w) const;
};

/// Builds the grey-box problem of a definition (black box without gradient).
GreyBoxProblem make_grey_box(const std::shared_ptr<const ProblemDefinition>& def);
GlassBoxModel make_full_glass_box(const std::shared_ptr<const ProblemDefinition>& def);

struct OracleResult {
  double f = kInf;
  Vector x;
  int converged_starts = 0;
};

/// Best Optimal solution of the glass-box version over `starts` seeded
/// points (the first is x0). Throws Error when no start converges.
OracleResult multistart_oracle(const ProblemDefinition& def, int starts, std::uint64_t seed);

/// Solves the oracles; throws Error if any member fails to converge.
std::vector<BenchmarkProblem> build_engineering_suite();
std::vector<BenchmarkProblem> build_synthetic_suite(std::uint64_t seed = 0);

/// The identity black-box toy: min (w - 2)^2 s.t. y = w, w in [0, 5].
BenchmarkProblem toy_problem();

/// Problem definitions without oracles (cheap).
std::vector<std::shared_ptr<const ProblemDefinition>> engineering_definitions();
std::vector<std::shared_ptr<const ProblemDefinition>> synthetic_definitions(std::uint64_t seed = 0);

/// Status in {CriticalPoint, ResidualOptimal, FeasiblePoint} and
/// |f - oracle| <= oracle_tol * max(1, |oracle|).
bool is_solved(const BenchmarkProblem& problem, const SolveReport& report);

/// One CSV record per problem: name, source, dims, oracle_f, oracle_tol, seed, note.
void write_manifest(std::ostream& out, const std::vector<BenchmarkProblem>& problems);

namespace bench {

template <class V>
using element_t = typename std::decay_t<V>::value_type;

template <class T>
T sq(const T& a) {
  return a * a;
}

template <class F>
ScalarExpr scalar_expr(F f) {
  return {[f](const std::vector<double>& x) { return f(x); },
          [f](const std::vector<ad::Jet>& x) { return ad::Jet(f(x)); }};
}

template <class F>
VectorExpr vector_expr(int size, F f) {
  return {size, [f](const std::vector<double>& x) { return f(x); },
          [f](const std::vector<ad::Jet>& x) { return f(x); }};
}

inline VectorExpr no_constraints() {
  return {0, [](const std::vector<double>&) { return std::vector<double>{}; },
          [](const std::vector<ad::Jet>&) { return std::vector<ad::Jet>{}; }};
}

}  // namespace bench

}  // namespace trf
