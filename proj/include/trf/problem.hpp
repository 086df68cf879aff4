#pragma once

// Grey-box problem structure: glass-box expressions with derivatives, the
// counted black-box map y = d(w), and the (w, y, z) variable partition.

#include "trf/autodiff.hpp"
#include "trf/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace trf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Scalar function with gradient and an optional Hessian. When `hessian` is
/// empty, callers fall back to central differences of `gradient`.
struct ScalarFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

/// Vector-valued function c(x) with Jacobian (rows = components) and an
/// optional weighted Hessian sum_i w_i * Hess c_i(x).
struct VectorFunction {
  int size = 0;
  std::function<Vector(const Vector&)> value;
  std::function<Matrix(const Vector&)> jacobian;
  std::function<Matrix(const Vector&, const Vector&)> weighted_hessian;

  bool empty() const { return size == 0; }
};

Matrix hessian_of(const ScalarFunction& f, const Vector& x);
Matrix weighted_hessian_of(const VectorFunction& c, const Vector& x, const Vector& weights);
VectorFunction empty_vector_function();
/// Stacks two vector functions over the same x into one.
VectorFunction concatenate(VectorFunction a, VectorFunction b);

struct VariablePartition {
  std::vector<int> w_indices;
  std::vector<int> y_indices;
  std::vector<int> z_indices;

  int m() const { return static_cast<int>(w_indices.size()); }
  int p() const { return static_cast<int>(y_indices.size()); }
  int n() const { return static_cast<int>(z_indices.size()); }
  int dimension() const { return m() + n() + p(); }

  /// Throws ConfigError unless the lists are disjoint, cover 0..dim-1, m >= 1, p >= 1.
  void validate() const;

  Vector gather_w(const Vector& x) const;
  Vector gather_y(const Vector& x) const;
  Vector gather_z(const Vector& x) const;
  void scatter_w(const Vector& w, Vector& x) const;
  void scatter_y(const Vector& y, Vector& x) const;

  /// The common layout x = (w, y, z) in that order.
  static VariablePartition contiguous(int m, int p, int n);
};

struct GlassBoxModel {
  int dimension = 0;
  ScalarFunction objective;
  VectorFunction equalities;    // h(x) = 0
  VectorFunction inequalities;  // g(x) <= 0
  Vector lower;
  Vector upper;
};

using BlackBoxMap = std::function<Vector(const Vector&)>;
using BlackBoxJacobian = std::function<Matrix(const Vector&)>;

/// Counted black-box evaluator. Every invocation of the map is charged to
/// the call counter, except repeats served from the optional cache.
class BlackBoxEvaluator {
 public:
  BlackBoxEvaluator() = default;
  BlackBoxEvaluator(int inputs, int outputs, BlackBoxMap map,
                    BlackBoxJacobian gradient = nullptr);

  int inputs() const { return inputs_; }
  int outputs() const { return outputs_; }
  bool has_gradient() const { return static_cast<bool>(gradient_); }
  std::uint64_t calls() const { return calls_; }

  /// Evaluates d(w); throws BlackBoxFault on non-finite input or output.
  Vector evaluate(const Vector& w);
  /// Analytic Jacobian, or std::nullopt when none was supplied.
  std::optional<Matrix> analytic_gradient(const Vector& w) const;

  /// With caching on, bitwise-identical inputs are served once.
  void set_caching(bool enabled);
  /// Drops every cached entry except the one at `w` (if present).
  void retain_only(const Vector& w);
  void clear_cache() { cache_.clear(); }

  /// A copy sharing the map but with a zeroed ledger and empty cache.
  BlackBoxEvaluator fresh_copy() const;

 private:
  int inputs_ = 0;
  int outputs_ = 0;
  BlackBoxMap map_;
  BlackBoxJacobian gradient_;
  std::uint64_t calls_ = 0;
  bool caching_ = false;
  std::map<std::vector<double>, Vector> cache_;
};

struct GreyBoxProblem {
  std::string name;
  GlassBoxModel glass;
  BlackBoxEvaluator black;
  VariablePartition partition;
  Vector x0;

  /// Checks partition coverage, dimensions, and x0 against the bounds.
  void validate() const;

  Vector w_lower() const;
  Vector w_upper() const;
};

// ---- operations -----------------------------------------------------------

Vector evaluate_blackbox(GreyBoxProblem& problem, const Vector& w);

/// Analytic Jacobian when available; otherwise central differences with step
/// max(1e-6, 1e-6|w_i|), charging 2m calls. Near a bound the difference pair
/// is shifted inward so both points stay feasible.
Matrix blackbox_gradient(GreyBoxProblem& problem, const Vector& w);

class SurrogateModel;

/// theta = ||s(w) - d(w)||_2 at the w-components of x; charges one call.
double infeasibility(GreyBoxProblem& problem, const SurrogateModel& surrogate, const Vector& x);

/// ||y - d(w)||_2: the infeasibility of an iterate whose y was set by an
/// earlier surrogate. Charges one call (unless cached).
double output_gap(GreyBoxProblem& problem, const Vector& x);

struct GlassResiduals {
  Vector h;
  Vector g;
};
GlassResiduals glass_residuals(const GreyBoxProblem& problem, const Vector& x);

/// Multipliers under L = f + eq'h + ineq'g + surrogate'(y - s(w)), ineq >= 0.
/// Empty vectors read as zeros.
struct Duals {
  Vector eq;
  Vector ineq;
  Vector surrogate;
};

// ---- external evaluator ---------------------------------------------------

/// Wraps a child process as a black-box map. The child reads one line of m
/// space-separated decimals per query on stdin and answers with one line of
/// p decimals on stdout. A dead child or a malformed reply raises BlackBoxFault.
BlackBoxMap make_subprocess_map(const std::string& command, int inputs, int outputs);

// ---- building glass-box models from templated expressions -----------------

/// Builds a GlassBoxModel from a model type providing
///   int dimension(), int num_equalities(), int num_inequalities(),
///   template <class T> T objective(const std::vector<T>& x),
///   template <class T> std::vector<T> equalities(const std::vector<T>& x),
///   template <class T> std::vector<T> inequalities(const std::vector<T>& x).
/// Gradients and Jacobians are exact (forward mode); Hessians use central
/// differences of the exact gradients.
template <class Model>
GlassBoxModel make_glass_box(std::shared_ptr<const Model> model, Vector lower, Vector upper);

namespace detail {

template <class F>
Vector values_of(const std::vector<F>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = ad::value_of(v[i]);
  return out;
}

inline std::vector<double> to_std(const Vector& x) { return {x.data(), x.data() + x.size()}; }

inline Matrix jacobian_of(const std::vector<ad::Jet>& c, int n) {
  Matrix jac = Matrix::Zero(static_cast<Eigen::Index>(c.size()), n);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].d.size()) jac.row(static_cast<Eigen::Index>(i)) = c[i].d.transpose();
  return jac;
}

}  // namespace detail

template <class Model>
GlassBoxModel make_glass_box(std::shared_ptr<const Model> model, Vector lower, Vector upper) {
  GlassBoxModel glass;
  const int n = model->dimension();
  glass.dimension = n;
  glass.lower = std::move(lower);
  glass.upper = std::move(upper);

  glass.objective.value = [model](const Vector& x) {
    return model->template objective<double>(detail::to_std(x));
  };
  glass.objective.gradient = [model, n](const Vector& x) {
    ad::Jet f = model->template objective<ad::Jet>(ad::seed(x));
    return f.d.size() ? Vector(f.d) : Vector(Vector::Zero(n));
  };

  auto make_vector = [&](int size, auto eval_double, auto eval_jet) {
    VectorFunction c;
    c.size = size;
    if (size == 0) return empty_vector_function();
    c.value = [eval_double](const Vector& x) { return detail::values_of(eval_double(detail::to_std(x))); };
    c.jacobian = [eval_jet, n](const Vector& x) { return detail::jacobian_of(eval_jet(ad::seed(x)), n); };
    return c;
  };
  glass.equalities = make_vector(
      model->num_equalities(),
      [model](const std::vector<double>& x) { return model->template equalities<double>(x); },
      [model](const std::vector<ad::Jet>& x) { return model->template equalities<ad::Jet>(x); });
  glass.inequalities = make_vector(
      model->num_inequalities(),
      [model](const std::vector<double>& x) { return model->template inequalities<double>(x); },
      [model](const std::vector<ad::Jet>& x) { return model->template inequalities<ad::Jet>(x); });
  return glass;
}

}  // namespace trf
