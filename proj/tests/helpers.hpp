#pragma once

// Small builders shared by the unit tests.

#include "trf/problem.hpp"

#include <functional>

namespace trf::testing {

inline ScalarFunction scalar(std::function<double(const Vector&)> v, std::function<Vector(const Vector&)> g) {
  ScalarFunction f;
  f.value = std::move(v);
  f.gradient = std::move(g);
  return f;
}

inline VectorFunction vector_fn(int size, std::function<Vector(const Vector&)> v,
                                std::function<Matrix(const Vector&)> j) {
  VectorFunction f;
  f.size = size;
  f.value = std::move(v);
  f.jacobian = std::move(j);
  return f;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Vector filled(int n, double value) { return Vector::Constant(n, value); }

/// Grey-box problem with x = (w, y, z) contiguous, no glass constraints and
/// wide bounds; callers fill in what they need.
inline GreyBoxProblem bare_problem(int m, int p, int n, BlackBoxMap map, BlackBoxJacobian jac = nullptr) {
  GreyBoxProblem pr;
  pr.name = "test";
  pr.partition = VariablePartition::contiguous(m, p, n);
  const int dim = m + p + n;
  pr.glass.dimension = dim;
  pr.glass.objective = scalar([](const Vector&) { return 0.0; }, [dim](const Vector&) { return Vector(Vector::Zero(dim)); });
  pr.glass.equalities = empty_vector_function();
  pr.glass.inequalities = empty_vector_function();
  pr.glass.lower = filled(dim, -1e3);
  pr.glass.upper = filled(dim, 1e3);
  pr.black = BlackBoxEvaluator(m, p, std::move(map), std::move(jac));
  pr.x0 = Vector::Zero(dim);
  return pr;
}

}  // namespace trf::testing
