#pragma once

// First-order forward-mode automatic differentiation.
//
// Benchmark models are written once as templates over the scalar type and
// instantiated with `double` for values and `Jet` for exact gradients.
// Second derivatives are taken by central differences of the Jet gradient.

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace trf::ad {

inline constexpr int kMaxVariables = 32;

using Tangent = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxVariables, 1>;

struct Jet {
  double v = 0.0;
  Tangent d;

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  Jet(double value, int n) : v(value), d(Tangent::Zero(n)) {}
  Jet(double value, Tangent tangent) : v(value), d(std::move(tangent)) {}

  static Jet variable(double value, int index, int n) {
    Jet j(value, n);
    j.d[index] = 1.0;
    return j;
  }
};

// Constants promote lazily: a zero-length tangent stands for "all zeros".
inline Tangent add_tangents(const Tangent& a, const Tangent& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  return a + b;
}

inline Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, add_tangents(a.d, b.d)}; }
inline Jet operator-(const Jet& a) { return {-a.v, -a.d}; }
inline Jet operator-(const Jet& a, const Jet& b) {
  return {a.v - b.v, add_tangents(a.d, b.d.size() ? Tangent(-b.d) : Tangent())};
}
inline Jet operator*(const Jet& a, const Jet& b) {
  Tangent d;
  if (a.d.size() && b.d.size())
    d = b.v * a.d + a.v * b.d;
  else if (a.d.size())
    d = b.v * a.d;
  else if (b.d.size())
    d = a.v * b.d;
  return {a.v * b.v, d};
}
inline Jet operator/(const Jet& a, const Jet& b) {
  const double q = a.v / b.v;
  Tangent d;
  if (a.d.size() && b.d.size())
    d = (a.d - q * b.d) / b.v;
  else if (a.d.size())
    d = a.d / b.v;
  else if (b.d.size())
    d = (-q / b.v) * b.d;
  return {q, d};
}

inline Jet operator+(const Jet& a, double b) { return {a.v + b, a.d}; }
inline Jet operator+(double a, const Jet& b) { return {a + b.v, b.d}; }
inline Jet operator-(const Jet& a, double b) { return {a.v - b, a.d}; }
inline Jet operator-(double a, const Jet& b) { return {a - b.v, -b.d}; }
inline Jet operator*(const Jet& a, double b) { return {a.v * b, a.d * b}; }
inline Jet operator*(double a, const Jet& b) { return {a * b.v, a * b.d}; }
inline Jet operator/(const Jet& a, double b) { return {a.v / b, a.d / b}; }
inline Jet operator/(double a, const Jet& b) { return Jet(a) / b; }

inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }

inline Jet chain(const Jet& a, double value, double slope) { return {value, slope * a.d}; }

inline Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e);
}
inline Jet log(const Jet& a) { return chain(a, std::log(a.v), 1.0 / a.v); }
inline Jet sqrt(const Jet& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s);
}
inline Jet sin(const Jet& a) { return chain(a, std::sin(a.v), std::cos(a.v)); }
inline Jet cos(const Jet& a) { return chain(a, std::cos(a.v), -std::sin(a.v)); }
inline Jet tanh(const Jet& a) {
  const double t = std::tanh(a.v);
  return chain(a, t, 1.0 - t * t);
}
inline Jet atan(const Jet& a) { return chain(a, std::atan(a.v), 1.0 / (1.0 + a.v * a.v)); }
inline Jet pow(const Jet& a, double p) {
  return chain(a, std::pow(a.v, p), p * std::pow(a.v, p - 1.0));
}

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

/// Seeds a vector of independent Jet variables at `x`.
template <class Vec>
std::vector<Jet> seed(const Vec& x) {
  const int n = static_cast<int>(x.size());
  std::vector<Jet> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(Jet::variable(x[i], i, n));
  return out;
}

}  // namespace trf::ad
