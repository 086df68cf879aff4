#include "trf/benchmarks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace trf {

using bench::element_t;
using bench::sq;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFree = 1e4;

struct Builder {
  std::shared_ptr<ProblemDefinition> d = std::make_shared<ProblemDefinition>();

  Builder(std::string name, int m, int p, int n, std::string note) {
    d->name = std::move(name);
    d->source = "synthetic";
    d->note = std::move(note);
    d->m = m;
    d->p = p;
    d->n = n;
    d->equalities = bench::no_constraints();
    d->inequalities = bench::no_constraints();
    const int dim = m + p + n;
    d->lower = Vector::Constant(dim, -kFree);
    d->upper = Vector::Constant(dim, kFree);
    d->x0 = Vector::Zero(dim);
  }

  Builder& w_box(std::initializer_list<double> lo, std::initializer_list<double> hi, std::initializer_list<double> x0) {
    int i = 0;
    for (double v : lo) d->lower[i++] = v;
    i = 0;
    for (double v : hi) d->upper[i++] = v;
    i = 0;
    for (double v : x0) d->x0[i++] = v;
    return *this;
  }
  Builder& var(int index, double lo, double hi, double x0) {
    d->lower[index] = lo;
    d->upper[index] = hi;
    d->x0[index] = x0;
    return *this;
  }
  template <class F>
  Builder& blackbox(F f) {
    d->blackbox = bench::vector_expr(d->p, f);
    return *this;
  }
  template <class F>
  Builder& objective(F f) {
    d->objective = bench::scalar_expr(f);
    return *this;
  }
  template <class F>
  Builder& equalities(int count, F f) {
    d->equalities = bench::vector_expr(count, f);
    return *this;
  }
  template <class F>
  Builder& inequalities(int count, F f) {
    d->inequalities = bench::vector_expr(count, f);
    return *this;
  }
};

// Scalar black box: the lambda maps w to one value.
template <class F>
auto scalar_box(F f) {
  return [f](const auto& w) { return std::vector<element_t<decltype(w)>>{f(w)}; };
}

// f = weight * y + kappa * ||w - c||^2. With c at the minimizer of d the
// glass part shares it; the weight keeps the black-box curvature below the
// glass-box curvature.
template <std::size_t N>
auto weighted_bowl(std::array<double, N> center, double weight, double kappa = 1.0) {
  return [center, weight, kappa](const auto& x) {
    using T = element_t<decltype(x)>;
    T out = weight * x[N];
    for (std::size_t i = 0; i < N; ++i) out = out + kappa * sq(x[i] - center[i]);
    return out;
  };
}

using DefPtr = std::shared_ptr<ProblemDefinition>;

std::vector<DefPtr> members() {
  std::vector<DefPtr> out;

  out.push_back(Builder("affine_bowl", 2, 1, 0, "affine black box inside a convex bowl")
                    .w_box({-3, -3}, {5, 5}, {2.5, 0.5})
                    .blackbox(scalar_box([](const auto& w) { return 0.5 * w[0] - w[1]; }))
                    .objective([](const auto& x) { return sq(x[0] - 1.0) + sq(x[1] - 2.0) + x[2] + 1.0; })
                    .d);

  out.push_back(Builder("sphere_epigraph", 2, 1, 1, "min z with z >= y")
                    .w_box({-kFree, -kFree}, {kFree, kFree}, {1.5, -1.0})
                    .var(3, -10, 100, 5)
                    .blackbox(scalar_box([](const auto& w) { return w[0] * w[0] + w[1] * w[1]; }))
                    .objective([](const auto& x) { return x[3] + sq(x[0] - 1.5) + sq(x[1] + 1.0); })
                    .inequalities(1, [](const auto& x) { return std::vector<element_t<decltype(x)>>{x[2] - x[3]}; })
                    .d);

  out.push_back(Builder("booth", 2, 1, 0, "booth function")
                    .w_box({-10, -10}, {10, 10}, {-1.0, 0.5})
                    .blackbox(scalar_box([](const auto& w) {
                      return sq(w[0] + 2.0 * w[1] - 7.0) + sq(2.0 * w[0] + w[1] - 5.0);
                    }))
                    .objective(weighted_bowl<2>({1.0, 3.0}, 0.025))
                    .d);

  out.push_back(Builder("matyas", 2, 1, 0, "matyas function")
                    .w_box({-10, -10}, {10, 10}, {3.0, -2.0})
                    .blackbox(scalar_box([](const auto& w) {
                      return 0.26 * (w[0] * w[0] + w[1] * w[1]) - 0.48 * w[0] * w[1];
                    }))
                    .objective(weighted_bowl<2>({0.0, 0.0}, 1.0))
                    .d);

  out.push_back(Builder("three_hump_camel", 2, 1, 0, "three-hump camel restricted to the central basin")
                    .w_box({-1.2, -1.2}, {1.2, 1.2}, {0.9, -0.8})
                    .blackbox(scalar_box([](const auto& w) {
                      const auto a2 = w[0] * w[0];
                      return 2.0 * a2 - 1.05 * a2 * a2 + a2 * a2 * a2 / 6.0 + w[0] * w[1] + w[1] * w[1];
                    }))
                    .objective(weighted_bowl<2>({0.0, 0.0}, 0.1))
                    .d);

  out.push_back(Builder("rosenbrock_mild", 2, 1, 0, "rosenbrock valley with curvature 10")
                    .w_box({-2, -2}, {2, 2}, {-0.8, 1.5})
                    .blackbox(scalar_box([](const auto& w) { return sq(1.0 - w[0]) + 10.0 * sq(w[1] - w[0] * w[0]); }))
                    .objective(weighted_bowl<2>({1.0, 1.0}, 0.004))
                    .d);

  out.push_back(Builder("beale", 2, 1, 0, "beale function")
                    .w_box({0, -0.5}, {4, 1}, {2.0, 0.0})
                    .blackbox(scalar_box([](const auto& w) {
                      const auto &a = w[0], &b = w[1];
                      return sq(1.5 - a + a * b) + sq(2.25 - a + a * b * b) + sq(2.625 - a + a * b * b * b);
                    }))
                    .objective(weighted_bowl<2>({3.0, 0.5}, 0.004))
                    .d);

  out.push_back(Builder("himmelblau_function", 2, 1, 0, "himmelblau function around the (3, 2) minimum")
                    .w_box({2, 0.5}, {5, 4}, {4.2, 3.3})
                    .blackbox(scalar_box([](const auto& w) {
                      return sq(w[0] * w[0] + w[1] - 11.0) + sq(w[0] + w[1] * w[1] - 7.0);
                    }))
                    .objective(weighted_bowl<2>({3.0, 2.0}, 0.007))
                    .d);

  out.push_back(Builder("branin", 2, 1, 0, "branin function around the (pi, 2.275) minimum")
                    .w_box({1, 0}, {6, 6}, {4.5, 4.5})
                    .blackbox(scalar_box([](const auto& w) {
                      using std::cos;
                      const double b = 5.1 / (4.0 * kPi * kPi), c = 5.0 / kPi, t = 1.0 / (8.0 * kPi);
                      return sq(w[1] - b * w[0] * w[0] + c * w[0] - 6.0) + 10.0 * (1.0 - t) * cos(w[0]) + 10.0;
                    }))
                    .objective(weighted_bowl<2>({kPi, 2.275}, 0.04))
                    .d);

  out.push_back(Builder("mccormick", 2, 1, 0, "mccormick function")
                    .w_box({-1.5, -3}, {1.5, 0.5}, {1.0, 0.0})
                    .blackbox(scalar_box([](const auto& w) {
                      using std::sin;
                      return sin(w[0] + w[1]) + sq(w[0] - w[1]) - 1.5 * w[0] + 2.5 * w[1] + 1.0;
                    }))
                    .objective(weighted_bowl<2>({-0.54719, -1.54719}, 0.12))
                    .d);

  out.push_back(Builder("styblinski_tang", 2, 1, 0, "styblinski-tang in the negative orthant")
                    .w_box({-5, -5}, {-0.5, -0.5}, {-1.5, -4.0})
                    .blackbox(scalar_box([](const auto& w) {
                      auto term = [](const auto& v) { return v * v * v * v - 16.0 * v * v + 5.0 * v; };
                      return 0.5 * (term(w[0]) + term(w[1]));
                    }))
                    .objective(weighted_bowl<2>({-2.903534, -2.903534}, 0.004))
                    .d);

  out.push_back(Builder("six_hump_camel", 2, 1, 0, "six-hump camel around one global minimum")
                    .w_box({-0.5, -1.2}, {1, -0.3}, {0.7, -0.4})
                    .blackbox(scalar_box([](const auto& w) {
                      const auto a2 = w[0] * w[0];
                      const auto b2 = w[1] * w[1];
                      return (4.0 - 2.1 * a2 + a2 * a2 / 3.0) * a2 + w[0] * w[1] + (-4.0 + 4.0 * b2) * b2;
                    }))
                    .objective(weighted_bowl<2>({0.0898, -0.7126}, 0.01))
                    .d);

  out.push_back(Builder("zakharov3", 3, 1, 0, "zakharov function")
                    .w_box({-5, -5, -5}, {10, 10, 10}, {1.0, -1.5, 0.8})
                    .blackbox(scalar_box([](const auto& w) {
                      const auto s = 0.5 * w[0] + 1.0 * w[1] + 1.5 * w[2];
                      return w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + s * s + s * s * s * s;
                    }))
                    .objective(weighted_bowl<3>({0.0, 0.0, 0.0}, 0.01))
                    .d);

  out.push_back(Builder("dixon_price3", 3, 1, 0, "dixon-price function on the positive branch")
                    .w_box({0.2, 0.2, 0.2}, {3, 3, 3}, {2.0, 1.5, 0.4})
                    .blackbox(scalar_box([](const auto& w) {
                      return sq(w[0] - 1.0) + 2.0 * sq(2.0 * w[1] * w[1] - w[0]) + 3.0 * sq(2.0 * w[2] * w[2] - w[1]);
                    }))
                    .objective(weighted_bowl<3>({1.0, 0.70710678, 0.59460356}, 0.01))
                    .d);

  out.push_back(Builder("colville", 4, 2, 0, "scaled colville function, coupling terms in the glass box")
                    .w_box({0.5, 0.5, 0.5, 0.5}, {1.5, 1.5, 1.5, 1.5}, {0.6, 1.4, 1.4, 0.6})
                    .blackbox([](const auto& w) {
                      using T = element_t<decltype(w)>;
                      return std::vector<T>{100.0 * sq(w[0] * w[0] - w[1]) + sq(w[0] - 1.0),
                                            sq(w[2] - 1.0) + 90.0 * sq(w[2] * w[2] - w[3])};
                    })
                    .objective([](const auto& x) {
                      return 0.005 * (x[4] + x[5]) + sq(x[0] - 1.0) + sq(x[1] - 1.0) + sq(x[2] - 1.0) +
                             sq(x[3] - 1.0) + 0.99 * (x[1] - 1.0) * (x[3] - 1.0);
                    })
                    .d);

  out.push_back(Builder("trid3", 3, 1, 0, "trid function")
                    .w_box({-9, -9, -9}, {9, 9, 9}, {0.0, 1.0, 0.0})
                    .blackbox(scalar_box([](const auto& w) {
                      return sq(w[0] - 1.0) + sq(w[1] - 1.0) + sq(w[2] - 1.0) - w[1] * w[0] - w[2] * w[1];
                    }))
                    .objective(weighted_bowl<3>({3.0, 4.0, 3.0}, 0.15))
                    .d);

  out.push_back(Builder("sum_squares4", 4, 1, 0, "weighted sum of squares")
                    .w_box({-5, -5, -5, -5}, {5, 5, 5, 5}, {3.0, -2.0, 0.5, -1.0})
                    .blackbox(scalar_box([](const auto& w) {
                      return sq(w[0] - 1.0) + 2.0 * sq(w[1] - 1.0) + 3.0 * sq(w[2] - 1.0) + 4.0 * sq(w[3] - 1.0);
                    }))
                    .objective(weighted_bowl<4>({1.0, 1.0, 1.0, 1.0}, 0.06))
                    .d);

  out.push_back(Builder("bohachevsky", 2, 1, 0, "bohachevsky function on the central cell")
                    .w_box({-0.3, -0.22}, {0.3, 0.22}, {0.25, -0.18})
                    .blackbox(scalar_box([](const auto& w) {
                      using std::cos;
                      return w[0] * w[0] + 2.0 * w[1] * w[1] - 0.3 * cos(3.0 * kPi * w[0]) - 0.4 * cos(4.0 * kPi * w[1]) +
                             0.7;
                    }))
                    .objective(weighted_bowl<2>({0.0, 0.0}, 0.008))
                    .d);

  out.push_back(Builder("exponential3", 3, 1, 0, "negative gaussian bump")
                    .w_box({-1, -1, -1}, {1, 1, 1}, {0.8, -0.6, 0.5})
                    .blackbox(scalar_box([](const auto& w) {
                      using std::exp;
                      return -exp(-0.5 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]));
                    }))
                    .objective(weighted_bowl<3>({0.0, 0.0, 0.0}, 1.0))
                    .d);

  out.push_back(Builder("himmelblau_residuals", 2, 2, 0, "both himmelblau residuals in the black box")
                    .w_box({2, 0.5}, {5, 4}, {4.0, 1.0})
                    .blackbox([](const auto& w) {
                      using T = element_t<decltype(w)>;
                      return std::vector<T>{w[0] * w[0] + w[1] - 11.0, w[0] + w[1] * w[1] - 7.0};
                    })
                    .objective([](const auto& x) { return sq(x[2]) + sq(x[3]); })
                    .d);

  out.push_back(Builder("parabola_constrained", 2, 1, 0, "distance to (2, 1) above a parabola")
                    .w_box({-3, -3}, {3, 3}, {0.0, 0.0})
                    .blackbox(scalar_box([](const auto& w) { return w[0] * w[0] - w[1]; }))
                    .objective([](const auto& x) { return sq(x[0] - 2.0) + sq(x[1] - 1.0); })
                    .inequalities(2, [](const auto& x) {
                      using T = element_t<decltype(x)>;
                      return std::vector<T>{x[2], x[0] + x[1] - 2.0};
                    })
                    .d);

  out.push_back(Builder("product_sphere4", 4, 1, 0, "product lower bound on a sphere")
                    .w_box({1, 1, 1, 1}, {5, 5, 5, 5}, {1.0, 5.0, 5.0, 1.0})
                    .blackbox(scalar_box([](const auto& w) { return w[0] * w[1] * w[2] * w[3]; }))
                    .objective([](const auto& x) { return x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2]; })
                    .equalities(1, [](const auto& x) {
                      using T = element_t<decltype(x)>;
                      return std::vector<T>{x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] - 40.0};
                    })
                    .inequalities(1, [](const auto& x) {
                      using T = element_t<decltype(x)>;
                      return std::vector<T>{25.0 - x[4]};
                    })
                    .d);

  out.push_back(Builder("forrester_lifted", 1, 1, 2, "forrester function with two glass-box lifts")
                    .w_box({0.55}, {1.0}, {0.9})
                    .var(2, -20, 20, 0.0)
                    .var(3, -1, 1, 0.0)
                    .blackbox(scalar_box([](const auto& w) {
                      using std::sin;
                      return sq(6.0 * w[0] - 2.0) * sin(12.0 * w[0] - 4.0);
                    }))
                    .objective([](const auto& x) { return 0.0005 * x[2] + sq(x[3] - 0.00725); })
                    .equalities(2, [](const auto& x) {
                      using T = element_t<decltype(x)>;
                      return std::vector<T>{x[2] - x[1] - 1.0, x[3] - x[0] + 0.75};
                    })
                    .d);

  out.push_back(Builder("ishigami_box", 3, 1, 0, "ishigami-type surface, minimum on a bound")
                    .w_box({-2.5, -1, 0}, {-0.5, 1, 2}, {-1.0, 0.6, 1.0})
                    .blackbox(scalar_box([](const auto& w) {
                      using std::sin;
                      const auto s = sin(w[1]);
                      const auto c2 = w[2] * w[2];
                      return sin(w[0]) * (1.0 + 0.1 * c2 * c2) + 7.0 * s * s;
                    }))
                    .objective(weighted_bowl<3>({-kPi / 2.0, 0.0, 2.0}, 0.04))
                    .d);

  out.push_back(Builder("ellipse_on_line", 2, 1, 1, "rotated quadratic on a line, slack variable")
                    .w_box({-4, -4}, {4, 4}, {2.0, 3.0})
                    .var(3, 0, 10, 1.0)
                    .blackbox(scalar_box([](const auto& w) { return 5.0 * w[0] * w[0] + 4.0 * w[0] * w[1] + 2.0 * w[1] * w[1]; }))
                    .objective([](const auto& x) { return 0.1 * x[2] + x[3] + sq(x[0] - 2.0) + sq(x[1] - 3.0); })
                    .equalities(1, [](const auto& x) {
                      using T = element_t<decltype(x)>;
                      return std::vector<T>{x[0] + x[1] - 1.0 - x[3]};
                    })
                    .d);

  return out;
}

}  // namespace

std::vector<std::shared_ptr<const ProblemDefinition>> synthetic_definitions(std::uint64_t seed) {
  std::vector<std::shared_ptr<const ProblemDefinition>> out;
  std::uint64_t index = 0;
  for (DefPtr& d : members()) {
    // Jitter the w part of x0 by up to 5% of the (clipped) box width.
    std::mt19937_64 rng(seed * 7919 + ++index);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (int i = 0; i < d->m; ++i) {
      const double lo = std::max(d->lower[i], -10.0);
      const double hi = std::min(d->upper[i], 10.0);
      d->x0[i] = std::clamp(d->x0[i] + jitter(rng) * (hi - lo), d->lower[i], d->upper[i]);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace trf
