#include "doctest.h"
#include "helpers.hpp"

#include "trf/surrogate.hpp"

#include <cmath>
#include <random>

using namespace trf;
using trf::testing::bare_problem;
using trf::testing::vec;

TEST_CASE("required sample counts") {
  CHECK(required_samples(SurrogateKind::Quadratic, 3) == 10);
  CHECK(required_samples(SurrogateKind::SimplifiedQuadratic, 3) == 7);
  CHECK(required_samples(SurrogateKind::Linear, 1) == 2);
  CHECK(required_samples(SurrogateKind::GaussianProcess, 2) == 5);
  CHECK(required_samples(SurrogateKind::TaylorSeries, 4) == 1);
  CHECK(required_samples(SurrogateKind::Hybrid, 2) == 5);
}

TEST_CASE("surrogate names round-trip") {
  for (SurrogateKind k : kAllSurrogateKinds) {
    CHECK(parse_surrogate_kind(short_name(k)) == k);
    CHECK(parse_surrogate_kind(long_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_surrogate_kind("cubic"), ConfigError);
}

TEST_CASE("design stencils") {
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return w; });
  const SampleSet lin = design_samples(SurrogateKind::Linear, pr, vec({0.0}), 1.0, 1);
  REQUIRE(lin.points.size() == 2);
  CHECK(lin.points[0][0] == 0.0);
  CHECK(lin.points[1][0] == 1.0);

  auto pr2 = bare_problem(2, 1, 0, [](const Vector& w) { return vec({w.sum()}); });
  const SampleSet sq = design_samples(SurrogateKind::SimplifiedQuadratic, pr2, vec({0.0, 0.0}), 0.5, 1);
  REQUIRE(sq.points.size() == 5);
  const std::vector<Vector> expect = {vec({0, 0}), vec({0.5, 0}), vec({0, 0.5}), vec({-0.5, 0}), vec({0, -0.5})};
  for (int i = 0; i < 5; ++i) CHECK((sq.points[i] - expect[i]).norm() == 0.0);
  CHECK(pr2.black.calls() == 5);

  const SampleSet ts = design_samples(SurrogateKind::TaylorSeries, pr2, vec({0.3, 0.1}), 0.5, 1);
  REQUIRE(ts.points.size() == 1);
  CHECK(ts.points[0] == vec({0.3, 0.1}));
}

TEST_CASE("design invariants hold near bounds") {
  auto pr = bare_problem(3, 1, 0, [](const Vector& w) { return vec({w.squaredNorm()}); });
  pr.glass.lower.head(3) = vec({0.0, 0.0, -1.0});
  pr.glass.upper.head(3) = vec({1.0, 0.2, 1.0});
  for (SurrogateKind k : kAllSurrogateKinds) {
    const double sigma = 0.5;
    const Vector c = vec({0.0, 0.1, 0.9});
    const SampleSet s = design_samples(k, pr, c, sigma, 9);
    CHECK(static_cast<int>(s.points.size()) == required_samples(k, 3));
    CHECK(s.points.size() == s.values.size());
    CHECK(s.points[0] == c);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      CHECK((s.points[i] - c).cwiseAbs().maxCoeff() <= sigma * (1 + 1e-12));
      CHECK((s.points[i].array() >= pr.w_lower().array()).all());
      CHECK((s.points[i].array() <= pr.w_upper().array()).all());
      for (std::size_t j = 0; j < i; ++j) CHECK(s.points[i] != s.points[j]);
    }
    CHECK_NOTHROW(fit(k, s, pr));
  }
}

TEST_CASE("an axis pinned by its bounds is ill-poised") {
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return w; });
  pr.glass.lower[0] = pr.glass.upper[0] = 1.0;
  CHECK_THROWS_AS(design_samples(SurrogateKind::Linear, pr, vec({1.0}), 0.5, 1), IllPoisedDesign);
}

TEST_CASE("linear fit on an affine map") {
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return vec({3.0 * w[0] + 1.0}); });
  const SurrogateModel s = build_surrogate(SurrogateKind::Linear, pr, vec({0.0}), 1.0, 1);
  REQUIRE(s.polynomial());
  CHECK(s.polynomial()->b0[0] == doctest::Approx(1.0));
  CHECK(s.polynomial()->linear(0, 0) == doctest::Approx(3.0));
  CHECK(s.evaluate(vec({0.5}))[0] == doctest::Approx(2.5));
}

TEST_CASE("Taylor series expansion of w^2") {
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return vec({w[0] * w[0]}); },
                         [](const Vector& w) { return Matrix(Matrix::Constant(1, 1, 2.0 * w[0])); });
  const SurrogateModel s = build_surrogate(SurrogateKind::TaylorSeries, pr, vec({1.0}), 0.5, 1);
  CHECK(s.evaluate(vec({1.1}))[0] == doctest::Approx(1.2));
  CHECK(s.gradient(vec({3.0}))(0, 0) == doctest::Approx(2.0));
  CHECK(s.gradient(vec({-3.0}))(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("raw Gaussian process examples") {
  Matrix one(1, 1);
  one(0, 0) = 0.0;
  GaussianProcess g1(one, vec({2.0}), KernelSpec{1.0, 1.0, 0.0});
  CHECK(g1.mean(vec({0.0})) == doctest::Approx(2.0).epsilon(1e-12));

  Matrix two(2, 1);
  two << -1.0, 1.0;
  GaussianProcess g2(two, vec({1.0, 1.0}), KernelSpec{1.0, 1.0, 0.0});
  // K = [[1, e^-2], [e^-2, 1]], k* = (e^-1/2, e^-1/2): mean = 2 e^-1/2 / (1 + e^-2).
  const double e2 = std::exp(-2.0);
  Eigen::Matrix2d k;
  k << 1.0, e2, e2, 1.0;
  const Eigen::Vector2d ks(std::exp(-0.5), std::exp(-0.5));
  const double oracle = ks.dot(k.inverse() * Eigen::Vector2d(1.0, 1.0));
  CHECK(g2.mean(vec({0.0})) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(2.0 * std::exp(-0.5) / (1.0 + e2)).epsilon(1e-14));
  CHECK(g2.variance(vec({1.0})) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("gp mean gradient and Hessian match finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix in(6, 2);
  Vector y(6);
  for (int i = 0; i < 6; ++i) {
    in(i, 0) = u(rng);
    in(i, 1) = u(rng);
    y[i] = u(rng);
  }
  GaussianProcess g(in, y, KernelSpec{0.7, 1.3, 1e-10});
  const Vector w = vec({0.2, -0.3});
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    Vector wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    CHECK(g.mean_gradient(w)[i] == doctest::Approx((g.mean(wp) - g.mean(wm)) / (2 * h)).epsilon(1e-6));
    const Vector col = (g.mean_gradient(wp) - g.mean_gradient(wm)) / (2 * h);
    for (int j = 0; j < 2; ++j) CHECK(g.mean_hessian(w)(j, i) == doctest::Approx(col[j]).epsilon(1e-5));
  }
}

TEST_CASE("anchoring: every kind reproduces d at the center") {
  auto pr = bare_problem(2, 2, 0, [](const Vector& w) { return vec({std::sin(w[0]) * w[1], std::exp(w[0] - w[1])}); });
  const Vector c = vec({0.3, -0.2});
  const Vector d = vec({std::sin(0.3) * -0.2, std::exp(0.5)});
  for (SurrogateKind k : kAllSurrogateKinds) {
    const SurrogateModel s = build_surrogate(k, pr, c, 0.25, 3);
    CHECK((s.evaluate(c) - d).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("quadratic reproduces quadratics everywhere") {
  auto pr = bare_problem(2, 1, 0, [](const Vector& w) { return vec({w[0] * w[0] + w[0] * w[1]}); });
  const SurrogateModel s = build_surrogate(SurrogateKind::Quadratic, pr, vec({0.5, -1.0}), 0.3, 1);
  for (const Vector& w : {vec({3.0, 2.0}), vec({-4.0, 0.1}), vec({0.0, 0.0})})
    CHECK(s.evaluate(w)[0] == doctest::Approx(w[0] * w[0] + w[0] * w[1]).epsilon(1e-9));
  Vector weights(1);
  weights[0] = 2.0;
  const Matrix h = s.weighted_hessian(vec({0.0, 0.0}), weights);
  CHECK(h(0, 0) == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(h(0, 1) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(h(1, 1) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("hybrid with zero residuals equals its Taylor part") {
  auto pr = bare_problem(2, 1, 0, [](const Vector& w) { return vec({2.0 * w[0] - w[1] + 0.5}); },
                         [](const Vector&) { Matrix j(1, 2); j << 2.0, -1.0; return j; });
  const SurrogateModel h = build_surrogate(SurrogateKind::Hybrid, pr, vec({0.1, 0.2}), 0.5, 1);
  const SurrogateModel t = build_surrogate(SurrogateKind::TaylorSeries, pr, vec({0.1, 0.2}), 0.5, 1);
  for (const Vector& w : {vec({1.0, 1.0}), vec({-2.0, 0.5})})
    CHECK(h.evaluate(w)[0] == doctest::Approx(t.evaluate(w)[0]).epsilon(1e-12));
}

TEST_CASE("fits are deterministic") {
  auto make = [] { return bare_problem(2, 1, 0, [](const Vector& w) { return vec({std::cos(w[0]) + w[1] * w[1]}); }); };
  for (SurrogateKind k : kAllSurrogateKinds) {
    auto a = make();
    auto b = make();
    const SurrogateModel sa = build_surrogate(k, a, vec({0.1, 0.4}), 0.3, 11);
    const SurrogateModel sb = build_surrogate(k, b, vec({0.1, 0.4}), 0.3, 11);
    const Vector w = vec({0.2, 0.35});
    CHECK(sa.evaluate(w) == sb.evaluate(w));
    CHECK(sa.gradient(w) == sb.gradient(w));
  }
}

TEST_CASE("fully linear diagnostic") {
  auto affine = bare_problem(2, 1, 0, [](const Vector& w) { return vec({w[0] - 3.0 * w[1]}); },
                             [](const Vector&) { Matrix j(1, 2); j << 1.0, -3.0; return j; });
  const SurrogateModel s = build_surrogate(SurrogateKind::Linear, affine, vec({0.0, 0.0}), 0.5, 1);
  const FullyLinearReport r = fully_linear_diagnostic(s, affine, 0.5, 10, 2);
  CHECK(r.value_error <= 1e-12);
  REQUIRE(r.gradient_error.has_value());
  CHECK(*r.gradient_error <= 1e-12);

  auto sq = bare_problem(1, 1, 0, [](const Vector& w) { return vec({w[0] * w[0]}); });
  const SurrogateModel t = build_surrogate(SurrogateKind::TaylorSeries, sq, vec({1.0}), 0.1, 1);
  const FullyLinearReport rt = fully_linear_diagnostic(t, sq, 0.1, 20, 4);
  CHECK(rt.value_error <= 0.01 + 1e-12);
  CHECK_FALSE(rt.gradient_error.has_value());
}
