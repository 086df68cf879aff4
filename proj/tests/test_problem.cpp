#include "doctest.h"
#include "helpers.hpp"

#include "trf/problem.hpp"
#include "trf/surrogate.hpp"

#include <algorithm>
#include <memory>
#include <random>

using namespace trf;
using trf::testing::bare_problem;
using trf::testing::vec;

namespace {

BlackBoxMap square_map() {
  return [](const Vector& w) { return Vector(w.cwiseProduct(w)); };
}

Matrix square_jacobian(const Vector& w) { return Matrix(2.0 * w.asDiagonal()); }

}  // namespace

TEST_CASE("evaluate_blackbox returns d(w) and charges one call") {
  auto pr = bare_problem(1, 1, 0, square_map());
  CHECK(pr.black.calls() == 0);
  CHECK(evaluate_blackbox(pr, vec({2.0}))[0] == doctest::Approx(4.0));
  CHECK(pr.black.calls() == 1);

  auto pr2 = bare_problem(2, 2, 0, [](const Vector& w) { return vec({w[0] + w[1], w[0] * w[1]}); });
  const Vector d = evaluate_blackbox(pr2, vec({1.0, 3.0}));
  CHECK(d[0] == 4.0);
  CHECK(d[1] == 3.0);

  auto pr3 = bare_problem(1, 1, 0, square_map());
  for (int i = 0; i < 3; ++i) evaluate_blackbox(pr3, vec({double(i)}));
  CHECK(pr3.black.calls() == 3);
}

TEST_CASE("black-box faults carry the offending input") {
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return vec({std::log(w[0])}); });
  try {
    evaluate_blackbox(pr, vec({-1.0}));
    FAIL("expected a fault");
  } catch (const BlackBoxFault& e) {
    CHECK(e.input()[0] == -1.0);
  }
  pr.glass.lower[0] = 0.0;
  CHECK_THROWS_AS(evaluate_blackbox(pr, vec({-1.0})), BlackBoxFault);
}

TEST_CASE("blackbox_gradient: analytic path, finite differences, product rule") {
  auto pr = bare_problem(1, 1, 0, square_map(), square_jacobian);
  CHECK(blackbox_gradient(pr, vec({3.0}))(0, 0) == doctest::Approx(6.0));
  CHECK(pr.black.calls() == 0);

  auto fd = bare_problem(1, 1, 0, square_map());
  CHECK(std::abs(blackbox_gradient(fd, vec({3.0}))(0, 0) - 6.0) <= 1e-6);
  CHECK(fd.black.calls() == 2);

  auto prod = bare_problem(2, 1, 0, [](const Vector& w) { return vec({w[0] * w[1]}); });
  const Matrix g = blackbox_gradient(prod, vec({2.0, 5.0}));
  CHECK(g(0, 0) == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(g(0, 1) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("finite differences stay inside the bounds of w") {
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return vec({std::sqrt(w[0]) + w[0]}); });
  pr.glass.lower[0] = 0.0;
  const Matrix g = blackbox_gradient(pr, vec({0.0}));
  CHECK(std::isfinite(g(0, 0)));
}

TEST_CASE("ledger exactness over random call sequences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 4);
    auto pr = bare_problem(m, 1, 0, [](const Vector& w) { return vec({w.squaredNorm()}); });
    std::uint64_t k = 0, j = 0;
    std::uniform_real_distribution<double> u(-2, 2);
    for (int step = 0; step < 30; ++step) {
      Vector w(m);
      for (int i = 0; i < m; ++i) w[i] = u(rng);
      if (rng() % 2) {
        evaluate_blackbox(pr, w);
        ++k;
      } else {
        blackbox_gradient(pr, w);
        ++j;
      }
    }
    CHECK(pr.black.calls() == k + 2 * static_cast<std::uint64_t>(m) * j);
  }
}

TEST_CASE("cache serves bitwise-identical inputs once") {
  auto pr = bare_problem(1, 1, 0, square_map());
  pr.black.set_caching(true);
  evaluate_blackbox(pr, vec({1.5}));
  evaluate_blackbox(pr, vec({1.5}));
  CHECK(pr.black.calls() == 1);
  evaluate_blackbox(pr, vec({2.5}));
  pr.black.retain_only(vec({2.5}));
  evaluate_blackbox(pr, vec({1.5}));
  evaluate_blackbox(pr, vec({2.5}));
  CHECK(pr.black.calls() == 3);
}

TEST_CASE("infeasibility is the Euclidean surrogate gap") {
  auto pr = bare_problem(1, 1, 0, square_map());
  // s(w) = 2 + 2 (w - 1) = 2w
  SurrogateModel s(SurrogateKind::TaylorSeries, vec({1.0}), 1.0, SurrogateModel::Taylor{vec({2.0}), Matrix::Constant(1, 1, 2.0)});
  CHECK(infeasibility(pr, s, vec({1.0, 0.0})) == doctest::Approx(1.0));
  CHECK(pr.black.calls() == 1);

  auto pr2 = bare_problem(1, 2, 0, [](const Vector&) { return vec({0.0, 0.0}); });
  SurrogateModel s2(SurrogateKind::TaylorSeries, vec({0.0}), 1.0, SurrogateModel::Taylor{vec({3.0, 4.0}), Matrix::Zero(2, 1)});
  CHECK(infeasibility(pr2, s2, vec({0.0, 0.0, 0.0})) == doctest::Approx(5.0));

  auto exact = bare_problem(1, 1, 0, square_map());
  SurrogateModel s3(SurrogateKind::TaylorSeries, vec({2.0}), 1.0, SurrogateModel::Taylor{vec({4.0}), Matrix::Constant(1, 1, 4.0)});
  CHECK(infeasibility(exact, s3, vec({2.0, 0.0})) == doctest::Approx(0.0));
}

TEST_CASE("glass_residuals") {
  auto pr = bare_problem(1, 1, 0, square_map());
  pr.glass.equalities = trf::testing::vector_fn(
      1, [](const Vector& x) { return vec({x[0] + x[1] - 2.0}); },
      [](const Vector&) { return Matrix(Matrix::Ones(1, 2)); });
  pr.glass.inequalities = trf::testing::vector_fn(
      1, [](const Vector& x) { return vec({x[0] - 1.0}); },
      [](const Vector&) { Matrix j = Matrix::Zero(1, 2); j(0, 0) = 1; return j; });
  auto r = glass_residuals(pr, vec({1.0, 1.0}));
  CHECK(r.h[0] == 0.0);
  r = glass_residuals(pr, vec({3.0, 0.0}));
  CHECK(r.g[0] == 2.0);

  auto bare = bare_problem(1, 1, 0, square_map());
  r = glass_residuals(bare, vec({0.0, 0.0}));
  CHECK(r.h.size() == 0);
  CHECK(r.g.size() == 0);
}

TEST_CASE("partition validation") {
  auto p = VariablePartition::contiguous(2, 1, 3);
  CHECK_NOTHROW(p.validate());
  std::vector<int> all = p.w_indices;
  all.insert(all.end(), p.y_indices.begin(), p.y_indices.end());
  all.insert(all.end(), p.z_indices.begin(), p.z_indices.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 6; ++i) CHECK(all[i] == i);

  VariablePartition bad{{0}, {0}, {1}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  VariablePartition gap{{0}, {2}, {}};
  CHECK_THROWS_AS(gap.validate(), ConfigError);
  VariablePartition no_y{{0}, {}, {1}};
  CHECK_THROWS_AS(no_y.validate(), ConfigError);
}

TEST_CASE("problem validation rejects x0 outside bounds") {
  auto pr = bare_problem(1, 1, 0, square_map());
  CHECK_NOTHROW(pr.validate());
  pr.x0[0] = 5e3;
  CHECK_THROWS_AS(pr.validate(), ConfigError);
}

namespace {

struct Bowl {
  int dimension() const { return 3; }
  int num_equalities() const { return 1; }
  int num_inequalities() const { return 1; }
  template <class T>
  T objective(const std::vector<T>& x) const {
    using std::exp;
    using std::sin;
    return x[0] * x[0] * x[1] + sin(x[2]) + exp(0.1 * x[0]);
  }
  template <class T>
  std::vector<T> equalities(const std::vector<T>& x) const {
    return {x[0] * x[1] - x[2]};
  }
  template <class T>
  std::vector<T> inequalities(const std::vector<T>& x) const {
    using std::sqrt;
    return {sqrt(x[0] * x[0] + 1.0) - x[1] / x[2]};
  }
};

}  // namespace

TEST_CASE("templated glass-box gradients agree with finite differences") {
  auto glass = make_glass_box(std::make_shared<const Bowl>(), Vector::Constant(3, -5), Vector::Constant(3, 5));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int t = 0; t < 20; ++t) {
    Vector x(3);
    for (int i = 0; i < 3; ++i) x[i] = u(rng);
    const Vector g = glass.objective.gradient(x);
    const Matrix jh = glass.equalities.jacobian(x);
    const Matrix jg = glass.inequalities.jacobian(x);
    for (int i = 0; i < 3; ++i) {
      Vector xp = x, xm = x;
      const double h = 1e-6;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (glass.objective.value(xp) - glass.objective.value(xm)) / (2 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max(1.0, std::abs(g[i])));
      const double fh = (glass.equalities.value(xp)[0] - glass.equalities.value(xm)[0]) / (2 * h);
      CHECK(std::abs(fh - jh(0, i)) <= 1e-5 * std::max(1.0, std::abs(jh(0, i))));
      const double fg = (glass.inequalities.value(xp)[0] - glass.inequalities.value(xm)[0]) / (2 * h);
      CHECK(std::abs(fg - jg(0, i)) <= 1e-5 * std::max(1.0, std::abs(jg(0, i))));
    }
  }
}

TEST_CASE("subprocess adapter speaks the line protocol") {
  auto map = make_subprocess_map(
      "while read a b; do awk -v a=$a -v b=$b 'BEGIN { print a*a, a+b }'; done", 2, 2);
  const Vector a = map(vec({3.0, 4.0}));
  CHECK(a[0] == doctest::Approx(9.0));
  CHECK(a[1] == doctest::Approx(7.0));
  const Vector b = map(vec({0.5, -1.0}));
  CHECK(b[0] == doctest::Approx(0.25));

  auto bad = make_subprocess_map("while read a; do echo oops; done", 1, 1);
  CHECK_THROWS_AS(bad(vec({1.0})), BlackBoxFault);

  auto short_reply = make_subprocess_map("while read a; do echo 1; done", 1, 2);
  CHECK_THROWS_AS(short_reply(vec({1.0})), BlackBoxFault);

  auto dead = make_subprocess_map("exit 3", 1, 1);
  CHECK_THROWS_AS(dead(vec({1.0})), BlackBoxFault);
}
