#include "doctest.h"
#include "helpers.hpp"

#include "trf/trf_core.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace trf;
using trf::testing::bare_problem;
using trf::testing::scalar;
using trf::testing::vec;

namespace {

/// min (w - 2)^2 subject to y = d(w) = w, w in [0, 5].
GreyBoxProblem identity_toy() {
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return w; });
  pr.glass.objective = scalar([](const Vector& x) { return (x[0] - 2) * (x[0] - 2); },
                              [](const Vector& x) { return vec({2 * (x[0] - 2), 0.0}); });
  pr.glass.lower = vec({0.0, -1e3});
  pr.glass.upper = vec({5.0, 1e3});
  pr.x0 = vec({0.5, 0.0});
  return pr;
}

void check_discipline(const SolveReport& rep, const TrfConfig& c) {
  const auto& t = rep.trace;
  REQUIRE(static_cast<int>(t.size()) == rep.iterations);
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sum += t[i].design_calls + t[i].theta_calls + t[i].fd_calls;
    CHECK(t[i].bb_calls_cum == sum);
    CHECK(t[i].sigma <= t[i].delta);
    if (i + 1 < t.size()) {
      if (t[i].outcome == Outcome::FType) CHECK(t[i + 1].delta >= t[i].delta);
      if (t[i].outcome == Outcome::Rejected) CHECK(t[i + 1].delta < t[i].delta);
      if (t[i].outcome == Outcome::Rejected || t[i].outcome == Outcome::ThetaType)
        CHECK(t[i + 1].sigma <= t[i].sigma);
    }
  }
  CHECK(rep.blackbox_calls == sum);
  if (rep.status == Termination::CriticalPoint) {
    CHECK(t.back().theta <= c.eps_theta);
    CHECK(t.back().chi <= c.eps_chi);
    CHECK(t.back().sigma <= c.eps_delta);
  }
}

}  // namespace

TEST_CASE("default configuration") {
  const TrfConfig c = default_config(Variant::A0, SurrogateKind::Linear);
  CHECK(c.gamma_s > 1.0 / (1.0 + c.mu));
  CHECK(c.sigma0 <= c.delta0);
  CHECK_NOTHROW(c.validate());
  CHECK(initial_policy(Variant::A4).effective() == ProjectionKind::Absolute);
  CHECK(initial_policy(Variant::A0).effective() == ProjectionKind::None);

  TrfConfig bad = c;
  bad.gamma_c = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.sigma0 = 2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.gamma_s = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("configuration by name") {
  TrfConfig c;
  set_config_value(c, "gamma_e", "3.5");
  set_config_value(c, "variant", "a3");
  set_config_value(c, "surrogate", "gp");
  set_config_value(c, "max_iter", "42");
  CHECK(c.gamma_e == 3.5);
  CHECK(c.variant == Variant::A3);
  CHECK(c.surrogate_kind == SurrogateKind::GaussianProcess);
  CHECK(c.max_iter == 42);
  CHECK(get_config_value(c, "gamma_e") == "3.5");
  CHECK_THROWS_AS(set_config_value(c, "nope", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "eta1", "abc"), ConfigError);
  for (const auto& key : config_keys()) CHECK_NOTHROW(get_config_value(c, key));
}

TEST_CASE("filter acceptance examples") {
  FilterSet f;
  f.add({10, 1});
  CHECK(filter_acceptable(f, {10, 1}, {20, 0.5}, 0.01, 0.01));
  CHECK(filter_acceptable(f, {10, 1}, {9.99, 2}, 0.01, 0.01));
  CHECK_FALSE(filter_acceptable(f, {10, 1}, {10.5, 0.995}, 0.01, 0.01));
}

TEST_CASE("filter insertion examples") {
  FilterSet f;
  f.add({5, 1});
  REQUIRE(f.size() == 1);
  f.add({6, 2});
  CHECK(f.size() == 1);
  CHECK(f.entries()[0].f == 5);
  f.add({4, 0.5});
  REQUIRE(f.size() == 1);
  CHECK(f.entries()[0].f == 4);
  CHECK(f.entries()[0].theta == 0.5);
  f.add({6, 0.1});
  CHECK(f.size() == 2);
}

TEST_CASE("step classification and radius rules") {
  CHECK(switching_condition(1.0, 0.0, 0.001, 0.1, 2.0, 0.01));
  CHECK_FALSE(switching_condition(1e-9, 0.0, 0.001, 0.1, 2.0, 0.01));
  CHECK_FALSE(switching_condition(100.0, 0.0, 0.5, 0.1, 2.0, 0.01));

  CHECK(reduction_ratio(0.5, 0.1, 0.5, 1e-8) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(reduction_ratio(0.0, 0.0, 0.0, 1e-8) == 1.0);
  CHECK(reduction_ratio(0.1, 0.2, 1.0, 1e-8) < 1e-8);

  CHECK(update_radius(0.01, 1.0, 2.0, 0.05, 0.75, 0.5, 2.5) == 0.5);
  CHECK(update_radius(0.5, 1.0, 2.0, 0.05, 0.75, 0.5, 2.5) == 2.0);
  CHECK(update_radius(0.9, 1.0, 2.0, 0.05, 0.75, 0.5, 2.5) == 2.5);

  CHECK(criticality_update(0.005, 1.0, 0.01, 1e-8) == doctest::Approx(0.5));
  CHECK(criticality_update(0.0, 1.0, 0.01, 1e-8) == 1e-8);
  CHECK(criticality_update(0.5, 1.0, 0.01, 1e-8) == 1.0);
}

TEST_CASE("termination checks") {
  const TrfConfig c;
  TrustRegionState s;
  s.theta = 1e-7;
  s.chi = 1e-6;
  s.sigma = 1e-5;
  s.delta = 1.0;
  CHECK(check_termination(s, std::nullopt, c) == Termination::CriticalPoint);
  s.chi = 1.0;
  CHECK(check_termination(s, 1e-8, c) == Termination::ResidualOptimal);
  CHECK_FALSE(check_termination(s, 1e-3, c).has_value());
  s.delta = 1e-9;
  s.delta_prev = 1e-9;
  s.theta_prev = 0.0;
  CHECK(check_termination(s, std::nullopt, c) == Termination::FeasiblePoint);
  s.theta = 0.1;
  s.chi = 0.0;
  CHECK_FALSE(check_termination(s, 0.0, c).has_value());
}

TEST_CASE("toy problem converges under every variant") {
  for (Variant v : kAllVariants) {
    for (SurrogateKind k : {SurrogateKind::Linear, SurrogateKind::TaylorSeries, SurrogateKind::GaussianProcess}) {
      auto pr = identity_toy();
      const TrfConfig c = default_config(v, k);
      const SolveReport rep = trf_solve(pr, c);
      INFO(variant_name(v), " ", short_name(k), " status ", termination_name(rep.status), " ", rep.message);
      CHECK(rep.status != Termination::IterLimit);
      CHECK(std::abs(rep.f_final) <= 1e-6);
      CHECK(std::abs(rep.x_final[0] - 2.0) <= 1e-3);
      CHECK(rep.iterations <= 30);
      check_discipline(rep, c);
    }
  }
}

TEST_CASE("trace CSV layout") {
  auto pr = identity_toy();
  const SolveReport rep = trf_solve(pr, default_config(Variant::A2, SurrogateKind::Linear));
  std::ostringstream os;
  write_trace_csv(os, rep.trace);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "k,f,theta,chi,delta,sigma,outcome,policy,bb_calls_cum");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == rep.iterations);
}

TEST_CASE("restoration returns at once when already compatible") {
  auto pr = identity_toy();
  const TrfConfig c = default_config(Variant::A0, SurrogateKind::Linear);
  TrustRegionState s;
  s.x = vec({1.0, 1.0});
  s.delta = 1.0;
  s.sigma = 0.5;
  s.theta = 0.0;
  s.f = 1.0;
  s.surrogate = build_surrogate(SurrogateKind::Linear, pr, vec({1.0}), 0.5, 0);
  s.filter.add({s.f, s.theta});
  const RestorationResult r = restoration(pr, s, Matrix(), c);
  CHECK(r.success);
  CHECK(r.rounds == 1);
  CHECK(r.state.x == s.x);
}

TEST_CASE("restoration steps over the full radius and then passes the shrunken check") {
  // d(w) = w, y pinned at 0.8, w_k = 0. The shrunken region (half of Delta)
  // cannot close the gap; the restoration step over Delta = 1 lands on w = 0.8
  // up to the small proximal bias.
  auto pr = bare_problem(1, 1, 0, [](const Vector& w) { return vec({w[0]}); });
  pr.glass.lower = vec({-3.0, 0.8});
  pr.glass.upper = vec({3.0, 0.8});
  TrfConfig c = default_config(Variant::A0, SurrogateKind::Linear);
  c.kappa_delta = 0.5;
  TrustRegionState s;
  s.x = vec({0.0, 0.8});
  s.delta = 1.0;
  s.sigma = 1.0;
  s.theta = 0.8;
  s.f = 0.0;
  s.surrogate = build_surrogate(SurrogateKind::Linear, pr, vec({0.0}), 1.0, 0);
  s.filter.add({s.f, s.theta});
  const RestorationResult r = restoration(pr, s, Matrix(), c);
  REQUIRE(r.success);
  CHECK(r.rounds == 2);
  CHECK(r.state.x[0] == doctest::Approx(0.8).epsilon(1e-5));
  CHECK(r.state.theta <= c.eps_comp);
  CHECK(r.last_rho.value() == doctest::Approx(1.0));
  // rho = 1, so Delta = max(2.5 * 0.8, 1).
  CHECK(r.state.delta == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(r.state.sigma == doctest::Approx(0.5));
}

TEST_CASE("restoration fails when the gap cannot close") {
  auto pr = bare_problem(1, 1, 0, [](const Vector&) { return vec({1.0}); });
  pr.glass.lower = vec({-3.0, 0.0});
  pr.glass.upper = vec({3.0, 0.0});
  TrfConfig c = default_config(Variant::A0, SurrogateKind::Linear);
  c.max_restoration = 6;
  TrustRegionState s;
  s.x = vec({0.0, 0.0});
  s.delta = 1.0;
  s.sigma = 1.0;
  s.theta = 1.0;
  s.surrogate = build_surrogate(SurrogateKind::Linear, pr, vec({0.0}), 1.0, 0);
  s.filter.add({s.f, s.theta});
  const RestorationResult r = restoration(pr, s, Matrix(), c);
  CHECK_FALSE(r.success);
  CHECK(r.rounds <= 6);
}

TEST_CASE("filter soundness over random insertions") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  for (int seq = 0; seq < 200; ++seq) {
    FilterSet f;
    for (int i = 0; i < 30; ++i) {
      f.add({u(rng), u(rng)});
      REQUIRE(f.mutually_non_dominated());
    }
  }
}
