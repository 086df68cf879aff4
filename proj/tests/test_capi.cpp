// The C interface, exercised the way a C caller would use it.

#include "trf/trf.h"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  trf_string_free(s);
  return out;
}

// y = w^2, counted.
int square_box(const double* w, double* y, void* user) {
  ++*static_cast<int*>(user);
  y[0] = w[0] * w[0];
  return 0;
}

// f = (w - 2)^2 + y over x = (w, y).
int bowl(const double* x, double* f, double* grad, void*) {
  *f = (x[0] - 2.0) * (x[0] - 2.0) + x[1];
  if (grad) {
    grad[0] = 2.0 * (x[0] - 2.0);
    grad[1] = 1.0;
  }
  return 0;
}

// 1.5 - w <= 0.
int floor_w(const double* x, double* g, double* jac, void*) {
  g[0] = 1.5 - x[0];
  if (jac) {
    jac[0] = -1.0;
    jac[1] = 0.0;
  }
  return 0;
}

int failing_box(const double*, double*, void*) { return 7; }

trf_problem* bowl_problem(int* counter) {
  trf_problem* p = nullptr;
  REQUIRE(trf_problem_create(1, 1, 0, square_box, counter, &p) == TRF_OK);
  REQUIRE(trf_problem_set_objective(p, bowl, nullptr) == TRF_OK);
  const double lo[] = {-5.0, -100.0};
  const double hi[] = {5.0, 100.0};
  REQUIRE(trf_problem_set_bounds(p, lo, hi) == TRF_OK);
  const double x0[] = {3.0, 0.0};
  REQUIRE(trf_problem_set_start(p, x0) == TRF_OK);
  return p;
}

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(std::string(trf_version()).size() > 0);
  CHECK(std::string(trf_status_message(TRF_OK)) == "ok");
  CHECK(std::string(trf_status_message(TRF_ERR_IO)) == "i/o error");
}

TEST_CASE("null arguments are rejected with a message") {
  trf_problem* p = nullptr;
  CHECK(trf_problem_from_benchmark(nullptr, 0, &p) == TRF_ERR_ARGUMENT);
  CHECK(std::string(trf_last_error()).find("null") != std::string::npos);
  CHECK(trf_problem_create(1, 1, 0, nullptr, nullptr, &p) == TRF_ERR_ARGUMENT);
  CHECK(p == nullptr);
  CHECK(trf_problem_create(0, 1, 0, square_box, nullptr, &p) == TRF_ERR_ARGUMENT);
  trf_report* r = nullptr;
  CHECK(trf_solve(nullptr, nullptr, &r) == TRF_ERR_ARGUMENT);
  CHECK(r == nullptr);
  CHECK(trf_report_solved(nullptr) == -1);
  trf_problem_free(nullptr);
  trf_config_free(nullptr);
  trf_report_free(nullptr);
  trf_campaign_free(nullptr);
}

TEST_CASE("config set/get round trip and errors") {
  trf_config* c = nullptr;
  REQUIRE(trf_config_create("A2", "ts", &c) == TRF_OK);
  CHECK(trf_config_set(c, "delta0", "0.5") == TRF_OK);
  char* v = nullptr;
  REQUIRE(trf_config_get(c, "delta0", &v) == TRF_OK);
  CHECK(std::stod(take(v)) == doctest::Approx(0.5));
  CHECK(trf_config_set(c, "no_such_key", "1") == TRF_ERR_CONFIG);
  CHECK(trf_config_set(c, "delta0", "abc") == TRF_ERR_CONFIG);
  // A rejected value leaves the config as it was.
  REQUIRE(trf_config_get(c, "delta0", &v) == TRF_OK);
  CHECK(std::stod(take(v)) == doctest::Approx(0.5));
  char* keys = nullptr;
  REQUIRE(trf_config_keys(&keys) == TRF_OK);
  CHECK(take(keys).find("delta0\n") != std::string::npos);
  trf_config_free(c);

  c = nullptr;
  CHECK(trf_config_create("A9", "ts", &c) == TRF_ERR_CONFIG);
  CHECK(c == nullptr);
  CHECK(trf_config_create("A0", "spline", &c) == TRF_ERR_CONFIG);
  CHECK(trf_config_create("A0", "gaussian_process", &c) == TRF_OK);
  trf_config_free(c);
}

TEST_CASE("benchmark problem solves through the C interface") {
  trf_problem* p = nullptr;
  REQUIRE(trf_problem_from_benchmark("toy", 0, &p) == TRF_OK);
  int n_w = 0, n_y = 0, n_z = 0;
  REQUIRE(trf_problem_dims(p, &n_w, &n_y, &n_z) == TRF_OK);
  CHECK(n_w + n_y + n_z == 2);
  double oracle = 1.0;
  REQUIRE(trf_problem_oracle(p, &oracle) == TRF_OK);
  CHECK(oracle == 0.0);
  CHECK(trf_problem_set_start(p, &oracle) == TRF_ERR_ARGUMENT);

  trf_config* c = nullptr;
  REQUIRE(trf_config_create("A3", "ts", &c) == TRF_OK);
  trf_report* r = nullptr;
  REQUIRE(trf_solve(p, c, &r) == TRF_OK);
  CHECK(trf_report_solved(r) == 1);
  CHECK(std::fabs(trf_report_f(r)) <= 1e-6);
  CHECK(trf_report_iterations(r) <= 30);
  CHECK(trf_report_blackbox_calls(r) > 0);

  char* csv = nullptr;
  REQUIRE(trf_report_trace_csv(r, &csv) == TRF_OK);
  const std::string trace = take(csv);
  CHECK(trace.rfind("k,f,theta,chi,delta,sigma,outcome,policy,bb_calls_cum\n", 0) == 0);

  const fs::path file = fs::temp_directory_path() / "trf_capi_trace.csv";
  REQUIRE(trf_report_write_trace(r, file.string().c_str()) == TRF_OK);
  std::ifstream in(file);
  std::string first;
  std::getline(in, first);
  CHECK(first == "k,f,theta,chi,delta,sigma,outcome,policy,bb_calls_cum");
  fs::remove(file);
  CHECK(trf_report_write_trace(r, "/nonexistent_dir/trace.csv") == TRF_ERR_IO);

  trf_report_free(r);
  trf_config_free(c);
  trf_problem_free(p);

  CHECK(trf_problem_from_benchmark("missing_problem", 0, &p) == TRF_ERR_NOT_FOUND);
}

TEST_CASE("user problem with callbacks") {
  int calls = 0;
  trf_problem* p = bowl_problem(&calls);
  double oracle = 0.0;
  CHECK(trf_problem_oracle(p, &oracle) == TRF_ERR_NOT_FOUND);

  trf_config* c = nullptr;
  REQUIRE(trf_config_create("A2", "ts", &c) == TRF_OK);

  SUBCASE("unconstrained: (w - 2)^2 + w^2 is least at w = 1") {
    trf_report* r = nullptr;
    REQUIRE(trf_solve(p, c, &r) == TRF_OK);
    CHECK(trf_report_status(r) == TRF_CRITICAL_POINT);
    size_t dim = 0;
    double x[2] = {0, 0};
    REQUIRE(trf_report_x(r, x, 2, &dim) == TRF_OK);
    CHECK(dim == 2);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(trf_report_f(r) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(trf_report_solved(r) == -1);
    // Every black-box call the solver counted went through the callback.
    CHECK(static_cast<std::uint64_t>(calls) >= trf_report_blackbox_calls(r));
    trf_report_free(r);
  }

  SUBCASE("inequality w >= 1.5 is active") {
    REQUIRE(trf_problem_set_inequalities(p, 1, floor_w, nullptr) == TRF_OK);
    trf_report* r = nullptr;
    REQUIRE(trf_solve(p, c, &r) == TRF_OK);
    double x[2] = {0, 0};
    REQUIRE(trf_report_x(r, x, 2, nullptr) == TRF_OK);
    CHECK(x[0] == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(trf_report_f(r) == doctest::Approx(2.5).epsilon(1e-5));
    trf_report_free(r);
  }

  SUBCASE("bounds must be ordered") {
    const double lo[] = {1.0, 0.0};
    const double hi[] = {0.0, 1.0};
    CHECK(trf_problem_set_bounds(p, lo, hi) == TRF_ERR_ARGUMENT);
  }

  trf_config_free(c);
  trf_problem_free(p);
}

TEST_CASE("problem without objective or with a failing black box") {
  trf_config* c = nullptr;
  REQUIRE(trf_config_create("A0", "l", &c) == TRF_OK);

  trf_problem* p = nullptr;
  REQUIRE(trf_problem_create(1, 1, 0, square_box, nullptr, &p) == TRF_OK);
  trf_report* r = nullptr;
  CHECK(trf_solve(p, c, &r) == TRF_ERR_CONFIG);
  CHECK(r == nullptr);
  trf_problem_free(p);

  REQUIRE(trf_problem_create(1, 1, 0, failing_box, nullptr, &p) == TRF_OK);
  REQUIRE(trf_problem_set_objective(p, bowl, nullptr) == TRF_OK);
  // A black-box fault ends the run rather than the call.
  REQUIRE(trf_solve(p, c, &r) == TRF_OK);
  CHECK(trf_report_status(r) == TRF_SUBSOLVER_FAIL);
  CHECK(std::string(trf_report_status_name(r)) == "subsolver_fail");
  CHECK(std::string(trf_report_message(r)).find("black-box callback failed") != std::string::npos);
  trf_report_free(r);
  trf_problem_free(p);
  trf_config_free(c);
}

TEST_CASE("suite manifest") {
  char* csv = nullptr;
  REQUIRE(trf_suite_manifest("engineering", 0, &csv) == TRF_OK);
  const std::string m = take(csv);
  CHECK(m.find("himmelblau,engineering,3,2,5,") != std::string::npos);
  CHECK(trf_suite_manifest("bogus_suite", 0, &csv) == TRF_ERR_CONFIG);
}

TEST_CASE("campaign round trip") {
  trf_campaign* c = nullptr;
  CHECK(trf_campaign_from_spec_text("variants = A5\n", &c) == TRF_ERR_CONFIG);
  REQUIRE(trf_campaign_from_spec_text("variants = A0, A3\nsurrogates = l, ts\nsuite = toy\n", &c) == TRF_OK);
  size_t runs = 0;
  CHECK(trf_campaign_counts(c, &runs, nullptr) == TRF_ERR_ARGUMENT);
  CHECK(trf_campaign_set_workers(c, 0) == TRF_ERR_ARGUMENT);
  REQUIRE(trf_campaign_set_workers(c, 2) == TRF_OK);

  struct Seen {
    size_t calls = 0;
    size_t total = 0;
  } seen;
  auto progress = [](const char*, const char*, const char* problem, const char*, int, size_t, size_t total,
                     void* user) {
    auto* s = static_cast<Seen*>(user);
    ++s->calls;
    s->total = total;
    CHECK(std::string(problem) == "toy");
  };
  REQUIRE(trf_campaign_run(c, progress, &seen) == TRF_OK);
  CHECK(seen.calls == 4);
  CHECK(seen.total == 4);

  size_t solved = 0;
  REQUIRE(trf_campaign_counts(c, &runs, &solved) == TRF_OK);
  CHECK(runs == 4);
  CHECK(solved == 4);

  char* csv = nullptr;
  REQUIRE(trf_campaign_matrix_csv(c, &csv) == TRF_OK);
  const std::string matrix = take(csv);
  CHECK(matrix.rfind("variant,linear,taylor_series,average\n", 0) == 0);

  const fs::path dir = fs::temp_directory_path() / "trf_capi_campaign";
  fs::remove_all(dir);
  REQUIRE(trf_campaign_write(c, dir.string().c_str()) == TRF_OK);
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "profile_iterations.csv"));
  CHECK(trf_campaign_write(c, "/proc/trf_cannot_write_here") == TRF_ERR_IO);

  trf_campaign* back = nullptr;
  REQUIRE(trf_campaign_from_summary((dir / "summary.json").string().c_str(), &back) == TRF_OK);
  REQUIRE(trf_campaign_matrix_csv(back, &csv) == TRF_OK);
  CHECK(take(csv) == matrix);
  const fs::path again = dir / "again";
  REQUIRE(trf_campaign_emit_profiles(back, again.string().c_str()) == TRF_OK);
  std::ifstream a(dir / "profile_iterations.csv"), b(again / "profile_iterations.csv");
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  trf_campaign_free(back);

  CHECK(trf_campaign_from_summary("/nonexistent/summary.json", &back) == TRF_ERR_IO);
  fs::remove_all(dir);
  trf_campaign_free(c);
}
