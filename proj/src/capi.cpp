#include "trf/trf.h"

#include "trf/benchmarks.hpp"
#include "trf/harness.hpp"
#include "trf/trf_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

using namespace trf;

struct trf_problem {
  // Benchmark problems keep their definition and oracle.
  std::optional<BenchmarkProblem> bench;

  // User problems.
  int n_w = 0;
  int n_y = 0;
  int n_z = 0;
  trf_blackbox_fn blackbox = nullptr;
  void* blackbox_user = nullptr;
  trf_objective_fn objective = nullptr;
  void* objective_user = nullptr;
  int n_eq = 0;
  trf_constraint_fn equalities = nullptr;
  void* eq_user = nullptr;
  int n_ineq = 0;
  trf_constraint_fn inequalities = nullptr;
  void* ineq_user = nullptr;
  Vector lower;
  Vector upper;
  Vector x0;

  int dim() const { return n_w + n_y + n_z; }
};

struct trf_config {
  TrfConfig config;
};

struct trf_report {
  SolveReport report;
  std::string status_name;
  int solved = -1;
};

struct trf_campaign {
  CampaignSpec spec;
  std::optional<CampaignResult> result;
};

namespace {

thread_local std::string g_last_error;

trf_status fail(trf_status code, const std::string& what) {
  g_last_error = what;
  return code;
}

// Runs `body`, mapping exceptions to status codes. `error_code` is used for
// library errors that are neither configuration nor solver faults.
template <class F>
trf_status guarded(F&& body, trf_status error_code = TRF_ERR_SOLVER) {
  try {
    return body();
  } catch (const ConfigError& e) {
    return fail(TRF_ERR_CONFIG, e.what());
  } catch (const Error& e) {
    return fail(error_code, e.what());
  } catch (const std::bad_alloc&) {
    return fail(TRF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TRF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TRF_ERR_INTERNAL, "unknown error");
  }
}

trf_status need(const void* p, const char* what) {
  if (p) return TRF_OK;
  return fail(TRF_ERR_ARGUMENT, std::string(what) + " is null");
}

char* heap_copy(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// ---- user problems -----------------------------------------------------

VectorFunction constraint_function(int count, int dim, trf_constraint_fn fn, void* user, const char* what) {
  if (count == 0 || !fn) return empty_vector_function();
  VectorFunction f;
  f.size = count;
  f.value = [=](const Vector& x) {
    Vector v(count);
    if (fn(x.data(), v.data(), nullptr, user) != 0) throw Error(std::string(what) + " callback failed");
    return v;
  };
  f.jacobian = [=](const Vector& x) {
    Vector v(count);
    std::vector<double> j(static_cast<std::size_t>(count) * dim);
    if (fn(x.data(), v.data(), j.data(), user) != 0) throw Error(std::string(what) + " callback failed");
    Matrix out(count, dim);
    for (int r = 0; r < count; ++r)
      for (int c = 0; c < dim; ++c) out(r, c) = j[static_cast<std::size_t>(r) * dim + c];
    return out;
  };
  return f;
}

GreyBoxProblem build_user_problem(const trf_problem& p) {
  if (!p.objective) throw ConfigError("problem has no objective");
  const int dim = p.dim();
  GreyBoxProblem g;
  g.name = "user";
  g.partition = VariablePartition::contiguous(p.n_w, p.n_y, p.n_z);
  g.glass.dimension = dim;
  const trf_objective_fn obj = p.objective;
  void* obj_user = p.objective_user;
  g.glass.objective.value = [=](const Vector& x) {
    double f = 0.0;
    if (obj(x.data(), &f, nullptr, obj_user) != 0) throw Error("objective callback failed");
    return f;
  };
  g.glass.objective.gradient = [=](const Vector& x) {
    double f = 0.0;
    Vector grad = Vector::Zero(dim);
    if (obj(x.data(), &f, grad.data(), obj_user) != 0) throw Error("objective callback failed");
    return grad;
  };
  g.glass.equalities = constraint_function(p.n_eq, dim, p.equalities, p.eq_user, "equality");
  g.glass.inequalities = constraint_function(p.n_ineq, dim, p.inequalities, p.ineq_user, "inequality");
  g.glass.lower = p.lower;
  g.glass.upper = p.upper;
  const trf_blackbox_fn bb = p.blackbox;
  void* bb_user = p.blackbox_user;
  const int n_y = p.n_y;
  g.black = BlackBoxEvaluator(p.n_w, p.n_y, [=](const Vector& w) {
    Vector y(n_y);
    if (bb(w.data(), y.data(), bb_user) != 0) throw BlackBoxFault("black-box callback failed", w);
    return y;
  });
  g.x0 = p.x0;
  return g;
}

}  // namespace

extern "C" {

const char* trf_version(void) { return "1.0.0"; }

const char* trf_last_error(void) { return g_last_error.c_str(); }

const char* trf_status_message(trf_status status) {
  switch (status) {
    case TRF_OK:
      return "ok";
    case TRF_ERR_ARGUMENT:
      return "invalid argument";
    case TRF_ERR_CONFIG:
      return "configuration error";
    case TRF_ERR_NOT_FOUND:
      return "not found";
    case TRF_ERR_IO:
      return "i/o error";
    case TRF_ERR_SOLVER:
      return "solver error";
    case TRF_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

void trf_string_free(char* s) { std::free(s); }

// ---- problems -------------------------------------------------------------

trf_status trf_problem_from_benchmark(const char* name, uint64_t seed, trf_problem** out) {
  if (trf_status s = need(name, "name"); s != TRF_OK) return s;
  if (trf_status s = need(out, "out"); s != TRF_OK) return s;
  *out = nullptr;
  return guarded([&] {
    std::vector<BenchmarkProblem> found;
    try {
      found = select_problems(name, seed);
    } catch (const ConfigError& e) {
      return fail(TRF_ERR_NOT_FOUND, e.what());
    }
    if (found.size() != 1) return fail(TRF_ERR_ARGUMENT, "name must select exactly one problem");
    auto* p = new trf_problem;
    p->bench = std::move(found.front());
    p->n_w = p->bench->n_w;
    p->n_y = p->bench->n_y;
    p->n_z = p->bench->n_z;
    *out = p;
    return TRF_OK;
  });
}

trf_status trf_problem_create(int n_w, int n_y, int n_z, trf_blackbox_fn blackbox, void* user, trf_problem** out) {
  if (trf_status s = need(out, "out"); s != TRF_OK) return s;
  *out = nullptr;
  if (trf_status s = need(reinterpret_cast<const void*>(blackbox), "blackbox"); s != TRF_OK) return s;
  if (n_w < 1 || n_y < 1 || n_z < 0) return fail(TRF_ERR_ARGUMENT, "need n_w >= 1, n_y >= 1, n_z >= 0");
  return guarded([&] {
    auto* p = new trf_problem;
    p->n_w = n_w;
    p->n_y = n_y;
    p->n_z = n_z;
    p->blackbox = blackbox;
    p->blackbox_user = user;
    p->lower = Vector::Constant(p->dim(), -1e20);
    p->upper = Vector::Constant(p->dim(), 1e20);
    p->x0 = Vector::Zero(p->dim());
    *out = p;
    return TRF_OK;
  });
}

static trf_status require_user_problem(const trf_problem* p) {
  if (trf_status s = need(p, "problem"); s != TRF_OK) return s;
  if (p->bench) return fail(TRF_ERR_ARGUMENT, "benchmark problems cannot be modified");
  return TRF_OK;
}

trf_status trf_problem_set_objective(trf_problem* p, trf_objective_fn f, void* user) {
  if (trf_status s = require_user_problem(p); s != TRF_OK) return s;
  if (trf_status s = need(reinterpret_cast<const void*>(f), "objective"); s != TRF_OK) return s;
  p->objective = f;
  p->objective_user = user;
  return TRF_OK;
}

trf_status trf_problem_set_equalities(trf_problem* p, int count, trf_constraint_fn h, void* user) {
  if (trf_status s = require_user_problem(p); s != TRF_OK) return s;
  if (count < 0 || (count > 0 && !h)) return fail(TRF_ERR_ARGUMENT, "bad equality count or callback");
  p->n_eq = count;
  p->equalities = h;
  p->eq_user = user;
  return TRF_OK;
}

trf_status trf_problem_set_inequalities(trf_problem* p, int count, trf_constraint_fn g, void* user) {
  if (trf_status s = require_user_problem(p); s != TRF_OK) return s;
  if (count < 0 || (count > 0 && !g)) return fail(TRF_ERR_ARGUMENT, "bad inequality count or callback");
  p->n_ineq = count;
  p->inequalities = g;
  p->ineq_user = user;
  return TRF_OK;
}

trf_status trf_problem_set_bounds(trf_problem* p, const double* lower, const double* upper) {
  if (trf_status s = require_user_problem(p); s != TRF_OK) return s;
  if (!lower || !upper) return fail(TRF_ERR_ARGUMENT, "bounds are null");
  for (int i = 0; i < p->dim(); ++i)
    if (!(lower[i] <= upper[i])) return fail(TRF_ERR_ARGUMENT, "lower bound above upper bound");
  p->lower = Eigen::Map<const Vector>(lower, p->dim());
  p->upper = Eigen::Map<const Vector>(upper, p->dim());
  return TRF_OK;
}

trf_status trf_problem_set_start(trf_problem* p, const double* x0) {
  if (trf_status s = require_user_problem(p); s != TRF_OK) return s;
  if (trf_status s = need(x0, "x0"); s != TRF_OK) return s;
  p->x0 = Eigen::Map<const Vector>(x0, p->dim());
  return TRF_OK;
}

trf_status trf_problem_dims(const trf_problem* p, int* n_w, int* n_y, int* n_z) {
  if (trf_status s = need(p, "problem"); s != TRF_OK) return s;
  if (n_w) *n_w = p->n_w;
  if (n_y) *n_y = p->n_y;
  if (n_z) *n_z = p->n_z;
  return TRF_OK;
}

trf_status trf_problem_oracle(const trf_problem* p, double* f) {
  if (trf_status s = need(p, "problem"); s != TRF_OK) return s;
  if (trf_status s = need(f, "f"); s != TRF_OK) return s;
  if (!p->bench) return fail(TRF_ERR_NOT_FOUND, "user problems have no oracle");
  *f = p->bench->oracle_f;
  return TRF_OK;
}

void trf_problem_free(trf_problem* p) { delete p; }

// ---- configuration --------------------------------------------------------

trf_status trf_config_create(const char* variant, const char* surrogate, trf_config** out) {
  if (trf_status s = need(out, "out"); s != TRF_OK) return s;
  *out = nullptr;
  if (trf_status s = need(variant, "variant"); s != TRF_OK) return s;
  if (trf_status s = need(surrogate, "surrogate"); s != TRF_OK) return s;
  return guarded([&] {
    auto* c = new trf_config{default_config(parse_variant(variant), parse_surrogate_kind(surrogate))};
    *out = c;
    return TRF_OK;
  });
}

trf_status trf_config_set(trf_config* c, const char* key, const char* value) {
  if (trf_status s = need(c, "config"); s != TRF_OK) return s;
  if (!key || !value) return fail(TRF_ERR_ARGUMENT, "key or value is null");
  return guarded([&] {
    TrfConfig next = c->config;
    set_config_value(next, key, value);
    c->config = next;
    return TRF_OK;
  });
}

trf_status trf_config_get(const trf_config* c, const char* key, char** value) {
  if (trf_status s = need(c, "config"); s != TRF_OK) return s;
  if (!key || !value) return fail(TRF_ERR_ARGUMENT, "key or value is null");
  *value = nullptr;
  return guarded([&] {
    *value = heap_copy(get_config_value(c->config, key));
    return TRF_OK;
  });
}

trf_status trf_config_keys(char** keys) {
  if (trf_status s = need(keys, "keys"); s != TRF_OK) return s;
  return guarded([&] {
    std::string all;
    for (const auto& k : config_keys()) all += k + "\n";
    *keys = heap_copy(all);
    return TRF_OK;
  });
}

void trf_config_free(trf_config* c) { delete c; }

// ---- solving --------------------------------------------------------------

trf_status trf_solve(const trf_problem* p, const trf_config* c, trf_report** out) {
  if (trf_status s = need(out, "out"); s != TRF_OK) return s;
  *out = nullptr;
  if (trf_status s = need(p, "problem"); s != TRF_OK) return s;
  if (trf_status s = need(c, "config"); s != TRF_OK) return s;
  return guarded([&] {
    GreyBoxProblem g = p->bench ? p->bench->fresh() : build_user_problem(*p);
    auto* r = new trf_report;
    try {
      r->report = trf::trf_solve(g, c->config);
    } catch (...) {
      delete r;
      throw;
    }
    r->status_name = std::string(termination_name(r->report.status));
    if (p->bench) r->solved = is_solved(*p->bench, r->report) ? 1 : 0;
    *out = r;
    return TRF_OK;
  });
}

trf_termination trf_report_status(const trf_report* r) {
  if (!r) return TRF_SUBSOLVER_FAIL;
  return static_cast<trf_termination>(static_cast<int>(r->report.status));
}

const char* trf_report_status_name(const trf_report* r) { return r ? r->status_name.c_str() : ""; }
const char* trf_report_message(const trf_report* r) { return r ? r->report.message.c_str() : ""; }
double trf_report_f(const trf_report* r) { return r ? r->report.f_final : std::nan(""); }
double trf_report_theta(const trf_report* r) { return r ? r->report.theta_final : std::nan(""); }
int trf_report_iterations(const trf_report* r) { return r ? r->report.iterations : 0; }
uint64_t trf_report_blackbox_calls(const trf_report* r) { return r ? r->report.blackbox_calls : 0; }
double trf_report_wall_time(const trf_report* r) { return r ? r->report.wall_time : 0.0; }
int trf_report_solved(const trf_report* r) { return r ? r->solved : -1; }

trf_status trf_report_x(const trf_report* r, double* x, size_t len, size_t* dim) {
  if (trf_status s = need(r, "report"); s != TRF_OK) return s;
  const auto n = static_cast<size_t>(r->report.x_final.size());
  if (dim) *dim = n;
  if (len > 0 && !x) return fail(TRF_ERR_ARGUMENT, "x is null");
  for (size_t i = 0; i < std::min(len, n); ++i) x[i] = r->report.x_final[static_cast<Eigen::Index>(i)];
  return TRF_OK;
}

trf_status trf_report_trace_csv(const trf_report* r, char** csv) {
  if (trf_status s = need(r, "report"); s != TRF_OK) return s;
  if (trf_status s = need(csv, "csv"); s != TRF_OK) return s;
  return guarded([&] {
    std::ostringstream out;
    write_trace_csv(out, r->report.trace);
    *csv = heap_copy(out.str());
    return TRF_OK;
  });
}

trf_status trf_report_write_trace(const trf_report* r, const char* path) {
  if (trf_status s = need(r, "report"); s != TRF_OK) return s;
  if (trf_status s = need(path, "path"); s != TRF_OK) return s;
  std::ofstream out(path, std::ios::binary);
  if (!out) return fail(TRF_ERR_IO, std::string("cannot write ") + path);
  write_trace_csv(out, r->report.trace);
  out.flush();
  if (!out) return fail(TRF_ERR_IO, std::string("cannot write ") + path);
  return TRF_OK;
}

void trf_report_free(trf_report* r) { delete r; }

// ---- benchmark library ----------------------------------------------------

trf_status trf_suite_manifest(const char* suite, uint64_t seed, char** csv) {
  if (trf_status s = need(suite, "suite"); s != TRF_OK) return s;
  if (trf_status s = need(csv, "csv"); s != TRF_OK) return s;
  *csv = nullptr;
  return guarded([&] {
    std::ostringstream out;
    write_manifest(out, select_problems(suite, seed));
    *csv = heap_copy(out.str());
    return TRF_OK;
  });
}

// ---- campaigns ------------------------------------------------------------

trf_status trf_campaign_from_spec_text(const char* text, trf_campaign** out) {
  if (trf_status s = need(out, "out"); s != TRF_OK) return s;
  *out = nullptr;
  if (trf_status s = need(text, "text"); s != TRF_OK) return s;
  return guarded([&] {
    *out = new trf_campaign{parse_campaign_spec(text), std::nullopt};
    return TRF_OK;
  });
}

trf_status trf_campaign_from_spec_file(const char* path, trf_campaign** out) {
  if (trf_status s = need(out, "out"); s != TRF_OK) return s;
  *out = nullptr;
  if (trf_status s = need(path, "path"); s != TRF_OK) return s;
  std::ifstream in(path, std::ios::binary);
  if (!in) return fail(TRF_ERR_IO, std::string("cannot read ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return trf_campaign_from_spec_text(ss.str().c_str(), out);
}

trf_status trf_campaign_from_summary(const char* path, trf_campaign** out) {
  if (trf_status s = need(out, "out"); s != TRF_OK) return s;
  *out = nullptr;
  if (trf_status s = need(path, "path"); s != TRF_OK) return s;
  std::ifstream in(path, std::ios::binary);
  if (!in) return fail(TRF_ERR_IO, std::string("cannot read ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return guarded(
      [&] {
        CampaignResult r = parse_summary_json(ss.str());
        *out = new trf_campaign{r.spec, std::move(r)};
        return TRF_OK;
      },
      TRF_ERR_IO);
}

trf_status trf_campaign_set_workers(trf_campaign* c, int workers) {
  if (trf_status s = need(c, "campaign"); s != TRF_OK) return s;
  if (workers < 1) return fail(TRF_ERR_ARGUMENT, "workers must be at least 1");
  c->spec.workers = workers;
  return TRF_OK;
}

trf_status trf_campaign_set_traces(trf_campaign* c, int enabled) {
  if (trf_status s = need(c, "campaign"); s != TRF_OK) return s;
  c->spec.traces = enabled != 0;
  if (c->result) c->result->spec.traces = c->spec.traces;
  return TRF_OK;
}

trf_status trf_campaign_run(trf_campaign* c, trf_progress_fn progress, void* user) {
  if (trf_status s = need(c, "campaign"); s != TRF_OK) return s;
  return guarded([&] {
    ProgressFn fn;
    if (progress) {
      fn = [progress, user](const RunRecord& r, std::size_t done, std::size_t total) {
        const std::string v(variant_name(r.variant));
        const std::string s(short_name(r.surrogate));
        const std::string st(termination_name(r.report.status));
        progress(v.c_str(), s.c_str(), r.problem.c_str(), st.c_str(), r.solved ? 1 : 0, done, total, user);
      };
    }
    c->result = run_campaign(c->spec, fn);
    return TRF_OK;
  });
}

static trf_status require_result(const trf_campaign* c) {
  if (trf_status s = need(c, "campaign"); s != TRF_OK) return s;
  if (!c->result) return fail(TRF_ERR_ARGUMENT, "campaign has not been run");
  return TRF_OK;
}

trf_status trf_campaign_counts(const trf_campaign* c, size_t* runs, size_t* solved) {
  if (trf_status s = require_result(c); s != TRF_OK) return s;
  size_t k = 0;
  for (const auto& r : c->result->runs) k += r.solved ? 1 : 0;
  if (runs) *runs = c->result->runs.size();
  if (solved) *solved = k;
  return TRF_OK;
}

trf_status trf_campaign_matrix_csv(const trf_campaign* c, char** csv) {
  if (trf_status s = require_result(c); s != TRF_OK) return s;
  if (trf_status s = need(csv, "csv"); s != TRF_OK) return s;
  return guarded([&] {
    std::ostringstream out;
    write_success_matrix_csv(out, success_matrix(*c->result));
    *csv = heap_copy(out.str());
    return TRF_OK;
  });
}

trf_status trf_campaign_write(const trf_campaign* c, const char* out_dir) {
  if (trf_status s = require_result(c); s != TRF_OK) return s;
  if (trf_status s = need(out_dir, "out_dir"); s != TRF_OK) return s;
  return guarded(
      [&] {
        write_campaign_outputs(*c->result, out_dir);
        return TRF_OK;
      },
      TRF_ERR_IO);
}

trf_status trf_campaign_emit_profiles(const trf_campaign* c, const char* out_dir) {
  if (trf_status s = require_result(c); s != TRF_OK) return s;
  if (trf_status s = need(out_dir, "out_dir"); s != TRF_OK) return s;
  return guarded(
      [&] {
        emit_profiles(*c->result, out_dir);
        return TRF_OK;
      },
      TRF_ERR_IO);
}

void trf_campaign_free(trf_campaign* c) { delete c; }

}  // extern "C"
