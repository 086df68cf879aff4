// Command-line front end. Links only the C interface.

#include "trf/trf.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Problem = std::unique_ptr<trf_problem, Deleter<trf_problem, trf_problem_free>>;
using Config = std::unique_ptr<trf_config, Deleter<trf_config, trf_config_free>>;
using Report = std::unique_ptr<trf_report, Deleter<trf_report, trf_report_free>>;
using Campaign = std::unique_ptr<trf_campaign, Deleter<trf_campaign, trf_campaign_free>>;

struct Failure {
  trf_status status;
};

void check(trf_status s) {
  if (s != TRF_OK) throw Failure{s};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  trf_string_free(s);
  return out;
}

void progress_line(const char* variant, const char* surrogate, const char* problem, const char* status, int solved,
                   size_t done, size_t total, void*) {
  std::fprintf(stderr, "[%zu/%zu] %s/%s %s: %s%s\n", done, total, variant, surrogate, problem, status,
               solved == 1 ? " (solved)" : "");
}

int cmd_run(const std::string& spec, const std::string& out, int workers, bool traces, bool quiet) {
  trf_campaign* raw = nullptr;
  check(trf_campaign_from_spec_file(spec.c_str(), &raw));
  Campaign c(raw);
  if (workers > 0) check(trf_campaign_set_workers(c.get(), workers));
  if (traces) check(trf_campaign_set_traces(c.get(), 1));
  check(trf_campaign_run(c.get(), quiet ? nullptr : progress_line, nullptr));
  check(trf_campaign_write(c.get(), out.c_str()));
  size_t runs = 0, solved = 0;
  check(trf_campaign_counts(c.get(), &runs, &solved));
  char* csv = nullptr;
  check(trf_campaign_matrix_csv(c.get(), &csv));
  std::printf("%s", take(csv).c_str());
  std::printf("solved %zu of %zu runs; outputs in %s\n", solved, runs, out.c_str());
  return 0;
}

int cmd_solve(const std::string& name, const std::string& variant, const std::string& surrogate,
              const std::vector<std::string>& sets, unsigned long long seed, const std::string& trace) {
  trf_problem* p_raw = nullptr;
  check(trf_problem_from_benchmark(name.c_str(), seed, &p_raw));
  Problem p(p_raw);
  trf_config* c_raw = nullptr;
  check(trf_config_create(variant.c_str(), surrogate.c_str(), &c_raw));
  Config c(c_raw);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got " + kv);
    check(trf_config_set(c.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  trf_report* r_raw = nullptr;
  check(trf_solve(p.get(), c.get(), &r_raw));
  Report r(r_raw);

  size_t dim = 0;
  check(trf_report_x(r.get(), nullptr, 0, &dim));
  std::vector<double> x(dim);
  check(trf_report_x(r.get(), x.data(), x.size(), &dim));

  std::printf("problem     %s\n", name.c_str());
  std::printf("status      %s\n", trf_report_status_name(r.get()));
  std::printf("f           %.10g\n", trf_report_f(r.get()));
  std::printf("theta       %.3e\n", trf_report_theta(r.get()));
  std::printf("iterations  %d\n", trf_report_iterations(r.get()));
  std::printf("bb_calls    %llu\n", static_cast<unsigned long long>(trf_report_blackbox_calls(r.get())));
  std::printf("wall_time   %.3f s\n", trf_report_wall_time(r.get()));
  double oracle = 0.0;
  if (trf_problem_oracle(p.get(), &oracle) == TRF_OK) {
    std::printf("oracle      %.10g\n", oracle);
    std::printf("solved      %s\n", trf_report_solved(r.get()) == 1 ? "yes" : "no");
  }
  std::printf("x          ");
  for (double v : x) std::printf(" %.8g", v);
  std::printf("\n");
  if (const char* msg = trf_report_message(r.get()); msg && *msg) std::printf("message     %s\n", msg);
  if (!trace.empty()) check(trf_report_write_trace(r.get(), trace.c_str()));
  return 0;
}

int cmd_suite(const std::string& suite, unsigned long long seed) {
  char* csv = nullptr;
  check(trf_suite_manifest(suite.c_str(), seed, &csv));
  std::printf("%s", take(csv).c_str());
  return 0;
}

int cmd_profiles(const std::string& in, const std::string& out) {
  trf_campaign* raw = nullptr;
  check(trf_campaign_from_summary(in.c_str(), &raw));
  Campaign c(raw);
  check(trf_campaign_emit_profiles(c.get(), out.c_str()));
  std::printf("profiles written to %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grey-box trust-region filter solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(trf_version()));

  std::string spec, out = "trf_out";
  int workers = 0;
  bool traces = false, quiet = false;
  auto* run = app.add_subcommand("run", "Run a campaign described by a spec file");
  run->add_option("--spec", spec, "Spec file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_option("--workers", workers, "Override the spec's worker count")->check(CLI::PositiveNumber);
  run->add_flag("--traces", traces, "Write one trace CSV per run");
  run->add_flag("-q,--quiet", quiet, "No per-run progress on stderr");

  std::string problem, variant = "A3", surrogate = "ts", trace;
  std::vector<std::string> sets;
  unsigned long long seed = 0;
  auto* solve = app.add_subcommand("solve", "Solve one benchmark problem");
  solve->add_option("--problem", problem, "Problem name (see `suite --list`)")->required();
  solve->add_option("--variant", variant, "A0..A4")->capture_default_str();
  solve->add_option("--surrogate", surrogate, "l, q, sq, gp, ts or h")->capture_default_str();
  solve->add_option("--set", sets, "Config override key=value (repeatable)");
  solve->add_option("--seed", seed, "Synthetic-suite seed")->capture_default_str();
  solve->add_option("--trace", trace, "Write the iteration trace CSV here");

  std::string suite = "all";
  bool list = false;
  auto* suite_cmd = app.add_subcommand("suite", "Print the benchmark manifest");
  suite_cmd->add_flag("--list", list, "List the problems (the default action)");
  suite_cmd->add_option("--suite", suite, "engineering, synthetic, toy, all or a name list")->capture_default_str();
  suite_cmd->add_option("--seed", seed, "Synthetic-suite seed")->capture_default_str();

  std::string in;
  std::string profile_out = "profiles";
  auto* profiles = app.add_subcommand("profiles", "Rebuild profile CSVs from a campaign summary.json");
  profiles->add_option("--in", in, "summary.json of a finished campaign")->required()->check(CLI::ExistingFile);
  profiles->add_option("--out", profile_out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(spec, out, workers, traces, quiet);
    if (*solve) return cmd_solve(problem, variant, surrogate, sets, seed, trace);
    if (*suite_cmd) return cmd_suite(suite, seed);
    if (*profiles) return cmd_profiles(in, profile_out);
  } catch (const Failure& f) {
    std::fprintf(stderr, "trf: %s: %s\n", trf_status_message(f.status), trf_last_error());
    return f.status == TRF_ERR_CONFIG || f.status == TRF_ERR_ARGUMENT || f.status == TRF_ERR_NOT_FOUND ? 2 : 1;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return 0;
}
