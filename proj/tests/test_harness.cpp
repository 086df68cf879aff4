#include "doctest.h"

#include "trf/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace trf;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("trf_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

RunRecord fake_run(Variant v, SurrogateKind s, const std::string& problem, int iterations, bool solved) {
  RunRecord r;
  r.variant = v;
  r.surrogate = s;
  r.problem = problem;
  r.solved = solved;
  r.report.iterations = iterations;
  r.report.blackbox_calls = static_cast<std::uint64_t>(10 * iterations);
  r.report.wall_time = 0.001 * iterations;
  r.report.status = solved ? Termination::CriticalPoint : Termination::IterLimit;
  return r;
}

std::string profile_text(const CampaignResult& r, Metric m) {
  std::ostringstream out;
  write_profile_csv(out, performance_profile(r, m));
  return out.str();
}

std::string matrix_text(const CampaignResult& r) {
  std::ostringstream out;
  write_success_matrix_csv(out, success_matrix(r));
  return out.str();
}

}  // namespace

TEST_CASE("spec parsing") {
  const CampaignSpec s = parse_campaign_spec(
      "# campaign\n"
      "variants = A0, a2\n"
      "surrogates = ts, GaussianProcess   # two kinds\n"
      "suite = toy\n"
      "workers = 3\n"
      "seed = 7\n"
      "traces = yes\n"
      "config.max_iter = 40\n");
  REQUIRE(s.variants.size() == 2);
  CHECK(s.variants[1] == Variant::A2);
  REQUIRE(s.surrogates.size() == 2);
  CHECK(s.surrogates[0] == SurrogateKind::TaylorSeries);
  CHECK(s.surrogates[1] == SurrogateKind::GaussianProcess);
  CHECK(s.suite == "toy");
  CHECK(s.workers == 3);
  CHECK(s.seed == 7);
  CHECK(s.traces);
  CHECK(s.overrides.at("max_iter") == "40");
  const TrfConfig c = campaign_config(s, Variant::A2, SurrogateKind::GaussianProcess);
  CHECK(c.max_iter == 40);
  CHECK(c.seed == 7);
  CHECK(c.variant == Variant::A2);

  const CampaignSpec all = parse_campaign_spec("variants = all\nsurrogates = all\n");
  CHECK(all.variants.size() == 5);
  CHECK(all.surrogates.size() == 6);
  CHECK(all.suite == "synthetic");
  CHECK(all.workers == 1);

  CHECK_THROWS_AS(parse_campaign_spec("surrogates = ts\n"), ConfigError);
  CHECK_THROWS_AS(parse_campaign_spec("variants = A0\nsurrogates = ts\ncolour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_campaign_spec("variants = A7\nsurrogates = ts\n"), ConfigError);
  CHECK_THROWS_AS(parse_campaign_spec("variants = \nsurrogates = ts\n"), ConfigError);
  CHECK_THROWS_AS(parse_campaign_spec("variants = A0\nsurrogates = ts\nworkers = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_campaign_spec("variants = A0\nsurrogates = ts\nconfig.nope = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_campaign_spec("variants = A0\nsurrogates = ts\nconfig.gamma_c = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_campaign_spec("variants = A0\nsurrogates = ts\nno equals sign\n"), ConfigError);
}

TEST_CASE("suite selection") {
  CHECK(select_problems("toy", 0).size() == 1);
  const auto named = select_problems("booth, toy, spring", 0);
  REQUIRE(named.size() == 3);
  CHECK(named[0].name == "booth");
  CHECK(named[1].name == "toy");
  CHECK(named[2].name == "spring");
  CHECK_THROWS_AS(select_problems("booth, nothing", 0), ConfigError);
  CHECK(select_problems("engineering", 0).size() == 5);
}

TEST_CASE("single solvable cell gives a unit matrix") {
  CampaignSpec spec;
  spec.variants = {Variant::A0};
  spec.surrogates = {SurrogateKind::Linear};
  spec.suite = "toy";
  const CampaignResult r = run_campaign(spec);
  REQUIRE(r.runs.size() == 1);
  CHECK(r.runs[0].solved);
  const SuccessMatrix m = success_matrix(r);
  REQUIRE(m.cells.size() == 1);
  REQUIRE(m.cells[0].size() == 1);
  CHECK(m.cells[0][0] == 1.0);
}

TEST_CASE("profile of one run solving at iteration 7 is a step") {
  CampaignResult r;
  r.spec.variants = {Variant::A0, Variant::A1};
  r.spec.surrogates = {SurrogateKind::Linear};
  r.problems = {"p"};
  r.runs = {fake_run(Variant::A0, SurrogateKind::Linear, "p", 7, true),
            fake_run(Variant::A1, SurrogateKind::Linear, "p", 3, false)};
  const Profile p = performance_profile(r, Metric::Iterations);
  REQUIRE(p.budgets == std::vector<double>{3.0, 7.0});
  REQUIRE(p.curves.size() == 2);
  CHECK(p.curves[0].fraction == std::vector<double>{0.0, 1.0});
  // The unsolved row stays at zero and its matrix cell is 0.
  CHECK(p.curves[1].fraction == std::vector<double>{0.0, 0.0});
  const SuccessMatrix m = success_matrix(r);
  CHECK(m.cells[1][0] == 0.0);
  std::ostringstream out;
  write_success_matrix_csv(out, m);
  CHECK(out.str() ==
        "variant,linear,average\n"
        "A0,1.000000,1.000000\n"
        "A1,0.000000,0.000000\n"
        "average,0.500000,0.500000\n");
}

TEST_CASE("matrix averages are row and column means") {
  CampaignResult r;
  r.spec.variants = {Variant::A0, Variant::A2};
  r.spec.surrogates = {SurrogateKind::Linear, SurrogateKind::TaylorSeries, SurrogateKind::GaussianProcess};
  r.problems = {"a", "b", "c", "d"};
  int k = 0;
  for (Variant v : r.spec.variants)
    for (SurrogateKind s : r.spec.surrogates)
      for (const auto& p : r.problems) r.runs.push_back(fake_run(v, s, p, 1 + k % 9, (k++ % 3) != 0));
  const SuccessMatrix m = success_matrix(r);
  const auto rows = m.row_means();
  const auto cols = m.column_means();
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    double s = 0.0;
    for (double c : m.cells[i]) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
      s += c;
    }
    CHECK(rows[i] == doctest::Approx(s / 3.0));
  }
  for (std::size_t j = 0; j < 3; ++j) CHECK(cols[j] == doctest::Approx((m.cells[0][j] + m.cells[1][j]) / 2.0));
}

TEST_CASE("profiles are monotone, saturate at the matrix cell and account for every solve") {
  CampaignSpec spec;
  spec.variants = {Variant::A0, Variant::A2};
  spec.surrogates = {SurrogateKind::Linear, SurrogateKind::TaylorSeries};
  spec.suite = "toy, affine_bowl, booth, parabola_constrained";
  spec.workers = 2;
  const CampaignResult r = run_campaign(spec);
  REQUIRE(r.runs.size() == 16);
  const SuccessMatrix m = success_matrix(r);
  for (Metric metric : kAllMetrics) {
    CAPTURE(metric_name(metric));
    const Profile p = performance_profile(r, metric);
    CHECK(std::is_sorted(p.budgets.begin(), p.budgets.end()));
    std::size_t c = 0;
    for (std::size_t i = 0; i < m.variants.size(); ++i) {
      for (std::size_t j = 0; j < m.surrogates.size(); ++j, ++c) {
        const auto& f = p.curves[c].fraction;
        CHECK(std::is_sorted(f.begin(), f.end()));
        CHECK(f.back() == doctest::Approx(m.cells[i][j]));
      }
    }
    // Every solved run is counted at its own budget.
    for (const auto& run : r.runs) {
      if (!run.solved) continue;
      double value = metric == Metric::Iterations      ? run.report.iterations
                     : metric == Metric::BlackboxCalls ? static_cast<double>(run.report.blackbox_calls)
                                                       : run.report.wall_time;
      const auto at = std::lower_bound(p.budgets.begin(), p.budgets.end(), value) - p.budgets.begin();
      REQUIRE(at < static_cast<long>(p.budgets.size()));
      std::size_t idx = 0;
      for (; idx < p.curves.size(); ++idx)
        if (p.curves[idx].variant == run.variant && p.curves[idx].surrogate == run.surrogate) break;
      CHECK(p.curves[idx].fraction[at] > 0.0);
    }
  }
}

TEST_CASE("worker count does not change results") {
  CampaignSpec spec;
  spec.variants = {Variant::A0, Variant::A3};
  spec.surrogates = {SurrogateKind::TaylorSeries, SurrogateKind::Quadratic};
  spec.suite = "toy, matyas, sphere_epigraph, forrester_lifted";
  spec.workers = 1;
  const CampaignResult one = run_campaign(spec);
  spec.workers = 4;
  const CampaignResult four = run_campaign(spec);
  CHECK(matrix_text(one) == matrix_text(four));
  CHECK(profile_text(one, Metric::Iterations) == profile_text(four, Metric::Iterations));
  CHECK(profile_text(one, Metric::BlackboxCalls) == profile_text(four, Metric::BlackboxCalls));
  for (std::size_t i = 0; i < one.runs.size(); ++i) {
    CHECK(one.runs[i].problem == four.runs[i].problem);
    CHECK(one.runs[i].report.f_final == four.runs[i].report.f_final);
    CHECK(one.runs[i].report.x_final == four.runs[i].report.x_final);
  }
}

TEST_CASE("summary round trip") {
  CampaignSpec spec;
  spec.variants = {Variant::A1};
  spec.surrogates = {SurrogateKind::Linear, SurrogateKind::GaussianProcess};
  spec.suite = "toy, booth";
  spec.overrides["max_iter"] = "3";
  const CampaignResult r = run_campaign(spec);
  const CampaignResult back = parse_summary_json(summary_json(r));
  CHECK(back.problems == r.problems);
  CHECK(back.spec.overrides == r.spec.overrides);
  REQUIRE(back.runs.size() == r.runs.size());
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    CHECK(back.runs[i].report.status == r.runs[i].report.status);
    CHECK(back.runs[i].report.iterations == r.runs[i].report.iterations);
    CHECK(back.runs[i].report.f_final == r.runs[i].report.f_final);
    CHECK(back.runs[i].report.x_final == r.runs[i].report.x_final);
  }
  CHECK(matrix_text(back) == matrix_text(r));
  for (Metric m : kAllMetrics) CHECK(profile_text(back, m) == profile_text(r, m));
  CHECK_THROWS_AS(parse_summary_json("{}"), Error);
  CHECK_THROWS_AS(parse_summary_json("not json"), Error);
}

TEST_CASE("campaign outputs on disk") {
  CampaignSpec spec;
  spec.variants = {Variant::A0, Variant::A2};
  spec.surrogates = {SurrogateKind::TaylorSeries};
  spec.suite = "toy";
  spec.traces = true;
  const CampaignResult r = run_campaign(spec);
  const auto dir = scratch_dir("outputs");
  const auto files = write_campaign_outputs(r, dir);
  for (const char* name : {"success_matrix.csv", "profile_iterations.csv", "profile_blackbox_calls.csv",
                           "profile_wall_time.csv", "summary.json", "runs.csv", "traces/A0_ts_toy.csv",
                           "traces/A2_ts_toy.csv"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(dir / name));
  }
  CHECK(files.size() == 8);
  CHECK(read_file(dir / "traces/A0_ts_toy.csv").rfind("k,f,theta,chi,delta,sigma,outcome,policy,bb_calls_cum\n", 0) == 0);
  const CampaignResult back = parse_summary_json(read_file(dir / "summary.json"));
  CHECK(matrix_text(back) == read_file(dir / "success_matrix.csv"));

  // A path under a regular file cannot be created.
  const auto blocker = scratch_dir("blocker");
  std::ofstream(blocker) << "x";
  CHECK_THROWS_AS(emit_profiles(r, blocker / "sub"), Error);
  CHECK_THROWS_AS(emit_profiles(CampaignResult{}, dir), Error);
  std::filesystem::remove_all(dir);
  std::filesystem::remove(blocker);
}
