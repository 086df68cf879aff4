#pragma once

// Campaign runner: variant x surrogate x problem grids, the success matrix,
// performance-profile curves and the files they are written to.

#include "trf/benchmarks.hpp"
#include "trf/trf_core.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace trf {

/// Spec file grammar, one `key = value` per line, `#` starts a comment:
///   variants   = A0, A2          (or "all")
///   surrogates = ts, gp          (short tags or long names, or "all")
///   suite      = synthetic       (engineering | synthetic | all | toy | name, name, ...)
///   workers    = 4
///   seed       = 0
///   traces     = true            (write one trace CSV per run)
///   config.<key> = <value>       (any TrfConfig key, applied to every run)
struct CampaignSpec {
  std::vector<Variant> variants;
  std::vector<SurrogateKind> surrogates;
  std::string suite = "synthetic";
  std::map<std::string, std::string> overrides;
  int workers = 1;
  std::uint64_t seed = 0;
  bool traces = false;

  /// Throws ConfigError for empty grids, bad worker counts or overrides
  /// that fail TrfConfig validation.
  void validate() const;
};

CampaignSpec parse_campaign_spec(std::string_view text);
CampaignSpec load_campaign_spec(const std::filesystem::path& path);

/// The problems a suite selector names, in a fixed order. Throws ConfigError
/// on unknown names.
std::vector<BenchmarkProblem> select_problems(std::string_view suite, std::uint64_t seed);

/// Default config for the pair with the spec overrides applied.
TrfConfig campaign_config(const CampaignSpec& spec, Variant variant, SurrogateKind kind);

struct RunRecord {
  Variant variant = Variant::A0;
  SurrogateKind surrogate = SurrogateKind::Linear;
  std::string problem;
  SolveReport report;
  bool solved = false;
};

struct CampaignResult {
  CampaignSpec spec;
  std::vector<std::string> problems;
  /// Ordered by (variant, surrogate, problem) as listed in the spec.
  std::vector<RunRecord> runs;
  double wall_time = 0.0;

  const RunRecord* find(Variant v, SurrogateKind s, std::string_view problem) const;
};

using ProgressFn = std::function<void(const RunRecord&, std::size_t done, std::size_t total)>;

/// Solves every triple once. Run failures are recorded as unsolved.
CampaignResult run_campaign(const CampaignSpec& spec, const ProgressFn& progress = {});
/// Same, over a given problem list (the spec's suite selector is ignored).
CampaignResult run_campaign(const CampaignSpec& spec, const std::vector<BenchmarkProblem>& problems,
                            const ProgressFn& progress = {});

/// Rows follow spec.variants, columns spec.surrogates; cell = solved / problems.
struct SuccessMatrix {
  std::vector<Variant> variants;
  std::vector<SurrogateKind> surrogates;
  std::vector<std::vector<double>> cells;

  std::vector<double> row_means() const;
  std::vector<double> column_means() const;
};

SuccessMatrix success_matrix(const CampaignResult& result);

enum class Metric { Iterations, BlackboxCalls, WallTime };
inline constexpr Metric kAllMetrics[] = {Metric::Iterations, Metric::BlackboxCalls, Metric::WallTime};
std::string_view metric_name(Metric m);

struct ProfileCurve {
  Variant variant = Variant::A0;
  SurrogateKind surrogate = SurrogateKind::Linear;
  std::vector<double> fraction;  // one entry per budget
};

/// Budgets are the sorted distinct metric values over all runs; a curve
/// counts solved runs whose metric is at most the budget.
struct Profile {
  Metric metric = Metric::Iterations;
  std::vector<double> budgets;
  std::vector<ProfileCurve> curves;
};

Profile performance_profile(const CampaignResult& result, Metric metric);

void write_success_matrix_csv(std::ostream& out, const SuccessMatrix& m);
void write_profile_csv(std::ostream& out, const Profile& p);
void write_runs_csv(std::ostream& out, const CampaignResult& result);

/// success_matrix.csv and profile_<metric>.csv into out_dir (created).
/// Returns the paths written. Throws Error when a file cannot be written.
std::vector<std::filesystem::path> emit_profiles(const CampaignResult& result, const std::filesystem::path& out_dir);

/// Structured summary: spec, counts by status, the matrix and one record
/// per run (traces excluded).
std::string summary_json(const CampaignResult& result);
/// Rebuilds a result (without traces) from summary_json output.
CampaignResult parse_summary_json(std::string_view text);

/// Everything a `run` produces: summary.json, runs.csv, the profile files
/// and, when spec.traces is set, traces/<variant>_<surrogate>_<problem>.csv.
std::vector<std::filesystem::path> write_campaign_outputs(const CampaignResult& result,
                                                          const std::filesystem::path& out_dir);

}  // namespace trf
