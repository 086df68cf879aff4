#pragma once

// The trust-region filter driver: configuration, filter bookkeeping, the
// step-classification and radius rules, restoration, and trf_solve.

#include "trf/problem.hpp"
#include "trf/spectral.hpp"
#include "trf/subsolver.hpp"
#include "trf/surrogate.hpp"
#include "trf/types.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace trf {

/// A0 uses a box trust region; A1..A4 an ellipsoid shaped by the projected
/// local Hessian (diagonal loading, clamp, absolute, adaptive).
enum class Variant { A0, A1, A2, A3, A4 };

inline constexpr Variant kAllVariants[] = {Variant::A0, Variant::A1, Variant::A2, Variant::A3, Variant::A4};

std::string_view variant_name(Variant v);
/// Accepts "A0".."A4" (case-insensitive); throws ConfigError.
Variant parse_variant(std::string_view text);
ProjectionPolicy initial_policy(Variant v);

struct TrfConfig {
  Variant variant = Variant::A0;
  SurrogateKind surrogate_kind = SurrogateKind::Linear;

  double gamma_c = 0.5;
  double gamma_e = 2.5;
  double eta1 = 0.05;
  double eta2 = 0.75;
  double gamma_theta = 0.01;
  double gamma_f = 0.01;
  double kappa_theta = 0.1;
  double mu = 0.5;
  double gamma_s = 2.0;
  double kappa_delta = 0.8;
  double kappa_mu = 1.0;
  double xi = 0.01;
  double psi = 0.5;
  double omega = 0.5;  // sampling radius shrink per restoration round

  double delta0 = 1.0;
  double sigma0 = 1.0;
  double delta_min = 1e-8;

  double eps_theta = 1e-6;
  double eps_chi = 1e-5;
  double eps_delta = 1e-4;
  double eps_comp = 1e-6;
  double eps_r = 1e-6;

  double theta_min = 1e-2;
  /// Unset: max(1e4, 100 theta(x0)) at solve start.
  std::optional<double> theta_max;

  double eps1 = 1e-6;
  double eps2 = 1e-6;
  double eps3 = 1e-6;

  int max_iter = 500;
  int max_restoration = 30;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first violated condition.
  void validate() const;
};

TrfConfig default_config(Variant variant, SurrogateKind kind);

/// Sets one field from text. Keys are the field names above plus "variant"
/// and "surrogate". Throws ConfigError on unknown keys or bad values.
void set_config_value(TrfConfig& config, std::string_view key, std::string_view value);
/// The current value of a key, formatted with full precision.
std::string get_config_value(const TrfConfig& config, std::string_view key);
const std::vector<std::string>& config_keys();

// ---- filter ---------------------------------------------------------------

struct FilterEntry {
  double f = 0.0;
  double theta = 0.0;
};

/// Pareto set of (f, theta) pairs.
class FilterSet {
 public:
  const std::vector<FilterEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Inserts `e` and drops the entries it dominates. An entry dominated by
  /// (or equal to) an existing one leaves the set unchanged.
  void add(FilterEntry e);
  /// True when no entry weakly dominates another.
  bool mutually_non_dominated() const;

 private:
  std::vector<FilterEntry> entries_;
};

FilterSet add_to_filter(FilterSet filter, FilterEntry entry);

/// Every pair in filter and current must be improved in theta by the factor
/// (1 - gamma_theta) or in f by the margin gamma_f * theta_j.
bool filter_acceptable(const FilterSet& filter, FilterEntry current, FilterEntry trial, double gamma_theta,
                       double gamma_f);

bool switching_condition(double f_k, double f_trial, double theta_k, double kappa_theta, double gamma_s,
                         double theta_min);

double reduction_ratio(double theta_k, double theta_trial, double predicted, double eps_theta);

double update_radius(double rho, double step_norm, double delta, double eta1, double eta2, double gamma_c,
                     double gamma_e);

double criticality_update(double chi, double sigma_prev, double xi, double delta_min);

// ---- state, outcomes, reports ---------------------------------------------

enum class Termination { CriticalPoint, FeasiblePoint, ResidualOptimal, IterLimit, RestorationFail, SubsolverFail };
std::string_view termination_name(Termination t);

enum class Outcome { FType, ThetaType, Rejected, Restoration, Terminated };
std::string_view outcome_name(Outcome o);

struct TrustRegionState {
  Vector x;
  double delta = 1.0;
  double sigma = 1.0;
  double theta = 0.0;
  double f = 0.0;
  double chi = kInf;
  FilterSet filter;
  SurrogateModel surrogate;
  ProjectionPolicy policy;
  Duals multipliers;
  int k = 0;
  std::optional<double> theta_prev;
  std::optional<double> delta_prev;
};

/// Step 3a / 3b of the base method, plus residual termination when r_norm is given.
std::optional<Termination> check_termination(const TrustRegionState& state, std::optional<double> r_norm,
                                             const TrfConfig& config);

struct TraceRecord {
  int k = 0;
  double f = 0.0;
  double theta = 0.0;
  double chi = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  Outcome outcome = Outcome::Terminated;
  ProjectionKind policy = ProjectionKind::None;
  std::uint64_t bb_calls_cum = 0;

  // Details kept in memory only.
  std::uint64_t design_calls = 0;
  std::uint64_t theta_calls = 0;
  std::uint64_t fd_calls = 0;
  std::optional<double> trial_f;
  std::optional<double> trial_theta;
  std::optional<double> rho;
  double step_norm = 0.0;  // in the trust norm
  int restoration_rounds = 0;
  std::optional<Termination> termination;
};

struct SolveReport {
  Termination status = Termination::IterLimit;
  Vector x_final;
  double f_final = 0.0;
  double theta_final = 0.0;
  int iterations = 0;
  std::uint64_t blackbox_calls = 0;
  double wall_time = 0.0;
  std::vector<TraceRecord> trace;
  std::string message;
};

/// k,f,theta,chi,delta,sigma,outcome,policy,bb_calls_cum with a header row.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);

// ---- restoration and the driver -------------------------------------------

struct RestorationResult {
  bool success = false;
  TrustRegionState state;  // the restored state, or the last one on failure
  int rounds = 0;
  std::optional<double> last_rho;
  std::uint64_t design_calls = 0;
  std::uint64_t theta_calls = 0;
  std::uint64_t fd_calls = 0;
};

/// Shrinks sigma by omega per round, refits, and solves the compatibility
/// problem; compatibility steps that reduce theta are taken and delta
/// follows the ratio test. `metric` shapes the ellipsoid for A1..A4 (empty
/// for the box). The state's filter must already hold the current pair.
RestorationResult restoration(GreyBoxProblem& problem, const TrustRegionState& state, const Matrix& metric,
                              const TrfConfig& config, const SolverProvider& provider = {});

/// Runs the filter method from problem.x0. Errors end the run with a status;
/// only ConfigError for an invalid configuration or problem escapes.
SolveReport trf_solve(GreyBoxProblem& problem, const TrfConfig& config, const SolverProvider& provider = {});

}  // namespace trf
