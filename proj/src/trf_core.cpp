#include "trf/trf_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <utility>

namespace trf {

namespace {

std::string lower_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct DoubleField {
  const char* key;
  double TrfConfig::*member;
};

constexpr DoubleField kDoubleFields[] = {
    {"gamma_c", &TrfConfig::gamma_c},       {"gamma_e", &TrfConfig::gamma_e},
    {"eta1", &TrfConfig::eta1},             {"eta2", &TrfConfig::eta2},
    {"gamma_theta", &TrfConfig::gamma_theta}, {"gamma_f", &TrfConfig::gamma_f},
    {"kappa_theta", &TrfConfig::kappa_theta}, {"mu", &TrfConfig::mu},
    {"gamma_s", &TrfConfig::gamma_s},       {"kappa_delta", &TrfConfig::kappa_delta},
    {"kappa_mu", &TrfConfig::kappa_mu},     {"xi", &TrfConfig::xi},
    {"psi", &TrfConfig::psi},               {"omega", &TrfConfig::omega},
    {"delta0", &TrfConfig::delta0},         {"sigma0", &TrfConfig::sigma0},
    {"delta_min", &TrfConfig::delta_min},   {"eps_theta", &TrfConfig::eps_theta},
    {"eps_chi", &TrfConfig::eps_chi},       {"eps_delta", &TrfConfig::eps_delta},
    {"eps_comp", &TrfConfig::eps_comp},     {"eps_r", &TrfConfig::eps_r},
    {"theta_min", &TrfConfig::theta_min},   {"eps1", &TrfConfig::eps1},
    {"eps2", &TrfConfig::eps2},             {"eps3", &TrfConfig::eps3},
};

double parse_double(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0' || !std::isfinite(v))
    throw ConfigError("bad value '" + t + "' for " + std::string(key));
  return v;
}

long long parse_integer(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || *end != '\0') throw ConfigError("bad integer '" + t + "' for " + std::string(key));
  return v;
}

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("invalid configuration: ") + what);
}

}  // namespace

// ---- configuration --------------------------------------------------------

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::A0: return "A0";
    case Variant::A1: return "A1";
    case Variant::A2: return "A2";
    case Variant::A3: return "A3";
    case Variant::A4: return "A4";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  const std::string t = lower_case(trim(text));
  for (Variant v : kAllVariants)
    if (lower_case(variant_name(v)) == t) return v;
  throw ConfigError("unknown variant '" + std::string(text) + "'");
}

ProjectionPolicy initial_policy(Variant v) {
  switch (v) {
    case Variant::A0: return ProjectionPolicy::none();
    case Variant::A1: return ProjectionPolicy::diagonal_loading();
    case Variant::A2: return ProjectionPolicy::clamp();
    case Variant::A3: return ProjectionPolicy::absolute();
    case Variant::A4: return ProjectionPolicy::adaptive();
  }
  return ProjectionPolicy::none();
}

void TrfConfig::validate() const {
  for (const auto& f : kDoubleFields) require(std::isfinite(this->*f.member), f.key);
  require(0 < gamma_c && gamma_c < 1 && gamma_e > 1, "0 < gamma_c < 1 < gamma_e");
  require(0 < eta1 && eta1 <= eta2 && eta2 < 1, "0 < eta1 <= eta2 < 1");
  require(0 < gamma_theta && gamma_theta < 1, "gamma_theta in (0,1)");
  require(0 < gamma_f && gamma_f < 1, "gamma_f in (0,1)");
  require(0 < kappa_theta && kappa_theta < 1, "kappa_theta in (0,1)");
  require(0 < mu && mu < 1, "mu in (0,1)");
  require(gamma_s > 1.0 / (1.0 + mu), "gamma_s > 1/(1+mu)");
  require(0 < kappa_delta && kappa_delta < 1, "kappa_delta in (0,1)");
  require(kappa_mu > 0, "kappa_mu > 0");
  require(xi > 0, "xi > 0");
  require(0 < psi && psi < 1, "psi in (0,1)");
  require(0 < omega && omega < 1, "omega in (0,1)");
  require(delta0 > 0 && sigma0 > 0 && delta_min > 0, "positive radii");
  require(sigma0 <= delta0, "sigma0 <= delta0");
  require(eps_delta >= delta_min, "eps_delta >= delta_min");
  require(eps_theta > 0 && eps_chi > 0 && eps_comp > 0 && eps_r > 0, "positive tolerances");
  require(theta_min > 0, "theta_min > 0");
  require(!theta_max || (std::isfinite(*theta_max) && *theta_max > 0), "theta_max > 0");
  require(eps1 > 0 && eps2 > 0 && eps3 > 0, "positive projection floors");
  require(max_iter >= 1, "max_iter >= 1");
  require(max_restoration >= 1, "max_restoration >= 1");
}

TrfConfig default_config(Variant variant, SurrogateKind kind) {
  TrfConfig c;
  c.variant = variant;
  c.surrogate_kind = kind;
  return c;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = {"variant", "surrogate"};
    for (const auto& f : kDoubleFields) k.emplace_back(f.key);
    k.insert(k.end(), {"theta_max", "max_iter", "max_restoration", "seed"});
    return k;
  }();
  return keys;
}

void set_config_value(TrfConfig& config, std::string_view key_in, std::string_view value) {
  const std::string key = lower_case(trim(key_in));
  if (key == "variant") {
    config.variant = parse_variant(value);
    return;
  }
  if (key == "surrogate") {
    config.surrogate_kind = parse_surrogate_kind(trim(value));
    return;
  }
  for (const auto& f : kDoubleFields) {
    if (key == f.key) {
      config.*f.member = parse_double(key, value);
      return;
    }
  }
  if (key == "theta_max") {
    const std::string t = lower_case(trim(value));
    if (t == "auto") config.theta_max.reset();
    else config.theta_max = parse_double(key, value);
    return;
  }
  if (key == "max_iter" || key == "max_restoration") {
    const long long v = parse_integer(key, value);
    if (v < 1 || v > 1000000000) throw ConfigError("out-of-range value for " + key);
    (key == "max_iter" ? config.max_iter : config.max_restoration) = static_cast<int>(v);
    return;
  }
  if (key == "seed") {
    const long long v = parse_integer(key, value);
    if (v < 0) throw ConfigError("seed must be non-negative");
    config.seed = static_cast<std::uint64_t>(v);
    return;
  }
  throw ConfigError("unknown configuration key '" + std::string(key_in) + "'");
}

std::string get_config_value(const TrfConfig& config, std::string_view key_in) {
  const std::string key = lower_case(trim(key_in));
  if (key == "variant") return std::string(variant_name(config.variant));
  if (key == "surrogate") return std::string(short_name(config.surrogate_kind));
  for (const auto& f : kDoubleFields)
    if (key == f.key) return full_precision(config.*f.member);
  if (key == "theta_max") return config.theta_max ? full_precision(*config.theta_max) : "auto";
  if (key == "max_iter") return std::to_string(config.max_iter);
  if (key == "max_restoration") return std::to_string(config.max_restoration);
  if (key == "seed") return std::to_string(config.seed);
  throw ConfigError("unknown configuration key '" + std::string(key_in) + "'");
}

// ---- filter and step rules ------------------------------------------------

namespace {

bool dominates(const FilterEntry& a, const FilterEntry& b) { return a.f <= b.f && a.theta <= b.theta; }

}  // namespace

void FilterSet::add(FilterEntry e) {
  for (const auto& x : entries_)
    if (dominates(x, e)) return;
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(), [&](const FilterEntry& x) { return dominates(e, x); }),
                 entries_.end());
  entries_.push_back(e);
}

bool FilterSet::mutually_non_dominated() const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    for (std::size_t j = 0; j < entries_.size(); ++j)
      if (i != j && dominates(entries_[i], entries_[j])) return false;
  return true;
}

FilterSet add_to_filter(FilterSet filter, FilterEntry entry) {
  filter.add(entry);
  return filter;
}

bool filter_acceptable(const FilterSet& filter, FilterEntry current, FilterEntry trial, double gamma_theta,
                       double gamma_f) {
  auto ok = [&](const FilterEntry& j) {
    return trial.theta <= (1.0 - gamma_theta) * j.theta || trial.f <= j.f - gamma_f * j.theta;
  };
  if (!ok(current)) return false;
  return std::all_of(filter.entries().begin(), filter.entries().end(), ok);
}

bool switching_condition(double f_k, double f_trial, double theta_k, double kappa_theta, double gamma_s,
                         double theta_min) {
  return f_k - f_trial >= kappa_theta * std::pow(theta_k, gamma_s) && theta_k <= theta_min;
}

double reduction_ratio(double theta_k, double theta_trial, double predicted, double eps_theta) {
  return (theta_k - theta_trial + eps_theta) / std::max(predicted, eps_theta);
}

double update_radius(double rho, double step_norm, double delta, double eta1, double eta2, double gamma_c,
                     double gamma_e) {
  if (rho < eta1) return gamma_c * step_norm;
  if (rho < eta2) return delta;
  return std::max(gamma_e * step_norm, delta);
}

double criticality_update(double chi, double sigma_prev, double xi, double delta_min) {
  return std::max(std::min(sigma_prev, chi / xi), delta_min);
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::CriticalPoint: return "critical_point";
    case Termination::FeasiblePoint: return "feasible_point";
    case Termination::ResidualOptimal: return "residual_optimal";
    case Termination::IterLimit: return "iter_limit";
    case Termination::RestorationFail: return "restoration_fail";
    case Termination::SubsolverFail: return "subsolver_fail";
  }
  return "?";
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::FType: return "f_type";
    case Outcome::ThetaType: return "theta_type";
    case Outcome::Rejected: return "rejected";
    case Outcome::Restoration: return "restoration";
    case Outcome::Terminated: return "terminated";
  }
  return "?";
}

std::optional<Termination> check_termination(const TrustRegionState& s, std::optional<double> r_norm,
                                             const TrfConfig& c) {
  if (!(s.theta <= c.eps_theta)) return std::nullopt;
  if (s.chi <= c.eps_chi && s.sigma <= c.eps_delta) return Termination::CriticalPoint;
  if (s.theta_prev && *s.theta_prev <= c.eps_theta && s.delta <= c.delta_min && s.delta_prev &&
      *s.delta_prev <= c.delta_min)
    return Termination::FeasiblePoint;
  if (r_norm && *r_norm <= c.eps_r) return Termination::ResidualOptimal;
  return std::nullopt;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "k,f,theta,chi,delta,sigma,outcome,policy,bb_calls_cum\n";
  for (const auto& r : trace) {
    out << r.k << ',' << full_precision(r.f) << ',' << full_precision(r.theta) << ',' << full_precision(r.chi) << ','
        << full_precision(r.delta) << ',' << full_precision(r.sigma) << ',' << outcome_name(r.outcome) << ','
        << policy_name(r.policy) << ',' << r.bb_calls_cum << '\n';
  }
}

// ---- driver internals -----------------------------------------------------

namespace {

struct Calls {
  std::uint64_t design = 0;
  std::uint64_t theta = 0;
  std::uint64_t fd = 0;
};

SurrogateModel fit_counted(GreyBoxProblem& problem, SurrogateKind kind, const Vector& x, double sigma,
                           std::uint64_t seed, Calls& calls) {
  const Vector w = problem.partition.gather_w(x);
  const std::uint64_t c0 = problem.black.calls();
  const SampleSet samples = design_samples(kind, problem, w, sigma, seed);
  const std::uint64_t c1 = problem.black.calls();
  calls.design += c1 - c0;
  SurrogateModel model = fit(kind, samples, problem);
  const std::uint64_t c2 = problem.black.calls();
  const bool derivative_fit = kind == SurrogateKind::TaylorSeries || kind == SurrogateKind::Hybrid;
  (derivative_fit ? calls.fd : calls.design) += c2 - c1;
  return model;
}

double gap_counted(GreyBoxProblem& problem, const Vector& x, Calls& calls) {
  const std::uint64_t c0 = problem.black.calls();
  const double t = output_gap(problem, x);
  calls.theta += problem.black.calls() - c0;
  return t;
}

TrustConstraint make_trust(const Vector& center, double radius, const Matrix& metric) {
  return metric.size() ? TrustConstraint::ellipsoid(center, metric, radius) : TrustConstraint::box(center, radius);
}

double glass_violation(const GreyBoxProblem& problem, const Vector& x) {
  const GlassResiduals r = glass_residuals(problem, x);
  double v = 0.0;
  if (r.h.size()) v = std::max(v, r.h.cwiseAbs().maxCoeff());
  if (r.g.size()) v = std::max(v, r.g.maxCoeff());
  return v;
}

/// Nearest point to x0 satisfying the glass-box constraints and bounds.
Vector glass_feasible_start(const GreyBoxProblem& problem, const SolverProvider& provider) {
  const Vector& x0 = problem.x0;
  if (glass_violation(problem, x0) <= 1e-8) return x0;
  NlpSubproblem sub;
  sub.objective.value = [x0](const Vector& x) { return 0.5 * (x - x0).squaredNorm(); };
  sub.objective.gradient = [x0](const Vector& x) { return Vector(x - x0); };
  sub.objective.hessian = [n = x0.size()](const Vector&) { return Matrix(Matrix::Identity(n, n)); };
  sub.equalities = problem.glass.equalities;
  sub.inequalities = problem.glass.inequalities;
  sub.lower = problem.glass.lower;
  sub.upper = problem.glass.upper;
  sub.start = x0;
  const SubSolution s = provider ? provider(sub, {}) : solve_nlp(sub, {});
  if (!(s.constraint_violation <= 1e-6)) throw SubsolverFault("no glass-feasible starting point found");
  return s.x_star;
}

constexpr double kRestorationProximal = 1e-6;

std::uint64_t restoration_seed(std::uint64_t seed, int k, int round) {
  return seed + 1000003ULL * static_cast<std::uint64_t>(k + 1) + static_cast<std::uint64_t>(round);
}

bool usable(const SubSolution& s) {
  if (s.status == SubStatus::Optimal) return true;
  return s.status == SubStatus::IterLimit && s.constraint_violation <= 1e-6;
}

}  // namespace

RestorationResult restoration(GreyBoxProblem& problem, const TrustRegionState& state, const Matrix& metric,
                              const TrfConfig& config, const SolverProvider& provider) {
  RestorationResult res;
  res.state = state;
  TrustRegionState& s = res.state;
  Calls calls;
  SurrogateModel model = state.surrogate;
  const SolverOptions options;

  auto finish = [&](bool ok) {
    res.success = ok;
    res.design_calls = calls.design;
    res.theta_calls = calls.theta;
    res.fd_calls = calls.fd;
    return res;
  };

  for (int round = 1; round <= config.max_restoration; ++round) {
    res.rounds = round;
    if (s.delta < config.delta_min / 10.0) return finish(false);
    if (round > 1) {
      s.sigma = std::min(std::max(config.omega * s.sigma, config.delta_min), s.delta);
      model = fit_counted(problem, config.surrogate_kind, s.x, s.sigma, restoration_seed(config.seed, s.k, round),
                          calls);
    }
    TrustConstraint trust = make_trust(s.x, s.delta, metric);
    trust.shrink = compatibility_shrink(s.delta, config.kappa_delta, config.kappa_mu, config.mu);
    const CompatibilityResult comp = solve_compatibility(problem, model, s.x, trust, options, provider);

    if (comp.alpha <= config.eps_comp) {
      const bool moved = s.x != state.x;
      if (!moved || filter_acceptable(state.filter, {state.f, state.theta}, {s.f, s.theta}, config.gamma_theta,
                                      config.gamma_f)) {
        s.surrogate = model;
        return finish(true);
      }
    }

    // The restoration step reduces the model gap over the whole trust region,
    // measured in the box norm: flat directions of an ellipsoid would let the
    // surrogate be extrapolated far from its samples. A small proximal term
    // keeps the step short when the gap can be closed in many ways.
    const TrustConstraint box = make_trust(s.x, s.delta, Matrix());
    const CompatibilityResult rest =
        solve_compatibility(problem, model, s.x, box, options, provider, kRestorationProximal);
    if (!std::isfinite(rest.alpha)) {
      s.delta *= config.gamma_c;
      s.sigma = std::min(s.sigma, s.delta);
      continue;
    }

    const Vector x_c = s.x + rest.step;
    const double theta_c = gap_counted(problem, x_c, calls);
    const double rho = reduction_ratio(s.theta, theta_c, s.theta - rest.alpha, config.eps_theta);
    const double step = box.norm(rest.step);
    res.last_rho = rho;
    double next = update_radius(rho, step, s.delta, config.eta1, config.eta2, config.gamma_c, config.gamma_e);
    if (rho < config.eta1) next = std::min(next, config.gamma_c * s.delta);
    s.delta = next;
    if (rho >= config.eta1) {
      s.x = x_c;
      s.theta = theta_c;
      s.f = problem.glass.objective.value(x_c);
    }
    s.sigma = std::min(s.sigma, s.delta);
  }
  return finish(false);
}

SolveReport trf_solve(GreyBoxProblem& problem, const TrfConfig& config, const SolverProvider& provider) {
  config.validate();
  problem.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto& part = problem.partition;
  const SolverOptions options;

  SolveReport rep;
  TrustRegionState st;
  st.policy = initial_policy(config.variant);
  st.delta = config.delta0;
  st.sigma = std::min(config.sigma0, config.delta0);
  Calls carry;  // charged before the first record
  double theta_max = kInf;
  std::optional<SurrogateModel> carried;
  int trsp_failures = 0;

  auto stop = [&](Termination t, const std::string& msg) {
    rep.status = t;
    rep.message = msg;
  };
  auto wrap_up = [&] {
    rep.x_final = st.x;
    rep.f_final = st.f;
    rep.theta_final = st.theta;
    rep.iterations = static_cast<int>(rep.trace.size());
    rep.blackbox_calls = problem.black.calls();
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  };

  try {
    st.x = glass_feasible_start(problem, provider);
    st.theta = gap_counted(problem, st.x, carry);
    st.f = problem.glass.objective.value(st.x);
  } catch (const Error& e) {
    st.x = problem.x0;
    st.f = problem.glass.objective.value(st.x);
    st.theta = kInf;
    stop(Termination::SubsolverFail, e.what());
    return wrap_up();
  }
  theta_max = config.theta_max ? *config.theta_max : std::max(1e4, 100.0 * st.theta);
  rep.status = Termination::IterLimit;

  for (int k = 0; k < config.max_iter; ++k) {
    st.k = k;
    TraceRecord rec;
    rec.k = k;
    Calls calls = carry;
    carry = {};
    auto record = [&](Outcome o) {
      rec.outcome = o;
      rec.design_calls = calls.design;
      rec.theta_calls = calls.theta;
      rec.fd_calls = calls.fd;
      rec.bb_calls_cum = problem.black.calls();
      rep.trace.push_back(rec);
    };
    const ProjectionKind used = st.policy.effective();
    rec.policy = used;
    rec.f = st.f;
    rec.theta = st.theta;
    rec.delta = st.delta;
    rec.sigma = st.sigma;

    try {
      const Vector w_k = part.gather_w(st.x);
      problem.black.retain_only(w_k);

      // Surrogate in the sampling region.
      if (carried && carried->center() == w_k && carried->radius() == st.sigma) {
        st.surrogate = std::move(*carried);
      } else {
        st.surrogate = fit_counted(problem, config.surrogate_kind, st.x, st.sigma, config.seed + k, calls);
      }
      carried.reset();

      // Criticality and termination.
      st.chi = solve_criticality(problem, st.surrogate, st.x).chi;
      rec.chi = st.chi;
      if (auto t = check_termination(st, std::nullopt, config)) {
        rec.termination = t;
        record(Outcome::Terminated);
        stop(*t, "");
        return wrap_up();
      }
      if (st.chi < config.xi * st.sigma) st.sigma = criticality_update(st.chi, st.sigma, config.xi, config.delta_min);

      const double theta_k = st.theta;
      const double f_k = st.f;
      const double delta_k = st.delta;
      st.theta_prev = theta_k;
      st.delta_prev = delta_k;

      // Trust-region shape.
      Matrix metric;
      if (used != ProjectionKind::None) {
        const Matrix h = local_hessian(problem, st.x, st.multipliers, &st.surrogate);
        metric = apply_projection(st.policy, h, config.eps1, config.eps2, config.eps3);
      }

      // Compatibility, restoration on failure.
      TrustConstraint trust = make_trust(st.x, st.delta, metric);
      trust.shrink = compatibility_shrink(st.delta, config.kappa_delta, config.kappa_mu, config.mu);
      const CompatibilityResult comp = solve_compatibility(problem, st.surrogate, st.x, trust, options, provider);
      if (!(comp.alpha <= config.eps_comp)) {
        st.filter.add({f_k, theta_k});
        RestorationResult r = restoration(problem, st, metric, config, provider);
        calls.design += r.design_calls;
        calls.theta += r.theta_calls;
        calls.fd += r.fd_calls;
        rec.restoration_rounds = r.rounds;
        rec.rho = r.last_rho;
        if (!r.success) {
          rec.termination = Termination::RestorationFail;
          record(Outcome::Terminated);
          stop(Termination::RestorationFail, "restoration did not regain compatibility");
          return wrap_up();
        }
        const ProjectionPolicy next = adaptive_select(st.policy, StepKind::Restoration, r.last_rho, config.eta2);
        FilterSet filter = st.filter;
        Duals duals = st.multipliers;
        st = std::move(r.state);
        st.filter = std::move(filter);
        st.multipliers = std::move(duals);
        st.policy = next;
        st.theta_prev = theta_k;
        st.delta_prev = delta_k;
        carried = st.surrogate;
        record(Outcome::Restoration);
        continue;
      }

      // Trust-region step.
      trust.shrink = 1.0;
      const TrspResult step = solve_trsp(problem, st.surrogate, st.x + comp.step, st.x, trust, options, provider);
      if (!usable(step.solution)) {
        if (++trsp_failures >= 5) {
          rec.termination = Termination::SubsolverFail;
          record(Outcome::Terminated);
          stop(Termination::SubsolverFail, "trust-region subproblem failed repeatedly");
          return wrap_up();
        }
        st.delta = config.gamma_c * delta_k;
        st.sigma = std::min({st.sigma, config.psi * delta_k, st.delta});
        st.policy = adaptive_select(st.policy, StepKind::Rejected, std::nullopt, config.eta2);
        record(Outcome::Rejected);
        continue;
      }
      trsp_failures = 0;
      st.multipliers = step.duals;
      const Vector x_r = step.solution.x_star;
      const double r_trust = trust.norm(step.step);
      const double r_inf = step.step.size() ? step.step.cwiseAbs().maxCoeff() : 0.0;
      rec.step_norm = r_trust;

      if (config.variant != Variant::A0) {
        if (auto t = check_termination(st, r_inf, config); t == Termination::ResidualOptimal) {
          rec.termination = t;
          record(Outcome::Terminated);
          stop(*t, "");
          return wrap_up();
        }
      }

      // Filter acceptance.
      const double theta_t = gap_counted(problem, x_r, calls);
      const double f_t = problem.glass.objective.value(x_r);
      rec.trial_f = f_t;
      rec.trial_theta = theta_t;
      const bool accepted =
          theta_t <= theta_max && filter_acceptable(st.filter, {f_k, theta_k}, {f_t, theta_t}, config.gamma_theta,
                                                    config.gamma_f);
      if (!accepted) {
        st.delta = std::max(config.gamma_c * r_trust, std::min(config.delta_min / 10.0, config.gamma_c * delta_k));
        st.sigma = std::min({st.sigma, config.psi * delta_k, st.delta});
        st.policy = adaptive_select(st.policy, StepKind::Rejected, std::nullopt, config.eta2);
        record(Outcome::Rejected);
        continue;
      }

      if (switching_condition(f_k, f_t, theta_k, config.kappa_theta, config.gamma_s, config.theta_min)) {
        st.x = x_r;
        st.f = f_t;
        st.theta = theta_t;
        st.delta = std::max(config.gamma_e * r_trust, delta_k);
        st.policy = adaptive_select(st.policy, StepKind::FType, std::nullopt, config.eta2);
        record(Outcome::FType);
        continue;
      }

      st.filter.add({f_k, theta_k});
      const double rho = reduction_ratio(theta_k, theta_t, theta_k, config.eps_theta);
      rec.rho = rho;
      st.x = x_r;
      st.f = f_t;
      st.theta = theta_t;
      st.sigma = std::min(st.sigma, config.psi * delta_k);
      st.delta = update_radius(rho, r_trust, delta_k, config.eta1, config.eta2, config.gamma_c, config.gamma_e);
      if (!(st.delta > 0.0)) st.delta = std::min(config.delta_min / 10.0, config.gamma_c * delta_k);
      st.sigma = std::min(st.sigma, st.delta);
      st.policy = adaptive_select(st.policy, StepKind::ThetaType, rho, config.eta2);
      record(Outcome::ThetaType);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      rec.termination = Termination::SubsolverFail;
      record(Outcome::Terminated);
      stop(Termination::SubsolverFail, e.what());
      return wrap_up();
    }
  }
  stop(Termination::IterLimit, "iteration limit reached");
  return wrap_up();
}

}  // namespace trf
