#include "trf/benchmarks.hpp"

#include "trf/subsolver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace trf {

using bench::element_t;
using bench::sq;

// ---- building problems from definitions ------------------------------------

namespace {

Vector gradient_of(const ad::Jet& j, int n) { return j.d.size() ? Vector(j.d) : Vector(Vector::Zero(n)); }

VectorFunction vector_function(VectorExpr e, int n) {
  if (e.size == 0) return empty_vector_function();
  VectorFunction f;
  f.size = e.size;
  f.value = [e](const Vector& x) { return detail::values_of(e.value(detail::to_std(x))); };
  f.jacobian = [e, n](const Vector& x) { return detail::jacobian_of(e.jet(ad::seed(x)), n); };
  return f;
}

GlassBoxModel glass_with(const std::shared_ptr<const ProblemDefinition>& def, VectorExpr equalities) {
  const int n = def->m + def->p + def->n;
  GlassBoxModel g;
  g.dimension = n;
  g.lower = def->lower;
  g.upper = def->upper;
  g.objective.value = [def](const Vector& x) { return def->objective.value(detail::to_std(x)); };
  g.objective.gradient = [def, n](const Vector& x) { return gradient_of(def->objective.jet(ad::seed(x)), n); };
  g.equalities = vector_function(std::move(equalities), n);
  g.inequalities = vector_function(def->inequalities, n);
  return g;
}

/// The original equalities followed by y - d(w) = 0.
VectorExpr with_blackbox_equalities(const std::shared_ptr<const ProblemDefinition>& def) {
  const int m = def->m;
  const int p = def->p;
  auto both = [def, m, p](const auto& x) {
    using T = element_t<decltype(x)>;
    const std::vector<T> w(x.begin(), x.begin() + m);
    std::vector<T> out;
    std::vector<T> d;
    if constexpr (std::is_same_v<T, double>) {
      if (def->equalities.size) out = def->equalities.value(x);
      d = def->blackbox.value(w);
    } else {
      if (def->equalities.size) out = def->equalities.jet(x);
      d = def->blackbox.jet(w);
    }
    for (int i = 0; i < p; ++i) out.push_back(x[m + i] - d[i]);
    return out;
  };
  return bench::vector_expr(def->equalities.size + p, both);
}

}  // namespace

GreyBoxProblem make_grey_box(const std::shared_ptr<const ProblemDefinition>& def) {
  GreyBoxProblem pr;
  pr.name = def->name;
  pr.partition = VariablePartition::contiguous(def->m, def->p, def->n);
  pr.glass = glass_with(def, def->equalities);
  pr.black = BlackBoxEvaluator(def->m, def->p, [def](const Vector& w) {
    return detail::values_of(def->blackbox.value(detail::to_std(w)));
  });
  pr.x0 = def->x0;
  return pr;
}

GlassBoxModel make_full_glass_box(const std::shared_ptr<const ProblemDefinition>& def) {
  return glass_with(def, with_blackbox_equalities(def));
}

GreyBoxProblem BenchmarkProblem::fresh() const { return make_grey_box(definition); }

GlassBoxModel BenchmarkProblem::glass_box() const { return make_full_glass_box(definition); }

Vector BenchmarkProblem::hidden(const Vector& w) const {
  return detail::values_of(definition->blackbox.value(detail::to_std(w)));
}

// ---- oracles --------------------------------------------------------------

OracleResult multistart_oracle(const ProblemDefinition& def_in, int starts, std::uint64_t seed) {
  auto def = std::make_shared<const ProblemDefinition>(def_in);
  const GlassBoxModel g = make_full_glass_box(def);
  const int n = g.dimension;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  NlpSubproblem sub;
  sub.objective = g.objective;
  sub.equalities = g.equalities;
  sub.inequalities = g.inequalities;
  sub.lower = g.lower;
  sub.upper = g.upper;
  SolverOptions opts;
  opts.tol_kkt = 1e-9;
  opts.tol_feas = 1e-10;
  opts.max_inner = 400;

  OracleResult best;
  for (int s = 0; s < starts; ++s) {
    Vector x(n);
    for (int i = 0; i < n; ++i) {
      // Boxes wider than 1e3 are sampled within 10 of x0.
      double lo = g.lower[i];
      double hi = g.upper[i];
      if (!(hi - lo <= 1e3)) {
        lo = std::max(lo, def->x0[i] - 10.0);
        hi = std::min(hi, def->x0[i] + 10.0);
      }
      const double u = unit(rng);
      x[i] = s == 0 ? def->x0[i] : lo + u * (hi - lo);
    }
    const Vector d = detail::values_of(def->blackbox.value(detail::to_std(Vector(x.head(def->m)))));
    for (int i = 0; i < def->p; ++i)
      x[def->m + i] = std::clamp(d[i], g.lower[def->m + i], g.upper[def->m + i]);
    sub.start = x;
    const SubSolution sol = solve_nlp(sub, opts);
    if (sol.status != SubStatus::Optimal || !(sol.constraint_violation <= 1e-8)) continue;
    ++best.converged_starts;
    const double f = g.objective.value(sol.x_star);
    if (f < best.f) {
      best.f = f;
      best.x = sol.x_star;
    }
  }
  if (best.converged_starts == 0) throw Error("oracle did not converge for " + def->name);
  return best;
}

bool is_solved(const BenchmarkProblem& problem, const SolveReport& report) {
  const bool ok_status = report.status == Termination::CriticalPoint ||
                         report.status == Termination::ResidualOptimal ||
                         report.status == Termination::FeasiblePoint;
  if (!ok_status || !std::isfinite(report.f_final)) return false;
  return std::abs(report.f_final - problem.oracle_f) <= problem.oracle_tol * std::max(1.0, std::abs(problem.oracle_f));
}

void write_manifest(std::ostream& out, const std::vector<BenchmarkProblem>& problems) {
  out << "# trf benchmark manifest v1\n";
  out << "name,source,n_w,n_y,n_z,oracle_f,oracle_tol,seed,note\n";
  char buf[40];
  for (const auto& p : problems) {
    std::snprintf(buf, sizeof buf, "%.17g", p.oracle_f);
    out << p.name << ',' << p.source << ',' << p.n_w << ',' << p.n_y << ',' << p.n_z << ',' << buf << ','
        << p.oracle_tol << ',' << p.seed << ',' << p.note << '\n';
  }
}

namespace {

BenchmarkProblem with_oracle(std::shared_ptr<const ProblemDefinition> def, std::uint64_t seed) {
  BenchmarkProblem b;
  b.name = def->name;
  b.source = def->source;
  b.note = def->note;
  b.n_w = def->m;
  b.n_y = def->p;
  b.n_z = def->n;
  b.seed = seed;
  const OracleResult o = multistart_oracle(*def, 10, seed);
  b.oracle_f = o.f;
  b.oracle_x = o.x;
  b.definition = std::move(def);
  return b;
}

}  // namespace

std::vector<BenchmarkProblem> build_engineering_suite() {
  std::vector<BenchmarkProblem> out;
  std::uint64_t seed = 101;
  for (auto& def : engineering_definitions()) out.push_back(with_oracle(def, seed++));
  return out;
}

std::vector<BenchmarkProblem> build_synthetic_suite(std::uint64_t seed) {
  std::vector<BenchmarkProblem> out;
  std::uint64_t k = 0;
  for (auto& def : synthetic_definitions(seed)) out.push_back(with_oracle(def, seed * 1000 + 1 + k++));
  return out;
}

BenchmarkProblem toy_problem() {
  auto def = std::make_shared<ProblemDefinition>();
  def->name = "toy";
  def->source = "toy";
  def->note = "identity black box";
  def->m = 1;
  def->p = 1;
  def->n = 0;
  def->blackbox = bench::vector_expr(1, [](const auto& w) { return std::vector<element_t<decltype(w)>>{w[0]}; });
  def->objective = bench::scalar_expr([](const auto& x) { return sq(x[0] - 2.0); });
  def->equalities = bench::no_constraints();
  def->inequalities = bench::no_constraints();
  def->lower = (Vector(2) << 0.0, -10.0).finished();
  def->upper = (Vector(2) << 5.0, 10.0).finished();
  def->x0 = (Vector(2) << 0.5, 0.0).finished();
  BenchmarkProblem b;
  b.name = def->name;
  b.source = def->source;
  b.note = def->note;
  b.n_w = 1;
  b.n_y = 1;
  b.n_z = 0;
  b.oracle_f = 0.0;
  b.oracle_x = (Vector(2) << 2.0, 2.0).finished();
  b.definition = std::move(def);
  return b;
}

// ---- engineering case studies ---------------------------------------------

namespace {

using DefPtr = std::shared_ptr<const ProblemDefinition>;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Colville's test problem as popularized by Himmelblau.
// x = (w: x2 x3 x5 | y: two partial sums of the first two constraints |
//      z: x1 x4 G1 G2 G3), G the three constraint bodies.
DefPtr himmelblau() {
  auto d = std::make_shared<ProblemDefinition>();
  d->name = "himmelblau";
  d->source = "engineering";
  d->m = 3;
  d->p = 2;
  d->n = 5;
  d->blackbox = bench::vector_expr(2, [](const auto& w) {
    using T = element_t<decltype(w)>;
    const T& x2 = w[0];
    const T& x3 = w[1];
    const T& x5 = w[2];
    return std::vector<T>{0.0056858 * x2 * x5 - 0.0022053 * x3 * x5, 0.0071317 * x2 * x5 + 0.0021813 * x3 * x3};
  });
  d->objective = bench::scalar_expr([](const auto& x) {
    return 5.3578547 * x[1] * x[1] + 0.8356891 * x[5] * x[2] + 37.293239 * x[5] - 40792.141;
  });
  d->equalities = bench::vector_expr(3, [](const auto& x) {
    using T = element_t<decltype(x)>;
    const T &x2 = x[0], &x3 = x[1], &x5 = x[2], &y1 = x[3], &y2 = x[4], &x1 = x[5], &x4 = x[6];
    return std::vector<T>{x[7] - (85.334407 + y1 + 0.0006262 * x1 * x4),
                          x[8] - (80.51249 + y2 + 0.0029955 * x1 * x2),
                          x[9] - (9.300961 + 0.0047026 * x3 * x5 + 0.0012547 * x1 * x3 + 0.0019085 * x3 * x4)};
  });
  d->inequalities = bench::no_constraints();
  d->lower = vec({33, 27, 27, -10, 0, 78, 27, 0, 90, 20});
  d->upper = vec({45, 45, 45, 20, 30, 102, 45, 92, 110, 25});
  d->x0 = vec({39, 36, 36, 0, 0, 90, 36, 87.36214, 91.026, 21.93});
  d->note = "y holds the x2 x5 and x3 x5 terms of the first two constraint bodies";
  return d;
}

// Countercurrent plug-flow extraction with linear equilibrium (Kremser
// form) and an empirical height-of-transfer-unit correlation.
// x = (w: solvent ratio S, height H | y: NTU | z: extraction factor E, raffinate fraction r).
DefPtr extraction() {
  auto d = std::make_shared<ProblemDefinition>();
  d->name = "extraction";
  d->source = "engineering";
  d->m = 2;
  d->p = 1;
  d->n = 2;
  d->blackbox = bench::vector_expr(1, [](const auto& w) {
    using T = element_t<decltype(w)>;
    using std::sqrt;
    return std::vector<T>{w[1] / (0.4 + 0.25 * sqrt(w[0]))};
  });
  d->objective = bench::scalar_expr([](const auto& x) { return 0.8 * x[0] + 0.15 * x[1] + 25.0 * x[4]; });
  d->equalities = bench::vector_expr(2, [](const auto& x) {
    using T = element_t<decltype(x)>;
    using std::exp;
    const T &ntu = x[2], &e = x[3], &r = x[4];
    return std::vector<T>{e - 2.0 * x[0], r * (e * exp(ntu * (1.0 - 1.0 / e)) - 1.0) - (e - 1.0)};
  });
  d->inequalities = bench::vector_expr(1, [](const auto& x) {
    using T = element_t<decltype(x)>;
    return std::vector<T>{x[4] - 0.1};
  });
  d->lower = vec({0.6, 0.5, 0.0, 1.2, 0.0});
  d->upper = vec({5.0, 15.0, 40.0, 10.0, 1.0});
  d->x0 = vec({2.0, 6.0, 0.0, 4.0, 0.05});
  d->note = "solvent and height cost plus solute loss";
  return d;
}

// Cylindrical pressure vessel with hemispherical heads; shell and head
// thicknesses bounded below by their standard plate gauges.
// x = (w: Ts Th R L | y: material cost).
DefPtr pressure_vessel() {
  auto d = std::make_shared<ProblemDefinition>();
  d->name = "pressure_vessel";
  d->source = "engineering";
  d->m = 4;
  d->p = 1;
  d->n = 0;
  d->blackbox = bench::vector_expr(1, [](const auto& w) {
    using T = element_t<decltype(w)>;
    const T &ts = w[0], &th = w[1], &r = w[2], &l = w[3];
    return std::vector<T>{0.6224 * ts * r * l + 1.7781 * th * r * r + 3.1661 * ts * ts * l + 19.84 * ts * ts * r};
  });
  d->objective = bench::scalar_expr([](const auto& x) { return x[4]; });
  d->equalities = bench::no_constraints();
  d->inequalities = bench::vector_expr(4, [](const auto& x) {
    using T = element_t<decltype(x)>;
    const T &ts = x[0], &th = x[1], &r = x[2], &l = x[3];
    const double pi = 3.14159265358979323846;
    return std::vector<T>{-ts + 0.0193 * r, -th + 0.00954 * r,
                          1.0 - (pi * r * r * l + (4.0 / 3.0) * pi * r * r * r) / 1296000.0, l - 240.0};
  });
  d->lower = vec({0.8125, 0.4375, 10.0, 10.0, 0.0});
  d->upper = vec({2.0, 2.0, 100.0, 240.0, 1e5});
  d->x0 = vec({1.0, 0.6, 45.0, 150.0, 0.0});
  d->note = "volume constraint scaled by 1296000";
  return d;
}

// Alkylation process with the yield regression in the black box.
// Flows in thousands of barrels per day, acid addition in hundreds.
// x = (w: isobutane-olefin ratio | y: alkylate yield per olefin |
//      z: olefin, isobutane recycle, acid, alkylate, isobutane makeup,
//         acid strength, motor octane, acid dilution, F-4 number).
DefPtr alkylation() {
  auto d = std::make_shared<ProblemDefinition>();
  d->name = "alkylation";
  d->source = "engineering";
  d->m = 1;
  d->p = 1;
  d->n = 9;
  d->blackbox = bench::vector_expr(1, [](const auto& w) {
    using T = element_t<decltype(w)>;
    return std::vector<T>{1.12 + 0.13167 * w[0] - 0.00667 * w[0] * w[0]};
  });
  d->objective = bench::scalar_expr([](const auto& x) {
    // negative profit in dollars per day
    const auto &olefin = x[2], &recycle = x[3], &acid = x[4], &alkylate = x[5], &makeup = x[6], &octane = x[8];
    return -1000.0 * (0.063 * alkylate * octane - 5.04 * olefin - 0.035 * recycle - acid - 3.36 * makeup);
  });
  d->equalities = bench::vector_expr(7, [](const auto& x) {
    using T = element_t<decltype(x)>;
    const T &ratio = x[0], &yield = x[1], &olefin = x[2], &recycle = x[3], &acid = x[4], &alkylate = x[5],
            &makeup = x[6], &strength = x[7], &octane = x[8], &dilution = x[9], &f4 = x[10];
    return std::vector<T>{alkylate - olefin * yield,
                          makeup - (1.22 * alkylate - olefin),
                          recycle - (olefin * ratio - makeup),
                          strength - (89.0 + (octane - (86.35 + 1.098 * ratio - 0.038 * ratio * ratio)) / 0.325),
                          f4 - (-133.0 + 3.0 * octane),
                          dilution - (35.82 - 0.222 * f4),
                          100.0 * acid * (98.0 - strength) - alkylate * strength * dilution};
  });
  d->inequalities = bench::no_constraints();
  d->lower = vec({3, 0.5, 0, 0, 0, 0, 0, 85, 90, 1.2, 145});
  d->upper = vec({12, 2.5, 2, 16, 1.2, 5, 2, 93, 95, 4, 162});
  d->x0 = vec({8, 1, 1.5, 10, 0.5, 2.5, 1.5, 90, 92, 3, 150});
  d->note = "objective is negative profit in dollars per day";
  return d;
}

// Tension/compression spring: wire diameter, coil diameter, active coils.
// x = (w: d D N | y: spring weight).
DefPtr spring() {
  auto d = std::make_shared<ProblemDefinition>();
  d->name = "spring";
  d->source = "engineering";
  d->m = 3;
  d->p = 1;
  d->n = 0;
  d->blackbox = bench::vector_expr(1, [](const auto& w) {
    using T = element_t<decltype(w)>;
    return std::vector<T>{(w[2] + 2.0) * w[1] * w[0] * w[0]};
  });
  d->objective = bench::scalar_expr([](const auto& x) { return x[3]; });
  d->equalities = bench::no_constraints();
  d->inequalities = bench::vector_expr(4, [](const auto& x) {
    using T = element_t<decltype(x)>;
    const T &wd = x[0], &cd = x[1], &nc = x[2];
    const T wd2 = wd * wd;
    const T wd4 = wd2 * wd2;
    return std::vector<T>{1.0 - cd * cd * cd * nc / (71785.0 * wd4),
                          (4.0 * cd * cd - wd * cd) / (12566.0 * (cd * wd2 * wd - wd4)) + 1.0 / (5108.0 * wd2) - 1.0,
                          1.0 - 140.45 * wd / (cd * cd * nc), (wd + cd) / 1.5 - 1.0};
  });
  d->lower = vec({0.05, 0.25, 2.0, 0.0});
  d->upper = vec({0.2, 1.3, 15.0, 1.0});
  d->x0 = vec({0.06, 0.5, 8.0, 0.0});
  d->note = "weight of the spring";
  return d;
}

}  // namespace

std::vector<std::shared_ptr<const ProblemDefinition>> engineering_definitions() {
  return {himmelblau(), extraction(), pressure_vessel(), alkylation(), spring()};
}

}  // namespace trf
