#include "trf/subsolver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace trf {

// ---- trust constraint -----------------------------------------------------

TrustConstraint TrustConstraint::box(Vector center, double radius) {
  TrustConstraint t;
  t.shape = TrustShape::Box;
  t.center = std::move(center);
  t.radius = radius;
  return t;
}

TrustConstraint TrustConstraint::ellipsoid(Vector center, Matrix metric, double radius) {
  TrustConstraint t;
  t.shape = TrustShape::Ellipsoid;
  t.center = std::move(center);
  t.metric = std::move(metric);
  t.radius = radius;
  return t;
}

double TrustConstraint::norm(const Vector& step) const {
  if (shape == TrustShape::Box) return step.size() ? step.cwiseAbs().maxCoeff() : 0.0;
  return std::sqrt(std::max(0.0, step.dot(metric * step)));
}

void TrustConstraint::validate(int dimension) const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("trust radius must be positive and finite");
  if (!(shrink > 0.0 && shrink <= 1.0)) throw ConfigError("trust shrink factor must lie in (0, 1]");
  if (center.size() != dimension) throw ConfigError("trust center has the wrong dimension");
  if (shape == TrustShape::Ellipsoid && (metric.rows() != dimension || metric.cols() != dimension))
    throw ConfigError("trust metric has the wrong dimension");
}

std::string_view status_name(SubStatus status) {
  switch (status) {
    case SubStatus::Optimal: return "optimal";
    case SubStatus::Infeasible: return "infeasible";
    case SubStatus::IterLimit: return "iter_limit";
    case SubStatus::NumericFail: return "numeric_fail";
  }
  return "?";
}

namespace {

Vector project(const Vector& x, const Vector& lo, const Vector& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Subproblem with the trust constraint folded in: Box into the bounds,
// Ellipsoid as a trailing inequality.
struct Flat {
  int n = 0;
  const ScalarFunction* objective = nullptr;
  VectorFunction eq;
  VectorFunction ineq;
  int n_glass_ineq = 0;
  Vector lo, hi;
};

VectorFunction ellipsoid_function(const TrustConstraint& t) {
  const Vector c = t.center;
  const Matrix h = t.metric;
  const double r2 = t.effective_radius() * t.effective_radius();
  VectorFunction f;
  f.size = 1;
  f.value = [c, h, r2](const Vector& x) {
    const Vector d = x - c;
    Vector v(1);
    v[0] = d.dot(h * d) / r2 - 1.0;
    return v;
  };
  f.jacobian = [c, h, r2](const Vector& x) {
    Matrix j(1, x.size());
    j.row(0) = (2.0 / r2) * (h * (x - c)).transpose();
    return j;
  };
  f.weighted_hessian = [h, r2](const Vector&, const Vector& w) { return Matrix((2.0 * w[0] / r2) * h); };
  return f;
}

Flat flatten(const NlpSubproblem& sub) {
  Flat fl;
  fl.n = sub.dimension();
  if (sub.lower.size() != fl.n || sub.upper.size() != fl.n) throw ConfigError("subproblem bounds have the wrong size");
  fl.objective = &sub.objective;
  fl.eq = sub.equalities.size ? sub.equalities : empty_vector_function();
  fl.ineq = sub.inequalities.size ? sub.inequalities : empty_vector_function();
  fl.n_glass_ineq = fl.ineq.size;
  fl.lo = sub.lower;
  fl.hi = sub.upper;
  if (sub.trust) {
    const TrustConstraint& t = *sub.trust;
    t.validate(fl.n);
    if (t.shape == TrustShape::Box) {
      const double r = t.effective_radius();
      fl.lo = fl.lo.cwiseMax((t.center.array() - r).matrix());
      fl.hi = fl.hi.cwiseMin((t.center.array() + r).matrix());
    } else {
      fl.ineq = concatenate(fl.ineq, ellipsoid_function(t));
    }
  }
  return fl;
}

// ---- Euclidean trust-region subproblem on a dense symmetric model ---------

Vector trust_region_step(const Matrix& b, const Vector& g, double radius) {
  const Eigen::Index n = g.size();
  if (n == 0) return Vector(0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success || !es.eigenvalues().allFinite()) return -radius * g / std::max(g.norm(), 1e-300);
  const Vector lam = es.eigenvalues();
  const Matrix& q = es.eigenvectors();
  const Vector a = q.transpose() * g;
  auto step_norm = [&](double tau) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = lam[i] + tau;
      s += (a[i] / d) * (a[i] / d);
    }
    return std::sqrt(s);
  };
  auto step = [&](double tau) {
    Vector c(n);
    for (Eigen::Index i = 0; i < n; ++i) c[i] = -a[i] / (lam[i] + tau);
    return Vector(q * c);
  };
  const double lmin = lam[0];
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lmin > 1e-12 * scale && step_norm(0.0) <= radius) return step(0.0);

  double lo = std::max(0.0, -lmin) + 1e-15 * scale;
  if (step_norm(lo) < radius) {
    // Hard case: fill the remaining length along the lowest eigenvector.
    Vector c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = lam[i] + lo;
      c[i] = std::abs(d) > 1e-300 ? -a[i] / d : 0.0;
    }
    const double rest = radius * radius - c.squaredNorm();
    if (rest > 0.0) c[0] += (a[0] <= 0.0 ? 1.0 : -1.0) * std::sqrt(rest);
    return q * c;
  }
  double hi = std::max(lo, 1.0);
  while (step_norm(hi) > radius) hi *= 2.0;
  // Newton on 1/||p(tau)|| - 1/radius, safeguarded by bisection.
  double tau = hi;
  for (int it = 0; it < 200; ++it) {
    const double pn = step_norm(tau);
    const double phi = 1.0 / pn - 1.0 / radius;
    if (std::abs(pn - radius) <= 1e-10 * radius) break;
    if (phi < 0.0) lo = tau; else hi = tau;
    double dp = 0.0;  // d||p||/dtau
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = lam[i] + tau;
      dp -= a[i] * a[i] / (d * d * d);
    }
    dp /= pn;
    const double dphi = -dp / (pn * pn);
    double next = tau - phi / dphi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-15 * hi) break;
    tau = next;
  }
  return step(tau);
}

// ---- box-constrained trust-region Newton ----------------------------------

struct Merit {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

struct BoxResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
  bool numeric_fail = false;
};

BoxResult minimize_box(const Merit& m, Vector x, const Vector& lo, const Vector& hi, double tol, int max_iter) {
  BoxResult res;
  x = project(x, lo, hi);
  double fx = m.value(x);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.numeric_fail = true;
    return res;
  }
  Vector g = m.gradient(x);
  double radius = std::max(1.0, inf_norm(x));
  const Eigen::Index n = x.size();
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    if (!g.allFinite()) {
      res.numeric_fail = true;
      break;
    }
    const Vector pg = x - project(x - g, lo, hi);
    const double pgn = inf_norm(pg);
    if (pgn <= tol) {
      res.converged = true;
      break;
    }
    const double eps_act = std::min(1e-3, pgn);
    std::vector<Eigen::Index> free;
    Vector p = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= lo[i] + eps_act && g[i] > 0.0;
      const bool at_hi = x[i] >= hi[i] - eps_act && g[i] < 0.0;
      // Nearly active variables are moved onto their bound.
      if (at_lo)
        p[i] = lo[i] - x[i];
      else if (at_hi)
        p[i] = hi[i] - x[i];
      else
        free.push_back(i);
    }
    const Matrix b = m.hessian(x);
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Matrix bf(nf, nf);
      Vector gf(nf);
      const Vector coupled = b * p;
      for (Eigen::Index i = 0; i < nf; ++i) {
        gf[i] = g[free[i]] + coupled[free[i]];
        for (Eigen::Index j = 0; j < nf; ++j) bf(i, j) = b(free[i], free[j]);
      }
      const Vector pf = trust_region_step(bf, gf, radius);
      for (Eigen::Index i = 0; i < nf; ++i) p[free[i]] = pf[i];
    }
    Vector xt = project(x + p, lo, hi);
    Vector s = xt - x;
    double pred = -(g.dot(s) + 0.5 * s.dot(b * s));
    if (!(pred > 0.0) || !std::isfinite(pred)) {
      // The projection spoiled the model step: take the Cauchy point on
      // the projected-gradient path instead.
      double t = radius / std::max(g.norm(), 1e-300);
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        xt = project(x - t * g, lo, hi);
        s = xt - x;
        if (s.norm() > radius) continue;
        const double q = g.dot(s) + 0.5 * s.dot(b * s);
        if (q <= 0.1 * g.dot(s)) {
          pred = -q;
          break;
        }
      }
      if (pred > 0.0 && std::isfinite(pred)) {
        // Newton step on the variables still free at the Cauchy point,
        // backtracked along the projection arc while the model improves.
        std::vector<Eigen::Index> cf;
        for (Eigen::Index i = 0; i < n; ++i)
          if (xt[i] > lo[i] && xt[i] < hi[i]) cf.push_back(i);
        if (!cf.empty()) {
          const auto nf = static_cast<Eigen::Index>(cf.size());
          const Vector gq = g + b * s;
          Matrix bf(nf, nf);
          Vector gf(nf);
          for (Eigen::Index i = 0; i < nf; ++i) {
            gf[i] = gq[cf[i]];
            for (Eigen::Index j = 0; j < nf; ++j) bf(i, j) = b(cf[i], cf[j]);
          }
          const Vector pf = trust_region_step(bf, gf, radius);
          Vector dir = Vector::Zero(n);
          for (Eigen::Index i = 0; i < nf; ++i) dir[cf[i]] = pf[i];
          double t = 1.0;
          for (int k = 0; k < 20; ++k, t *= 0.5) {
            const Vector x2 = project(xt + t * dir, lo, hi);
            const Vector s2 = x2 - x;
            const double q2 = g.dot(s2) + 0.5 * s2.dot(b * s2);
            if (std::isfinite(q2) && -q2 > pred) {
              xt = x2;
              s = s2;
              pred = -q2;
              break;
            }
          }
        }
      }
    }
    const bool model_ok = pred > 0.0 && std::isfinite(pred);
    if (!model_ok || s.isZero(0.0)) {
      // Projected-gradient path with Armijo backtracking.
      double t = radius / std::max(inf_norm(g), 1e-300);
      bool ok = false;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        xt = project(x - t * g, lo, hi);
        s = xt - x;
        if (s.isZero(0.0)) break;
        const double ft = m.value(xt);
        if (std::isfinite(ft) && ft <= fx + 1e-4 * g.dot(s)) {
          ok = true;
          break;
        }
        if (std::isfinite(ft) && std::abs(ft - fx) < 1e-13 * (1.0 + std::abs(fx))) {
          // Below rounding level: judge by the projected gradient.
          const Vector gt = m.gradient(xt);
          if (gt.allFinite() && inf_norm(xt - project(xt - gt, lo, hi)) < pgn) {
            ok = true;
            break;
          }
        }
      }
      if (!ok) break;
      x = xt;
      fx = m.value(x);
      g = m.gradient(x);
      radius = std::max(radius, 2.0 * inf_norm(s));
      continue;
    }
    const double ft = m.value(xt);
    const double ared = fx - ft;
    const double noise = 1e-13 * (1.0 + std::abs(fx));
    bool accept = false;
    double ratio = 0.0;
    if (std::isfinite(ft)) {
      if (pred < noise && std::abs(ared) < noise) {
        // Decrease below rounding level: judge by the projected gradient.
        const Vector gt = m.gradient(xt);
        accept = gt.allFinite() && inf_norm(xt - project(xt - gt, lo, hi)) < pgn;
        ratio = accept ? 1.0 : 0.0;
      } else {
        ratio = ared / pred;
        accept = ratio > 1e-4;
      }
    }
    const double sn = s.norm();
    if (!std::isfinite(ft) || ratio < 0.25)
      radius = 0.25 * std::max(sn, 1e-16);
    else if (ratio > 0.75 && sn >= 0.8 * radius)
      radius *= 2.0;
    if (accept) {
      x = xt;
      fx = ft;
      g = m.gradient(x);
    }
    if (radius < 1e-300) break;
  }
  res.x = x;
  return res;
}

// ---- augmented Lagrangian -------------------------------------------------

double violation_of(const Vector& h, const Vector& g) {
  double v = inf_norm(h);
  for (Eigen::Index j = 0; j < g.size(); ++j) v = std::max(v, g[j]);
  return v;
}

double objective_scale(const Flat& fl, const Vector& x) {
  const Vector gf = fl.objective->gradient(x);
  return std::max(1.0, gf.allFinite() ? inf_norm(gf) : 1.0);
}

KktReport kkt_of(const Flat& fl, const Vector& x, const Vector& lam, const Vector& mu) {
  KktReport r;
  const Vector gf = fl.objective->gradient(x);
  const double scale = std::max(1.0, inf_norm(gf));
  Vector grad = gf;
  const Vector h = fl.eq.value(x);
  const Vector g = fl.ineq.value(x);
  if (fl.eq.size) grad += fl.eq.jacobian(x).transpose() * lam;
  if (fl.ineq.size) grad += fl.ineq.jacobian(x).transpose() * mu;
  r.stationarity = inf_norm(x - project(x - grad, fl.lo, fl.hi)) / scale;
  double comp = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    comp = std::max(comp, std::abs(mu[j] * g[j]));
    if (mu[j] < 0.0) comp = std::max(comp, -mu[j]);
  }
  r.complementarity = comp / scale;
  double bound = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    bound = std::max({bound, fl.lo[i] - x[i], x[i] - fl.hi[i]});
  r.violation = std::max(violation_of(h, g), bound);
  return r;
}

SubSolution finish(const Flat& fl, const Vector& x, const Vector& lam, const Vector& mu, SubStatus status,
                   int iterations) {
  SubSolution sol;
  sol.x_star = x;
  sol.eq_multipliers = lam;
  sol.ineq_multipliers = mu.head(fl.n_glass_ineq);
  if (mu.size() > fl.n_glass_ineq) sol.trust_multiplier = mu[fl.n_glass_ineq];
  Vector grad = fl.objective->gradient(x);
  if (fl.eq.size) grad += fl.eq.jacobian(x).transpose() * lam;
  if (fl.ineq.size) grad += fl.ineq.jacobian(x).transpose() * mu;
  sol.bound_multipliers = grad - (x - project(x - grad, fl.lo, fl.hi));
  const KktReport k = kkt_of(fl, x, lam, mu);
  sol.kkt_residual = std::max(k.stationarity, k.complementarity);
  sol.constraint_violation = k.violation;
  sol.status = status;
  sol.iterations = iterations;
  if (!x.allFinite() || !std::isfinite(sol.kkt_residual)) sol.status = SubStatus::NumericFail;
  return sol;
}

}  // namespace

namespace {

/// Rows of c scaled by `scale`.
VectorFunction scaled(const VectorFunction& c, const Vector& scale) {
  if (c.empty()) return c;
  VectorFunction out;
  out.size = c.size;
  out.value = [c, scale](const Vector& x) { return Vector(c.value(x).cwiseProduct(scale)); };
  out.jacobian = [c, scale](const Vector& x) { return Matrix(scale.asDiagonal() * c.jacobian(x)); };
  out.weighted_hessian = [c, scale](const Vector& x, const Vector& w) {
    return weighted_hessian_of(c, x, w.cwiseProduct(scale));
  };
  return out;
}

/// 1 / max(1, largest gradient entry) per row, so no row is amplified.
Vector row_scales(const VectorFunction& c, const Vector& x) {
  Vector s = Vector::Ones(c.size);
  if (c.empty()) return s;
  const Matrix j = c.jacobian(x);
  for (int i = 0; i < c.size; ++i) {
    const double r = j.row(i).cwiseAbs().maxCoeff();
    if (std::isfinite(r)) s[i] = 1.0 / std::max(1.0, r);
  }
  return s;
}

}  // namespace

namespace {

SubSolution solve_flat(const NlpSubproblem& sub, const SolverOptions& options) {
  const Flat fl = flatten(sub);
  if (sub.start.size() != fl.n) throw ConfigError("subproblem start has the wrong size");
  for (int i = 0; i < fl.n; ++i)
    if (fl.lo[i] > fl.hi[i]) {
      SubSolution s;
      s.x_star = sub.start;
      s.status = SubStatus::Infeasible;
      return s;
    }

  const int qh = fl.eq.size;
  const int qg = fl.ineq.size;
  Vector x = project(sub.start, fl.lo, fl.hi);

  // The iteration runs on a gradient-scaled copy; multipliers are mapped
  // back before every test.
  const double sf = 1.0 / objective_scale(fl, x);
  const Vector se = row_scales(fl.eq, x);
  const Vector si = row_scales(fl.ineq, x);
  ScalarFunction objective;
  objective.value = [&fl, sf](const Vector& z) { return sf * fl.objective->value(z); };
  objective.gradient = [&fl, sf](const Vector& z) { return Vector(sf * fl.objective->gradient(z)); };
  objective.hessian = [&fl, sf](const Vector& z) { return Matrix(sf * hessian_of(*fl.objective, z)); };
  Flat sc = fl;
  sc.objective = &objective;
  sc.eq = scaled(fl.eq, se);
  sc.ineq = scaled(fl.ineq, si);
  auto original = [&](const Vector& lam, const Vector& mu) {
    return std::pair<Vector, Vector>(lam.cwiseProduct(se) / sf, mu.cwiseProduct(si) / sf);
  };

  Vector lam = Vector::Zero(qh);
  Vector mu = Vector::Zero(qg);
  double rho = 10.0;
  constexpr double kRhoMax = 1e9;
  int total = 0;

  auto merit = [&](double rho_k, const Vector& lam_k, const Vector& mu_k) {
    Merit m;
    m.value = [&, rho_k, lam_k, mu_k](const Vector& z) {
      double v = sc.objective->value(z);
      if (qh) {
        const Vector h = sc.eq.value(z);
        v += lam_k.dot(h) + 0.5 * rho_k * h.squaredNorm();
      }
      if (qg) {
        const Vector g = sc.ineq.value(z);
        for (int j = 0; j < qg; ++j) {
          const double t = std::max(0.0, mu_k[j] + rho_k * g[j]);
          v += (t * t - mu_k[j] * mu_k[j]) / (2.0 * rho_k);
        }
      }
      return v;
    };
    m.gradient = [&, rho_k, lam_k, mu_k](const Vector& z) {
      Vector gr = sc.objective->gradient(z);
      if (qh) gr += sc.eq.jacobian(z).transpose() * (lam_k + rho_k * sc.eq.value(z));
      if (qg) gr += sc.ineq.jacobian(z).transpose() * (mu_k + rho_k * sc.ineq.value(z)).cwiseMax(0.0);
      return gr;
    };
    m.hessian = [&, rho_k, lam_k, mu_k](const Vector& z) {
      Matrix hs = hessian_of(*sc.objective, z);
      if (qh) {
        const Vector h = sc.eq.value(z);
        const Matrix j = sc.eq.jacobian(z);
        hs += weighted_hessian_of(sc.eq, z, lam_k + rho_k * h) + rho_k * j.transpose() * j;
      }
      if (qg) {
        const Vector g = sc.ineq.value(z);
        const Vector t = (mu_k + rho_k * g).cwiseMax(0.0);
        if (!t.isZero(0.0)) {
          const Matrix j = sc.ineq.jacobian(z);
          hs += weighted_hessian_of(sc.ineq, z, t);
          for (int r = 0; r < qg; ++r)
            if (t[r] > 0.0) hs += rho_k * j.row(r).transpose() * j.row(r);
        }
      }
      return Matrix(0.5 * (hs + hs.transpose()));
    };
    return m;
  };

  if (qh == 0 && qg == 0) {
    const double tol = 0.1 * options.tol_kkt;
    const BoxResult br = minimize_box(merit(rho, lam, mu), x, fl.lo, fl.hi, tol, options.max_inner);
    const KktReport k = kkt_of(fl, br.x, lam, mu);
    SubStatus st = br.numeric_fail ? SubStatus::NumericFail
                   : (k.stationarity <= options.tol_kkt ? SubStatus::Optimal : SubStatus::IterLimit);
    return finish(fl, br.x, lam, mu, st, br.iterations);
  }

  double best_viol = kInf;
  int stalls = 0;
  constexpr int kMaxOuter = 60;
  for (int outer = 0; outer < kMaxOuter; ++outer) {
    const double tol = 0.1 * options.tol_kkt;
    const BoxResult br = minimize_box(merit(rho, lam, mu), x, fl.lo, fl.hi, tol, options.max_inner);
    total += br.iterations;
    if (br.numeric_fail) {
      const auto [l, u] = original(lam, mu);
      return finish(fl, br.x, l, u, SubStatus::NumericFail, total);
    }
    x = br.x;
    const Vector h = sc.eq.value(x);
    const Vector g = sc.ineq.value(x);
    if (qh) lam += rho * h;
    if (qg) mu = (mu + rho * g).cwiseMax(0.0);
    const auto [l, u] = original(lam, mu);
    const KktReport k = kkt_of(fl, x, l, u);
    if (k.violation <= options.tol_feas && std::max(k.stationarity, k.complementarity) <= options.tol_kkt)
      return finish(fl, x, l, u, SubStatus::Optimal, total);
    const double viol = violation_of(h, g);
    if (k.violation > options.tol_feas) {
      if (viol < 0.25 * best_viol) {
        stalls = 0;
      } else {
        if (rho >= kRhoMax) ++stalls;
        rho = std::min(10.0 * rho, kRhoMax);
      }
      best_viol = std::min(best_viol, viol);
      if (stalls >= 3) return finish(fl, x, l, u, SubStatus::Infeasible, total);
    }
  }
  const auto [l, u] = original(lam, mu);
  return finish(fl, x, l, u, SubStatus::IterLimit, total);
}

// x = c + s u with s = min(1, trust radius): small trust regions become
// unit-sized so the inner tolerances and radii keep their meaning.
NlpSubproblem rescaled(const NlpSubproblem& sub, const Vector& c, double s) {
  NlpSubproblem out;
  auto at = [c, s](const Vector& u) { return Vector(c + s * u); };
  const ScalarFunction f = sub.objective;
  out.objective.value = [f, at](const Vector& u) { return f.value(at(u)); };
  out.objective.gradient = [f, at, s](const Vector& u) { return Vector(s * f.gradient(at(u))); };
  out.objective.hessian = [f, at, s](const Vector& u) { return Matrix(s * s * hessian_of(f, at(u))); };
  auto compose = [&](const VectorFunction& v) {
    if (v.empty()) return v;
    VectorFunction o;
    o.size = v.size;
    o.value = [v, at](const Vector& u) { return v.value(at(u)); };
    o.jacobian = [v, at, s](const Vector& u) { return Matrix(s * v.jacobian(at(u))); };
    o.weighted_hessian = [v, at, s](const Vector& u, const Vector& w) {
      return Matrix(s * s * weighted_hessian_of(v, at(u), w));
    };
    return o;
  };
  out.equalities = compose(sub.equalities);
  out.inequalities = compose(sub.inequalities);
  out.lower = (sub.lower - c) / s;
  out.upper = (sub.upper - c) / s;
  TrustConstraint t = *sub.trust;
  t.center = Vector::Zero(c.size());
  t.radius /= s;
  out.trust = t;
  out.start = (sub.start - c) / s;
  return out;
}

}  // namespace

SubSolution solve_nlp(const NlpSubproblem& sub, const SolverOptions& options) {
  if (!sub.trust) return solve_flat(sub, options);
  sub.trust->validate(sub.dimension());
  const double s = std::min(1.0, sub.trust->effective_radius());
  if (s == 1.0) return solve_flat(sub, options);
  const Vector& c = sub.trust->center;
  SubSolution sol = solve_flat(rescaled(sub, c, s), options);
  sol.x_star = c + s * sol.x_star;
  if (sol.bound_multipliers.size()) sol.bound_multipliers /= s;
  return sol;
}

KktReport kkt_check(const NlpSubproblem& sub, const SubSolution& sol) {
  const Flat fl = flatten(sub);
  Vector mu(fl.ineq.size);
  mu.head(fl.n_glass_ineq) = sol.ineq_multipliers.size() ? sol.ineq_multipliers : Vector::Zero(fl.n_glass_ineq);
  if (fl.ineq.size > fl.n_glass_ineq) mu[fl.n_glass_ineq] = sol.trust_multiplier;
  const Vector lam = sol.eq_multipliers.size() ? sol.eq_multipliers : Vector::Zero(fl.eq.size);
  return kkt_of(fl, sol.x_star, lam, mu);
}

// ---- simplex --------------------------------------------------------------

namespace {

// Tableau simplex on min c'x, A x = b, x >= 0 with b >= 0. The first `m`
// rows are constraints; basis[i] names the basic column of row i.
struct Tableau {
  Matrix t;  // (m + 1) x (ncols + 1); last row = reduced costs, last col = rhs
  std::vector<int> basis;
  int m = 0;
  int ncols = 0;

  void pivot(int r, int c) {
    t.row(r) /= t(r, c);
    for (int i = 0; i <= m; ++i)
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    basis[r] = c;
  }

  // Returns false on unboundedness. Columns >= allowed are never entered.
  bool run(int allowed) {
    const double tol = 1e-11;
    for (int guard = 0; guard < 50000; ++guard) {
      int enter = -1;
      for (int j = 0; j < allowed; ++j)
        if (t(m, j) < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = kInf;
      for (int i = 0; i < m; ++i) {
        if (t(i, enter) > tol) {
          const double ratio = t(i, ncols) / t(i, enter);
          if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && leave >= 0 && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return true;
  }
};

}  // namespace

LpResult solve_lp(const Vector& c, const Matrix& a_eq, const Vector& b_eq, const Matrix& a_ub, const Vector& b_ub,
                  const Vector& lo, const Vector& hi) {
  const int n = static_cast<int>(c.size());
  const int me = static_cast<int>(a_eq.rows());
  const int mu = static_cast<int>(a_ub.rows());
  LpResult res;
  for (int i = 0; i < n; ++i)
    if (!(lo[i] <= hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) return res;

  // x = lo + t, t in [0, hi - lo]; the upper bounds become rows.
  const int m = me + mu + n;
  const int nslack = mu + n;
  const int nart = m;
  const int ncols = n + nslack + nart;
  Matrix a = Matrix::Zero(m, n + nslack);
  Vector b(m);
  int row = 0;
  for (int i = 0; i < me; ++i, ++row) {
    a.row(row).head(n) = a_eq.row(i);
    b[row] = b_eq[i] - a_eq.row(i).dot(lo);
  }
  for (int i = 0; i < mu; ++i, ++row) {
    a.row(row).head(n) = a_ub.row(i);
    a(row, n + i) = 1.0;
    b[row] = b_ub[i] - a_ub.row(i).dot(lo);
  }
  for (int i = 0; i < n; ++i, ++row) {
    a(row, i) = 1.0;
    a(row, n + mu + i) = 1.0;
    b[row] = hi[i] - lo[i];
  }
  // Row scaling for conditioning, then sign so that b >= 0.
  for (int r = 0; r < m; ++r) {
    const double s = std::max(a.row(r).cwiseAbs().maxCoeff(), std::abs(b[r]));
    if (s > 0.0) {
      a.row(r) /= s;
      b[r] /= s;
    }
    if (b[r] < 0.0) {
      a.row(r) *= -1.0;
      b[r] *= -1.0;
    }
  }

  Tableau tb;
  tb.m = m;
  tb.ncols = ncols;
  tb.t = Matrix::Zero(m + 1, ncols + 1);
  tb.t.topLeftCorner(m, n + nslack) = a;
  tb.t.block(0, n + nslack, m, nart) = Matrix::Identity(m, m);
  tb.t.col(ncols).head(m) = b;
  tb.basis.resize(m);
  for (int r = 0; r < m; ++r) tb.basis[r] = n + nslack + r;
  // Phase I objective: sum of artificials, expressed in non-basic columns.
  for (int r = 0; r < m; ++r) tb.t.row(m) -= tb.t.row(r);
  for (int r = 0; r < m; ++r) tb.t(m, n + nslack + r) = 0.0;
  tb.run(n + nslack);
  if (-tb.t(m, ncols) > 1e-9) return res;  // infeasible
  // Drive zero-level artificials out of the basis where possible.
  for (int r = 0; r < m; ++r) {
    if (tb.basis[r] < n + nslack) continue;
    for (int j = 0; j < n + nslack; ++j)
      if (std::abs(tb.t(r, j)) > 1e-9) {
        tb.pivot(r, j);
        break;
      }
  }
  // Phase II costs.
  tb.t.row(m).setZero();
  for (int j = 0; j < n; ++j) tb.t(m, j) = c[j];
  for (int r = 0; r < m; ++r) {
    const int bj = tb.basis[r];
    if (bj < n && c[bj] != 0.0) tb.t.row(m) -= c[bj] * tb.t.row(r);
  }
  // Artificials left in the basis sit on redundant rows; keep them out.
  if (!tb.run(n + nslack)) return res;

  Vector t = Vector::Zero(n);
  for (int r = 0; r < m; ++r)
    if (tb.basis[r] < n) t[tb.basis[r]] = tb.t(r, ncols);
  res.x = (lo + t).cwiseMax(lo).cwiseMin(hi);
  res.objective = c.dot(res.x);
  res.feasible = true;
  return res;
}

// ---- filter-method subproblems --------------------------------------------

namespace {

// The equality y - s(w) = 0 over the full x.
VectorFunction surrogate_equality(const GreyBoxProblem& problem, const SurrogateModel& s) {
  const VariablePartition part = problem.partition;
  const int n = part.dimension();
  VectorFunction f;
  f.size = part.p();
  f.value = [part, &s](const Vector& x) { return Vector(part.gather_y(x) - s.evaluate(part.gather_w(x))); };
  f.jacobian = [part, &s, n](const Vector& x) {
    Matrix j = Matrix::Zero(part.p(), n);
    const Matrix gs = s.gradient(part.gather_w(x));
    for (int r = 0; r < part.p(); ++r) {
      j(r, part.y_indices[r]) = 1.0;
      for (int c = 0; c < part.m(); ++c) j(r, part.w_indices[c]) = -gs(r, c);
    }
    return j;
  };
  f.weighted_hessian = [part, &s, n](const Vector& x, const Vector& w) {
    Matrix h = Matrix::Zero(n, n);
    const Matrix hs = s.weighted_hessian(part.gather_w(x), w);
    for (int a = 0; a < part.m(); ++a)
      for (int b = 0; b < part.m(); ++b) h(part.w_indices[a], part.w_indices[b]) = -hs(a, b);
    return h;
  };
  return f;
}

SubSolution run(const NlpSubproblem& sub, const SolverOptions& options, const SolverProvider& provider) {
  return provider ? provider(sub, options) : solve_nlp(sub, options);
}

}  // namespace

CriticalityResult solve_criticality(const GreyBoxProblem& problem, const SurrogateModel& surrogate,
                                    const Vector& x) {
  const auto& glass = problem.glass;
  const auto& part = problem.partition;
  const int n = part.dimension();
  const Vector grad = glass.objective.gradient(x);
  const int qh = glass.equalities.size;
  const int qg = glass.inequalities.size;
  const int p = part.p();

  Matrix a_eq = Matrix::Zero(qh + p, n);
  Vector b_eq = Vector::Zero(qh + p);
  if (qh) a_eq.topRows(qh) = glass.equalities.jacobian(x);
  const Matrix gs = surrogate.gradient(part.gather_w(x));
  for (int r = 0; r < p; ++r) {
    a_eq(qh + r, part.y_indices[r]) = 1.0;
    for (int c = 0; c < part.m(); ++c) a_eq(qh + r, part.w_indices[c]) = -gs(r, c);
  }
  Matrix a_ub(qg, n);
  Vector b_ub(qg);
  if (qg) {
    a_ub = glass.inequalities.jacobian(x);
    b_ub = (-glass.inequalities.value(x)).cwiseMax(0.0);
  }
  const Vector lo = (glass.lower - x).cwiseMax(-1.0).cwiseMin(0.0);
  const Vector hi = (glass.upper - x).cwiseMin(1.0).cwiseMax(0.0);

  CriticalityResult out;
  const LpResult lp = solve_lp(grad, a_eq, b_eq, a_ub, b_ub, lo, hi);
  if (!lp.feasible) {
    out.chi = kInf;
    out.degenerate = true;
    out.direction = Vector::Zero(n);
    return out;
  }
  out.chi = std::max(0.0, -lp.objective);
  out.direction = lp.x;
  return out;
}

double compatibility_shrink(double delta, double kappa_delta, double kappa_mu, double mu) {
  return kappa_delta * std::min(1.0, kappa_mu * std::pow(delta, mu));
}

CompatibilityResult solve_compatibility(const GreyBoxProblem& problem, const SurrogateModel& surrogate,
                                        const Vector& x_k, const TrustConstraint& trust,
                                        const SolverOptions& options, const SolverProvider& provider,
                                        double proximal) {
  const VariablePartition part = problem.partition;
  const int n = part.dimension();
  const SurrogateModel* s = &surrogate;
  NlpSubproblem sub;
  // Normalised by the starting gap so that small gaps still register
  // against the solver's absolute tolerances.
  const double gap0 = (part.gather_y(x_k) - surrogate.evaluate(part.gather_w(x_k))).norm();
  const double scale = gap0 > 1e-12 ? 1.0 / (gap0 * gap0) : 1.0;
  sub.objective.value = [part, s, proximal, x_k, scale](const Vector& x) {
    return scale * (0.5 * (part.gather_y(x) - s->evaluate(part.gather_w(x))).squaredNorm() +
                    0.5 * proximal * (x - x_k).squaredNorm());
  };
  sub.objective.gradient = [part, s, n, proximal, x_k, scale](const Vector& x) {
    const Vector w = part.gather_w(x);
    const Vector e = part.gather_y(x) - s->evaluate(w);
    const Vector gw = -s->gradient(w).transpose() * e;
    Vector g = Vector::Zero(n);
    for (int i = 0; i < part.m(); ++i) g[part.w_indices[i]] = gw[i];
    for (int i = 0; i < part.p(); ++i) g[part.y_indices[i]] = e[i];
    return Vector(scale * (g + proximal * (x - x_k)));
  };
  sub.objective.hessian = [part, s, n, proximal, scale](const Vector& x) {
    const Vector w = part.gather_w(x);
    const Vector e = part.gather_y(x) - s->evaluate(w);
    const Matrix j = s->gradient(w);
    const Matrix hww = j.transpose() * j - s->weighted_hessian(w, e);
    Matrix h = Matrix::Zero(n, n);
    for (int a = 0; a < part.m(); ++a) {
      for (int b = 0; b < part.m(); ++b) h(part.w_indices[a], part.w_indices[b]) = hww(a, b);
      for (int r = 0; r < part.p(); ++r) {
        h(part.w_indices[a], part.y_indices[r]) = -j(r, a);
        h(part.y_indices[r], part.w_indices[a]) = -j(r, a);
      }
    }
    for (int r = 0; r < part.p(); ++r) h(part.y_indices[r], part.y_indices[r]) = 1.0;
    h.diagonal().array() += proximal;
    return Matrix(scale * h);
  };
  sub.equalities = problem.glass.equalities;
  sub.inequalities = problem.glass.inequalities;
  sub.lower = problem.glass.lower;
  sub.upper = problem.glass.upper;
  sub.trust = trust;
  sub.start = x_k;

  CompatibilityResult out;
  out.solution = run(sub, options, provider);
  const Vector& xs = out.solution.x_star;
  out.step = xs - x_k;
  out.alpha = (part.gather_y(xs) - surrogate.evaluate(part.gather_w(xs))).norm();
  const bool failed = out.solution.status == SubStatus::Infeasible || out.solution.status == SubStatus::NumericFail;
  if (failed || !(out.solution.constraint_violation <= 1e-6) || !std::isfinite(out.alpha)) out.alpha = kInf;
  return out;
}

TrspResult solve_trsp(const GreyBoxProblem& problem, const SurrogateModel& surrogate, const Vector& x_start,
                      const Vector& x_k, const TrustConstraint& trust, const SolverOptions& options,
                      const SolverProvider& provider) {
  const auto& glass = problem.glass;
  NlpSubproblem sub;
  sub.objective = glass.objective;
  sub.equalities = concatenate(glass.equalities.size ? glass.equalities : empty_vector_function(),
                               surrogate_equality(problem, surrogate));
  sub.inequalities = glass.inequalities;
  sub.lower = glass.lower;
  sub.upper = glass.upper;
  sub.trust = trust;
  sub.start = x_start;

  TrspResult out;
  out.solution = run(sub, options, provider);
  out.step = out.solution.x_star - x_k;
  const int qh = glass.equalities.size;
  const Vector& lam = out.solution.eq_multipliers;
  if (lam.size() == qh + problem.partition.p()) {
    out.duals.eq = lam.head(qh);
    out.duals.surrogate = lam.tail(problem.partition.p());
  }
  out.duals.ineq = out.solution.ineq_multipliers;
  return out;
}

bool cauchy_decrease_diagnostic(double f_at_d, double f_at_r, double chi, double delta, double beta, double kappa) {
  const double bound = kappa * chi * std::min(chi / beta, delta);
  return f_at_d - f_at_r >= bound;
}

}  // namespace trf
