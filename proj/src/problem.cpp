#include "trf/problem.hpp"

#include "trf/surrogate.hpp"

#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <sstream>

namespace trf {

namespace {

double fd_step(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

std::vector<double> key_of(const Vector& w) { return {w.data(), w.data() + w.size()}; }

std::string describe(const Vector& w) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < w.size(); ++i) os << (i ? ", " : "") << w[i];
  os << "]";
  return os.str();
}

}  // namespace

Matrix hessian_of(const ScalarFunction& f, const Vector& x) {
  if (f.hessian) return f.hessian(x);
  const Eigen::Index n = x.size();
  Matrix h(n, n);
  Vector xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = fd_step(x[i]);
    xp[i] = x[i] + step;
    const Vector gp = f.gradient(xp);
    xp[i] = x[i] - step;
    const Vector gm = f.gradient(xp);
    xp[i] = x[i];
    h.col(i) = (gp - gm) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

Matrix weighted_hessian_of(const VectorFunction& c, const Vector& x, const Vector& weights) {
  const Eigen::Index n = x.size();
  if (c.empty() || weights.isZero(0.0)) return Matrix::Zero(n, n);
  if (c.weighted_hessian) return c.weighted_hessian(x, weights);
  Matrix h(n, n);
  Vector xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = fd_step(x[i]);
    xp[i] = x[i] + step;
    const Vector gp = c.jacobian(xp).transpose() * weights;
    xp[i] = x[i] - step;
    const Vector gm = c.jacobian(xp).transpose() * weights;
    xp[i] = x[i];
    h.col(i) = (gp - gm) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

VectorFunction empty_vector_function() {
  VectorFunction c;
  c.size = 0;
  c.value = [](const Vector&) { return Vector(0); };
  c.jacobian = [](const Vector& x) { return Matrix(0, x.size()); };
  return c;
}

VectorFunction concatenate(VectorFunction a, VectorFunction b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  VectorFunction c;
  c.size = a.size + b.size;
  const int na = a.size;
  c.value = [a, b](const Vector& x) {
    Vector va = a.value(x), vb = b.value(x);
    Vector out(va.size() + vb.size());
    out << va, vb;
    return out;
  };
  c.jacobian = [a, b](const Vector& x) {
    Matrix ja = a.jacobian(x), jb = b.jacobian(x);
    Matrix out(ja.rows() + jb.rows(), x.size());
    out << ja, jb;
    return out;
  };
  c.weighted_hessian = [a, b, na](const Vector& x, const Vector& w) {
    return Matrix(weighted_hessian_of(a, x, w.head(na)) + weighted_hessian_of(b, x, w.tail(b.size)));
  };
  return c;
}

// ---- VariablePartition ----------------------------------------------------

void VariablePartition::validate() const {
  if (m() < 1) throw ConfigError("grey-box partition needs at least one black-box input");
  if (p() < 1) throw ConfigError("grey-box partition needs at least one black-box output");
  std::vector<int> all;
  all.insert(all.end(), w_indices.begin(), w_indices.end());
  all.insert(all.end(), y_indices.begin(), y_indices.end());
  all.insert(all.end(), z_indices.begin(), z_indices.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < static_cast<int>(all.size()); ++i)
    if (all[i] != i) throw ConfigError("variable partition must be disjoint and cover 0..dim-1");
}

Vector VariablePartition::gather_w(const Vector& x) const {
  Vector w(m());
  for (int i = 0; i < m(); ++i) w[i] = x[w_indices[i]];
  return w;
}

Vector VariablePartition::gather_y(const Vector& x) const {
  Vector y(p());
  for (int i = 0; i < p(); ++i) y[i] = x[y_indices[i]];
  return y;
}

Vector VariablePartition::gather_z(const Vector& x) const {
  Vector z(n());
  for (int i = 0; i < n(); ++i) z[i] = x[z_indices[i]];
  return z;
}

void VariablePartition::scatter_w(const Vector& w, Vector& x) const {
  for (int i = 0; i < m(); ++i) x[w_indices[i]] = w[i];
}

void VariablePartition::scatter_y(const Vector& y, Vector& x) const {
  for (int i = 0; i < p(); ++i) x[y_indices[i]] = y[i];
}

VariablePartition VariablePartition::contiguous(int m, int p, int n) {
  VariablePartition part;
  part.w_indices.resize(m);
  part.y_indices.resize(p);
  part.z_indices.resize(n);
  std::iota(part.w_indices.begin(), part.w_indices.end(), 0);
  std::iota(part.y_indices.begin(), part.y_indices.end(), m);
  std::iota(part.z_indices.begin(), part.z_indices.end(), m + p);
  return part;
}

// ---- BlackBoxEvaluator ----------------------------------------------------

BlackBoxEvaluator::BlackBoxEvaluator(int inputs, int outputs, BlackBoxMap map,
                                     BlackBoxJacobian gradient)
    : inputs_(inputs), outputs_(outputs), map_(std::move(map)), gradient_(std::move(gradient)) {}

Vector BlackBoxEvaluator::evaluate(const Vector& w) {
  if (w.size() != inputs_) throw BlackBoxFault("black-box input has wrong dimension", w);
  if (!w.allFinite()) throw BlackBoxFault("black-box input is not finite", w);
  if (caching_) {
    auto it = cache_.find(key_of(w));
    if (it != cache_.end()) return it->second;
  }
  ++calls_;
  Vector out = map_(w);
  if (out.size() != outputs_)
    throw BlackBoxFault("black-box returned " + std::to_string(out.size()) + " outputs at " + describe(w), w);
  if (!out.allFinite()) throw BlackBoxFault("black-box returned a non-finite value at " + describe(w), w);
  if (caching_) cache_.emplace(key_of(w), out);
  return out;
}

std::optional<Matrix> BlackBoxEvaluator::analytic_gradient(const Vector& w) const {
  if (!gradient_) return std::nullopt;
  Matrix g = gradient_(w);
  if (!g.allFinite()) throw BlackBoxFault("black-box gradient is not finite at " + describe(w), w);
  return g;
}

void BlackBoxEvaluator::set_caching(bool enabled) {
  caching_ = enabled;
  if (!enabled) cache_.clear();
}

void BlackBoxEvaluator::retain_only(const Vector& w) {
  auto it = cache_.find(key_of(w));
  if (it == cache_.end()) {
    cache_.clear();
    return;
  }
  auto kept = *it;
  cache_.clear();
  cache_.insert(std::move(kept));
}

BlackBoxEvaluator BlackBoxEvaluator::fresh_copy() const {
  return BlackBoxEvaluator(inputs_, outputs_, map_, gradient_);
}

// ---- GreyBoxProblem -------------------------------------------------------

void GreyBoxProblem::validate() const {
  partition.validate();
  const int dim = partition.dimension();
  if (glass.dimension != dim) throw ConfigError("glass-box dimension does not match the partition");
  if (glass.lower.size() != dim || glass.upper.size() != dim)
    throw ConfigError("variable bounds have the wrong dimension");
  if (black.inputs() != partition.m() || black.outputs() != partition.p())
    throw ConfigError("black-box dimensions do not match the partition");
  if (x0.size() != dim) throw ConfigError("initial point has the wrong dimension");
  for (int i = 0; i < dim; ++i) {
    if (glass.lower[i] > glass.upper[i]) throw ConfigError("lower bound exceeds upper bound");
    if (x0[i] < glass.lower[i] || x0[i] > glass.upper[i])
      throw ConfigError("initial point violates variable bounds at index " + std::to_string(i));
  }
}

Vector GreyBoxProblem::w_lower() const { return partition.gather_w(glass.lower); }
Vector GreyBoxProblem::w_upper() const { return partition.gather_w(glass.upper); }

// ---- operations -----------------------------------------------------------

Vector evaluate_blackbox(GreyBoxProblem& problem, const Vector& w) {
  const Vector lo = problem.w_lower(), hi = problem.w_upper();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double slack = 1e-8 * (1.0 + std::abs(w[i]));
    if (w[i] < lo[i] - slack || w[i] > hi[i] + slack)
      throw BlackBoxFault("black-box input outside the bounds of w at " + describe(w), w);
  }
  return problem.black.evaluate(w);
}

Matrix blackbox_gradient(GreyBoxProblem& problem, const Vector& w) {
  if (auto g = problem.black.analytic_gradient(w)) return *g;
  const int m = problem.partition.m();
  const int p = problem.partition.p();
  const Vector lo = problem.w_lower(), hi = problem.w_upper();
  Matrix jac(p, m);
  Vector wp = w, wm = w;
  for (int i = 0; i < m; ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(w[i]));
    double center = w[i];
    if (center + h > hi[i]) center = hi[i] - h;
    if (center - h < lo[i]) center = lo[i] + h;
    wp[i] = center + h;
    wm[i] = center - h;
    const Vector fp = problem.black.evaluate(wp);
    const Vector fm = problem.black.evaluate(wm);
    jac.col(i) = (fp - fm) / (2.0 * h);
    if (!jac.col(i).allFinite()) throw BlackBoxFault("non-finite difference quotient", w);
    wp[i] = w[i];
    wm[i] = w[i];
  }
  return jac;
}

double infeasibility(GreyBoxProblem& problem, const SurrogateModel& surrogate, const Vector& x) {
  const Vector w = problem.partition.gather_w(x);
  const Vector d = evaluate_blackbox(problem, w);
  return (surrogate.evaluate(w) - d).norm();
}

double output_gap(GreyBoxProblem& problem, const Vector& x) {
  const Vector w = problem.partition.gather_w(x);
  return (problem.partition.gather_y(x) - evaluate_blackbox(problem, w)).norm();
}

GlassResiduals glass_residuals(const GreyBoxProblem& problem, const Vector& x) {
  GlassResiduals r;
  r.h = problem.glass.equalities.empty() ? Vector(0) : problem.glass.equalities.value(x);
  r.g = problem.glass.inequalities.empty() ? Vector(0) : problem.glass.inequalities.value(x);
  return r;
}

// ---- subprocess adapter ---------------------------------------------------

namespace {

class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
      throw Error(std::string("socketpair failed: ") + std::strerror(errno));
    pid_ = ::fork();
    if (pid_ < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::close(fds[0]);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ > 0) ::waitpid(pid_, nullptr, 0);
  }

  std::string exchange(const std::string& line, const Vector& w) {
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t k = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (k <= 0) throw BlackBoxFault("external evaluator closed its input" + exit_note(), w);
      sent += static_cast<std::size_t>(k);
    }
    std::string reply;
    for (;;) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        reply = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return reply;
      }
      char chunk[4096];
      const ssize_t k = ::recv(fd_, chunk, sizeof chunk, 0);
      if (k <= 0) throw BlackBoxFault("external evaluator closed its output" + exit_note(), w);
      buffer_.append(chunk, static_cast<std::size_t>(k));
    }
  }

 private:
  std::string exit_note() {
    int status = 0;
    if (pid_ > 0 && ::waitpid(pid_, &status, WNOHANG) == pid_) {
      pid_ = -1;
      if (WIFEXITED(status)) return " (exit status " + std::to_string(WEXITSTATUS(status)) + ")";
      return " (terminated by signal)";
    }
    return "";
  }

  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace

BlackBoxMap make_subprocess_map(const std::string& command, int inputs, int outputs) {
  auto child = std::make_shared<ChildProcess>(command);
  return [child, inputs, outputs](const Vector& w) -> Vector {
    if (w.size() != inputs) throw BlackBoxFault("external evaluator input has wrong dimension", w);
    std::string line;
    char buf[64];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? " " : "", w[i]);
      line += buf;
    }
    line += '\n';
    const std::string reply = child->exchange(line, w);
    Vector out(outputs);
    const char* p = reply.c_str();
    for (int i = 0; i < outputs; ++i) {
      char* end = nullptr;
      out[i] = std::strtod(p, &end);
      if (end == p) throw BlackBoxFault("malformed reply from external evaluator: '" + reply + "'", w);
      p = end;
    }
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    if (*p != '\0') throw BlackBoxFault("malformed reply from external evaluator: '" + reply + "'", w);
    return out;
  };
}

}  // namespace trf
