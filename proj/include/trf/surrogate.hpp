#pragma once

// Local surrogate models s(w) of the black-box map d(w), built from a
// deterministic sample design inside the sampling region of radius sigma.

#include "trf/problem.hpp"
#include "trf/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace trf {

enum class SurrogateKind { Linear, Quadratic, SimplifiedQuadratic, GaussianProcess, TaylorSeries, Hybrid };

inline constexpr SurrogateKind kAllSurrogateKinds[] = {
    SurrogateKind::Linear,          SurrogateKind::Quadratic,    SurrogateKind::SimplifiedQuadratic,
    SurrogateKind::GaussianProcess, SurrogateKind::TaylorSeries, SurrogateKind::Hybrid};

/// Short tag used in files and on the command line: l, q, sq, gp, ts, h.
std::string_view short_name(SurrogateKind kind);
std::string_view long_name(SurrogateKind kind);
/// Accepts short tags and long names (case-insensitive); throws ConfigError.
SurrogateKind parse_surrogate_kind(std::string_view text);

// ---- Gaussian-process regression ------------------------------------------

/// Squared-exponential kernel k(a, b) = signal_variance * exp(-|a-b|^2 / (2 l^2)).
/// The nugget is added to the diagonal as nugget * signal_variance.
struct KernelSpec {
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double nugget = 0.0;

  double operator()(const Vector& a, const Vector& b) const;
};

/// Zero-mean GP posterior for one scalar output.
class GaussianProcess {
 public:
  GaussianProcess() = default;
  /// Factorizes K + nugget. On Cholesky failure the nugget is raised x10 up
  /// to 1e-4; past that a Error is thrown.
  GaussianProcess(Matrix training_inputs, Vector targets, KernelSpec kernel);

  double mean(const Vector& w) const;
  Vector mean_gradient(const Vector& w) const;
  Matrix mean_hessian(const Vector& w) const;
  double variance(const Vector& w) const;

  const KernelSpec& kernel() const { return kernel_; }
  const Vector& weights() const { return alpha_; }
  const Matrix& inputs() const { return inputs_; }
  int size() const { return static_cast<int>(inputs_.rows()); }

 private:
  Matrix inputs_;  // one training point per row
  Vector alpha_;   // (K + nugget)^-1 y
  Eigen::LLT<Matrix> chol_;
  KernelSpec kernel_;
};

// ---- samples --------------------------------------------------------------

struct SampleSet {
  Vector center;
  double radius = 0.0;
  std::vector<Vector> points;  // points[0] is the center
  std::vector<Vector> values;
  double design_condition = 1.0;
  std::uint64_t seed = 0;
};

int required_samples(SurrogateKind kind, int m);

/// Deterministic design inside the infinity-ball of radius sigma (clipped to
/// the bounds of w) with black-box values charged to the problem ledger.
///
/// Stencil order is center, center + sigma e_i (all i), center - sigma e_i
/// (all i); Linear keeps the first m+1 points. Quadratic appends
/// center + sigma (e_i + e_j)/sqrt(2) for i < j. TaylorSeries uses the
/// center only. When a stencil point leaves the bounds, the offset on that
/// axis is mirrored or halved so that the design stays poised.
SampleSet design_samples(SurrogateKind kind, GreyBoxProblem& problem, const Vector& center,
                         double sigma, std::uint64_t seed);

// ---- the model ------------------------------------------------------------

class SurrogateModel {
 public:
  /// Polynomial coefficients per output, in scaled coordinates u = (w - c) / sigma:
  ///   s(w) = b0 + b.u + sum bq_i u_i^2 + sum_{i<j} cross(i,j) u_i u_j
  struct Polynomial {
    Vector b0;                   // p
    Matrix linear;               // p x m
    Matrix square;               // p x m (zero for Linear)
    std::vector<Matrix> cross;   // p entries of m x m, strictly upper (Quadratic only)
  };
  /// d(c) + grad d(c) (w - c), the global basis fixed at zero.
  struct Taylor {
    Vector value;   // p
    Matrix jacobian;  // p x m
  };
  /// GP on residuals over a prior mean (linear plane for GaussianProcess,
  /// the Taylor expansion for Hybrid), plus an offset that pins s(c) = d(c).
  struct Gp {
    Taylor mean;
    std::vector<GaussianProcess> residual;  // one per output
    Vector offset;
  };

  SurrogateModel() = default;
  SurrogateModel(SurrogateKind kind, Vector center, double radius, Polynomial poly);
  SurrogateModel(SurrogateKind kind, Vector center, double radius, Taylor taylor);
  SurrogateModel(SurrogateKind kind, Vector center, double radius, Gp gp);

  SurrogateKind kind() const { return kind_; }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }
  int inputs() const { return static_cast<int>(center_.size()); }
  int outputs() const;

  Vector evaluate(const Vector& w) const;
  /// p x m Jacobian of the surrogate.
  Matrix gradient(const Vector& w) const;
  /// sum_i weights_i * Hess s_i(w), in closed form for every kind.
  Matrix weighted_hessian(const Vector& w, const Vector& weights) const;
  /// True for the kinds whose curvature is part of the model (Quadratic family).
  bool has_curvature() const;

  const Polynomial* polynomial() const { return std::get_if<Polynomial>(&params_); }
  const Taylor* taylor() const { return std::get_if<Taylor>(&params_); }
  const Gp* gp() const { return std::get_if<Gp>(&params_); }

 private:
  SurrogateKind kind_ = SurrogateKind::Linear;
  Vector center_;
  double radius_ = 0.0;
  std::variant<Polynomial, Taylor, Gp> params_;
};

/// Fits `kind` to the samples (center first). Raises IllPoisedDesign when the
/// fit matrix condition exceeds 1e8 even after one seeded jitter-and-refit.
SurrogateModel fit(SurrogateKind kind, const SampleSet& samples, GreyBoxProblem& problem);

/// Convenience: design_samples followed by fit.
SurrogateModel build_surrogate(SurrogateKind kind, GreyBoxProblem& problem, const Vector& center,
                               double sigma, std::uint64_t seed);

struct FullyLinearReport {
  double value_error = 0.0;
  std::optional<double> gradient_error;  // only when the black box has an analytic gradient
};

/// Probes n_probe seeded points in the sigma-ball around the model center and
/// reports max ||s - d|| and max ||grad s - grad d||_F. Charges black-box calls.
FullyLinearReport fully_linear_diagnostic(const SurrogateModel& model, GreyBoxProblem& problem,
                                          double sigma, int n_probe, std::uint64_t seed);

}  // namespace trf
