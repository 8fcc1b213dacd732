#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlop/exprfunc.hpp"
#include "nlop/kernels.hpp"
#include "nlop/multiindex.hpp"
#include "nlop/quadrature.hpp"

namespace nlop {

/// e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}) on [0,1], 0 below and 1 above.
double smoothstep(double t);

/// Cut-off τ with τ = 1 on B_3 and τ = 0 outside B_R.
struct CutoffSpec {
  enum class Kind { sharp, smooth };
  Kind kind = Kind::sharp;
  double R = 8.0;
  /// Transition width of the smooth variant: τ = 1 on B_{R-w}.
  double width = 1.0;

  static CutoffSpec sharp(double R);
  static CutoffSpec smooth(double R, double width);
  /// "sharp:R" or "smooth:R,w".
  static CutoffSpec parse(const std::string& src);
  std::string str() const;

  void validate() const;
  double operator()(std::span<const double> y) const;
  /// Radii where τ is not smooth.
  std::vector<double> breaks() const;
};

/// τu with u's metadata; compactly supported.
ScalarField apply_cutoff(const ScalarField& u, const CutoffSpec& tau);

using ThetaMap = std::map<MultiIndex, double, GradedLex>;

struct Decomposition {
  Point x;
  int m = 0;
  QuadResult f1;
  QuadResult f2;
  QuadResult fstar;
  Polynomial P{1, -1};
  ThetaMap theta;
  /// Σ |x^α| err(θ_α): the error carried into P(x).
  double P_err = 0.0;
  double total = 0.0;

  double err_est() const { return f1.err_est + f2.err_est + fstar.err_est + P_err; }
  bool converged() const { return f1.converged && f2.converged && fstar.converged; }
};

/// Integral-form Taylor remainder with K(x,y) = Σ_{|α|<m} ∂^α_x K(0,y) x^α/α! - ψ(x,y).
/// For m = 0 the sum is empty and ψ = -K.
double psi(const Kernel& K, int m, std::span<const double> x, std::span<const double> y, const QuadConfig& cfg);

/// Fast ψ for the inner loops: 20-point Gauss–Legendre in t, which is
/// exact to rounding for |y| >= 3 > 1 >= |x| where t ↦ ∂^α K(tx,y) is smooth.
class PsiEvaluator {
 public:
  PsiEvaluator(const Kernel& K, int m);
  double operator()(std::span<const double> x, std::span<const double> y) const;

 private:
  const Kernel* K_;
  int m_;
  std::vector<MultiIndex> alphas_;
};

/// θ_α = ∫_{B_3^c} τu ∂^α_x K(0,y)/α! dy for |α| <= m-1.
std::map<MultiIndex, QuadResult, GradedLex> theta_coeffs(const ScalarField& u, const Kernel& K,
                                                        const CutoffSpec& tau, int m, const QuadConfig& cfg);

/// A(τu)(x) = P(x) + f1 + f2 + f*. With check_hypotheses the kernel's
/// admissible ϑ, its Taylor order and the membership of u are verified first.
Decomposition decompose(const ScalarField& u, const Kernel& K, const CutoffSpec& tau, int m,
                        std::span<const double> x, const QuadConfig& cfg, bool check_hypotheses = true);

/// ∫ (τu(x) - τu(y)) K(x,y) dy without any Taylor step: principal value on
/// B_1(x), then the certified tail beyond.
QuadResult direct_apply(const ScalarField& u, const Kernel& K, const CutoffSpec& tau, std::span<const double> x,
                        const QuadConfig& cfg);

/// Same for u itself, which must be integrable against the kernel tail.
QuadResult direct_apply(const ScalarField& u, const Kernel& K, std::span<const double> x, const QuadConfig& cfg);

/// ∫_{B_R^c} |u(y)| sup_{|α|=m, x∈B_1} |∂^α_x K(x,y)| dy.
QuadResult tail_bound(const ScalarField& u, const Kernel& K, int m, double R, const QuadConfig& cfg);

/// 33 uniform points on [-0.96, 0.96] for n = 1; centre plus 12 radii × 13
/// angles for n = 2.
std::vector<Point> unit_ball_grid(int n);

struct LimitOptions {
  /// Convergence threshold on grid residuals after removing degree m-1 polynomials.
  double tol = 1e-6;
  CutoffSpec::Kind cutoff = CutoffSpec::Kind::sharp;
  double smooth_width = 1.0;
  bool check_hypotheses = true;
};

struct LimitReport {
  int m = 0;
  std::vector<Point> grid;
  std::vector<double> R_schedule;
  /// fR_values[k][i] = f_{R_k}(grid[i]) = f1 + f2 + f*.
  std::vector<std::vector<double>> fR_values;
  std::vector<Polynomial> P_R;
  /// Largest err_est over the grid at each R.
  std::vector<double> quad_err;
  std::vector<double> tail_bounds;
  /// f_u = f1 + f2 + f3 with f3 = ∫_{B_3^c} u ψ integrated to infinity.
  std::vector<double> f_limit;
  std::vector<double> f_limit_err;
  /// Residual of f_{R_k} - f_{R_{k-1}} after the best degree m-1 fit (entry 0 unused).
  std::vector<double> successive_residuals;
  /// Residual of f_{R_k} - f_u after the best degree m-1 fit.
  std::vector<double> limit_residuals;
  /// First schedule index from which every limit residual is within tol.
  std::optional<int> converged_at;
  bool converged = false;
  std::string diagnostic;
};

LimitReport limit_driver(const ScalarField& u, const Kernel& K, int m, const std::vector<Point>& grid,
                         const std::vector<double>& R_schedule, const QuadConfig& cfg, const LimitOptions& opts = {});

/// Residual of values - best degree `degree` polynomial on the grid.
PolyFit fit_on_grid(const std::vector<Point>& grid, std::span<const double> values, int degree);

/// Thread count from NLOP_THREADS (default: hardware concurrency, at least 1).
int thread_count();

/// Runs body(i) for i in [0, count); results must be written by index.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace nlop
