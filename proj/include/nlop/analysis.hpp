#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlop/exprfunc.hpp"
#include "nlop/kernels.hpp"
#include "nlop/multiindex.hpp"
#include "nlop/operator.hpp"
#include "nlop/quadrature.hpp"

namespace nlop {

/// u_k(x) = k x 1_{(k,∞)}(x) in one dimension, against K = 1/|x-y|^2,
/// truncated at R.
struct CounterexampleCase {
  double k = 10.0;
  double R = 100.0;
  double x = 0.0;

  /// Requires R > k > 1 and |x| < 1.
  void validate() const;
};

/// f_k(x) = kx/(k-x) + k log(k/(k-x)).
double counterexample_fk(double k, double x);

/// k ∫_k^R y/(y-x)^2 dy = f_k(x) + k log((R-x)/R) - kx/(R-x) + k log R - k log k.
/// With the convention Au = ∫(u(x)-u(y))K, A(χ_R u_k)(x) is minus this value.
double counterexample_truncated(double k, double R, double x);

/// The same integral by adaptive quadrature; an independent check of the closed form.
QuadResult counterexample_quadrature(double k, double R, double x, const QuadConfig& cfg);

/// (1/log k) ∫_k^{k^2} y/(y-x)^2 dy: the s = 1/2 member of the family
/// u_k = -1_{(k,k^2)} x^{2s} / log k, for which Au_k = f_k on (-1,1).
double footnote_fk(double k, double x);

/// Bounds (k/(k+1))^{1+2s} <= f_k <= (k/(k-1))^{1+2s} valid on (-1,1).
std::pair<double, double> footnote_bounds(double k, double s);

struct StabilityOptions {
  /// Radii for the uniform tail and the middle-range hypotheses.
  std::vector<double> radii{8.0, 64.0, 512.0};
  /// Schedule handed to limit_driver when m > 0.
  std::vector<double> R_schedule{16.0, 64.0, 256.0};
  /// Points of B_1 where per-x hypotheses are evaluated.
  std::vector<Point> x_samples;
  /// A hypothesis "lim_k Q_k = 0" is judged to hold when the last entry's Q is below this.
  double hypothesis_tol = 1e-2;
  /// The conclusion holds when the last entry's sup distance to the limit is below this.
  double conclusion_tol = 1e-2;
};

struct StabilityEntry {
  std::string label;
  /// sup over a B_4 sample of |u_k - u| and of |∇(u_k - u)|.
  double b4_distance = 0.0;
  double b4_gradient_distance = 0.0;
  /// max over x samples of ∫_{B_3^c} |u - u_k| |K(x,y)| dy.
  double conuk2 = 0.0;
  /// ∫_{B_R^c} |u_k| sup_{|η|=m, z∈B_1} |∂^η K(z,y)| dy for each probe radius.
  std::vector<double> tail;
  /// max over x samples and probe radii of |∫_{B_R \ B_1(x)} (w(x)-w(y)) K(x,y) dy|, w = u - u_k.
  double middle_range = 0.0;
  /// Au_k on the grid (m = 0) or limit_driver's f_{u_k} (m > 0).
  std::vector<double> f_values;
  /// Grid sup of f_k - f_u after removing the best degree m-1 polynomial.
  double sup_to_limit = 0.0;
  double quad_err = 0.0;
  bool ok = true;
  std::string error;
};

struct HypothesisVerdict {
  std::string name;
  /// The value the verdict is based on.
  double value = 0.0;
  bool holds = false;
};

struct StabilityReport {
  int m = 0;
  std::vector<Point> grid;
  std::vector<double> radii;
  std::vector<double> f_limit;
  std::vector<StabilityEntry> entries;
  /// b4_convergence, conuk2, middle_range, uniform_tail.
  std::vector<HypothesisVerdict> hypotheses;
  HypothesisVerdict conclusion;
  /// Index from which sup_to_limit decreases monotonically, when it does.
  std::optional<std::size_t> monotone_from;
};

/// Evaluates the stability hypotheses and the conclusion along a finite
/// sequence u_seq → u_lim. Quadrature failures are recorded per entry.
StabilityReport stability_probe(const std::vector<ScalarField>& u_seq, const ScalarField& u_lim, const Kernel& K,
                                int m, const std::vector<Point>& grid, const QuadConfig& cfg,
                                const StabilityOptions& opts = {});

struct PolyRecovery {
  Polynomial P{1, -1};
  /// Least-squares residual sup.
  double residual = 0.0;
  /// Discrete minimax distance of f2 - f1 to polynomials of degree <= m-1 (Lawson iteration).
  double minimax_residual = 0.0;
  bool pass = false;
};

/// Fits f2 - f1 on the grid by a polynomial of degree <= m-1. pass when the
/// minimax residual is within tol·max(1, sup|f2 - f1|).
PolyRecovery poly_difference_recovery(const std::vector<Point>& grid, std::span<const double> f1,
                                      std::span<const double> f2, int m, double tol = 1e-8);

/// Discrete Chebyshev approximation by Lawson's reweighted least squares.
/// Returns the best polynomial and its sup error on the samples.
PolyFit minimax_fit(const std::vector<Point>& grid, std::span<const double> values, int degree,
                    int max_iter = 5000, double rel_gap = 1e-7);

}  // namespace nlop
