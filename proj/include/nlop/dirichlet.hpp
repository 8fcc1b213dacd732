#pragma once

#include <string>
#include <vector>

#include "nlop/exprfunc.hpp"
#include "nlop/kernels.hpp"
#include "nlop/operator.hpp"
#include "nlop/quadrature.hpp"

namespace nlop {

/// Au = f in (-1,1), u = g outside, for the one-dimensional pure power kernel
/// c |x-y|^{-(1+2s)} (frac_lap, optionally normalized).
struct DirichletProblem {
  KernelSpec kernel;
  ScalarField f;
  /// Exterior data; only evaluated for |x| >= 1.
  ScalarField g;
  /// Order of the generalized problem Au ≐ f (up to degree m-1 polynomials).
  int m = 0;
  /// Number of interior collocation nodes.
  int N = 160;

  void validate() const;
};

enum class Interpolation { linear, cubic };

struct DirichletOptions {
  /// Interpolant of the nodal values away from the collocation point.
  Interpolation far_field = Interpolation::cubic;
  /// Off-collocation points where Au - f is measured (solve_standard).
  int verify_points = 11;
  /// A solution is flagged when its verification residual exceeds this.
  double residual_tol = 5e-2;
  /// Schedule used by limit_driver in solve_generalized.
  std::vector<double> R_schedule{8.0, 16.0, 32.0, 64.0, 128.0};
};

struct DirichletSolution {
  /// Interior nodes -cos(πj/(N+1)), j = 1..N.
  std::vector<double> nodes;
  std::vector<double> values;
  /// Natural cubic spline through the nodal and boundary values inside, exterior data outside.
  ScalarField extension;
  std::vector<double> verify_x;
  /// Au - f at verify_x (standard), or the limit_driver residual profile (generalized).
  std::vector<double> verify_residuals;
  /// sup |verify_residuals| after removing a degree m-1 polynomial.
  double residual = 0.0;
  bool ok = true;
  std::string diagnostic;
};

/// Graded collocation nodes -cos(πj/(N+1)), j = 1..N.
std::vector<double> graded_nodes(int N);

/// Collocation solve of Au = f in (-1,1), u = g outside.
DirichletSolution solve_standard(const DirichletProblem& problem, const QuadConfig& cfg,
                                 const DirichletOptions& opts = {});

/// Same with the right-hand side given at the nodes; no verification step.
DirichletSolution solve_standard_nodal(const DirichletProblem& problem, const std::vector<double>& f_nodes,
                                       const QuadConfig& cfg, const DirichletOptions& opts = {});

/// Au ≐ f with exterior data u0 of polynomial growth: u1 = χ_{B_4^c} u0 is
/// handled through its f_{u1}, the rest is a standard problem with exterior
/// data χ_{B_4 \ B_1} u0. Verified with limit_driver on the unit-ball grid.
DirichletSolution solve_generalized(const DirichletProblem& problem, const QuadConfig& cfg,
                                    const DirichletOptions& opts = {});

struct SolutionFamily {
  /// ũ_P for P = x^j, j = 0..m-1, each vanishing outside (-1,1).
  std::vector<DirichletSolution> members;
  /// Gram matrix of the nodal values, (1/N) Σ v_a v_b.
  std::vector<std::vector<double>> gram;
  double gram_det = 0.0;
  bool independent = false;
};

SolutionFamily solution_family(const KernelSpec& kernel, int m, int N, const QuadConfig& cfg,
                               const DirichletOptions& opts = {});

/// (-Δ)^s (1-x²)^s_+ = Γ(1+2s) in (-1,1) for the normalized kernel.
double getoor_constant(double s);

/// Residual of the limit_driver verification for u: sup over the grid of
/// f_u - f after removing the best degree m-1 polynomial.
double generalized_residual(const ScalarField& u, const ScalarField& f, const Kernel& K, int m,
                            const std::vector<double>& R_schedule, const QuadConfig& cfg,
                            std::vector<double>* profile = nullptr);

}  // namespace nlop
