#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlop/exprfunc.hpp"
#include "nlop/kernels.hpp"
#include "nlop/operator.hpp"
#include "nlop/quadrature.hpp"

namespace nlop {

/// below: φ <= u near x0 (supersolution test, Aφ̃(x0) >= f).
/// above: φ >= u near x0 (subsolution test, Aφ̃(x0) <= f).
enum class Side { below, above };

std::string to_string(Side side);
Side parse_side(const std::string& name);

struct TouchingTest {
  Point x0;
  ScalarField phi;
  Side side = Side::below;
  /// min over the verification ball of u - φ (below) or φ - u (above).
  double touch_gap = 0.0;
  /// |φ(x0) - u(x0)|.
  double contact_error = 0.0;
  double curvature = 0.0;
  /// The minimum gap was attained away from the requested point.
  bool recentered = false;
};

/// Measures touch_gap and contact_error of φ against u on B_radius(x0).
TouchingTest make_touching_test(const ScalarField& u, const ScalarField& phi, const Point& x0, Side side,
                                double radius = 0.25);

/// For each curvature c: φ(y) = u(x0) + ∇u(x0)·(y-x0) + c/2 |y-x0|², shifted
/// vertically until it touches u on B_radius(x0) from the given side. When the
/// contact point is away from x0 the test is re-centred there.
std::vector<TouchingTest> paraboloid_family(const ScalarField& u, const Point& x0, const std::vector<double>& curvatures,
                                            Side side, double radius = 0.25);

struct ViscosityOptions {
  /// φ is glued to u outside this ball around x0 with a smooth transition on [ρ/2, ρ].
  double glue_radius = 0.25;
  double margin_tol = 1e-3;
  /// Tests with contact error or negative gap beyond this do not touch and are skipped.
  double touch_tol = 1e-8;
  /// Required sup over the grid of |f_R - f| at the last scheduled R.
  double uniform_tol = 1e-2;
  /// A degree <= m-1 polynomial added to f and removed through the P_R channel.
  std::optional<Polynomial> shift;
};

struct ViscosityMargin {
  std::size_t test = 0;
  double R = 0.0;
  /// A(χ_R φ̃)(x0).
  double A_test = 0.0;
  /// f(x0) + (f_R - f_u)(x0) + P_R(x0).
  double target = 0.0;
  double margin = 0.0;
  double quad_err = 0.0;
};

struct ViscosityReport {
  int m = 0;
  std::vector<double> R_schedule;
  std::vector<TouchingTest> tests;
  std::vector<bool> applicable;
  std::vector<ViscosityMargin> margins;
  double min_margin = 0.0;
  /// sup over the unit-ball grid of |f_R - f| per scheduled R.
  std::vector<double> uniform_gap;
  bool pass = false;
  /// "no violation found" or "violation found"; never a proof of solutionhood.
  std::string verdict;
};

/// φ̃ = ηφ + (1-η)u with η = 1 on B_{ρ/2}(x0) and η = 0 outside B_ρ(x0).
ScalarField glue(const ScalarField& u, const ScalarField& phi, const Point& x0, double radius);

/// Checks the side-appropriate inequality between A(χ_R φ̃)(x0) and
/// f_R + P_R for every test and scheduled R. Refuses kernels without a sign.
ViscosityReport check_viscosity(const ScalarField& u, const Kernel& K, const ScalarField& f, int m,
                                const std::vector<double>& R_schedule, const std::vector<TouchingTest>& tests,
                                const QuadConfig& cfg, const ViscosityOptions& opts = {});

}  // namespace nlop
