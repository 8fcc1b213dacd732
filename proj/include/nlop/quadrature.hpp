#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nlop/error.hpp"
#include "nlop/exprfunc.hpp"
#include "nlop/kernels.hpp"
#include "nlop/multiindex.hpp"

namespace nlop {

enum class TailPolicy { growth_certified, fixed_radius };

struct QuadConfig {
  double abs_tol = 1e-9;
  double rel_tol = 1e-8;
  int max_depth = 40;
  TailPolicy tail_policy = TailPolicy::growth_certified;
  double fixed_radius = 1e4;
  int max_panels = 4000;

  double target(double value) const;
  QuadConfig tightened(double factor) const;
};

struct QuadResult {
  double value = 0.0;
  double err_est = 0.0;
  long evaluations = 0;
  bool converged = true;

  QuadResult& operator+=(const QuadResult& other);
  friend QuadResult operator+(QuadResult a, const QuadResult& b) { return a += b; }
  friend QuadResult operator-(QuadResult a, const QuadResult& b) {
    QuadResult nb = b;
    nb.value = -nb.value;
    return a += nb;
  }
  QuadResult scaled(double factor) const;
};

/// Raised when the integrability margin of a tail is not positive.
struct DivergentTail : NumericalError {
  using NumericalError::NumericalError;
};

using Integrand = std::function<double(std::span<const double>)>;
using Integrand1D = std::function<double(double)>;

/// Adaptive Gauss–Kronrod (7/15) on [a,b], split first at the given breakpoints.
QuadResult integrate_interval(const Integrand1D& f, double a, double b, const QuadConfig& cfg,
                              std::span<const double> breakpoints = {});

/// Same driver for integrands that carry their own error (nested integrals).
QuadResult integrate_interval_nested(const std::function<QuadResult(double)>& f, double a, double b,
                                     const QuadConfig& cfg, std::span<const double> breakpoints = {});

struct Ball {
  Point center;
  double radius;
};
struct Annulus {
  Point center;
  double inner;
  double outer;
};
struct Interval {
  double a;
  double b;
};
using Region = std::variant<Ball, Annulus, Interval>;

/// ∫_region f for n ∈ {1,2}. `radial_breaks` lists spheres |y| = b (about the
/// origin) across which f may jump or kink.
QuadResult integrate_region(const Integrand& f, const Region& region, int dim, const QuadConfig& cfg,
                            std::span<const double> radial_breaks = {});

/// Radial limits [lo, hi] along a unit direction ω from the polar centre.
using RadialLimits = std::function<std::pair<double, double>(std::span<const double>)>;

/// ∫ f(c + ρω) ρ^{n-1} dρ dω over the star-shaped set described by `limits`.
/// Directions ω and -ω are always integrated together.
QuadResult integrate_polar(const Integrand& f, std::span<const double> center, int dim, const RadialLimits& limits,
                           const QuadConfig& cfg, std::span<const double> radial_breaks = {});

/// Distance from c along ω to the sphere |y| = radius (c inside the sphere).
double distance_to_sphere(std::span<const double> c, std::span<const double> omega, double radius);

/// ∫_{|y-center| > inner_radius} f(y) dy for f bounded by C(1+|y|)^{growth-decay}.
/// Integrates out to a radius R* beyond which the analytic power-law remainder
/// (with C estimated by sampling) is below half the tolerance; err_est
/// includes that remainder. Throws DivergentTail when decay - growth <= n.
QuadResult integrate_tail(const Integrand& f, int dim, double inner_radius, double growth, double decay,
                          const QuadConfig& cfg, std::span<const double> center = {},
                          std::span<const double> radial_breaks = {});

/// ½ ∫_{B_r} (2u(x) - u(x+z) - u(x-z)) K(x, x+z) dz, i.e. the principal value
/// of ∫_{B_r(x)} (u(x)-u(y)) K(x,y) dy. Dyadic shells toward z = 0; the
/// innermost ball uses a local model D(ρω) ≈ a ρ^ϑ + b ρ^{ϑ+2} fitted to the
/// second difference. Non-symmetric kernels are admitted only for ϑ ≤ 1.
QuadResult pv_second_difference(const ScalarField& u, const Kernel& K, std::span<const double> x, double r,
                                const QuadConfig& cfg);

/// ∫_0^1 (1-t)^{m-1} g(t) dt.
QuadResult integrate_unit_interval_weighted(const Integrand1D& g, int m, const QuadConfig& cfg);

/// ∫_{B_ρ0} |z|^power K(x, x+z) dz via dyadic shells; converged = false when
/// the shells do not shrink geometrically (near-diagonal divergence).
QuadResult near_diagonal_moment(const Kernel& K, std::span<const double> x, double rho0, double power,
                                const QuadConfig& cfg, bool absolute = false);

}  // namespace nlop
