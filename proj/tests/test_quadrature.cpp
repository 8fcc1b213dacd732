#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nlop/quadrature.hpp"

using namespace nlop;

namespace {

QuadConfig tight() {
  QuadConfig c;
  c.abs_tol = 1e-13;
  c.rel_tol = 1e-13;
  return c;
}

Kernel frac(double s, int n = 1, bool normalized = false) {
  KernelSpec spec;
  spec.kind = KernelKind::frac_lap;
  spec.dim = n;
  spec.s = s;
  spec.normalized = normalized;
  return build(spec);
}

double dist(std::span<const double> a, std::span<const double> b) {
  double q = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) q += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(q);
}

/// ∫_{B_3 \ B_r(x)} (u(x)-u(y)) K(x,y) dy by polar quadrature about x.
QuadResult outer_part(const ScalarField& u, const Kernel& K, const Point& x, double r, const QuadConfig& cfg) {
  double ux = u(x);
  auto f = [&](std::span<const double> y) { return (ux - u(y)) * K(x, y); };
  auto lim = [&](std::span<const double> w) { return std::make_pair(r, distance_to_sphere(x, w, 3.0)); };
  return integrate_polar(f, x, K.dim(), lim, cfg, u.radial_breaks);
}

}  // namespace

TEST_CASE("closed-form region integrals") {
  QuadResult a = integrate_region([](std::span<const double> y) { return y[0] * y[0]; }, Interval{0.0, 1.0}, 1, tight());
  CHECK(a.converged);
  CHECK(std::abs(a.value - 1.0 / 3.0) <= 1e-12);

  auto inv2 = [](std::span<const double> y) { return 1.0 / (y[0] * y[0]); };
  QuadResult b = integrate_region(inv2, Annulus{{0.0}, 3.0, 100.0}, 1, tight());
  CHECK(b.value == doctest::Approx(2.0 * (1.0 / 3.0 - 1.0 / 100.0)).epsilon(1e-12));

  QuadResult c = integrate_region([](std::span<const double>) { return 1.0; }, Ball{{0.0, 0.0}, 1.0}, 2, tight());
  CHECK(c.value == doctest::Approx(std::numbers::pi).epsilon(1e-13));

  auto inv3 = [](std::span<const double> y) { return std::pow(y[0] * y[0] + y[1] * y[1], -1.5); };
  QuadResult d = integrate_region(inv3, Annulus{{0.0, 0.0}, 1.0, 2.0}, 2, tight());
  CHECK(d.value == doctest::Approx(std::numbers::pi).epsilon(1e-12));

  // Off-centre disc: area is independent of the centre.
  QuadResult e = integrate_region([](std::span<const double>) { return 1.0; }, Ball{{0.4, -0.3}, 0.5}, 2, tight());
  CHECK(e.value == doctest::Approx(0.25 * std::numbers::pi).epsilon(1e-13));
}

TEST_CASE("Gauss-Kronrod panels are exact on low-degree polynomials") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> c(14);
    for (double& v : c) v = U(rng);
    auto p = [&](double t) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
      return acc;
    };
    double exact = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k)
      exact += c[k] * (std::pow(2.0, static_cast<double>(k + 1)) - std::pow(-1.0, static_cast<double>(k + 1))) / (k + 1.0);
    QuadResult r = integrate_interval(p, -1.0, 2.0, tight());
    CHECK(r.evaluations == 15);
    CHECK(std::abs(r.value - exact) <= 1e-13 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("breakpoints and reversed limits") {
  auto step = [](double t) { return t < 0.3 ? 1.0 : 2.0; };
  std::vector<double> br{0.3};
  QuadResult r = integrate_interval(step, 0.0, 1.0, tight(), br);
  CHECK(r.value == doctest::Approx(0.3 + 1.4).epsilon(1e-14));
  QuadResult back = integrate_interval(step, 1.0, 0.0, tight(), br);
  CHECK(back.value == -r.value);
}

TEST_CASE("tail integrals bracket the closed forms") {
  QuadConfig cfg;
  auto check = [&](const Integrand& f, int n, double inner, double growth, double decay, double exact) {
    QuadResult q = integrate_tail(f, n, inner, growth, decay, cfg);
    CHECK(q.converged);
    CHECK(q.err_est <= cfg.target(q.value) * (1.0 + 1e-12));
    CHECK(std::abs(q.value - exact) <= q.err_est + 1e-14);
  };
  check([](std::span<const double> y) { return 1.0 / (y[0] * y[0]); }, 1, 3.0, 0.0, 2.0, 2.0 / 3.0);
  check([](std::span<const double> y) { return std::exp(-std::abs(y[0])); }, 1, 3.0, -1e300, 0.0, 2.0 * std::exp(-3.0));
  check([](std::span<const double> y) { return std::pow(y[0] * y[0] + y[1] * y[1], -1.5); }, 2, 1.0, 0.0, 3.0,
        2.0 * std::numbers::pi);
  // Slow margin: |y|^{-1.5} on |y| > 3 gives 4/√3.
  check([](std::span<const double> y) { return std::pow(std::abs(y[0]), -1.5); }, 1, 3.0, 0.0, 1.5,
        4.0 / std::sqrt(3.0));
  CHECK_THROWS_AS(integrate_tail([](std::span<const double> y) { return 1.0 / std::abs(y[0]); }, 1, 3.0, 0.0, 1.0, cfg),
                  DivergentTail);

  QuadConfig fixed = cfg;
  fixed.tail_policy = TailPolicy::fixed_radius;
  fixed.fixed_radius = 1e3;
  QuadResult q = integrate_tail([](std::span<const double> y) { return 1.0 / (y[0] * y[0]); }, 1, 3.0, 0.0, 2.0, fixed);
  CHECK(q.value == doctest::Approx(2.0 * (1.0 / 3.0 - 1e-3)).epsilon(1e-10));
  CHECK(q.err_est >= 2e-3 * 0.99);
}

TEST_CASE("shifted tail centre") {
  QuadConfig cfg;
  Point c{0.5};
  QuadResult q = integrate_tail([](std::span<const double> y) { return std::pow(y[0] - 0.5, -2.0); }, 1, 2.0, 0.0, 2.0,
                                cfg, c);
  CHECK(q.value == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("slow tails keep the breaks near the origin") {
  QuadConfig cfg;
  // Decay 3/2 pushes the truncation radius past 1e20; the mass on [5, 8] must still be found.
  auto f = [](std::span<const double> y) {
    const double r = std::abs(y[0]);
    return (r < 5.0 ? 0.0 : r < 8.0 ? 1.0 : 0.0) + std::pow(r, -1.5);
  };
  const std::array<double, 2> breaks{5.0, 8.0};
  QuadResult q = integrate_tail(f, 1, 1.0, 0.0, 1.5, cfg, {}, breaks);
  CHECK(q.value == doctest::Approx(6.0 + 4.0).epsilon(1e-8));
  CHECK(std::abs(q.value - 10.0) <= q.err_est + 1e-12);
}

TEST_CASE("weighted unit interval") {
  QuadConfig cfg = tight();
  CHECK(integrate_unit_interval_weighted([](double) { return 1.0; }, 2, cfg).value == doctest::Approx(0.5));
  CHECK(integrate_unit_interval_weighted([](double t) { return t; }, 1, cfg).value == doctest::Approx(0.5));
  CHECK(integrate_unit_interval_weighted([](double t) { return std::exp(t); }, 1, cfg).value ==
        doctest::Approx(std::numbers::e - 1.0).epsilon(1e-14));
  CHECK_THROWS_AS(integrate_unit_interval_weighted([](double) { return 1.0; }, 0, cfg), ValidationError);
}

TEST_CASE("odd integrands cancel exactly on balls") {
  QuadConfig cfg;
  double s = 0.25;
  auto odd1 = [s](std::span<const double> z) { return z[0] * std::pow(std::abs(z[0]), -(1.0 + 2.0 * s)); };
  QuadResult a = integrate_region(odd1, Ball{{0.0}, 0.7}, 1, cfg);
  CHECK(std::abs(a.value) <= 1e-12);
  auto odd2 = [s](std::span<const double> z) {
    return z[0] * std::pow(z[0] * z[0] + z[1] * z[1], -(2.0 + 2.0 * s) / 2.0);
  };
  QuadResult b = integrate_region(odd2, Ball{{0.0, 0.0}, 0.7}, 2, cfg);
  CHECK(std::abs(b.value) <= 1e-12);
}

TEST_CASE("principal value of simple functions") {
  QuadConfig cfg;
  Kernel K = frac(0.75);
  ScalarField c = builtin("constant", {{"c", 2.0}});
  QuadResult z = pv_second_difference(c, K, Point{0.3}, 1.0, cfg);
  CHECK(z.value == 0.0);
  CHECK(z.converged);
  ScalarField lin = builtin("coordinate", {});
  CHECK(std::abs(pv_second_difference(lin, K, Point{0.0}, 1.0, cfg).value) <= 1e-14);
  CHECK(std::abs(pv_second_difference(lin, K, Point{0.37}, 1.0, cfg).value) <= 1e-12);

  // u = x²: D = -2ρ², so the integral is -2 r^{2-2s}/(2-2s).
  for (double s : {0.25, 0.5, 0.75}) {
    ScalarField sq = builtin("monomial", {{"a", 2.0}});
    double r = 0.8;
    QuadResult q = pv_second_difference(sq, frac(s), Point{0.2}, r, cfg);
    CHECK(q.converged);
    CHECK(q.value == doctest::Approx(-2.0 * std::pow(r, 2.0 - 2.0 * s) / (2.0 - 2.0 * s)).epsilon(1e-9));
  }
}

TEST_CASE("split invariance of the near-diagonal decomposition") {
  QuadConfig cfg;
  ScalarField u = from_expr(parse("exp(-x1^2)*(1+x1)", 1));
  for (double s : {0.25, 0.75}) {
    Kernel K = frac(s);
    Point x{0.3};
    QuadResult a = pv_second_difference(u, K, x, 0.5, cfg) + outer_part(u, K, x, 0.5, cfg);
    QuadResult b = pv_second_difference(u, K, x, 1.0, cfg) + outer_part(u, K, x, 1.0, cfg);
    CHECK(a.converged);
    CHECK(b.converged);
    CHECK(std::abs(a.value - b.value) <= a.err_est + b.err_est + 1e-12);
  }
  ScalarField u2 = from_expr(parse("exp(-x1^2-x2^2)*(1+x1*x2)", 2));
  Kernel K2 = frac(0.5, 2);
  Point x2{0.2, -0.3};
  QuadResult a = pv_second_difference(u2, K2, x2, 0.5, cfg) + outer_part(u2, K2, x2, 0.5, cfg);
  QuadResult b = pv_second_difference(u2, K2, x2, 1.0, cfg) + outer_part(u2, K2, x2, 1.0, cfg);
  CHECK(std::abs(a.value - b.value) <= a.err_est + b.err_est + 1e-12);
}

TEST_CASE("Getoor profile has unit normalised half-Laplacian") {
  QuadConfig cfg;
  Kernel K = frac(0.5, 1, true);
  ScalarField u = builtin("getoor", {{"s", 0.5}});
  for (double xv : {0.0, 0.45, -0.8}) {
    Point x{xv};
    double r = 0.5 * (1.0 - std::abs(xv));
    double ux = u(x);
    auto far = [&](std::span<const double> y) { return (ux - u(y)) * K(x, y); };
    double R0 = 4.0;
    auto lim = [&](std::span<const double>) { return std::make_pair(r, R0); };
    QuadResult near = pv_second_difference(u, K, x, r, cfg);
    QuadResult mid = integrate_polar(far, x, 1, lim, cfg, u.radial_breaks);
    double tail = ux * 2.0 / (std::numbers::pi * R0);
    INFO("x = " << xv);
    CHECK(near.converged);
    CHECK(near.value + mid.value + tail == doctest::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("near-diagonal moments detect divergence") {
  QuadConfig cfg;
  Kernel K = frac(0.5);
  CHECK_FALSE(near_diagonal_moment(K, Point{0.0}, 1.0, 1.0, cfg, true).converged);
  CHECK_FALSE(near_diagonal_moment(K, Point{0.0}, 1.0, 0.5, cfg, true).converged);
  QuadResult ok = near_diagonal_moment(K, Point{0.0}, 1.0, 1.2, cfg, true);
  CHECK(ok.converged);
  CHECK(ok.value == doctest::Approx(2.0 / 0.2).epsilon(1e-7));
  KernelSpec g;
  g.kind = KernelKind::gauss;
  QuadResult gm = near_diagonal_moment(build(g), Point{0.0}, 1.0, 0.0, cfg);
  CHECK(gm.value == doctest::Approx(std::sqrt(std::numbers::pi) * std::erf(1.0)).epsilon(1e-9));
  ScalarField u = builtin("getoor", {{"s", 0.5}});
  QuadResult pv = pv_second_difference(u, frac(0.75), Point{1.0}, 0.5, cfg);
  CHECK_FALSE(pv.converged);
}

TEST_CASE("results are bitwise reproducible") {
  QuadConfig cfg;
  ScalarField u = from_expr(parse("exp(-x1^2)*(1+x1)", 1));
  Kernel K = frac(0.75);
  QuadResult a = pv_second_difference(u, K, Point{0.3}, 1.0, cfg);
  QuadResult b = pv_second_difference(u, K, Point{0.3}, 1.0, cfg);
  CHECK(a.value == b.value);
  CHECK(a.err_est == b.err_est);
  CHECK(a.evaluations == b.evaluations);
}
