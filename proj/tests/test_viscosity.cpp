#include <cmath>
#include <string>

#include "doctest.h"
#include "nlop/viscosity.hpp"

using namespace nlop;

namespace {

Kernel power(double s, bool normalized) {
  KernelSpec k;
  k.kind = KernelKind::frac_lap;
  k.s = s;
  k.normalized = normalized;
  return build(k);
}

std::vector<TouchingTest> getoor_battery(const ScalarField& u) {
  std::vector<TouchingTest> tests;
  for (double x : {-0.5, 0.0, 0.5}) {
    for (TouchingTest& t : paraboloid_family(u, {x}, {-4.0}, Side::below)) tests.push_back(std::move(t));
    for (TouchingTest& t : paraboloid_family(u, {x}, {-0.5}, Side::above)) tests.push_back(std::move(t));
  }
  return tests;
}

}  // namespace

TEST_CASE("paraboloid battery on the Getoor profile") {
  QuadConfig cfg;
  ScalarField u = builtin("getoor", {{"s", 0.5}});
  Kernel K = power(0.5, true);
  std::vector<TouchingTest> tests = getoor_battery(u);
  REQUIRE(tests.size() == 6);
  for (const TouchingTest& t : tests) {
    CHECK_FALSE(t.recentered);
    CHECK(t.contact_error <= 1e-12);
    CHECK(t.touch_gap >= -1e-12);
  }
  ViscosityReport r = check_viscosity(u, K, parse_function("1", 1), 0, {8.0, 32.0}, tests, cfg);
  CHECK(r.pass);
  CHECK(r.verdict == "no violation found");
  CHECK(r.min_margin >= -1e-3);
  for (bool a : r.applicable) CHECK(a);
  CHECK(r.margins.size() == 12);
  for (const ViscosityMargin& m : r.margins) {
    // Compact support: the cut-off radius does not matter.
    CHECK(m.target == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(m.margin > 0.0);
  }
  CHECK(r.uniform_gap.back() <= 1e-6);

  // Wrong right-hand side: the below tests see Aφ̃ < f.
  ViscosityReport bad = check_viscosity(u, K, parse_function("2", 1), 0, {8.0}, tests, cfg);
  CHECK_FALSE(bad.pass);
  CHECK(bad.verdict == "violation found");
}

TEST_CASE("paraboloid touching the Getoor profile from below") {
  QuadConfig cfg;
  ScalarField u = builtin("getoor", {{"s", 0.5}});
  TouchingTest t = make_touching_test(u, parse_function("1 - x1^2", 1), {0.0}, Side::below);
  CHECK(t.contact_error == 0.0);
  CHECK(t.touch_gap >= 0.0);
  ViscosityReport r = check_viscosity(u, power(0.5, true), parse_function("1", 1), 0, {8.0}, {t}, cfg);
  CHECK(r.margins[0].margin >= 0.0);
  CHECK(r.pass);
}

TEST_CASE("equality case with the function itself") {
  QuadConfig cfg;
  ScalarField u = builtin("bump", {});
  Kernel K = power(0.5, false);
  ScalarField f = u;
  f.eval = [u, K, cfg](std::span<const double> x) { return direct_apply(u, K, x, cfg).value; };
  f.name = "Au";
  std::vector<TouchingTest> tests;
  for (double x : {-0.3, 0.4}) {
    tests.push_back(make_touching_test(u, u, {x}, Side::below));
    tests.push_back(make_touching_test(u, u, {x}, Side::above));
  }
  ViscosityReport r = check_viscosity(u, K, f, 0, {8.0}, tests, cfg);
  CHECK(r.pass);
  for (const ViscosityMargin& m : r.margins) CHECK(std::abs(m.margin) <= 1e-7);
}

TEST_CASE("kernels without a sign are refused") {
  QuadConfig cfg;
  KernelSpec k;
  k.kind = KernelKind::morse;
  Kernel K = build(k);
  ScalarField u = builtin("bump", {});
  std::vector<TouchingTest> tests = {make_touching_test(u, u, {0.0}, Side::below)};
  try {
    check_viscosity(u, K, parse_function("0", 1), 0, {8.0}, tests, cfg);
    FAIL("morse kernel accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("sign") != std::string::npos);
  }
}

TEST_CASE("lowering a below test never turns a pass into a failure") {
  QuadConfig cfg;
  ScalarField u = builtin("getoor", {{"s", 0.5}});
  Kernel K = power(0.5, true);
  std::vector<TouchingTest> tests = getoor_battery(u);
  for (double c : {1e-3, 0.1}) {
    ScalarField lowered = tests[0].phi;
    lowered.eval = [p = tests[0].phi, c](std::span<const double> x) { return p(x) - c; };
    tests.push_back(make_touching_test(u, lowered, tests[0].x0, Side::below));
  }
  ViscosityReport r = check_viscosity(u, K, parse_function("1", 1), 0, {8.0}, tests, cfg);
  CHECK(r.pass);
  CHECK_FALSE(r.applicable[6]);
  CHECK_FALSE(r.applicable[7]);
}

TEST_CASE("polynomial shift between f and the P_R channel") {
  QuadConfig cfg;
  ScalarField u = builtin("coordinate", {});
  Kernel K = power(0.75, false);
  ScalarField f = u;
  f.eval = [u, K, cfg](std::span<const double> x) {
    return limit_driver(u, K, 2, {Point(x.begin(), x.end())}, {8.0}, cfg).f_limit[0];
  };
  std::vector<TouchingTest> tests;
  for (double x : {-0.4, 0.2}) {
    // Affine u: zero curvature reduces to tangency.
    for (TouchingTest& t : paraboloid_family(u, {x}, {0.0}, Side::below)) tests.push_back(std::move(t));
    for (TouchingTest& t : paraboloid_family(u, {x}, {1.0}, Side::above)) tests.push_back(std::move(t));
  }
  for (const TouchingTest& t : tests) CHECK(t.contact_error <= 1e-12);
  std::vector<double> R{16.0, 64.0};
  ViscosityReport plain = check_viscosity(u, K, f, 2, R, tests, cfg);
  ViscosityOptions opts;
  Polynomial P(1, 1);
  P.set(MultiIndex{0}, 0.3);
  P.set(MultiIndex{1}, -0.7);
  opts.shift = P;
  ViscosityReport shifted = check_viscosity(u, K, f, 2, R, tests, cfg, opts);
  CHECK(plain.pass);
  CHECK(shifted.pass);
  REQUIRE(plain.margins.size() == shifted.margins.size());
  for (std::size_t i = 0; i < plain.margins.size(); ++i)
    CHECK(shifted.margins[i].margin == doctest::Approx(plain.margins[i].margin).epsilon(1e-9));
  // Equality for the tangent plane, strict for the convex paraboloid above.
  CHECK(std::abs(plain.margins[0].margin) <= 1e-4);
  CHECK(plain.margins[2].margin > 0.0);
  Polynomial quad(1, 2);
  quad.set(MultiIndex{2}, 1.0);
  opts.shift = quad;
  CHECK_THROWS_AS(check_viscosity(u, K, f, 2, R, tests, cfg, opts), ValidationError);
}

TEST_CASE("paraboloid construction at a kink") {
  ScalarField u = parse_function("abs(x1)", 1, 1.0);
  // Below: the central slope 0 lies in the subdifferential [-1, 1].
  TouchingTest below = paraboloid_family(u, {0.0}, {2.0}, Side::below)[0];
  CHECK_FALSE(below.recentered);
  CHECK(below.contact_error <= 1e-12);
  CHECK(below.touch_gap >= -1e-12);
  // Above: no C² function touches a convex corner, so the contact moves off the kink.
  TouchingTest above = paraboloid_family(u, {0.0}, {2.0}, Side::above)[0];
  CHECK(above.recentered);
  CHECK(std::abs(above.x0[0]) > 0.1);
  CHECK(above.contact_error <= 1e-12);
  CHECK(above.touch_gap >= -1e-12);

  // Smooth convex function, curvature below the Hessian: touches at the centre.
  ScalarField q = parse_function("x1^2 + x2^2", 2);
  TouchingTest t = paraboloid_family(q, {0.2, -0.1}, {1.0}, Side::below, 0.25)[0];
  CHECK_FALSE(t.recentered);
  CHECK(t.contact_error <= 1e-12);
  CHECK(t.touch_gap >= -1e-12);
  CHECK_THROWS_AS(parse_side("left"), ValidationError);
  CHECK(parse_side(to_string(Side::above)) == Side::above);
}
