#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "nlop/exprfunc.hpp"
#include "nlop/quadrature.hpp"

using namespace nlop;

namespace {

double at(const Expr& e, double x) {
  Point p{x};
  return e.eval(p);
}

std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 11);
  std::uniform_real_distribution<double> U(0.1, 4.0);
  switch (pick(rng)) {
    case 0: return "x1";
    case 1: return "x2";
    case 2: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", U(rng));
      return buf;
    }
    case 3: return "(" + random_expr(rng, depth - 1) + "+" + random_expr(rng, depth - 1) + ")";
    case 4: return random_expr(rng, depth - 1) + "-" + random_expr(rng, depth - 1);
    case 5: return random_expr(rng, depth - 1) + "*" + random_expr(rng, depth - 1);
    case 6: return "(" + random_expr(rng, depth - 1) + ")/(" + random_expr(rng, depth - 1) + ")";
    case 7: return "abs(" + random_expr(rng, depth - 1) + ")^2";
    case 8: return "exp(-" + random_expr(rng, depth - 1) + ")";
    case 9: return "max(" + random_expr(rng, depth - 1) + "," + random_expr(rng, depth - 1) + ")";
    case 10: return "-" + random_expr(rng, depth - 1);
    default: return "ind(1,inf)*r";
  }
}

}  // namespace

TEST_CASE("parser examples") {
  CHECK(at(parse("x1^2 + 3", 1), 2.0) == 7.0);
  CHECK(at(parse("exp(-abs(x1))", 1), 0.0) == 1.0);
  CHECK_THROWS_AS(at(parse("x1/(x1-1)", 1), 1.0), DomainError);
  CHECK_THROWS_AS(at(parse("log(x1)", 1), 0.0), DomainError);
  CHECK_THROWS_AS(at(parse("sqrt(x1)", 1), -1.0), DomainError);
  CHECK_THROWS_AS(at(parse("x1^0.5", 1), -1.0), DomainError);
}

TEST_CASE("precedence and associativity") {
  CHECK(at(parse("-x1^2", 1), 2.0) == -4.0);
  CHECK(at(parse("2^3^2", 1), 0.0) == 512.0);
  CHECK(at(parse("1-2-3", 1), 0.0) == -4.0);
  CHECK(at(parse("8/4/2", 1), 0.0) == 1.0);
  CHECK(at(parse("2*x1+1", 1), 3.0) == 7.0);
  CHECK(at(parse("2^-1", 1), 0.0) == 0.5);
  CHECK(at(parse("1.5e2 + .5", 1), 0.0) == 150.5);
  CHECK(at(parse("min(x1, 2) + max(x1, 2)", 1), 5.0) == 7.0);
  CHECK(at(parse("pi", 1), 0.0) == doctest::Approx(3.14159265358979));
  Point p{3.0, 4.0};
  CHECK(parse("r", 2).eval(p) == 5.0);
  CHECK(parse("ind(4,5)", 2).eval(p) == 1.0);
  CHECK(parse("ind(0,4.9)", 2).eval(p) == 0.0);
}

TEST_CASE("syntax errors carry byte offsets") {
  auto offset_of = [](const std::string& s, int n) -> std::size_t {
    try {
      parse(s, n);
    } catch (const SyntaxError& e) {
      return e.offset;
    }
    return std::string::npos;
  };
  CHECK(offset_of("x1 +", 1) == 4);
  CHECK(offset_of("x1 * (2", 1) == 7);
  CHECK(offset_of("foo(x1)", 1) == 0);
  CHECK(offset_of("x1 + x3", 2) == 5);
  CHECK(offset_of("exp(x1, 2)", 1) == 0);
  CHECK(offset_of("1 $ 2", 1) == 2);
  CHECK(offset_of("ind(x1, 2)", 1) == 0);
  CHECK_THROWS_AS(parse("", 1), SyntaxError);
  CHECK_THROWS_AS(parse("y", 1), ValidationError);
}

TEST_CASE("print and parse round trip") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    std::string src = random_expr(rng, 4);
    Expr e = parse(src, 2);
    std::string printed = e.print();
    Expr back = parse(printed, 2);
    INFO(src << " -> " << printed);
    CHECK(back == e);
    CHECK(back.print() == printed);
    Point p{0.7, -1.3};
    try {
      double v = e.eval(p);
      CHECK(back.eval(p) == v);
      ++checked;
    } catch (const DomainError&) {
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("structural metadata") {
  CHECK(*parse("x1^2+3", 1).growth() == 2.0);
  CHECK(*parse("exp(-abs(x1))", 1).growth() == -std::numeric_limits<double>::infinity());
  CHECK(*parse("x1*ind(5,inf)", 1).growth() == 1.0);
  CHECK(parse("x1*ind(5,inf)", 1).radial_breaks() == std::vector<double>{5.0});
  CHECK(*parse("x1^2*ind(1,7)", 1).support_radius() == 7.0);
  CHECK_FALSE(parse("x1/(1+x1^2)", 1).growth().has_value());
  ScalarField u = from_expr(parse("x1/(1+x1^2)", 1));
  CHECK(u.growth_exponent == doctest::Approx(-1.0).epsilon(0.1));
  ScalarField v = from_expr(parse("sqrt(1+x1^2)*x1", 1));
  CHECK(v.growth_exponent == doctest::Approx(2.0));
}

TEST_CASE("builtin catalog") {
  Point x{3.7};
  ScalarField c = builtin("constant", {{"c", 2.0}});
  CHECK(c(x) == 2.0);
  CHECK(c.theta_class == 2.0);
  CHECK(c.growth_exponent == 0.0);
  ScalarField uk = builtin("counterexample_uk", {{"k", 10.0}});
  CHECK(uk(Point{20.0}) == 200.0);
  CHECK(uk(Point{9.0}) == 0.0);
  ScalarField g = builtin("getoor", {{"s", 0.5}});
  CHECK(g(Point{0.0}) == 1.0);
  CHECK(g(Point{1.0}) == 0.0);
  CHECK(g(Point{-1.5}) == 0.0);
  CHECK(g.theta_class == 0.5);
  ScalarField m = builtin("monomial", {{"a1", 1.0}, {"a2", 2.0}}, 2);
  CHECK(m(Point{3.0, 2.0}) == 12.0);
  ScalarField ann = builtin("indicator_annulus", {{"a", 2.0}, {"b", 3.0}});
  CHECK(ann(Point{-2.5}) == 1.0);
  CHECK(ann(Point{3.5}) == 0.0);
  ScalarField lem = builtin("lemcs_footnote", {{"k", 10.0}, {"s", 0.5}});
  CHECK(lem(Point{50.0}) == doctest::Approx(-50.0 / std::log(10.0)));
  CHECK(lem(Point{150.0}) == 0.0);
  CHECK_THROWS_AS(builtin("wave", {}), ValidationError);
  CHECK_THROWS_AS(builtin("getoor", {{"s", 1.5}}), ValidationError);
  CHECK_THROWS_AS(builtin("bump", {{"k", 1.0}}), ValidationError);
}

TEST_CASE("function specs") {
  ScalarField a = parse_function("counterexample_uk(k=10)", 1);
  CHECK(a(Point{20.0}) == 200.0);
  ScalarField b = parse_function("bump", 1);
  CHECK(b(Point{0.0}) == 1.0);
  ScalarField c = parse_function("getoor(s = 0.25)", 1);
  CHECK(c(Point{0.0}) == 1.0);
  ScalarField d = parse_function("exp(-x1^2)", 1, 1.5);
  CHECK(d.theta_class == 1.5);
  CHECK_THROWS_AS(parse_function("getoor(s=)", 1), ValidationError);
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  std::vector<ScalarField> fields = {builtin("bump", {{"r", 2.0}}), builtin("monomial", {{"a", 3.0}}),
                                     builtin("getoor", {{"s", 0.7}}), builtin("coordinate", {})};
  for (const ScalarField& u : fields) {
    for (int i = 0; i < 20; ++i) {
      Point x{U(rng)};
      if (std::abs(std::abs(x[0]) - 1.0) < 0.05 || std::abs(std::abs(x[0]) - 2.0) < 0.05) continue;
      double an = u.gradient_at(x)[0];
      auto fd = finite_difference_deriv(u.eval, MultiIndex{1}, x).value;
      INFO(u.name << " at " << x[0]);
      CHECK(std::abs(an - fd) <= 1e-5 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("Getoor Hölder quotient near the boundary") {
  for (double s : {0.25, 0.5, 0.75}) {
    ScalarField g = builtin("getoor", {{"s", s}});
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
      for (int j = 0; j < i; ++j) {
        double a = 0.9 + 0.001 * i, b = 0.9 + 0.001 * j;
        worst = std::max(worst, std::abs(g(Point{a}) - g(Point{b})) / std::pow(std::abs(a - b), s));
      }
    }
    // (1-x²)^s = (1-x)^s (1+x)^s is s-Hölder with constant at most 2^s near x = 1.
    CHECK(worst <= std::pow(2.0, s));
  }
}

TEST_CASE("membership checks") {
  QuadConfig cfg;
  auto frac = [](double s) {
    KernelSpec spec;
    spec.kind = KernelKind::frac_lap;
    spec.s = s;
    return build(spec);
  };
  ScalarField x = builtin("coordinate", {});
  MembershipReport a = check_membership(x, frac(0.75), 2, 10.0, cfg);
  CHECK(a.pass);
  CHECK(a.mcond_value > 0.0);
  MembershipReport b = check_membership(x, frac(0.25), 0, 10.0, cfg);
  CHECK_FALSE(b.pass);
  CHECK_FALSE(b.diagnostics.empty());
  ScalarField bump = builtin("bump", {});
  for (KernelKind k : {KernelKind::gauss, KernelKind::abel, KernelKind::frac_lap, KernelKind::morse}) {
    KernelSpec spec;
    spec.kind = k;
    for (int m = 0; m <= 3; ++m) CHECK(check_membership(bump, build(spec), m, 10.0, cfg).pass);
  }
  // Monotone in m for power kernels.
  for (double s : {0.25, 0.5, 0.75}) {
    for (const char* f : {"x1", "x1^2", "abs(x1)^1.5"}) {
      ScalarField u = parse_function(f, 1);
      bool seen = false;
      for (int m = 0; m <= 4; ++m) {
        bool pass = check_membership(u, frac(s), m, 8.0, cfg).pass;
        if (seen) CHECK(pass);
        seen = seen || pass;
      }
      CHECK(seen);
    }
  }
}
