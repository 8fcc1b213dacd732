#include <cmath>
#include <random>

#include "doctest.h"
#include "nlop/error.hpp"
#include "nlop/multiindex.hpp"

using namespace nlop;

TEST_CASE("enumerate: graded-lex order and counts") {
  CHECK(enumerate(3, -1).empty());

  auto two = enumerate(2, 1);
  REQUIRE(two.size() == 3);
  CHECK(two[0] == MultiIndex{0, 0});
  CHECK(two[1] == MultiIndex{1, 0});
  CHECK(two[2] == MultiIndex{0, 1});

  CHECK(enumerate(1, 4).size() == 5);

  auto quad = enumerate(2, 2);
  REQUIRE(quad.size() == 6);
  CHECK(quad[3] == MultiIndex{2, 0});
  CHECK(quad[4] == MultiIndex{1, 1});
  CHECK(quad[5] == MultiIndex{0, 2});
}

TEST_CASE("solution_space_dim") {
  CHECK(solution_space_dim(5, 0) == 0);
  CHECK(solution_space_dim(1, 2) == 2);
  CHECK(solution_space_dim(2, 3) == 6);
  for (int n = 1; n <= 4; ++n)
    for (int m = 0; m <= 6; ++m)
      CHECK(static_cast<std::int64_t>(enumerate(n, m - 1).size()) == solution_space_dim(n, m));
  CHECK_THROWS_AS(solution_space_dim(200, 80), std::overflow_error);
}

TEST_CASE("factorial, monomial, binom_multi") {
  CHECK(factorial(MultiIndex{2, 1}) == 2);
  CHECK(factorial(MultiIndex{3, 4}) == 6 * 24);
  const double x[] = {3.0, 2.0};
  CHECK(monomial(MultiIndex{1, 2}, x) == doctest::Approx(12.0));
  CHECK(binom_multi(MultiIndex{2, 0}, MultiIndex{1, 0}) == 2);
  CHECK(binom_multi(MultiIndex{4, 3}, MultiIndex{2, 1}) == 6 * 3);
  CHECK_THROWS_AS(binom_multi(MultiIndex{1, 0}, MultiIndex{2, 0}), ValidationError);
  CHECK_THROWS_AS(MultiIndex({1, -1}), ValidationError);
}

TEST_CASE("monomial product property") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const auto basis = enumerate(2, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const Point x{u(rng), u(rng)};
    const auto& a = basis[static_cast<std::size_t>(trial) % basis.size()];
    const auto& b = basis[static_cast<std::size_t>(trial * 7 + 3) % basis.size()];
    CHECK(monomial(a, x) * monomial(b, x) == doctest::Approx(monomial(a + b, x)).epsilon(1e-13));
  }
}

TEST_CASE("polynomial evaluation does not depend on insertion order") {
  const auto basis = enumerate(2, 3);
  Polynomial forward(2, 3), backward(2, 3);
  for (std::size_t i = 0; i < basis.size(); ++i) forward.set(basis[i], 0.5 + static_cast<double>(i));
  for (std::size_t i = basis.size(); i-- > 0;) backward.set(basis[i], 0.5 + static_cast<double>(i));
  const Point x{0.3, -0.7};
  CHECK(forward(x) == backward(x));
  CHECK(forward.coefficient_vector() == backward.coefficient_vector());
  CHECK_THROWS_AS(forward.set(MultiIndex{4, 0}, 1.0), ValidationError);
}

namespace {
std::vector<std::pair<Point, double>> sample_1d(int count, double (*f)(double)) {
  std::vector<std::pair<Point, double>> out;
  for (int i = 0; i < count; ++i) {
    const double x = -1.0 + 2.0 * i / (count - 1);
    out.push_back({Point{x}, f(x)});
  }
  return out;
}
}  // namespace

TEST_CASE("best_poly_fit: exact members of the space") {
  auto samples = sample_1d(11, [](double x) { return 1.0 + 2.0 * x; });
  auto fit = best_poly_fit(samples, 1, 1);
  CHECK(fit.residual_sup <= 1e-12);
  CHECK(fit.poly.coeff(MultiIndex{0}) == doctest::Approx(1.0));
  CHECK(fit.poly.coeff(MultiIndex{1}) == doctest::Approx(2.0));

  // 2D: any quadratic is reproduced exactly at degree 2.
  std::vector<std::pair<Point, double>> s2;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      const double x = -0.7 + 0.2 * i, y = -0.7 + 0.2 * j;
      if (x * x + y * y < 1) s2.push_back({Point{x, y}, 3 - x + 0.5 * y + x * y - 2 * y * y});
    }
  CHECK(best_poly_fit(s2, 2, 2).residual_sup <= 1e-12);
}

TEST_CASE("best_poly_fit: constant fit of x^2 agrees with brute-force scan") {
  auto samples = sample_1d(21, [](double x) { return x * x; });
  auto fit = best_poly_fit(samples, 1, 0);

  // Oracle: scan constants c in [0,1], keep the least-squares minimiser,
  // report its sup residual.
  double best_c = 0.0, best_ss = 1e300;
  for (int i = 0; i <= 100000; ++i) {
    const double c = i * 1e-5;
    double ss = 0.0;
    for (const auto& [p, v] : samples) ss += (v - c) * (v - c);
    if (ss < best_ss) {
      best_ss = ss;
      best_c = c;
    }
  }
  double oracle_sup = 0.0;
  for (const auto& [p, v] : samples) oracle_sup = std::max(oracle_sup, std::abs(v - best_c));
  CHECK(std::abs(fit.residual_sup - oracle_sup) <= 1e-3);
}

TEST_CASE("best_poly_fit: empty space and degenerate geometry") {
  auto samples = sample_1d(5, [](double x) { return std::sin(3 * x); });
  auto fit = best_poly_fit(samples, 1, -1);
  double sup = 0.0;
  for (const auto& [p, v] : samples) sup = std::max(sup, std::abs(v));
  CHECK(fit.residual_sup == sup);
  CHECK(fit.poly.coeffs().empty());

  std::vector<std::pair<Point, double>> same(4, {Point{0.2}, 1.0});
  CHECK_THROWS_AS(best_poly_fit(same, 1, 2), NumericalError);
  CHECK_THROWS_AS(best_poly_fit(std::span(same).first(1), 1, 2), ValidationError);
}
