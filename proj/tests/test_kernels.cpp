#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nlop/kernels.hpp"
#include "nlop/quadrature.hpp"

using namespace nlop;

namespace {

Kernel make(KernelKind kind, int dim = 1, double s = 0.5, std::optional<double> eps = std::nullopt) {
  KernelSpec spec;
  spec.kind = kind;
  spec.dim = dim;
  spec.s = s;
  spec.epsilon = eps;
  if (kind == KernelKind::frac_lap_comparable) spec.Lambda = 2.0;
  return build(spec);
}

Point random_ball(std::mt19937_64& rng, int n, double radius) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  while (true) {
    Point p(static_cast<std::size_t>(n));
    double q = 0.0;
    for (double& c : p) {
      c = U(rng);
      q += c * c;
    }
    if (q < 1.0) {
      for (double& c : p) c *= radius;
      return p;
    }
  }
}

std::vector<Kernel> zoo(int n) {
  std::vector<Kernel> ks;
  for (KernelKind k : builtin_kernel_kinds()) {
    if (k == KernelKind::frac_lap || k == KernelKind::frac_lap_comparable) {
      for (double s : {0.25, 0.5, 0.75}) ks.push_back(make(k, n, s));
    } else {
      ks.push_back(make(k, n));
    }
  }
  ks.push_back(make(KernelKind::frac_lap, n, 0.5, 0.1));
  ks.push_back(make(KernelKind::buckingham, n, 0.5, 0.5));
  return ks;
}

}  // namespace

TEST_CASE("profile values") {
  Point x{0.0}, y1{1.0}, y2{2.0};
  CHECK(make(KernelKind::morse)(x, y1) == doctest::Approx(0.0));
  CHECK(make(KernelKind::gauss)(x, x) == 1.0);
  CHECK(make(KernelKind::buckingham)(x, y1) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-12));
  CHECK(make(KernelKind::frac_lap, 1, 0.5)(x, y2) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(make(KernelKind::mollifier)(x, y1) == 0.0);
  CHECK(make(KernelKind::mollifier)(x, Point{0.5}) == doctest::Approx(std::exp(-1.0 / 0.75)));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make(KernelKind::frac_lap, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(make(KernelKind::frac_lap, 1, 1.0), ValidationError);
  CHECK_THROWS_AS(make(KernelKind::gauss, 1, 0.5, 0.0), ValidationError);
  CHECK_THROWS_AS(make(KernelKind::gauss, 1, 0.5, -1.0), ValidationError);
  CHECK_THROWS_AS(make(KernelKind::buckingham, 6), ValidationError);
  CHECK_NOTHROW(make(KernelKind::buckingham, 6, 0.5, 0.1));
  CHECK_THROWS_AS(parse_kernel_kind("yukawa"), ValidationError);
}

TEST_CASE("desingularisation clamps both signs") {
  Kernel k = make(KernelKind::buckingham, 1, 0.5, 0.5);
  Point x{0.0};
  CHECK(k(x, Point{0.1}) == -2.0);
  Kernel f = make(KernelKind::frac_lap, 1, 0.5, 0.25);
  CHECK(f(x, Point{0.01}) == 4.0);
  CHECK(f.meta().singularity_order == 0.0);
}

TEST_CASE("spec key-value round trip") {
  KernelSpec spec;
  spec.kind = KernelKind::frac_lap_comparable;
  spec.dim = 2;
  spec.s = 0.3;
  spec.lambda = 0.5;
  spec.Lambda = 1.5;
  spec.epsilon = 0.01;
  spec.normalized = true;
  KernelSpec back = KernelSpec::from_key_values(spec.to_key_values());
  CHECK(back.kind == spec.kind);
  CHECK(back.dim == 2);
  CHECK(back.s == spec.s);
  CHECK(back.lambda == spec.lambda);
  CHECK(back.Lambda == spec.Lambda);
  CHECK(*back.epsilon == *spec.epsilon);
  CHECK(back.normalized);
  auto kv = spec.to_key_values();
  kv["gamma"] = "1";
  CHECK_THROWS_AS(KernelSpec::from_key_values(kv), ValidationError);
}

TEST_CASE("derivative examples") {
  Point x0{0.0}, y5{5.0};
  CHECK(make(KernelKind::gauss).deriv(MultiIndex{1}, x0, y5).value ==
        doctest::Approx(10.0 * std::exp(-25.0)).epsilon(1e-12));
  CHECK(make(KernelKind::abel).deriv(MultiIndex{0}, Point{0.5}, Point{4.0}).value ==
        doctest::Approx(std::exp(-3.5)).epsilon(1e-14));
}

TEST_CASE("higher derivatives against closed forms") {
  // Gaussian: d³/dx³ e^{-z²} = (12z - 8z³) e^{-z²} with z = x - y.
  Kernel g = make(KernelKind::gauss);
  for (double xv : {-0.7, 0.0, 0.4}) {
    double z = xv - 3.5;
    double want = (12.0 * z - 8.0 * z * z * z) * std::exp(-z * z);
    CHECK(g.deriv(MultiIndex{3}, Point{xv}, Point{3.5}).value == doctest::Approx(want).epsilon(1e-11));
  }
  // Power kernel: d^k/dx^k z^{-p} = (-p)(-p-1)...(-p-k+1) z^{-p-k} for z > 0.
  for (double s : {0.25, 0.75}) {
    Kernel f = make(KernelKind::frac_lap, 1, s);
    double p = 1.0 + 2.0 * s;
    for (int k = 0; k <= 5; ++k) {
      double z = 4.3;
      double c = 1.0;
      for (int i = 0; i < k; ++i) c *= -p - i;
      CHECK(f.deriv(MultiIndex{k}, Point{0.3}, Point{-4.0}).value ==
            doctest::Approx(c * std::pow(z, -p - k)).epsilon(1e-11));
    }
  }
  // 2D mixed derivative of the power kernel |z|^{-p}: ∂1∂2 = p(p+2) z1 z2 |z|^{-p-4}.
  Kernel f2 = make(KernelKind::frac_lap, 2, 0.5);
  double p = 3.0;
  Point x{0.2, -0.1}, y{3.0, 2.5};
  double z1 = x[0] - y[0], z2 = x[1] - y[1], q = z1 * z1 + z2 * z2;
  CHECK(f2.deriv(MultiIndex{1, 1}, x, y).value ==
        doctest::Approx(p * (p + 2.0) * z1 * z2 * std::pow(q, -p / 2.0 - 2.0)).epsilon(1e-12));
}

TEST_CASE("analytic derivatives agree with finite differences") {
  std::mt19937_64 rng(7);
  for (int n : {1, 2}) {
    for (const Kernel& K : zoo(n)) {
      if (K.meta().support_radius) continue;
      for (int trial = 0; trial < 6; ++trial) {
        Point x = random_ball(rng, n, 1.0);
        Point y = random_ball(rng, n, 1.0);
        double ny = 0.0;
        for (double c : y) ny += c * c;
        ny = std::sqrt(ny);
        for (double& c : y) c *= 3.2 / ny;
        for (const MultiIndex& a : enumerate(n, 2)) {
          double an = K.deriv(a, x, y).value;
          auto f = [&](std::span<const double> p) { return K(p, y); };
          double fd = finite_difference_deriv(f, a, x).value;
          if (std::abs(an) < 1e-13) continue;
          INFO(K.name() << " alpha " << a.str());
          CHECK(std::abs(an - fd) <= 1e-5 * std::abs(an));
        }
      }
    }
  }
  // Mollifier inside its support.
  Kernel m = make(KernelKind::mollifier);
  for (double xv : {-0.2, 0.1, 0.3}) {
    Point x{xv}, y{0.5};
    for (int k = 0; k <= 2; ++k) {
      double an = m.deriv(MultiIndex{k}, x, y).value;
      auto f = [&](std::span<const double> p) { return m(p, y); };
      CHECK(an == doctest::Approx(finite_difference_deriv(f, MultiIndex{k}, x).value).epsilon(1e-5));
    }
  }
}

TEST_CASE("odd derivative at the origin vanishes for even profiles") {
  for (KernelKind k : {KernelKind::gauss, KernelKind::abel, KernelKind::morse, KernelKind::frac_lap}) {
    Kernel K = make(k);
    // y -> -y flips the sign of odd x-derivatives at x = 0.
    double a = K.deriv(MultiIndex{1}, Point{0.0}, Point{4.0}).value;
    double b = K.deriv(MultiIndex{1}, Point{0.0}, Point{-4.0}).value;
    CHECK(a == doctest::Approx(-b).epsilon(1e-14));
    auto f = [&](std::span<const double> p) { return K(p, Point{4.0}); };
    CHECK(finite_difference_deriv(f, MultiIndex{1}, Point{0.0}).value == doctest::Approx(a).epsilon(1e-6));
  }
}

TEST_CASE("derivative guards") {
  Kernel f = make(KernelKind::frac_lap);
  CHECK_THROWS_AS(f.deriv(MultiIndex{7}, Point{0.0}, Point{5.0}), ValidationError);
  CHECK_THROWS_AS(f.deriv(MultiIndex{1}, Point{0.5}, Point{0.5}), DomainError);
  Kernel g = make(KernelKind::gauss);
  CHECK(g.deriv(MultiIndex{2}, Point{0.5}, Point{0.5}).value == doctest::Approx(-2.0));
}

TEST_CASE("symmetry, sign and translation invariance on samples") {
  std::mt19937_64 rng(11);
  for (int n : {1, 2}) {
    for (const Kernel& K : zoo(n)) {
      double worst = 0.0;
      int negatives = 0;
      for (int i = 0; i < 200; ++i) {
        Point x = random_ball(rng, n, 1.0), z = random_ball(rng, n, 1.0), h = random_ball(rng, n, 2.0);
        double nz = 0.0;
        for (double c : z) nz += c * c;
        if (nz < 1e-6) continue;
        Point yp = x, ym = x, xs = x, ys(x.size());
        for (int d = 0; d < n; ++d) {
          auto i_ = static_cast<std::size_t>(d);
          yp[i_] += z[i_];
          ym[i_] -= z[i_];
          xs[i_] += h[i_];
          ys[i_] = yp[i_] + h[i_];
        }
        double kp = K(x, yp);
        worst = std::max(worst, std::abs(kp - K(x, ym)) / (1.0 + std::abs(kp)));
        if (kp < 0.0) ++negatives;
        CHECK(K(xs, ys) == doctest::Approx(kp).epsilon(1e-12));
      }
      INFO(K.name());
      CHECK(worst <= 1e-12);
      if (K.meta().nonnegative) CHECK(negatives == 0);
    }
  }
}

TEST_CASE("sign metadata and witnesses") {
  for (KernelKind k : {KernelKind::gauss, KernelKind::abel, KernelKind::mollifier, KernelKind::frac_lap}) {
    Kernel K = make(k);
    CHECK(K.meta().nonnegative);
    CHECK_FALSE(sign_witness(K).has_value());
  }
  for (KernelKind k : {KernelKind::morse, KernelKind::buckingham}) {
    Kernel K = make(k);
    CHECK_FALSE(K.meta().nonnegative);
    auto w = sign_witness(K);
    REQUIRE(w.has_value());
    CHECK(K(w->first, w->second) < 0.0);
  }
}

TEST_CASE("metadata") {
  Kernel f = make(KernelKind::frac_lap, 1, 0.75);
  CHECK(f.meta().singularity_order == doctest::Approx(2.5));
  CHECK_FALSE(f.meta().admissible_theta.contains(1.5));
  CHECK(f.meta().admissible_theta.contains(1.51));
  CHECK(f.tail_decay(2) == doctest::Approx(4.5));
  Kernel b = make(KernelKind::buckingham, 1);
  CHECK(b.meta().singularity_order == 6.0);
  CHECK(b.meta().admissible_theta.empty);
  CHECK(make(KernelKind::buckingham, 5).meta().admissible_theta.contains(1.5));
  CHECK(make(KernelKind::gauss).meta().admissible_theta.contains(0.0));
}

TEST_CASE("normalisation constant") {
  CHECK(fractional_laplacian_constant(1, 0.5) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
  CHECK(fractional_laplacian_constant(2, 0.5) == doctest::Approx(0.5 / std::numbers::pi).epsilon(1e-14));
  // n = 1 via the duplication formula: C_{1,s} = 4^s Γ(1/2+s) s / (√π Γ(1-s)).
  for (double s : {0.2, 0.7}) {
    double want = s * std::pow(4.0, s) * std::tgamma(0.5 + s) / (std::sqrt(std::numbers::pi) * std::tgamma(1.0 - s));
    CHECK(fractional_laplacian_constant(1, s) == doctest::Approx(want).epsilon(1e-14));
  }
  KernelSpec spec;
  spec.kind = KernelKind::frac_lap;
  spec.normalized = true;
  CHECK(build(spec)(Point{0.0}, Point{1.0}) == doctest::Approx(1.0 / std::numbers::pi));
}

TEST_CASE("sup of derivatives over the unit ball") {
  Kernel f = make(KernelKind::frac_lap, 1, 0.75);
  double p = 2.5;
  // |∂²| = p(p+1)|y-x|^{-p-2} peaks at the point of B_1 nearest to y.
  CHECK(sup_deriv_on_unit_ball(f, 2, Point{5.0}) == doctest::Approx(p * (p + 1.0) * std::pow(4.0, -p - 2.0)));
  CHECK(unit_ball_design(1).size() == 16);
  CHECK(unit_ball_design(2).size() == 33);
}

TEST_CASE("hypothesis validation") {
  QuadConfig cfg;
  Kernel f = make(KernelKind::frac_lap, 1, 0.5);
  QuadResult near = near_diagonal_moment(f, Point{0.0}, 1.0, 2.0, cfg, true);
  CHECK(near.converged);
  CHECK(near.value == doctest::Approx(2.0).epsilon(1e-8));

  HypothesisReport ok = validate_hypotheses(f, 2.0, 2, 3, cfg);
  CHECK(ok.pass);
  REQUIRE(ok.locint_values.size() == 3);
  CHECK(ok.locint_values[0] == doctest::Approx(4.0).epsilon(1e-7));

  HypothesisReport moll = validate_hypotheses(make(KernelKind::mollifier), 0.0, 1, 2, cfg);
  CHECK(moll.pass);

  HypothesisReport bad = validate_hypotheses(f, 0.8, 1, 2, cfg);
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(bad.locint_converged);

  HypothesisReport edge = validate_hypotheses(f, 1.0, 1, 1, cfg);
  CHECK_FALSE(edge.pass);

  HypothesisReport buck = validate_hypotheses(make(KernelKind::buckingham), 2.0, 1, 1, cfg);
  CHECK_FALSE(buck.pass);

  HypothesisReport morse = validate_hypotheses(make(KernelKind::morse), 1.0, 2, 2, cfg);
  CHECK(morse.pass);
  CHECK(morse.sign_violations > 0);

  CHECK_THROWS_AS(validate_hypotheses(f, 2.5, 1, 1, cfg), ValidationError);
}

TEST_CASE("custom kernels") {
  Kernel::Metadata meta;
  meta.symmetric_in_z = false;
  meta.translation_invariant = false;
  Kernel k = Kernel::custom(
      1, [](std::span<const double> x, std::span<const double> y) { return (2.0 + x[0]) * std::exp(-(x[0] - y[0]) * (x[0] - y[0])); },
      meta);
  Point x{0.3}, y{2.0};
  double z = x[0] - y[0];
  double want = std::exp(-z * z) * (1.0 - (2.0 + x[0]) * 2.0 * z);
  Derivative d = k.deriv(MultiIndex{1}, x, y);
  CHECK_FALSE(d.analytic);
  CHECK(d.value == doctest::Approx(want).epsilon(1e-8));
  CHECK(k.meta().max_taylor_order == 2);
}
