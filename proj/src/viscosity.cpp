#include "nlop/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nlop/error.hpp"

namespace nlop {

namespace {

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Verification ball sample and its resolution.
std::pair<std::vector<Point>, double> ball_sample(const Point& c, double radius) {
  std::vector<Point> out;
  if (c.size() == 1) {
    const int k = 400;
    for (int i = 0; i <= k; ++i) out.push_back({c[0] - radius + 2.0 * radius * i / k});
    return {out, 2.0 * radius / k};
  }
  const int nr = 40, na = 48;
  out.push_back(c);
  for (int i = 1; i <= nr; ++i) {
    double r = radius * i / nr;
    for (int j = 0; j < na; ++j) {
      double a = 2.0 * std::numbers::pi * j / na;
      out.push_back({c[0] + r * std::cos(a), c[1] + r * std::sin(a)});
    }
  }
  return {out, 2.0 * std::numbers::pi * radius / na};
}

double side_gap(Side side, double u, double phi) { return side == Side::below ? u - phi : phi - u; }

}  // namespace

std::string to_string(Side side) { return side == Side::below ? "below" : "above"; }

Side parse_side(const std::string& name) {
  if (name == "below") return Side::below;
  if (name == "above") return Side::above;
  throw ValidationError("side must be 'below' or 'above', got '" + name + "'");
}

TouchingTest make_touching_test(const ScalarField& u, const ScalarField& phi, const Point& x0, Side side,
                                double radius) {
  if (static_cast<int>(x0.size()) != u.dim || phi.dim != u.dim) throw ValidationError("touching test dimensions differ");
  if (!(radius > 0.0)) throw ValidationError("verification radius must be positive");
  TouchingTest t;
  t.x0 = x0;
  t.phi = phi;
  t.side = side;
  t.contact_error = std::abs(phi(x0) - u(x0));
  t.touch_gap = std::numeric_limits<double>::infinity();
  for (const Point& y : ball_sample(x0, radius).first) t.touch_gap = std::min(t.touch_gap, side_gap(side, u(y), phi(y)));
  return t;
}

std::vector<TouchingTest> paraboloid_family(const ScalarField& u, const Point& x0, const std::vector<double>& curvatures,
                                            Side side, double radius) {
  if (static_cast<int>(x0.size()) != u.dim) throw ValidationError("point and function dimensions differ");
  if (!std::isfinite(u(x0))) throw ValidationError("function is not evaluable at the touching point");
  const double base = u(x0);
  const Point slope = u.gradient_at(x0);
  std::vector<TouchingTest> out;
  for (double c : curvatures) {
    double offset = 0.0;
    auto make_phi = [&](double off) {
      ScalarField phi;
      phi.dim = u.dim;
      phi.eval = [x0, slope, c, v = base + off](std::span<const double> y) {
        double lin = 0.0, q = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          lin += slope[i] * (y[i] - x0[i]);
          q += (y[i] - x0[i]) * (y[i] - x0[i]);
        }
        return v + lin + 0.5 * c * q;
      };
      phi.gradient = [x0, slope, c](std::span<const double> y) {
        Point g(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) g[i] = slope[i] + c * (y[i] - x0[i]);
        return g;
      };
      phi.growth_exponent = 2.0;
      std::ostringstream name;
      name << "paraboloid(c=" << c << ")";
      phi.name = name.str();
      return phi;
    };

    Point center = x0;
    bool moved = false;
    for (int pass = 0; pass < 8; ++pass) {
      ScalarField phi = make_phi(offset);
      auto [pts, h] = ball_sample(center, radius);
      double best = std::numeric_limits<double>::infinity();
      Point arg = center;
      for (const Point& y : pts) {
        double g = side_gap(side, u(y), phi(y));
        if (g < best) best = g, arg = y;
      }
      // Ties within rounding keep the requested centre.
      const double at_center = side_gap(side, u(center), phi(center));
      if (at_center - best <= 1e-12 * (1.0 + std::abs(u(center)))) {
        best = at_center;
        arg = center;
      }
      offset += side == Side::below ? best : -best;
      if (dist(arg, center) <= 1.5 * h) break;
      center = arg;
      moved = true;
    }
    TouchingTest t = make_touching_test(u, make_phi(offset), center, side, radius);
    t.curvature = c;
    t.recentered = moved;
    out.push_back(std::move(t));
  }
  return out;
}

ScalarField glue(const ScalarField& u, const ScalarField& phi, const Point& x0, double radius) {
  if (!(radius > 0.0)) throw ValidationError("glue radius must be positive");
  const double half = 0.5 * radius;
  auto eta = [x0, half](std::span<const double> y) { return 1.0 - smoothstep((dist(y, x0) - half) / half); };
  ScalarField g = u;
  g.eval = [u, phi, eta](std::span<const double> y) {
    double e = eta(y);
    if (e == 0.0) return u(y);
    if (e == 1.0) return phi(y);
    return e * phi(y) + (1.0 - e) * u(y);
  };
  g.gradient = std::nullopt;
  g.local_theta = [u, x0, half](std::span<const double> y) { return dist(y, x0) < half ? 2.0 : u.theta_at(y); };
  double reach = 0.0;
  for (double v : x0) reach += v * v;
  reach = std::sqrt(reach) + radius;
  if (u.support_radius) g.support_radius = std::max(*u.support_radius, reach);
  g.name = "glued(" + phi.name + ")";
  return g;
}

ViscosityReport check_viscosity(const ScalarField& u, const Kernel& K, const ScalarField& f, int m,
                                const std::vector<double>& R_schedule, const std::vector<TouchingTest>& tests,
                                const QuadConfig& cfg, const ViscosityOptions& opts) {
  if (!K.meta().nonnegative || sign_witness(K))
    throw ValidationError("kernel '" + K.name() + "' has no sign; the viscosity framework needs K >= 0");
  if (u.dim != K.dim() || f.dim != K.dim()) throw ValidationError("function and kernel dimensions differ");
  if (R_schedule.empty()) throw ValidationError("empty R schedule");
  for (std::size_t k = 0; k < R_schedule.size(); ++k) {
    if (!(R_schedule[k] > 3.0)) throw ValidationError("scheduled radii must exceed 3");
    if (k > 0 && !(R_schedule[k] > R_schedule[k - 1])) throw ValidationError("R schedule must increase");
  }
  if (opts.shift && opts.shift->max_degree() > m - 1) throw ValidationError("shift must have degree <= m-1");

  ViscosityReport rep;
  rep.m = m;
  rep.R_schedule = R_schedule;
  rep.tests = tests;

  // One limit run on the grid plus the touching points.
  std::vector<Point> pts = unit_ball_grid(K.dim());
  const std::size_t ng = pts.size();
  for (const TouchingTest& t : tests) {
    if (static_cast<int>(t.x0.size()) != K.dim()) throw ValidationError("touching point dimension differs");
    double r = 0.0;
    for (double v : t.x0) r += v * v;
    pts.push_back(std::sqrt(r) < 1.0 ? t.x0 : Point(t.x0.size(), 0.0));
  }
  LimitReport L = limit_driver(u, K, m, pts, R_schedule, cfg);
  auto S = [&](std::span<const double> x) { return opts.shift ? (*opts.shift)(x) : 0.0; };

  for (std::size_t k = 0; k < R_schedule.size(); ++k) {
    double gap = 0.0;
    for (std::size_t i = 0; i < ng; ++i)
      gap = std::max(gap, std::abs((L.fR_values[k][i] + S(pts[i])) - (f(pts[i]) + S(pts[i]))));
    rep.uniform_gap.push_back(gap);
  }

  for (const TouchingTest& t : tests) {
    double r = 0.0;
    for (double v : t.x0) r += v * v;
    rep.applicable.push_back(std::sqrt(r) < 1.0 && t.contact_error <= opts.touch_tol &&
                             t.touch_gap >= -opts.touch_tol);
  }

  const std::size_t nR = R_schedule.size();
  rep.margins.resize(tests.size() * nR);
  std::vector<ScalarField> glued;
  for (const TouchingTest& t : tests) glued.push_back(glue(u, t.phi, t.x0, opts.glue_radius));
  parallel_for(rep.margins.size(), [&](std::size_t idx) {
    const std::size_t ti = idx / nR, k = idx % nR;
    const TouchingTest& t = tests[ti];
    ViscosityMargin& mg = rep.margins[idx];
    mg.test = ti;
    mg.R = R_schedule[k];
    if (!rep.applicable[ti]) return;
    QuadResult a = direct_apply(glued[ti], K, CutoffSpec::sharp(mg.R), t.x0, cfg);
    const std::size_t pi = ng + ti;
    const double shift = S(t.x0);
    const double fR = L.fR_values[k][pi] + shift, fu = L.f_limit[pi] + shift;
    const double PR = L.P_R[k](t.x0) - shift;
    mg.A_test = a.value;
    mg.target = f(t.x0) + shift + (fR - fu) + PR;
    mg.margin = t.side == Side::below ? mg.A_test - mg.target : mg.target - mg.A_test;
    mg.quad_err = a.err_est + L.quad_err[k] + L.f_limit_err[pi];
  });

  rep.min_margin = std::numeric_limits<double>::infinity();
  bool margins_ok = true;
  for (const ViscosityMargin& mg : rep.margins) {
    if (!rep.applicable[mg.test]) continue;
    rep.min_margin = std::min(rep.min_margin, mg.margin);
    margins_ok = margins_ok && mg.margin >= -opts.margin_tol;
  }
  if (!std::isfinite(rep.min_margin)) rep.min_margin = 0.0;
  rep.pass = margins_ok && rep.uniform_gap.back() <= opts.uniform_tol;
  rep.verdict = rep.pass ? "no violation found" : "violation found";
  return rep;
}

}  // namespace nlop
