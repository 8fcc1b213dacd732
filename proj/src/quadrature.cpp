#include "nlop/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace nlop {

double QuadConfig::target(double value) const { return std::max(abs_tol, rel_tol * std::abs(value)); }

QuadConfig QuadConfig::tightened(double factor) const {
  QuadConfig c = *this;
  c.abs_tol *= factor;
  c.rel_tol *= factor;
  return c;
}

QuadResult& QuadResult::operator+=(const QuadResult& other) {
  value += other.value;
  err_est += other.err_est;
  evaluations += other.evaluations;
  converged = converged && other.converged;
  return *this;
}

QuadResult QuadResult::scaled(double factor) const {
  QuadResult r = *this;
  r.value *= factor;
  r.err_est *= std::abs(factor);
  return r;
}

namespace {

constexpr double kPi = std::numbers::pi;

struct Sample {
  double value;
  double err;
  long evals;
  bool ok;
};

struct Panel {
  double a, b;
  double value, err;
  /// Part of err due to this panel's rule, excluding nested integrals.
  double rule_err;
  int depth;
  bool ok;
};

template <class Eval>
Panel gk15(const Eval& eval, double a, double b, int depth, long& evals) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  static const auto& xk = GK::abscissa();
  static const auto& wk = GK::weights();
  static const auto& wg = G::weights();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Sample fc = eval(c);
  double resk = wk[0] * fc.value, resg = wg[0] * fc.value, inner = wk[0] * fc.err;
  long n = fc.evals;
  bool ok = fc.ok;
  for (std::size_t i = 1; i < xk.size(); ++i) {
    double dx = h * xk[i];
    Sample f1 = eval(c - dx), f2 = eval(c + dx);
    double pair = f1.value + f2.value;
    resk += wk[i] * pair;
    if (i % 2 == 0) resg += wg[i / 2] * pair;
    inner += wk[i] * (f1.err + f2.err);
    n += f1.evals + f2.evals;
    ok = ok && f1.ok && f2.ok;
  }
  evals += n;
  double rule = std::abs(resk - resg) * std::abs(h);
  if (!std::isfinite(resk)) rule = std::numeric_limits<double>::infinity();
  return Panel{a, b, resk * h, rule + inner * std::abs(h), rule, depth, ok};
}

std::vector<double> panel_edges(double a, double b, std::span<const double> breaks) {
  // Guards are relative to the points themselves: on long tail intervals a
  // guard scaled by |b| would swallow every break near the origin.
  auto close = [](double u, double v) { return std::abs(v - u) <= 1e-14 * (std::abs(u) + std::abs(v)); };
  std::vector<double> pts{a, b};
  for (double p : breaks)
    if (p > a && p < b && !close(a, p) && !close(p, b)) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(), close), pts.end());
  return pts;
}

template <class Eval>
QuadResult adaptive(const Eval& eval, double a, double b, const QuadConfig& cfg, std::span<const double> breaks) {
  QuadResult out;
  if (a == b) return out;
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::vector<double> edges = panel_edges(a, b, breaks);
  std::vector<Panel> panels;
  long evals = 0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) panels.push_back(gk15(eval, edges[i], edges[i + 1], 0, evals));

  auto cmp = [&panels](std::size_t i, std::size_t j) {
    if (panels[i].rule_err != panels[j].rule_err) return panels[i].rule_err < panels[j].rule_err;
    return i > j;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> queue(cmp);
  double total = 0.0, total_err = 0.0, total_rule = 0.0;
  for (std::size_t i = 0; i < panels.size(); ++i) {
    queue.push(i);
    total += panels[i].value;
    total_err += panels[i].err;
    total_rule += panels[i].rule_err;
  }
  bool exhausted = false;
  while (!(total_err <= cfg.target(total))) {
    // Once the rule error is negligible only the nested integrals can be at fault.
    if (queue.empty() || static_cast<int>(panels.size()) >= cfg.max_panels ||
        total_rule <= 0.25 * cfg.target(total)) {
      exhausted = true;
      break;
    }
    std::size_t i = queue.top();
    queue.pop();
    Panel p = panels[i];
    double mid = 0.5 * (p.a + p.b);
    if (p.depth >= cfg.max_depth || !(mid > p.a && mid < p.b)) continue;
    Panel left = gk15(eval, p.a, mid, p.depth + 1, evals);
    Panel right = gk15(eval, mid, p.b, p.depth + 1, evals);
    total += left.value + right.value - p.value;
    total_err += left.err + right.err - p.err;
    total_rule += left.rule_err + right.rule_err - p.rule_err;
    panels[i] = left;
    panels.push_back(right);
    queue.push(i);
    queue.push(panels.size() - 1);
  }
  // Deterministic reduction in panel order.
  std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  bool ok = true;
  for (const Panel& p : panels) {
    out.value += p.value;
    out.err_est += p.err;
    ok = ok && p.ok;
  }
  out.value *= sign;
  out.evaluations = evals;
  out.converged = ok && !exhausted && out.err_est <= cfg.target(out.value);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Ray parameters ρ in (lo, hi) at which c + ρω crosses a sphere |y| = b.
void sphere_crossings(std::span<const double> c, std::span<const double> omega, std::span<const double> radii,
                      double lo, double hi, std::vector<double>& out) {
  double cw = dot(c, omega), cc = dot(c, c);
  for (double b : radii) {
    double disc = cw * cw - cc + b * b;
    if (disc < 0.0) continue;
    double sq = std::sqrt(disc);
    for (double rho : {-cw - sq, -cw + sq})
      if (rho > lo && rho < hi) out.push_back(rho);
  }
}

/// Directions θ ∈ [0, period) along which rays from c are tangent to, or pass
/// through the centre of, a sphere |y| = b with b < |c|.
std::vector<double> tangent_angles(std::span<const double> c, std::span<const double> radii, double period) {
  std::vector<double> out;
  double nc = norm(c);
  if (nc == 0.0) return out;
  double phi = std::atan2(-c[1], -c[0]);
  for (double b : radii) {
    if (b >= nc) continue;
    double beta = std::asin(b / nc);
    for (double t : {phi - beta, phi + beta}) {
      double m = std::fmod(t, period);
      if (m < 0.0) m += period;
      out.push_back(m);
    }
  }
  return out;
}

struct PolarSpec {
  std::span<const double> origin_breaks;
  std::vector<double> rho_breaks;
};

QuadResult ray_integral(const Integrand& f, std::span<const double> c, std::span<const double> omega, int dim,
                        double lo, double hi, const QuadConfig& cfg, const PolarSpec& ps) {
  if (!(hi > lo)) return QuadResult{};
  std::vector<double> breaks;
  sphere_crossings(c, omega, ps.origin_breaks, lo, hi, breaks);
  for (double rho : ps.rho_breaks)
    if (rho > lo && rho < hi) breaks.push_back(rho);
  Point y(c.size());
  auto eval = [&](double rho) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = c[i] + rho * omega[i];
    double w = dim == 1 ? 1.0 : rho;
    return Sample{f(y) * w, 0.0, 1, true};
  };
  return adaptive(eval, lo, hi, cfg, breaks);
}

QuadResult polar_impl(const Integrand& f, std::span<const double> c, int dim, const RadialLimits& limits,
                      const QuadConfig& cfg, const PolarSpec& ps) {
  if (dim == 1) {
    QuadConfig half = cfg;
    half.abs_tol *= 0.5;
    auto run = [&](const QuadConfig& rc, double& mass) {
      QuadResult total;
      mass = 0.0;
      for (double s : {1.0, -1.0}) {
        std::array<double, 1> w{s};
        auto [lo, hi] = limits(w);
        QuadResult r = ray_integral(f, c, w, 1, lo, hi, rc, ps);
        mass += std::abs(r.value);
        total += r;
      }
      return total;
    };
    double mass = 0.0;
    QuadResult total = run(half, mass);
    if (!(total.err_est <= cfg.target(total.value)) && mass > 0.0) {
      // The two sides cancel: tighten their relative tolerance to match the sum.
      QuadConfig tight = half;
      tight.rel_tol *= std::clamp(std::abs(total.value) / mass, 1e-6, 1.0);
      long first = total.evaluations;
      total = run(tight, mass);
      total.evaluations += first;
    }
    total.converged = total.converged && total.err_est <= cfg.target(total.value);
    return total;
  }
  if (dim != 2) throw ValidationError("quadrature supports n = 1, 2 only");
  QuadConfig outer = cfg;
  outer.abs_tol = cfg.abs_tol / 2.0;
  outer.rel_tol = cfg.rel_tol / 2.0;
  std::vector<double> tbreaks = tangent_angles(c, ps.origin_breaks, kPi);
  for (double t : {kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0}) tbreaks.push_back(t);
  auto run = [&](double rel_factor) {
    QuadConfig inner = cfg;
    inner.abs_tol = cfg.abs_tol / (8.0 * kPi);
    inner.rel_tol = cfg.rel_tol / 4.0 * rel_factor;
    auto g = [&](double theta) {
      std::array<double, 2> w{std::cos(theta), std::sin(theta)};
      std::array<double, 2> mw{-w[0], -w[1]};
      auto [lo1, hi1] = limits(w);
      auto [lo2, hi2] = limits(mw);
      QuadResult r = ray_integral(f, c, w, 2, lo1, hi1, inner, ps) + ray_integral(f, c, mw, 2, lo2, hi2, inner, ps);
      return Sample{r.value, r.err_est, r.evaluations, r.converged};
    };
    return adaptive(g, 0.0, kPi, outer, tbreaks);
  };
  QuadResult total = run(1.0);
  if (!(total.err_est <= cfg.target(total.value))) {
    long first = total.evaluations;
    total = run(0.01);
    total.evaluations += first;
  }
  total.converged = total.converged && total.err_est <= cfg.target(total.value);
  return total;
}

void check_point(std::span<const double> p, int dim) {
  if (dim != 1 && dim != 2) throw ValidationError("quadrature supports n = 1, 2 only");
  if (static_cast<int>(p.size()) != dim) throw ValidationError("point dimension does not match the region");
}

}  // namespace

QuadResult integrate_interval(const Integrand1D& f, double a, double b, const QuadConfig& cfg,
                              std::span<const double> breakpoints) {
  auto eval = [&f](double t) { return Sample{f(t), 0.0, 1, true}; };
  return adaptive(eval, a, b, cfg, breakpoints);
}

QuadResult integrate_interval_nested(const std::function<QuadResult(double)>& f, double a, double b,
                                     const QuadConfig& cfg, std::span<const double> breakpoints) {
  auto eval = [&f](double t) {
    QuadResult r = f(t);
    return Sample{r.value, r.err_est, r.evaluations, r.converged};
  };
  return adaptive(eval, a, b, cfg, breakpoints);
}

double distance_to_sphere(std::span<const double> c, std::span<const double> omega, double radius) {
  double cw = dot(c, omega);
  double disc = cw * cw - dot(c, c) + radius * radius;
  return -cw + std::sqrt(std::max(disc, 0.0));
}

QuadResult integrate_polar(const Integrand& f, std::span<const double> center, int dim, const RadialLimits& limits,
                           const QuadConfig& cfg, std::span<const double> radial_breaks) {
  check_point(center, dim);
  return polar_impl(f, center, dim, limits, cfg, PolarSpec{radial_breaks, {}});
}

QuadResult integrate_region(const Integrand& f, const Region& region, int dim, const QuadConfig& cfg,
                            std::span<const double> radial_breaks) {
  if (const auto* iv = std::get_if<Interval>(&region)) {
    if (dim != 1) throw ValidationError("interval regions are one-dimensional");
    std::vector<double> breaks;
    for (double b : radial_breaks) {
      breaks.push_back(b);
      breaks.push_back(-b);
    }
    auto g = [&f](double t) {
      std::array<double, 1> p{t};
      return f(p);
    };
    return integrate_interval(g, iv->a, iv->b, cfg, breaks);
  }
  if (const auto* ball = std::get_if<Ball>(&region)) {
    check_point(ball->center, dim);
    if (!(ball->radius >= 0.0)) throw ValidationError("ball radius must be nonnegative");
    double r = ball->radius;
    return polar_impl(f, ball->center, dim, [r](std::span<const double>) { return std::make_pair(0.0, r); }, cfg,
                      PolarSpec{radial_breaks, {}});
  }
  const auto& ann = std::get<Annulus>(region);
  check_point(ann.center, dim);
  if (!(ann.inner >= 0.0 && ann.outer >= ann.inner)) throw ValidationError("annulus radii must satisfy 0 <= inner <= outer");
  double lo = ann.inner, hi = ann.outer;
  return polar_impl(f, ann.center, dim, [lo, hi](std::span<const double>) { return std::make_pair(lo, hi); }, cfg,
                    PolarSpec{radial_breaks, {}});
}

QuadResult integrate_tail(const Integrand& f, int dim, double inner_radius, double growth, double decay,
                          const QuadConfig& cfg, std::span<const double> center, std::span<const double> radial_breaks) {
  if (dim != 1 && dim != 2) throw ValidationError("quadrature supports n = 1, 2 only");
  if (!(inner_radius > 0.0)) throw ValidationError("tail inner radius must be positive");
  Point c = center.empty() ? Point(static_cast<std::size_t>(dim), 0.0) : Point(center.begin(), center.end());
  check_point(c, dim);
  const double margin = decay - growth;
  if (!(margin > dim))
    throw DivergentTail("divergent tail: decay " + std::to_string(decay) + " minus growth " + std::to_string(growth) +
                        " does not exceed the dimension");
  const double p = std::min(margin, dim + 30.0);
  const double excess = p - dim;
  const double surface = dim == 1 ? 2.0 : 2.0 * kPi;

  // C = max |f|·ρ^p over sampled rays and geometric radii.
  std::vector<Point> dirs;
  if (dim == 1) {
    dirs = {{1.0}, {-1.0}};
  } else {
    for (int a = 0; a < 16; ++a) {
      double t = (a + 0.5) * kPi / 8.0;
      dirs.push_back({std::cos(t), std::sin(t)});
    }
  }
  double C = 0.0;
  long evals = 0;
  Point y(c.size());
  auto sample = [&](std::span<const double> w, double rho) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = c[i] + rho * w[i];
    double v = std::abs(f(y));
    ++evals;
    if (std::isfinite(v)) C = std::max(C, v * std::pow(rho, p));
  };
  for (const Point& w : dirs) {
    for (int j = 0; j <= 320; ++j) sample(w, inner_radius * std::pow(2.0, j / 8.0));
    // Just outside each break sphere, where jumps switch the integrand on.
    std::vector<double> cross;
    sphere_crossings(c, w, radial_breaks, inner_radius, inner_radius * 1e12, cross);
    for (double rho : cross)
      for (double f : {1.0 + 1e-9, 1.01, 1.05}) sample(w, rho * f);
  }
  auto remainder = [&](double R) { return C * surface * std::pow(R, -excess) / excess; };

  std::vector<double> origin_breaks(radial_breaks.begin(), radial_breaks.end());
  auto limits_to = [inner_radius](double R) {
    return [inner_radius, R](std::span<const double>) { return std::make_pair(inner_radius, R); };
  };
  QuadResult first = polar_impl(f, c, dim, limits_to(2.0 * inner_radius), cfg, PolarSpec{origin_breaks, {}});
  const double tol = cfg.target(first.value);

  double R = 2.0 * inner_radius;
  if (cfg.tail_policy == TailPolicy::fixed_radius) {
    R = std::max(cfg.fixed_radius, 2.0 * inner_radius);
  } else if (C > 0.0) {
    R = std::max(R, std::pow(C * surface / (excess * 0.5 * tol), 1.0 / excess));
    R = std::min(R, inner_radius * 1e30);
  }
  PolarSpec ps{origin_breaks, {}};
  for (double b = 2.0 * inner_radius; b < R; b *= 2.0) ps.rho_breaks.push_back(b);
  QuadConfig main_cfg = cfg;
  main_cfg.abs_tol = 0.5 * tol;
  main_cfg.rel_tol = 0.5 * cfg.rel_tol;
  main_cfg.max_panels = std::max(cfg.max_panels, static_cast<int>(4 * ps.rho_breaks.size()) + 64);
  QuadResult out = polar_impl(f, c, dim, limits_to(R), main_cfg, ps);
  out.err_est += remainder(R);
  out.evaluations += evals + first.evaluations;
  out.converged = out.converged && out.err_est <= cfg.target(out.value) * (1.0 + 1e-12);
  return out;
}

QuadResult integrate_unit_interval_weighted(const Integrand1D& g, int m, const QuadConfig& cfg) {
  if (m < 1) throw ValidationError("weighted unit-interval integral needs m >= 1");
  auto h = [&g, m](double t) { return std::pow(1.0 - t, m - 1) * g(t); };
  return integrate_interval(h, 0.0, 1.0, cfg);
}

QuadResult near_diagonal_moment(const Kernel& K, std::span<const double> x, double rho0, double power,
                                const QuadConfig& cfg, bool absolute) {
  const int n = K.dim();
  check_point(x, n);
  Point c(x.begin(), x.end());
  auto f = [&](std::span<const double> y) {
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) r2 += (y[i] - c[static_cast<std::size_t>(i)]) * (y[i] - c[static_cast<std::size_t>(i)]);
    double k = K(c, y);
    if (absolute) k = std::abs(k);
    return std::pow(std::sqrt(r2), power) * k;
  };
  QuadConfig shell_cfg = cfg.tightened(0.1);
  std::vector<double> kbreaks;
  QuadResult total;
  double prev = 0.0, prev_ratio = std::numeric_limits<double>::quiet_NaN();
  for (int j = 0; j < 200; ++j) {
    double hi = rho0 * std::ldexp(1.0, -j), lo = 0.5 * hi;
    PolarSpec ps{{}, {}};
    if (K.meta().support_radius && *K.meta().support_radius > lo && *K.meta().support_radius < hi)
      ps.rho_breaks.push_back(*K.meta().support_radius);
    QuadResult shell = polar_impl(f, c, n, [lo, hi](std::span<const double>) { return std::make_pair(lo, hi); },
                                  shell_cfg, ps);
    total += shell;
    if (j == 0) {
      prev = shell.value;
      continue;
    }
    if (shell.value == 0.0) {
      total.converged = total.converged && true;
      return total;
    }
    double ratio = prev == 0.0 ? std::numeric_limits<double>::infinity() : shell.value / prev;
    prev = shell.value;
    if (j >= 4 && std::abs(ratio) >= 1.0 - 1e-9 && std::abs(prev_ratio) >= 1.0 - 1e-9) {
      total.converged = false;
      return total;
    }
    if (j >= 3 && std::abs(ratio) < 1.0 - 1e-9) {
      double rem = shell.value * ratio / (1.0 - ratio);
      bool stable = std::isfinite(prev_ratio) && std::abs(ratio - prev_ratio) <= 1e-8 * std::abs(ratio);
      if (stable || std::abs(rem) <= 0.25 * cfg.target(total.value)) {
        double drift = std::isfinite(prev_ratio) ? std::abs(ratio - prev_ratio) : 0.0;
        total.value += rem;
        total.err_est += std::abs(shell.value) * drift / ((1.0 - ratio) * (1.0 - ratio));
        total.converged = total.converged && total.err_est <= cfg.target(total.value);
        return total;
      }
    }
    prev_ratio = ratio;
  }
  total.converged = false;
  return total;
}

namespace {

bool pure_power(const Kernel& K) {
  return K.spec() && K.spec()->kind == KernelKind::frac_lap && !K.spec()->epsilon;
}

}  // namespace

QuadResult pv_second_difference(const ScalarField& u, const Kernel& K, std::span<const double> x, double r,
                                const QuadConfig& cfg) {
  const int n = K.dim();
  check_point(x, n);
  if (u.dim != n) throw ValidationError("function and kernel dimensions differ");
  if (!(r > 0.0)) throw ValidationError("principal value radius must be positive");
  const bool sym = K.meta().symmetric_in_z;
  double theta = std::clamp(u.theta_at(x), 0.0, 2.0);
  if (!sym) theta = std::min(theta, 1.0);
  const double sigma = K.meta().singularity_order;
  const double kappa = theta - sigma + n;
  const double step = sym ? 2.0 : 1.0;
  const Point c(x.begin(), x.end());
  const double ux = u(c);

  Point yp(c.size()), ym(c.size());
  auto D = [&](std::span<const double> w, double rho) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      yp[i] = c[i] + rho * w[i];
      ym[i] = c[i] - rho * w[i];
    }
    return sym ? (ux - u(yp)) + (ux - u(ym)) : ux - u(yp);
  };
  auto Kray = [&](std::span<const double> w, double rho) {
    Point y(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) y[i] = c[i] + rho * w[i];
    return K(c, y);
  };

  // ∫_0^a ρ^{p+n-1} K(x, x+ρω) dρ; cached per (p, a) for radial kernels.
  std::map<std::pair<double, double>, double> cache;
  auto moment = [&](std::span<const double> w, double p, double a) {
    const double kp = p + n - sigma;
    if (!(kp > 0.0)) return std::numeric_limits<double>::infinity();
    if (pure_power(K)) return K.profile(1.0) * std::pow(a, kp) / kp;
    if (K.radial()) {
      auto it = cache.find({p, a});
      if (it != cache.end()) return it->second;
    }
    auto g = [&](double rho) { return std::pow(rho, p + n - 1) * Kray(w, rho); };
    QuadConfig mc;
    mc.abs_tol = 1e-300;
    mc.rel_tol = 1e-13;
    const double q0 = std::pow(2.0, -kp);
    double sum = 0.0;
    for (int j = 0; j < 200; ++j) {
      double hi = a * std::ldexp(1.0, -j), lo = 0.5 * hi;
      std::vector<double> br;
      if (K.meta().support_radius) br.push_back(*K.meta().support_radius);
      double s = integrate_interval(g, lo, hi, mc, br).value;
      sum += s;
      double rem = s * q0 / (1.0 - q0);
      if (j >= 3 && std::abs(rem) <= 1e-15 * std::abs(sum)) {
        sum += rem;
        break;
      }
      if (j >= 40) {
        sum += rem;
        break;
      }
    }
    if (K.radial()) cache[{p, a}] = sum;
    return sum;
  };

  std::vector<double> ubreaks = u.radial_breaks;
  const double tol_abs = n == 1 ? 0.5 * cfg.abs_tol : cfg.abs_tol / (4.0 * kPi);
  const double tol_rel = 0.5 * cfg.rel_tol;
  QuadConfig shell_cfg = cfg;
  shell_cfg.abs_tol = 0.25 * tol_abs;
  shell_cfg.rel_tol = 0.25 * tol_rel;

  auto ray = [&](std::span<const double> w) {
    Point wv(w.begin(), w.end());
    Point mw(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) mw[i] = -w[i];
    auto H = [&](double rho) { return D(wv, rho) * Kray(wv, rho) * (n == 1 ? 1.0 : rho); };
    QuadResult sum;
    double best_T = 0.0, best_diff = std::numeric_limits<double>::infinity(), best_err = 0.0, T_prev = 0.0;
    int stale = 0;
    const int jmax = 30;
    for (int j = 0; j < jmax; ++j) {
      double hi = r * std::ldexp(1.0, -j), lo = 0.5 * hi;
      std::vector<double> br;
      sphere_crossings(c, wv, ubreaks, lo, hi, br);
      if (sym) sphere_crossings(c, mw, ubreaks, lo, hi, br);
      if (K.meta().support_radius) br.push_back(*K.meta().support_radius);
      sum += integrate_interval(H, lo, hi, shell_cfg, br);
      if (!(kappa > 0.0)) {
        best_T = sum.value;
        best_err = sum.err_est;
        if (j >= 20) break;
        continue;
      }
      // Local model D(ρω) ≈ c1 (ρ/lo)^{ϑ} + c2 (ρ/lo)^{ϑ+step} on the inner ball B_lo.
      const double p1 = theta, p2 = theta + step;
      double D1 = D(wv, lo), D2 = D(wv, 0.5 * lo);
      double c2 = (D2 - D1 * std::pow(2.0, -p1)) / (std::pow(2.0, -p2) - std::pow(2.0, -p1));
      double c1 = D1 - c2;
      double model = 0.0;
      if (c1 != 0.0) model += c1 * moment(wv, p1, lo) / std::pow(lo, p1);
      if (c2 != 0.0) model += c2 * moment(wv, p2, lo) / std::pow(lo, p2);
      double T = sum.value + model;
      if (j >= 1) {
        double diff = std::abs(T - T_prev);
        if (diff < best_diff) {
          best_diff = diff;
          best_T = T;
          best_err = sum.err_est;
          stale = 0;
        } else {
          ++stale;
        }
        if (j >= 2 && diff <= 0.25 * std::max(tol_abs, tol_rel * std::abs(T))) break;
        if (stale >= 4) break;
      }
      T_prev = T;
    }
    QuadResult out;
    out.value = best_T;
    out.evaluations = sum.evaluations;
    if (kappa > 0.0) {
      out.err_est = best_err + best_diff;
      out.converged = sum.converged && best_diff <= std::max(tol_abs, tol_rel * std::abs(best_T));
    } else {
      out.err_est = std::abs(best_T);
      out.converged = false;
    }
    return out;
  };

  if (n == 1) {
    std::array<double, 1> plus{1.0}, minus{-1.0};
    QuadResult out = ray(plus);
    if (!sym) out += ray(minus);
    return out;
  }
  auto g = [&](double t) {
    std::array<double, 2> w{std::cos(t), std::sin(t)};
    return ray(w);
  };
  const double period = sym ? kPi : 2.0 * kPi;
  std::vector<double> tb = tangent_angles(c, ubreaks, sym ? kPi : 2.0 * kPi);
  for (int q = 1; q < 4; ++q) tb.push_back(q * period / 4.0);
  QuadConfig outer = cfg;
  outer.abs_tol *= 0.5;
  outer.rel_tol *= 0.5;
  QuadResult out = integrate_interval_nested(g, 0.0, period, outer, tb);
  if (!(kappa > 0.0)) out.converged = false;
  return out;
}

}  // namespace nlop
