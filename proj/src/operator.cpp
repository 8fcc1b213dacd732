#include "nlop/operator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>

#include "nlop/error.hpp"

namespace nlop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return std::sqrt(s);
}

std::vector<double> merge_breaks(std::vector<double> a, std::span<const double> b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

void check_inputs(const ScalarField& u, const Kernel& K, std::span<const double> x) {
  if (u.dim != K.dim()) throw ValidationError("function and kernel dimensions differ");
  if (static_cast<int>(x.size()) != K.dim()) throw ValidationError("evaluation point has the wrong dimension");
  if (!(norm(x) < 1.0)) throw ValidationError("evaluation point must lie in the open unit ball");
}

void check_order(const Kernel& K, int m) {
  if (m < 0) throw ValidationError("m must be nonnegative");
  if (m > K.meta().max_taylor_order)
    throw ValidationError("m = " + std::to_string(m) + " exceeds the Taylor order " +
                          std::to_string(K.meta().max_taylor_order) + " of kernel " + K.name());
}

// The near-diagonal condition is local, so regularity is taken at the evaluation points.
void check_hypotheses(const ScalarField& u, const Kernel& K, int m, double R_probe, const QuadConfig& cfg,
                      std::span<const Point> points) {
  check_order(K, m);
  double theta = 2.0;
  for (const Point& p : points) theta = std::min(theta, u.theta_at(p));
  if (!K.meta().admissible_theta.contains(theta))
    throw ValidationError("regularity " + std::to_string(theta) + " of " + u.name +
                          " is outside the admissible range " + K.meta().admissible_theta.str() + " of kernel " +
                          K.name());
  MembershipReport rep = check_membership(u, K, m, R_probe, cfg);
  if (!rep.pass) {
    std::string msg = "function " + u.name + " fails the growth hypotheses for m = " + std::to_string(m);
    for (const auto& d : rep.diagnostics) msg += "; " + d;
    throw ValidationError(msg);
  }
}

/// Outer radius of the region where τu can be nonzero.
double outer_radius(const ScalarField& u, const CutoffSpec& tau) {
  return u.support_radius ? std::min(*u.support_radius, tau.R) : tau.R;
}

/// f1 = P.V. ∫_{B_3} (u(x) - u(y)) K(x,y) dy.
QuadResult near_part(const ScalarField& u, const Kernel& K, std::span<const double> x, const QuadConfig& cfg) {
  return pv_second_difference(u, K, x, 3.0 - norm(x), cfg);
}

/// ∫_{B_3 \ B_r(x)} (u(x) - u(y)) K(x,y) dy with r = 3 - |x|.
QuadResult near_remainder(const ScalarField& u, const Kernel& K, std::span<const double> x, const QuadConfig& cfg) {
  const double r = 3.0 - norm(x);
  if (norm(x) == 0.0) return QuadResult{};
  const Point c(x.begin(), x.end());
  const double ux = u(c);
  auto f = [&](std::span<const double> y) { return (ux - u(y)) * K(c, y); };
  auto limits = [&c, r](std::span<const double> w) { return std::make_pair(r, distance_to_sphere(c, w, 3.0)); };
  std::vector<double> breaks = merge_breaks(u.radial_breaks, std::array<double, 1>{3.0});
  return integrate_polar(f, c, K.dim(), limits, cfg, breaks);
}

}  // namespace

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

CutoffSpec CutoffSpec::sharp(double R) {
  CutoffSpec c;
  c.kind = Kind::sharp;
  c.R = R;
  c.validate();
  return c;
}

CutoffSpec CutoffSpec::smooth(double R, double width) {
  CutoffSpec c;
  c.kind = Kind::smooth;
  c.R = R;
  c.width = width;
  c.validate();
  return c;
}

CutoffSpec CutoffSpec::parse(const std::string& src) {
  auto colon = src.find(':');
  if (colon == std::string::npos) throw ValidationError("cut-off must read sharp:R or smooth:R,w");
  std::string kind = src.substr(0, colon), rest = src.substr(colon + 1);
  auto number = [&src](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad number in cut-off '" + src + "'");
    }
    if (used != s.size()) throw ValidationError("bad number in cut-off '" + src + "'");
    return v;
  };
  if (kind == "sharp") return sharp(number(rest));
  if (kind == "smooth") {
    auto comma = rest.find(',');
    if (comma == std::string::npos) throw ValidationError("smooth cut-off needs R,w");
    return smooth(number(rest.substr(0, comma)), number(rest.substr(comma + 1)));
  }
  throw ValidationError("unknown cut-off kind '" + kind + "'");
}

std::string CutoffSpec::str() const {
  std::ostringstream os;
  os.precision(17);
  if (kind == Kind::sharp)
    os << "sharp:" << R;
  else
    os << "smooth:" << R << "," << width;
  return os.str();
}

void CutoffSpec::validate() const {
  if (!(R > 3.0) || !std::isfinite(R)) throw ValidationError("cut-off radius must be finite and exceed 3");
  if (kind == Kind::smooth && !(width > 0.0 && R - width >= 3.0))
    throw ValidationError("smooth cut-off needs 0 < w <= R - 3");
}

double CutoffSpec::operator()(std::span<const double> y) const {
  double r = norm(y);
  if (kind == Kind::sharp) return r < R ? 1.0 : 0.0;
  return smoothstep((R - r) / width);
}

std::vector<double> CutoffSpec::breaks() const {
  if (kind == Kind::sharp) return {R};
  return {R - width, R};
}

ScalarField apply_cutoff(const ScalarField& u, const CutoffSpec& tau) {
  tau.validate();
  ScalarField v = u;
  v.eval = [eval = u.eval, tau](std::span<const double> y) {
    double t = tau(y);
    return t == 0.0 ? 0.0 : t * eval(y);
  };
  if (tau.kind == CutoffSpec::Kind::smooth) v.gradient.reset();
  v.growth_exponent = -kInf;
  v.support_radius = outer_radius(u, tau);
  v.radial_breaks = merge_breaks(u.radial_breaks, tau.breaks());
  v.name = u.name + "*tau[" + tau.str() + "]";
  return v;
}

double psi(const Kernel& K, int m, std::span<const double> x, std::span<const double> y, const QuadConfig& cfg) {
  check_order(K, m);
  if (static_cast<int>(x.size()) != K.dim() || static_cast<int>(y.size()) != K.dim())
    throw ValidationError("psi: point dimension does not match the kernel");
  if (m == 0) return -K(x, y);
  const int n = K.dim();
  double out = 0.0;
  Point tx(x.size());
  for (const MultiIndex& alpha : enumerate(n, m)) {
    if (alpha.order() != m) continue;
    double xa = monomial(alpha, x);
    if (xa == 0.0) continue;
    auto g = [&](double t) {
      for (std::size_t i = 0; i < x.size(); ++i) tx[i] = t * x[i];
      return K.deriv(alpha, tx, y).value;
    };
    QuadResult I = integrate_unit_interval_weighted(g, m, cfg);
    out -= m * xa / static_cast<double>(factorial(alpha)) * I.value;
  }
  return out;
}

PsiEvaluator::PsiEvaluator(const Kernel& K, int m) : K_(&K), m_(m) {
  check_order(K, m);
  for (const MultiIndex& a : enumerate(K.dim(), m))
    if (a.order() == m) alphas_.push_back(a);
}

double PsiEvaluator::operator()(std::span<const double> x, std::span<const double> y) const {
  if (m_ == 0) return -(*K_)(x, y);
  using G = boost::math::quadrature::gauss<double, 20>;
  static const auto& xg = G::abscissa();
  static const auto& wg = G::weights();
  double out = 0.0;
  Point tx(x.size());
  for (const MultiIndex& alpha : alphas_) {
    double xa = monomial(alpha, x);
    if (xa == 0.0) continue;
    auto g = [&](double t) {
      for (std::size_t i = 0; i < x.size(); ++i) tx[i] = t * x[i];
      return std::pow(1.0 - t, m_ - 1) * K_->deriv(alpha, tx, y).value;
    };
    // Gauss–Legendre on [0,1] from the symmetric table on [-1,1].
    double I = 0.0;
    for (std::size_t i = 0; i < xg.size(); ++i) {
      double a = 0.5 * xg[i];
      if (xg[i] == 0.0)
        I += wg[i] * g(0.5);
      else
        I += wg[i] * (g(0.5 + a) + g(0.5 - a));
    }
    I *= 0.5;
    out -= m_ * xa / static_cast<double>(factorial(alpha)) * I;
  }
  return out;
}

std::map<MultiIndex, QuadResult, GradedLex> theta_coeffs(const ScalarField& u, const Kernel& K,
                                                        const CutoffSpec& tau, int m, const QuadConfig& cfg) {
  tau.validate();
  check_order(K, m);
  if (u.dim != K.dim()) throw ValidationError("function and kernel dimensions differ");
  const int n = K.dim();
  std::map<MultiIndex, QuadResult, GradedLex> out;
  const double outer = outer_radius(u, tau);
  const std::vector<double> breaks = merge_breaks(u.radial_breaks, tau.breaks());
  const Point zero(static_cast<std::size_t>(n), 0.0);
  for (const MultiIndex& alpha : enumerate(n, m - 1)) {
    if (outer <= 3.0) {
      out[alpha] = QuadResult{};
      continue;
    }
    const double af = static_cast<double>(factorial(alpha));
    auto f = [&](std::span<const double> y) {
      double t = tau(y);
      if (t == 0.0) return 0.0;
      double v = u(y);
      if (v == 0.0) return 0.0;
      return t * v * K.deriv(alpha, zero, y).value / af;
    };
    out[alpha] = integrate_region(f, Annulus{zero, 3.0, outer}, n, cfg, breaks);
  }
  return out;
}

Decomposition decompose(const ScalarField& u, const Kernel& K, const CutoffSpec& tau, int m,
                        std::span<const double> x, const QuadConfig& cfg, bool check) {
  tau.validate();
  check_inputs(u, K, x);
  if (check) {
    const Point xp(x.begin(), x.end());
    check_hypotheses(u, K, m, std::max(10.0, tau.R), cfg, std::span<const Point>(&xp, 1));
  }
  else
    check_order(K, m);
  const int n = K.dim();
  const Point c(x.begin(), x.end());
  const Point zero(static_cast<std::size_t>(n), 0.0);

  Decomposition d;
  d.x = c;
  d.m = m;
  d.f1 = near_part(u, K, c, cfg) + near_remainder(u, K, c, cfg);

  const double ux = u(c);
  if (ux != 0.0) {
    auto k = [&](std::span<const double> y) { return K(c, y); };
    d.f2 = integrate_tail(k, n, 3.0, 0.0, K.tail_decay(0), cfg).scaled(ux);
  }

  const double outer = outer_radius(u, tau);
  const std::vector<double> breaks = merge_breaks(u.radial_breaks, tau.breaks());
  if (outer > 3.0) {
    PsiEvaluator ps(K, m);
    auto f = [&](std::span<const double> y) {
      double t = tau(y);
      if (t == 0.0) return 0.0;
      double v = u(y);
      if (v == 0.0) return 0.0;
      return t * v * ps(c, y);
    };
    d.fstar = integrate_region(f, Annulus{zero, 3.0, outer}, n, cfg, breaks);
  }

  d.P = Polynomial(n, m - 1);
  for (const auto& [alpha, q] : theta_coeffs(u, K, tau, m, cfg)) {
    d.theta[alpha] = q.value;
    d.P.set(alpha, -q.value);
    d.P_err += std::abs(monomial(alpha, c)) * q.err_est;
  }
  d.total = d.P(c) + d.f1.value + d.f2.value + d.fstar.value;
  return d;
}

QuadResult direct_apply(const ScalarField& u, const Kernel& K, const CutoffSpec& tau, std::span<const double> x,
                        const QuadConfig& cfg) {
  return direct_apply(apply_cutoff(u, tau), K, x, cfg);
}

QuadResult direct_apply(const ScalarField& u, const Kernel& K, std::span<const double> x, const QuadConfig& cfg) {
  check_inputs(u, K, x);
  const Point c(x.begin(), x.end());
  // B_1(x) stays inside B_2, where u keeps its local regularity.
  QuadResult out = pv_second_difference(u, K, c, 1.0, cfg);
  const double ux = u(c);
  auto f = [&](std::span<const double> y) {
    double v = u(y);
    return (ux - v) * K(c, y);
  };
  const double growth = std::max(u.growth_exponent, 0.0);
  out += integrate_tail(f, K.dim(), 1.0, growth, K.tail_decay(0), cfg, c, u.radial_breaks);
  return out;
}

QuadResult tail_bound(const ScalarField& u, const Kernel& K, int m, double R, const QuadConfig& cfg) {
  check_order(K, m);
  if (u.dim != K.dim()) throw ValidationError("function and kernel dimensions differ");
  if (!(R > 0.0)) throw ValidationError("tail radius must be positive");
  if (u.support_radius && *u.support_radius <= R) return QuadResult{};
  auto f = [&](std::span<const double> y) {
    double v = std::abs(u(y));
    if (v == 0.0) return 0.0;
    return v * sup_deriv_on_unit_ball(K, m, y);
  };
  return integrate_tail(f, K.dim(), R, u.growth_exponent, K.tail_decay(m), cfg, {}, u.radial_breaks);
}

std::vector<Point> unit_ball_grid(int n) {
  std::vector<Point> g;
  if (n == 1) {
    for (int i = 0; i <= 32; ++i) g.push_back({-0.96 + 0.06 * i});
    return g;
  }
  if (n != 2) throw ValidationError("grids exist for n = 1, 2 only");
  g.push_back({0.0, 0.0});
  for (int j = 1; j <= 12; ++j) {
    double r = 0.96 * j / 12.0;
    for (int k = 0; k < 13; ++k) {
      double t = 2.0 * std::numbers::pi * k / 13.0;
      g.push_back({r * std::cos(t), r * std::sin(t)});
    }
  }
  return g;
}

PolyFit fit_on_grid(const std::vector<Point>& grid, std::span<const double> values, int degree) {
  if (grid.size() != values.size()) throw ValidationError("grid and values differ in length");
  if (grid.empty()) throw ValidationError("empty grid");
  std::vector<std::pair<Point, double>> samples;
  samples.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) samples.emplace_back(grid[i], values[i]);
  return best_poly_fit(samples, static_cast<int>(grid[0].size()), degree);
}

int thread_count() {
  if (const char* env = std::getenv("NLOP_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  // Static interleaved assignment; the first exception wins.
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

LimitReport limit_driver(const ScalarField& u, const Kernel& K, int m, const std::vector<Point>& grid,
                         const std::vector<double>& R_schedule, const QuadConfig& cfg, const LimitOptions& opts) {
  if (grid.empty()) throw ValidationError("limit driver needs a nonempty grid");
  if (R_schedule.empty()) throw ValidationError("limit driver needs a nonempty R schedule");
  if (!(R_schedule[0] >= 4.0)) throw ValidationError("R schedule must start at 4 or beyond");
  for (std::size_t k = 1; k < R_schedule.size(); ++k)
    if (!(R_schedule[k] > R_schedule[k - 1])) throw ValidationError("R schedule must be increasing");
  for (const Point& x : grid) check_inputs(u, K, x);
  if (opts.check_hypotheses)
    check_hypotheses(u, K, m, std::max(10.0, R_schedule.back()), cfg, grid);
  else
    check_order(K, m);
  if (opts.cutoff == CutoffSpec::Kind::smooth)
    for (double R : R_schedule) CutoffSpec::smooth(R, opts.smooth_width);

  const int n = K.dim();
  const std::size_t G = grid.size(), NR = R_schedule.size();
  const Point zero(static_cast<std::size_t>(n), 0.0);
  LimitReport rep;
  rep.m = m;
  rep.grid = grid;
  rep.R_schedule = R_schedule;

  auto cutoff = [&](double R) {
    return opts.cutoff == CutoffSpec::Kind::sharp ? CutoffSpec::sharp(R) : CutoffSpec::smooth(R, opts.smooth_width);
  };
  for (double R : R_schedule) {
    Polynomial P(n, m - 1);
    for (const auto& [alpha, q] : theta_coeffs(u, K, cutoff(R), m, cfg)) P.set(alpha, -q.value);
    rep.P_R.push_back(P);
  }

  const PsiEvaluator ps(K, m);
  std::vector<std::vector<QuadResult>> fR(NR, std::vector<QuadResult>(G));
  std::vector<QuadResult> f3(G);
  parallel_for(G, [&](std::size_t i) {
    const Point& x = grid[i];
    QuadResult base = near_part(u, K, x, cfg) + near_remainder(u, K, x, cfg);
    const double ux = u(x);
    if (ux != 0.0) {
      auto k = [&](std::span<const double> y) { return K(x, y); };
      base += integrate_tail(k, n, 3.0, 0.0, K.tail_decay(0), cfg).scaled(ux);
    }
    auto uy_psi = [&](std::span<const double> y) {
      double v = u(y);
      return v == 0.0 ? 0.0 : v * ps(x, y);
    };
    if (opts.cutoff == CutoffSpec::Kind::sharp) {
      // f* accumulates over the shells between consecutive radii.
      QuadResult acc = base;
      double lo = 3.0;
      for (std::size_t k = 0; k < NR; ++k) {
        double hi = u.support_radius ? std::min(R_schedule[k], std::max(*u.support_radius, 3.0)) : R_schedule[k];
        if (hi > lo) {
          acc += integrate_region(uy_psi, Annulus{zero, lo, hi}, n, cfg, u.radial_breaks);
          lo = hi;
        }
        fR[k][i] = acc;
      }
    } else {
      for (std::size_t k = 0; k < NR; ++k) {
        CutoffSpec tau = cutoff(R_schedule[k]);
        double outer = outer_radius(u, tau);
        std::vector<double> breaks = merge_breaks(u.radial_breaks, tau.breaks());
        QuadResult acc = base;
        if (outer > 3.0) {
          auto f = [&](std::span<const double> y) {
            double t = tau(y);
            return t == 0.0 ? 0.0 : t * uy_psi(y);
          };
          acc += integrate_region(f, Annulus{zero, 3.0, outer}, n, cfg, breaks);
        }
        fR[k][i] = acc;
      }
    }
    QuadResult tail;
    if (!(u.support_radius && *u.support_radius <= 3.0))
      tail = integrate_tail(uy_psi, n, 3.0, u.growth_exponent, K.tail_decay(m), cfg, {}, u.radial_breaks);
    f3[i] = base + tail;
  });

  rep.fR_values.assign(NR, std::vector<double>(G));
  rep.quad_err.assign(NR, 0.0);
  std::vector<std::string> unconverged;
  for (std::size_t k = 0; k < NR; ++k) {
    for (std::size_t i = 0; i < G; ++i) {
      rep.fR_values[k][i] = fR[k][i].value;
      rep.quad_err[k] = std::max(rep.quad_err[k], fR[k][i].err_est);
    }
  }
  for (std::size_t i = 0; i < G; ++i) {
    rep.f_limit.push_back(f3[i].value);
    rep.f_limit_err.push_back(f3[i].err_est);
  }
  for (double R : R_schedule) rep.tail_bounds.push_back(tail_bound(u, K, m, R, cfg).value);

  rep.successive_residuals.assign(NR, 0.0);
  rep.limit_residuals.assign(NR, 0.0);
  std::vector<double> diff(G);
  // Too few points to separate the polynomial part: residuals are not defined.
  const bool can_fit = G >= enumerate(n, m - 1).size();
  for (std::size_t k = 0; k < NR && !can_fit; ++k) {
    rep.successive_residuals[k] = std::numeric_limits<double>::quiet_NaN();
    rep.limit_residuals[k] = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t k = 0; k < NR && can_fit; ++k) {
    if (k > 0) {
      for (std::size_t i = 0; i < G; ++i) diff[i] = rep.fR_values[k][i] - rep.fR_values[k - 1][i];
      rep.successive_residuals[k] = fit_on_grid(grid, diff, m - 1).residual_sup;
    }
    for (std::size_t i = 0; i < G; ++i) diff[i] = rep.fR_values[k][i] - rep.f_limit[i];
    rep.limit_residuals[k] = fit_on_grid(grid, diff, m - 1).residual_sup;
  }
  for (std::size_t k = NR; k-- > 0;) {
    if (rep.limit_residuals[k] > opts.tol) break;
    rep.converged_at = static_cast<int>(k);
  }
  bool settling = false;
  if (NR >= 4) {
    const auto& s = rep.successive_residuals;
    settling = s[NR - 1] <= s[NR - 2] && s[NR - 2] <= s[NR - 3] && s[NR - 1] <= opts.tol;
  }
  rep.converged = rep.converged_at.has_value() || settling;
  if (!rep.converged) {
    std::ostringstream os;
    os.precision(6);
    os << "not converged: residual " << rep.limit_residuals.back() << " at R = " << R_schedule.back()
       << " against tolerance " << opts.tol << ", tail bound " << rep.tail_bounds.back();
    rep.diagnostic = os.str();
  }
  return rep;
}

}  // namespace nlop
