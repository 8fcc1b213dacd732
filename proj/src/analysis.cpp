#include "nlop/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nlop/error.hpp"

namespace nlop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_fk_domain(double k, double x) {
  if (!(k > 1.0) || !std::isfinite(k)) throw ValidationError("counterexample needs k > 1");
  if (!(std::abs(x) < 1.0)) throw ValidationError("counterexample needs |x| < 1");
}

std::vector<Point> default_x_samples(int n) {
  if (n == 1) return {{-0.5}, {0.0}, {0.5}};
  return {{0.0, 0.0}, {0.5, 0.0}, {0.0, -0.5}};
}

std::vector<Point> b4_sample(int n) {
  std::vector<Point> out;
  if (n == 1) {
    for (int i = 0; i <= 400; ++i) out.push_back({-4.0 + 8.0 * i / 400.0});
    return out;
  }
  out.push_back({0.0, 0.0});
  for (int i = 1; i <= 20; ++i) {
    double r = 4.0 * i / 20.0;
    for (int j = 0; j < 24; ++j) {
      double a = 2.0 * std::numbers::pi * j / 24.0;
      out.push_back({r * std::cos(a), r * std::sin(a)});
    }
  }
  return out;
}

std::vector<double> merged_breaks(const ScalarField& a, const ScalarField& b) {
  std::vector<double> out = a.radial_breaks;
  out.insert(out.end(), b.radial_breaks.begin(), b.radial_breaks.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct GridValues {
  std::vector<double> values;
  double err = 0.0;
};

// Au on the grid for m = 0, limit_driver's f_u otherwise.
GridValues f_on_grid(const ScalarField& u, const Kernel& K, int m, const std::vector<Point>& grid,
                     const QuadConfig& cfg, const StabilityOptions& opts) {
  GridValues out;
  if (m == 0) {
    std::vector<QuadResult> r(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { r[i] = direct_apply(u, K, grid[i], cfg); });
    for (const QuadResult& q : r) {
      out.values.push_back(q.value);
      out.err = std::max(out.err, q.err_est);
    }
    return out;
  }
  LimitReport rep = limit_driver(u, K, m, grid, opts.R_schedule, cfg);
  out.values = rep.f_limit;
  for (double e : rep.f_limit_err) out.err = std::max(out.err, e);
  return out;
}

double residual_after_fit(const std::vector<Point>& grid, const std::vector<double>& d, int m) {
  if (m == 0) {
    double s = 0.0;
    for (double v : d) s = std::max(s, std::abs(v));
    return s;
  }
  return fit_on_grid(grid, d, m - 1).residual_sup;
}

}  // namespace

void CounterexampleCase::validate() const {
  check_fk_domain(k, x);
  if (!(R > k) || !std::isfinite(R)) throw ValidationError("counterexample needs R > k");
}

double counterexample_fk(double k, double x) {
  check_fk_domain(k, x);
  return k * x / (k - x) + k * std::log(k / (k - x));
}

double counterexample_truncated(double k, double R, double x) {
  CounterexampleCase{k, R, x}.validate();
  return counterexample_fk(k, x) + k * std::log((R - x) / R) - k * x / (R - x) + k * std::log(R) - k * std::log(k);
}

QuadResult counterexample_quadrature(double k, double R, double x, const QuadConfig& cfg) {
  CounterexampleCase{k, R, x}.validate();
  auto f = [k, x](double y) { return k * y / ((y - x) * (y - x)); };
  // Geometric breakpoints keep the panels balanced on long intervals.
  std::vector<double> br;
  for (double b = 2.0 * k; b < R; b *= 2.0) br.push_back(b);
  return integrate_interval(f, k, R, cfg, br);
}

double footnote_fk(double k, double x) {
  check_fk_domain(k, x);
  const double k2 = k * k;
  return (std::log((k2 - x) / (k - x)) - x / (k2 - x) + x / (k - x)) / std::log(k);
}

std::pair<double, double> footnote_bounds(double k, double s) {
  if (!(k > 1.0)) throw ValidationError("footnote bounds need k > 1");
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("footnote bounds need 0 < s < 1");
  return {std::pow(k / (k + 1.0), 1.0 + 2.0 * s), std::pow(k / (k - 1.0), 1.0 + 2.0 * s)};
}

StabilityReport stability_probe(const std::vector<ScalarField>& u_seq, const ScalarField& u_lim, const Kernel& K,
                                int m, const std::vector<Point>& grid, const QuadConfig& cfg,
                                const StabilityOptions& opts) {
  const int n = K.dim();
  if (u_seq.empty()) throw ValidationError("stability_probe needs a non-empty sequence");
  if (grid.empty()) throw ValidationError("stability_probe needs a grid");
  if (m < 0 || m > K.meta().max_taylor_order) throw ValidationError("order m outside the kernel's Taylor order");
  if (u_lim.dim != n) throw ValidationError("limit function and kernel dimensions differ");
  for (const ScalarField& u : u_seq)
    if (u.dim != n) throw ValidationError("sequence member and kernel dimensions differ");
  if (opts.radii.empty()) throw ValidationError("stability_probe needs probe radii");

  StabilityReport rep;
  rep.m = m;
  rep.grid = grid;
  rep.radii = opts.radii;
  const std::vector<Point> xs = opts.x_samples.empty() ? default_x_samples(n) : opts.x_samples;
  GridValues lim = f_on_grid(u_lim, K, m, grid, cfg, opts);
  rep.f_limit = lim.values;

  const std::vector<Point> b4 = b4_sample(n);
  for (std::size_t idx = 0; idx < u_seq.size(); ++idx) {
    const ScalarField& uk = u_seq[idx];
    StabilityEntry e;
    e.label = uk.name.empty() ? "u_" + std::to_string(idx) : uk.name;
    try {
      for (const Point& p : b4) {
        e.b4_distance = std::max(e.b4_distance, std::abs(uk(p) - u_lim(p)));
        Point gk = uk.gradient_at(p), gu = u_lim.gradient_at(p);
        for (int i = 0; i < n; ++i) e.b4_gradient_distance = std::max(e.b4_gradient_distance, std::abs(gk[i] - gu[i]));
      }

      const std::vector<double> br = merged_breaks(uk, u_lim);
      const double growth = std::max({uk.growth_exponent, u_lim.growth_exponent, 0.0});
      for (const Point& x : xs) {
        auto f = [&](std::span<const double> y) {
          double d = std::abs(u_lim(y) - uk(y));
          return d == 0.0 ? 0.0 : d * std::abs(K(x, y));
        };
        try {
          QuadResult q = integrate_tail(f, n, 3.0, growth, K.tail_decay(0), cfg, {}, br);
          e.conuk2 = std::max(e.conuk2, q.value);
          e.quad_err = std::max(e.quad_err, q.err_est);
        } catch (const DivergentTail&) {
          e.conuk2 = kInf;
        }
      }

      for (double R : opts.radii) {
        try {
          QuadResult q = tail_bound(uk, K, m, R, cfg);
          e.tail.push_back(q.value);
        } catch (const DivergentTail&) {
          e.tail.push_back(kInf);
        }
      }

      for (double R : opts.radii) {
        for (const Point& x : xs) {
          const double wx = u_lim(x) - uk(x);
          auto f = [&](std::span<const double> y) {
            double wy = u_lim(y) - uk(y);
            return (wx - wy) * K(x, y);
          };
          auto limits = [&](std::span<const double> w) { return std::pair{1.0, distance_to_sphere(x, w, R)}; };
          QuadResult q = integrate_polar(f, x, n, limits, cfg, br);
          e.middle_range = std::max(e.middle_range, std::abs(q.value));
          e.quad_err = std::max(e.quad_err, q.err_est);
        }
      }

      GridValues fk = f_on_grid(uk, K, m, grid, cfg, opts);
      e.f_values = fk.values;
      e.quad_err = std::max(e.quad_err, fk.err + lim.err);
      std::vector<double> d(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) d[i] = fk.values[i] - lim.values[i];
      e.sup_to_limit = residual_after_fit(grid, d, m);
    } catch (const NumericalError& ex) {
      e.ok = false;
      e.error = ex.what();
    } catch (const DomainError& ex) {
      e.ok = false;
      e.error = ex.what();
    }
    rep.entries.push_back(std::move(e));
  }

  const StabilityEntry& last = rep.entries.back();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto verdict = [&](std::string name, double value, double tol) {
    return HypothesisVerdict{std::move(name), last.ok ? value : nan, last.ok && value <= tol};
  };
  rep.hypotheses.push_back(
      verdict("b4_convergence", last.b4_distance + last.b4_gradient_distance, opts.hypothesis_tol));
  rep.hypotheses.push_back(verdict("conuk2", last.conuk2, opts.hypothesis_tol));
  rep.hypotheses.push_back(verdict("middle_range", last.middle_range, opts.hypothesis_tol));
  // lim_R sup_k: the sup over the sequence at the largest probe radius.
  double sup_tail = 0.0;
  bool all_ok = true;
  for (const StabilityEntry& e : rep.entries) {
    all_ok = all_ok && e.ok;
    if (e.ok) sup_tail = std::max(sup_tail, e.tail.back());
  }
  rep.hypotheses.push_back(HypothesisVerdict{"uniform_tail", all_ok ? sup_tail : nan,
                                             all_ok && sup_tail <= opts.hypothesis_tol});
  rep.conclusion = verdict("conclusion", last.sup_to_limit, opts.conclusion_tol);

  if (all_ok && rep.entries.size() >= 2) {
    std::size_t i = rep.entries.size() - 1;
    while (i > 0 && rep.entries[i - 1].sup_to_limit > rep.entries[i].sup_to_limit) --i;
    if (i + 1 < rep.entries.size()) rep.monotone_from = i;
  }
  return rep;
}

PolyFit minimax_fit(const std::vector<Point>& grid, std::span<const double> values, int degree, int max_iter,
                    double rel_gap) {
  if (grid.size() != values.size()) throw ValidationError("grid and values differ in length");
  if (grid.empty()) throw ValidationError("empty grid");
  const int n = static_cast<int>(grid[0].size());
  const auto basis = enumerate(n, degree);
  Polynomial poly(n, degree);
  if (basis.empty()) {
    double sup = 0.0;
    for (double v : values) sup = std::max(sup, std::abs(v));
    return {poly, sup};
  }
  const auto rows = static_cast<Eigen::Index>(grid.size());
  const auto cols = static_cast<Eigen::Index>(basis.size());
  if (rows < cols) throw ValidationError("minimax_fit: fewer samples than basis functions");
  Eigen::MatrixXd V(rows, cols);
  Eigen::VectorXd v(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j)
      V(i, j) = monomial(basis[static_cast<std::size_t>(j)], grid[static_cast<std::size_t>(i)]);
    v(i) = values[static_cast<std::size_t>(i)];
  }

  Eigen::VectorXd w = Eigen::VectorXd::Constant(rows, 1.0 / static_cast<double>(rows));
  Eigen::VectorXd best_c;
  double best = kInf;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * V);
    qr.setThreshold(1e-13);
    Eigen::VectorXd c = qr.solve(sw.asDiagonal() * v);
    Eigen::VectorXd r = v - V * c;
    const double upper = r.cwiseAbs().maxCoeff();
    // Σ w r² is a lower bound for the squared minimax error.
    const double lower = std::sqrt(std::max(0.0, w.dot(r.cwiseAbs2())));
    if (upper < best) {
      best = upper;
      best_c = c;
    }
    if (upper - lower <= rel_gap * std::max(upper, 1e-300)) break;
    Eigen::VectorXd nw = w.cwiseProduct(r.cwiseAbs());
    const double s = nw.sum();
    if (!(s > 0.0)) break;
    w = nw / s;
  }
  for (Eigen::Index j = 0; j < cols; ++j) poly.set(basis[static_cast<std::size_t>(j)], best_c(j));
  return {poly, best};
}

PolyRecovery poly_difference_recovery(const std::vector<Point>& grid, std::span<const double> f1,
                                      std::span<const double> f2, int m, double tol) {
  if (f1.size() != f2.size() || f1.size() != grid.size()) throw ValidationError("grids are not aligned");
  if (m < 0) throw ValidationError("m must be nonnegative");
  std::vector<double> d(f1.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = f2[i] - f1[i];
    scale = std::max(scale, std::abs(d[i]));
  }
  PolyRecovery out;
  PolyFit ls = fit_on_grid(grid, d, m - 1);
  out.P = ls.poly;
  out.residual = ls.residual_sup;
  out.minimax_residual = std::min(ls.residual_sup, minimax_fit(grid, d, m - 1).residual_sup);
  out.pass = out.minimax_residual <= tol * scale;
  return out;
}

}  // namespace nlop
