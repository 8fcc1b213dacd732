#include "nlop/dirichlet.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "nlop/error.hpp"

namespace nlop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Natural cubic spline through (t_j, v_j).
class Spline {
 public:
  Spline(std::vector<double> t, std::vector<double> v) : t_(std::move(t)), v_(std::move(v)), M_(t_.size(), 0.0) {
    const std::size_t n = t_.size();
    if (n < 3) return;
    // Thomas algorithm on the interior second derivatives.
    std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double h0 = t_[i] - t_[i - 1], h1 = t_[i + 1] - t_[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      d[i] = (v_[i + 1] - v_[i]) / h1 - (v_[i] - v_[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < n; ++i) {
      double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    M_[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) M_[i] = (d[i] - c[i] * M_[i + 1]) / b[i];
  }

  double operator()(double x) const { return eval(x, false); }
  double derivative(double x) const { return eval(x, true); }

 private:
  double eval(double x, bool deriv) const {
    auto it = std::upper_bound(t_.begin(), t_.end(), x);
    std::size_t j = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
    j = std::min(j, t_.size() - 2);
    double h = t_[j + 1] - t_[j];
    double A = (t_[j + 1] - x) / h, B = (x - t_[j]) / h;
    if (deriv)
      return (v_[j + 1] - v_[j]) / h - (3 * A * A - 1) / 6.0 * h * M_[j] + (3 * B * B - 1) / 6.0 * h * M_[j + 1];
    return A * v_[j] + B * v_[j + 1] + ((A * A * A - A) * M_[j] + (B * B * B - B) * M_[j + 1]) * h * h / 6.0;
  }

  std::vector<double> t_, v_, M_;
};

std::vector<double> all_nodes(int N) {
  std::vector<double> t(static_cast<std::size_t>(N) + 2);
  for (int j = 0; j <= N + 1; ++j) t[static_cast<std::size_t>(j)] = -std::cos(std::numbers::pi * j / (N + 1.0));
  t.front() = -1.0;
  t.back() = 1.0;
  return t;
}

// Interpolation stencil of cell [t_j, t_{j+1}].
std::pair<int, int> stencil(int j, int last, Interpolation mode) {
  if (mode == Interpolation::linear) return {j, 2};
  int start = std::clamp(j - 1, 0, last - 3);
  return {start, 4};
}

std::vector<double> merged(std::vector<double> a, std::initializer_list<double> extra) {
  a.insert(a.end(), extra);
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

ScalarField zero_field() {
  ScalarField z;
  z.eval = [](std::span<const double>) { return 0.0; };
  z.gradient = [](std::span<const double>) { return Point{0.0}; };
  z.growth_exponent = -kInf;
  z.support_radius = 0.0;
  z.name = "zero";
  return z;
}

struct Assembly {
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs;
};

// Rows of the collocation system; rhs holds only the exterior contributions.
Assembly assemble(const Kernel& K, double s, const ScalarField& g, int N, Interpolation mode, const QuadConfig& cfg) {
  using G = boost::math::quadrature::gauss<double, 10>;
  const auto& xg = G::abscissa();
  const auto& wg = G::weights();
  const std::vector<double> t = all_nodes(N);
  const int last = N + 1;
  const double c = K.profile(1.0);
  const double p = 1.0 + 2.0 * s;
  const double gm = g(Point{-1.0}), gp = g(Point{1.0});
  const std::vector<double> gbreaks = merged(g.radial_breaks, {1.0});
  const bool g_zero = g.support_radius && *g.support_radius <= 1.0;

  Assembly out{Eigen::MatrixXd::Zero(N, N), Eigen::VectorXd::Zero(N)};
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t row) {
    const int i = static_cast<int>(row) + 1;
    const double x = t[static_cast<std::size_t>(i)];
    std::vector<double> coef(static_cast<std::size_t>(N) + 2, 0.0);
    const double hl = x - t[static_cast<std::size_t>(i - 1)], hr = t[static_cast<std::size_t>(i + 1)] - x;
    const double delta = std::min(hl, hr);

    // Near field: the symmetric second difference ≈ -u'' z² on |z| < δ.
    const double near = -c * std::pow(delta, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    const double w2 = 2.0 / (hl + hr);
    coef[static_cast<std::size_t>(i + 1)] += near * w2 / hr;
    coef[static_cast<std::size_t>(i)] -= near * w2 * (1.0 / hr + 1.0 / hl);
    coef[static_cast<std::size_t>(i - 1)] += near * w2 / hl;

    // Far field: (u_i - u_h(y)) K with u_h the interpolant, on geometric sub-cells.
    auto add_segment = [&](int cell, double a, double b) {
      auto [start, len] = stencil(cell, last, mode);
      double dist_a = std::abs(a - x), dist_b = std::abs(b - x);
      double lo = std::min(dist_a, dist_b), hi = std::max(dist_a, dist_b);
      const double sign = b > x ? 1.0 : -1.0;
      for (double d0 = lo; d0 < hi;) {
        double d1 = std::min(hi, 2.0 * d0);
        double mid = 0.5 * (d0 + d1), half = 0.5 * (d1 - d0);
        for (std::size_t q = 0; q < xg.size(); ++q) {
          for (double side : {1.0, -1.0}) {
            if (xg[q] == 0.0 && side < 0) continue;
            double z = mid + side * half * xg[q];
            double w = half * wg[q] * c * std::pow(z, -p);
            double y = x + sign * z;
            coef[static_cast<std::size_t>(i)] += w;
            for (int k = 0; k < len; ++k) {
              double L = 1.0;
              for (int l = 0; l < len; ++l)
                if (l != k)
                  L *= (y - t[static_cast<std::size_t>(start + l)]) /
                       (t[static_cast<std::size_t>(start + k)] - t[static_cast<std::size_t>(start + l)]);
              coef[static_cast<std::size_t>(start + k)] -= w * L;
            }
          }
        }
        d0 = d1;
      }
    };
    for (int j = 0; j <= N; ++j) {
      double a = t[static_cast<std::size_t>(j)], b = t[static_cast<std::size_t>(j + 1)];
      double la = a, lb = std::min(b, x - delta);
      if (lb > la) add_segment(j, la, lb);
      double ra = std::max(a, x + delta), rb = b;
      if (rb > ra) add_segment(j, ra, rb);
    }

    // Exterior: u_i ∫_{|y|>1} K and the data term.
    coef[static_cast<std::size_t>(i)] += c * (std::pow(1.0 - x, -2.0 * s) + std::pow(1.0 + x, -2.0 * s)) / (2.0 * s);
    double r = 0.0;
    if (!g_zero) {
      const Point c0{x};
      auto f = [&](std::span<const double> y) {
        if (std::abs(y[0]) <= 1.0) return 0.0;
        double v = g(y);
        return v == 0.0 ? 0.0 : v * K(c0, y);
      };
      r += integrate_tail(f, 1, 1.0, std::max(g.growth_exponent, 0.0), p, cfg, {}, gbreaks).value;
    }
    r -= coef[0] * gm + coef[static_cast<std::size_t>(last)] * gp;
    for (int k = 1; k <= N; ++k) out.A(static_cast<Eigen::Index>(row), k - 1) = coef[static_cast<std::size_t>(k)];
    out.rhs(static_cast<Eigen::Index>(row)) = r;
  });
  return out;
}

ScalarField make_extension(const std::vector<double>& t, const std::vector<double>& v, const ScalarField& outside) {
  auto sp = std::make_shared<Spline>(t, v);
  ScalarField u;
  u.dim = 1;
  u.eval = [sp, outside](std::span<const double> x) { return std::abs(x[0]) < 1.0 ? (*sp)(x[0]) : outside(x); };
  u.gradient = [sp, outside](std::span<const double> x) {
    return std::abs(x[0]) < 1.0 ? Point{sp->derivative(x[0])} : outside.gradient_at(x);
  };
  u.growth_exponent = outside.growth_exponent;
  u.radial_breaks = merged(outside.radial_breaks, {1.0});
  if (outside.support_radius) u.support_radius = std::max(1.0, *outside.support_radius);
  u.name = "dirichlet_solution";
  return u;
}

Kernel checked_kernel(const DirichletProblem& pb) {
  pb.validate();
  return build(pb.kernel);
}

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

void DirichletProblem::validate() const {
  if (kernel.kind != KernelKind::frac_lap) throw ValidationError("the Dirichlet solver needs the frac_lap kernel");
  if (kernel.dim != 1) throw ValidationError("the Dirichlet solver is one-dimensional");
  if (kernel.epsilon) throw ValidationError("the Dirichlet solver needs the singular kernel (no epsilon)");
  if (!(kernel.s > 0.0 && kernel.s < 1.0)) throw ValidationError("s must lie in (0,1)");
  if (N < 4) throw ValidationError("need at least 4 collocation nodes");
  if (!f.eval || f.dim != 1) throw ValidationError("right-hand side must be a one-dimensional function");
  if (!g.eval || g.dim != 1) throw ValidationError("exterior data must be a one-dimensional function");
  if (m < 0) throw ValidationError("m must be nonnegative");
}

std::vector<double> graded_nodes(int N) {
  if (N < 1) throw ValidationError("need at least one node");
  std::vector<double> t = all_nodes(N);
  return {t.begin() + 1, t.end() - 1};
}

double getoor_constant(double s) {
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("s must lie in (0,1)");
  return std::tgamma(1.0 + 2.0 * s);
}

DirichletSolution solve_standard_nodal(const DirichletProblem& problem, const std::vector<double>& f_nodes,
                                       const QuadConfig& cfg, const DirichletOptions& opts) {
  const Kernel K = checked_kernel(problem);
  const int N = problem.N;
  if (f_nodes.size() != static_cast<std::size_t>(N)) throw ValidationError("right-hand side does not match the nodes");
  if (problem.g.growth_exponent >= 2.0 * problem.kernel.s)
    throw ValidationError("exterior data grows too fast for the kernel tail");

  Assembly sys = assemble(K, problem.kernel.s, problem.g, N, opts.far_field, cfg);
  Eigen::VectorXd b = sys.rhs;
  for (int i = 0; i < N; ++i) b(i) = f_nodes[static_cast<std::size_t>(i)] + sys.rhs(i);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.A);
  if (!(lu.rcond() > 1e-14)) throw NumericalError("collocation system is singular");
  Eigen::VectorXd u = lu.solve(b);

  DirichletSolution sol;
  std::vector<double> t = all_nodes(N);
  sol.nodes.assign(t.begin() + 1, t.end() - 1);
  std::vector<double> v(t.size());
  v.front() = problem.g(Point{-1.0});
  v.back() = problem.g(Point{1.0});
  for (int i = 0; i < N; ++i) {
    if (!std::isfinite(u(i))) throw NumericalError("collocation solve produced non-finite values");
    sol.values.push_back(u(i));
    v[static_cast<std::size_t>(i) + 1] = u(i);
  }
  sol.extension = make_extension(t, v, problem.g);
  return sol;
}

DirichletSolution solve_standard(const DirichletProblem& problem, const QuadConfig& cfg,
                                 const DirichletOptions& opts) {
  problem.validate();
  std::vector<double> fn;
  for (double x : graded_nodes(problem.N)) fn.push_back(problem.f(Point{x}));
  DirichletSolution sol = solve_standard_nodal(problem, fn, cfg, opts);

  // Residual at cell midpoints spread over (-0.9, 0.9), away from the nodes.
  const Kernel K = build(problem.kernel);
  const std::vector<double> t = all_nodes(problem.N);
  const int nv = std::max(1, opts.verify_points);
  for (int k = 0; k < nv; ++k) {
    double target = nv == 1 ? 0.0 : -0.9 + 1.8 * k / (nv - 1);
    auto it = std::upper_bound(t.begin(), t.end(), target);
    std::size_t j = static_cast<std::size_t>(it - t.begin()) - 1;
    sol.verify_x.push_back(0.5 * (t[j] + t[j + 1]));
  }
  sol.verify_residuals.resize(sol.verify_x.size());
  parallel_for(sol.verify_x.size(), [&](std::size_t k) {
    Point x{sol.verify_x[k]};
    sol.verify_residuals[k] = direct_apply(sol.extension, K, x, cfg).value - problem.f(x);
  });
  sol.residual = sup_abs(sol.verify_residuals);
  sol.ok = sol.residual <= opts.residual_tol;
  if (!sol.ok) sol.diagnostic = "verification residual " + std::to_string(sol.residual) + " above tolerance";
  return sol;
}

double generalized_residual(const ScalarField& u, const ScalarField& f, const Kernel& K, int m,
                            const std::vector<double>& R_schedule, const QuadConfig& cfg,
                            std::vector<double>* profile) {
  const std::vector<Point> grid = unit_ball_grid(1);
  LimitReport rep = limit_driver(u, K, m, grid, R_schedule, cfg);
  std::vector<double> d(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) d[i] = rep.f_limit[i] - f(grid[i]);
  PolyFit fit = fit_on_grid(grid, d, m - 1);
  if (profile) {
    profile->resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) (*profile)[i] = d[i] - fit.poly(grid[i]);
  }
  return fit.residual_sup;
}

DirichletSolution solve_generalized(const DirichletProblem& problem, const QuadConfig& cfg,
                                    const DirichletOptions& opts) {
  const Kernel K = checked_kernel(problem);
  const ScalarField& u0 = problem.g;
  const int N = problem.N;

  // u1 = χ_{B_4^c} u0 vanishes on B_4, so f_{u1} reduces to its far integral.
  ScalarField u1 = u0;
  u1.eval = [u0](std::span<const double> x) { return std::abs(x[0]) >= 4.0 ? u0(x) : 0.0; };
  u1.gradient = [u0](std::span<const double> x) { return std::abs(x[0]) >= 4.0 ? u0.gradient_at(x) : Point{0.0}; };
  u1.radial_breaks = merged(u0.radial_breaks, {4.0});
  u1.local_theta = nullptr;
  u1.theta_class = 2.0;
  u1.name = "u1";

  const std::vector<double> nodes = graded_nodes(N);
  std::vector<double> fn(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) fn[i] = problem.f(Point{nodes[i]});
  const bool u1_zero = u0.support_radius && *u0.support_radius <= 4.0;
  if (!u1_zero) {
    std::vector<Point> pts;
    for (double x : nodes) pts.push_back({x});
    LimitReport rep = limit_driver(u1, K, problem.m, pts, opts.R_schedule, cfg);
    for (std::size_t i = 0; i < nodes.size(); ++i) fn[i] -= rep.f_limit[i];
  }

  ScalarField g2 = u0;
  g2.eval = [u0](std::span<const double> x) {
    double r = std::abs(x[0]);
    return r >= 1.0 && r < 4.0 ? u0(x) : 0.0;
  };
  g2.gradient = [u0](std::span<const double> x) {
    double r = std::abs(x[0]);
    return r >= 1.0 && r < 4.0 ? u0.gradient_at(x) : Point{0.0};
  };
  g2.growth_exponent = -kInf;
  g2.support_radius = u0.support_radius ? std::min(4.0, *u0.support_radius) : 4.0;
  g2.radial_breaks = merged(u0.radial_breaks, {1.0, 4.0});
  g2.name = "exterior_near";

  DirichletProblem std_pb = problem;
  std_pb.g = g2;
  DirichletSolution sol = solve_standard_nodal(std_pb, fn, cfg, opts);

  // u = u1 + ũ: the spline inside, u0 outside.
  std::vector<double> t = all_nodes(N);
  std::vector<double> v(t.size());
  v.front() = u0(Point{-1.0});
  v.back() = u0(Point{1.0});
  for (std::size_t i = 0; i < sol.values.size(); ++i) v[i + 1] = sol.values[i];
  sol.extension = make_extension(t, v, u0);

  sol.residual =
      generalized_residual(sol.extension, problem.f, K, problem.m, opts.R_schedule, cfg, &sol.verify_residuals);
  for (const Point& p : unit_ball_grid(1)) sol.verify_x.push_back(p[0]);
  sol.ok = sol.residual <= opts.residual_tol;
  if (!sol.ok) sol.diagnostic = "limit residual " + std::to_string(sol.residual) + " above tolerance";
  return sol;
}

SolutionFamily solution_family(const KernelSpec& kernel, int m, int N, const QuadConfig& cfg,
                               const DirichletOptions& opts) {
  if (m < 0) throw ValidationError("m must be nonnegative");
  SolutionFamily fam;
  for (int j = 0; j < m; ++j) {
    DirichletProblem pb;
    pb.kernel = kernel;
    pb.f = builtin("monomial", {{"a", static_cast<double>(j)}}, 1);
    pb.g = zero_field();
    pb.m = 0;
    pb.N = N;
    fam.members.push_back(solve_standard(pb, cfg, opts));
  }
  const auto M = static_cast<Eigen::Index>(fam.members.size());
  Eigen::MatrixXd G(M, M);
  for (Eigen::Index a = 0; a < M; ++a)
    for (Eigen::Index b = 0; b < M; ++b) {
      double acc = 0.0;
      const auto& va = fam.members[static_cast<std::size_t>(a)].values;
      const auto& vb = fam.members[static_cast<std::size_t>(b)].values;
      for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
      G(a, b) = acc / static_cast<double>(va.size());
    }
  fam.gram.assign(static_cast<std::size_t>(M), std::vector<double>(static_cast<std::size_t>(M)));
  for (Eigen::Index a = 0; a < M; ++a)
    for (Eigen::Index b = 0; b < M; ++b) fam.gram[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = G(a, b);
  fam.gram_det = M == 0 ? 1.0 : G.determinant();
  fam.independent = fam.gram_det > 1e-8;
  return fam;
}

}  // namespace nlop
