#include "nlop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "nlop/error.hpp"
#include "nlop/jet.hpp"
#include "nlop/quadrature.hpp"

namespace nlop {

namespace detail {

/// g(q) with q = |x-y|^2, evaluated both as a plain value in r and as a jet in q.
struct RadialProfile {
  std::function<double(double)> value_r;
  std::function<Jet(const Jet&)> jet_q;
  bool smooth_at_zero = false;
  std::optional<double> clamp;
  std::optional<double> support;

  double value(double r) const {
    if (support && r >= *support) return 0.0;
    double v = value_r(r);
    if (clamp) v = std::clamp(v, -*clamp, *clamp);
    return v;
  }

  /// Derivatives g^{(j)}(q), j = 0..order.
  std::vector<double> q_derivatives(double q, int order) const {
    std::vector<double> d(static_cast<std::size_t>(order) + 1, 0.0);
    double r = std::sqrt(q);
    if (support && r >= *support) return d;
    if (q == 0.0 && !smooth_at_zero) throw DomainError("kernel derivative requested on the singular diagonal");
    Jet g = jet_q(Jet::variable(q, order));
    if (clamp && std::abs(g[0]) > *clamp) {
      d[0] = std::copysign(*clamp, g[0]);
      return d;
    }
    for (int j = 0; j <= order; ++j) d[static_cast<std::size_t>(j)] = g.derivative(j);
    return d;
  }
};

}  // namespace detail

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

void check_dim(std::span<const double> p, int dim, const char* what) {
  if (static_cast<int>(p.size()) != dim)
    throw ValidationError(std::string(what) + " has dimension " + std::to_string(p.size()) + ", kernel expects " +
                          std::to_string(dim));
}

Jet sqrt_jet(const Jet& q) { return pow(q, 0.5); }

double fact(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

bool fractional(KernelKind k) { return k == KernelKind::frac_lap || k == KernelKind::frac_lap_comparable; }

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ValidationError("kernel key '" + key + "': not a number: " + v);
  }
  if (pos != v.size()) throw ValidationError("kernel key '" + key + "': trailing characters in " + v);
  return d;
}

}  // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::morse: return "morse";
    case KernelKind::buckingham: return "buckingham";
    case KernelKind::gauss: return "gauss";
    case KernelKind::abel: return "abel";
    case KernelKind::mollifier: return "mollifier";
    case KernelKind::frac_lap: return "frac_lap";
    case KernelKind::frac_lap_comparable: return "frac_lap_comparable";
    case KernelKind::custom: return "custom";
  }
  return "custom";
}

KernelKind parse_kernel_kind(const std::string& name) {
  for (KernelKind k : builtin_kernel_kinds())
    if (to_string(k) == name) return k;
  throw ValidationError("unknown kernel '" + name + "'");
}

const std::vector<KernelKind>& builtin_kernel_kinds() {
  static const std::vector<KernelKind> kinds = {KernelKind::morse,     KernelKind::buckingham, KernelKind::gauss,
                                                KernelKind::abel,      KernelKind::mollifier,  KernelKind::frac_lap,
                                                KernelKind::frac_lap_comparable};
  return kinds;
}

std::map<std::string, std::string> KernelSpec::to_key_values() const {
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  std::map<std::string, std::string> kv{{"name", to_string(kind)},
                                        {"dim", std::to_string(dim)},
                                        {"s", fmt(s)},
                                        {"lambda", fmt(lambda)},
                                        {"Lambda", fmt(Lambda)},
                                        {"normalized", normalized ? "true" : "false"}};
  if (epsilon) kv["epsilon"] = fmt(*epsilon);
  return kv;
}

KernelSpec KernelSpec::from_key_values(const std::map<std::string, std::string>& kv) {
  KernelSpec spec;
  bool named = false;
  for (const auto& [key, value] : kv) {
    if (key == "name") {
      spec.kind = parse_kernel_kind(value);
      named = true;
    } else if (key == "dim") {
      double d = parse_double(key, value);
      if (d != std::floor(d)) throw ValidationError("kernel dim must be an integer");
      spec.dim = static_cast<int>(d);
    } else if (key == "s") {
      spec.s = parse_double(key, value);
    } else if (key == "lambda") {
      spec.lambda = parse_double(key, value);
    } else if (key == "Lambda") {
      spec.Lambda = parse_double(key, value);
    } else if (key == "epsilon") {
      spec.epsilon = parse_double(key, value);
    } else if (key == "normalized") {
      if (value != "true" && value != "false") throw ValidationError("kernel key 'normalized' must be true or false");
      spec.normalized = value == "true";
    } else {
      throw ValidationError("unknown kernel key '" + key + "'");
    }
  }
  if (!named) throw ValidationError("kernel spec needs a name");
  return spec;
}

bool ThetaRange::contains(double theta) const {
  if (empty) return false;
  if (theta > hi) return false;
  return lo_open ? theta > lo : theta >= lo;
}

std::string ThetaRange::str() const {
  if (empty) return "empty";
  std::ostringstream os;
  os << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
  return os.str();
}

double fractional_laplacian_constant(int n, double s) {
  if (n < 1) throw ValidationError("dimension must be positive");
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("s must lie in (0,1)");
  return s * std::pow(4.0, s) * std::tgamma(n / 2.0 + s) /
         (std::pow(std::numbers::pi, n / 2.0) * std::tgamma(1.0 - s));
}

Kernel build(const KernelSpec& spec) {
  if (spec.kind == KernelKind::custom) throw ValidationError("custom kernels are built with Kernel::custom");
  if (spec.dim < 1 || spec.dim > 8) throw ValidationError("kernel dim must lie in 1..8");
  if (spec.epsilon && !(*spec.epsilon > 0.0)) throw ValidationError("desingularisation epsilon must be positive");
  const int n = spec.dim;
  const bool frac = fractional(spec.kind);
  if (frac) {
    if (!(spec.s > 0.0 && spec.s < 1.0)) throw ValidationError("frac_lap requires 0 < s < 1");
    if (!(spec.lambda > 0.0)) throw ValidationError("lambda must be positive");
    if (spec.kind == KernelKind::frac_lap_comparable && !(spec.Lambda >= spec.lambda))
      throw ValidationError("Lambda must be at least lambda");
  }
  if (spec.kind == KernelKind::buckingham && n >= 6 && !spec.epsilon)
    throw ValidationError("buckingham kernel is not locally integrable for n >= 6; pass epsilon");

  Kernel K;
  K.dim_ = n;
  K.spec_ = spec;
  K.name_ = to_string(spec.kind);
  auto prof = std::make_shared<detail::RadialProfile>();
  Kernel::Metadata& meta = K.meta_;
  meta.symmetric_in_z = true;
  meta.translation_invariant = true;
  meta.max_taylor_order = 6;
  meta.admissible_theta = ThetaRange{0.0, 2.0, false, false};

  const double exponent = n + 2.0 * spec.s;
  const double scale = frac && spec.normalized ? fractional_laplacian_constant(n, spec.s) : 1.0;

  switch (spec.kind) {
    case KernelKind::morse:
      prof->value_r = [](double r) { return std::exp(-2.0 * (r - 1.0)) - std::exp(-(r - 1.0)); };
      prof->jet_q = [](const Jet& q) {
        Jet shifted = sqrt_jet(q) - Jet::constant(1.0, q.order());
        return exp(-2.0 * shifted) - exp(-shifted);
      };
      meta.nonnegative = false;
      meta.tail_decay = 16.0;
      break;
    case KernelKind::buckingham:
      prof->value_r = [](double r) { return std::exp(-r) - std::pow(r, -6.0); };
      prof->jet_q = [](const Jet& q) { return exp(-sqrt_jet(q)) - pow(q, -3.0); };
      meta.nonnegative = false;
      meta.tail_decay = 6.0;
      meta.tail_decay_gain = 1.0;
      if (!spec.epsilon) {
        meta.singularity_order = 6.0;
        double lo = 6.0 - n;
        meta.admissible_theta = ThetaRange{std::max(lo, 0.0), 2.0, lo >= 0.0, lo >= 2.0};
      }
      break;
    case KernelKind::gauss:
      prof->value_r = [](double r) { return std::exp(-r * r); };
      prof->jet_q = [](const Jet& q) { return exp(-q); };
      prof->smooth_at_zero = true;
      meta.nonnegative = true;
      meta.tail_decay = 16.0;
      break;
    case KernelKind::abel:
      prof->value_r = [](double r) { return std::exp(-r); };
      prof->jet_q = [](const Jet& q) { return exp(-sqrt_jet(q)); };
      meta.nonnegative = true;
      meta.tail_decay = 16.0;
      break;
    case KernelKind::mollifier:
      prof->value_r = [](double r) { return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0; };
      prof->jet_q = [](const Jet& q) {
        Jet one = Jet::constant(1.0, q.order());
        return exp(-(one / (one - q)));
      };
      prof->smooth_at_zero = true;
      prof->support = 1.0;
      meta.nonnegative = true;
      meta.support_radius = 1.0;
      meta.tail_decay = 16.0;
      break;
    case KernelKind::frac_lap: {
      double c = spec.lambda * scale;
      prof->value_r = [c, exponent](double r) { return c * std::pow(r, -exponent); };
      prof->jet_q = [c, exponent](const Jet& q) { return c * pow(q, -exponent / 2.0); };
      meta.nonnegative = true;
      meta.tail_decay = exponent;
      meta.tail_decay_gain = 1.0;
      if (!spec.epsilon) {
        meta.singularity_order = exponent;
        meta.admissible_theta = ThetaRange{2.0 * spec.s, 2.0, true, false};
      }
      break;
    }
    case KernelKind::frac_lap_comparable: {
      double lo = spec.lambda * scale;
      double gap = (spec.Lambda - spec.lambda) * scale;
      prof->value_r = [lo, gap, exponent](double r) { return (lo + gap * std::exp(-r)) * std::pow(r, -exponent); };
      prof->jet_q = [lo, gap, exponent](const Jet& q) {
        return (lo + gap * exp(-sqrt_jet(q))) * pow(q, -exponent / 2.0);
      };
      meta.nonnegative = true;
      meta.tail_decay = exponent;
      meta.tail_decay_gain = 1.0;
      if (!spec.epsilon) {
        meta.singularity_order = exponent;
        meta.admissible_theta = ThetaRange{2.0 * spec.s, 2.0, true, false};
      }
      break;
    }
    case KernelKind::custom: break;
  }
  if (spec.epsilon) {
    prof->clamp = 1.0 / *spec.epsilon;
    meta.singularity_order = 0.0;
    meta.admissible_theta = ThetaRange{0.0, 2.0, false, false};
  }
  if (spec.epsilon) K.name_ += "_eps";
  K.profile_ = std::move(prof);
  return K;
}

Kernel Kernel::custom(int dim, Callback eval, Metadata meta, std::string name) {
  if (dim < 1) throw ValidationError("kernel dim must be positive");
  if (!eval) throw ValidationError("custom kernel needs an evaluator");
  Kernel K;
  K.dim_ = dim;
  K.name_ = std::move(name);
  meta.max_taylor_order = std::min(meta.max_taylor_order, 2);
  K.meta_ = meta;
  K.callback_ = std::move(eval);
  return K;
}

double Kernel::operator()(std::span<const double> x, std::span<const double> y) const {
  check_dim(x, dim_, "x");
  check_dim(y, dim_, "y");
  if (!profile_) return callback_(x, y);
  double q = 0.0;
  for (int i = 0; i < dim_; ++i) q += (x[i] - y[i]) * (x[i] - y[i]);
  return profile_->value(std::sqrt(q));
}

double Kernel::profile(double r) const {
  if (!profile_) throw ValidationError("kernel '" + name_ + "' has no radial profile");
  return profile_->value(r);
}

namespace {

/// ∂^α of z ↦ g(|z|²) from the q-derivatives g^{(j)}, j <= |α|.
double radial_chain_rule(const MultiIndex& alpha, std::span<const double> z, const std::vector<double>& g) {
  const int dim = alpha.dim();
  // ∂^α g(|z|²) = Σ_k Π_i α_i!/(k_i!(α_i-2k_i)!) (2z_i)^{α_i-2k_i} · g^{(|α|-Σk_i)}(q)
  double total = 0.0;
  std::vector<int> k(static_cast<std::size_t>(dim), 0);
  while (true) {
    double coef = 1.0;
    int ksum = 0;
    for (int i = 0; i < dim; ++i) {
      int a = alpha[i], ki = k[static_cast<std::size_t>(i)];
      coef *= fact(a) / (fact(ki) * fact(a - 2 * ki)) *
              std::pow(2.0 * z[static_cast<std::size_t>(i)], a - 2 * ki);
      ksum += ki;
    }
    total += coef * g[static_cast<std::size_t>(alpha.order() - ksum)];
    int i = 0;
    for (; i < dim; ++i) {
      if (2 * (k[static_cast<std::size_t>(i)] + 1) <= alpha[i]) {
        ++k[static_cast<std::size_t>(i)];
        break;
      }
      k[static_cast<std::size_t>(i)] = 0;
    }
    if (i == dim) break;
  }
  return total;
}

}  // namespace

Derivative Kernel::deriv(const MultiIndex& alpha, std::span<const double> x, std::span<const double> y) const {
  check_dim(x, dim_, "x");
  check_dim(y, dim_, "y");
  if (alpha.dim() != dim_) throw ValidationError("multi-index dimension does not match the kernel");
  if (alpha.order() > meta_.max_taylor_order)
    throw ValidationError("derivative order " + std::to_string(alpha.order()) + " exceeds max_taylor_order " +
                          std::to_string(meta_.max_taylor_order));
  if (!profile_) {
    Point yy(y.begin(), y.end());
    auto f = [this, yy](std::span<const double> p) { return callback_(p, yy); };
    return finite_difference_deriv(f, alpha, x);
  }
  std::vector<double> z(static_cast<std::size_t>(dim_));
  double q = 0.0;
  for (int i = 0; i < dim_; ++i) {
    z[static_cast<std::size_t>(i)] = x[i] - y[i];
    q += z[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
  }
  std::vector<double> g = profile_->q_derivatives(q, alpha.order());
  return Derivative{radial_chain_rule(alpha, z, g), 0.0, true};
}

std::vector<double> Kernel::deriv_all(std::span<const MultiIndex> alphas, std::span<const double> x,
                                      std::span<const double> y) const {
  std::vector<double> out;
  out.reserve(alphas.size());
  if (!profile_) {
    for (const MultiIndex& a : alphas) out.push_back(deriv(a, x, y).value);
    return out;
  }
  check_dim(x, dim_, "x");
  check_dim(y, dim_, "y");
  int order = 0;
  for (const MultiIndex& a : alphas) {
    if (a.dim() != dim_) throw ValidationError("multi-index dimension does not match the kernel");
    order = std::max(order, a.order());
  }
  if (order > meta_.max_taylor_order)
    throw ValidationError("derivative order " + std::to_string(order) + " exceeds max_taylor_order " +
                          std::to_string(meta_.max_taylor_order));
  std::vector<double> z(static_cast<std::size_t>(dim_));
  double q = 0.0;
  for (int i = 0; i < dim_; ++i) {
    z[static_cast<std::size_t>(i)] = x[i] - y[i];
    q += z[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
  }
  std::vector<double> g = profile_->q_derivatives(q, order);
  for (const MultiIndex& a : alphas) out.push_back(radial_chain_rule(a, z, g));
  return out;
}

Derivative deriv_x(const Kernel& K, const MultiIndex& alpha, std::span<const double> x, std::span<const double> y) {
  return K.deriv(alpha, x, y);
}

Derivative finite_difference_deriv(const std::function<double(std::span<const double>)>& f, const MultiIndex& alpha,
                                   std::span<const double> x) {
  const int n = alpha.dim();
  if (static_cast<int>(x.size()) != n) throw ValidationError("finite difference: dimension mismatch");
  const int order = alpha.order();
  if (order == 0) return Derivative{f(x), 0.0, false};
  const double h0 = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (4.0 + order)) * (1.0 + norm(x));

  // Tensor product of centred differences: offsets (j - a/2)·h, weights (-1)^{a-j} C(a,j) / h^a.
  auto central = [&](double h) {
    double total = 0.0;
    std::vector<int> j(static_cast<std::size_t>(n), 0);
    Point p(x.begin(), x.end());
    while (true) {
      double w = 1.0;
      for (int i = 0; i < n; ++i) {
        int a = alpha[i], ji = j[static_cast<std::size_t>(i)];
        w *= ((a - ji) % 2 ? -1.0 : 1.0) * static_cast<double>(binomial(a, ji)) / std::pow(h, a);
        p[static_cast<std::size_t>(i)] = x[i] + (ji - a / 2.0) * h;
      }
      total += w * f(p);
      int i = 0;
      for (; i < n; ++i) {
        if (j[static_cast<std::size_t>(i)] < alpha[i]) {
          ++j[static_cast<std::size_t>(i)];
          break;
        }
        j[static_cast<std::size_t>(i)] = 0;
      }
      if (i == n) break;
    }
    return total;
  };
  double d1 = central(h0), d2 = central(h0 / 2.0), d3 = central(h0 / 4.0);
  double r1 = (4.0 * d2 - d1) / 3.0;
  double r2 = (4.0 * d3 - d2) / 3.0;
  double best = (16.0 * r2 - r1) / 15.0;
  return Derivative{best, std::abs(best - r2), false};
}

std::vector<Point> unit_ball_design(int dim) {
  std::vector<Point> pts;
  if (dim == 1) {
    for (int j = 0; j < 16; ++j) pts.push_back({-1.0 + (2.0 * j + 1.0) / 16.0});
  } else if (dim == 2) {
    pts.push_back({0.0, 0.0});
    for (int ring = 1; ring <= 4; ++ring) {
      double rho = ring / 4.0;
      double shift = (ring % 2 == 0) ? std::numbers::pi / 8.0 : 0.0;
      for (int a = 0; a < 8; ++a) {
        double t = shift + a * std::numbers::pi / 4.0;
        pts.push_back({rho * std::cos(t), rho * std::sin(t)});
      }
    }
  } else {
    throw ValidationError("unit ball design available for n = 1, 2 only");
  }
  return pts;
}

double sup_deriv_on_unit_ball(const Kernel& K, int order, std::span<const double> y) {
  static const std::vector<Point> design1 = unit_ball_design(1), design2 = unit_ball_design(2);
  std::vector<Point> pts = K.dim() == 1 ? design1 : K.dim() == 2 ? design2 : unit_ball_design(K.dim());
  double ny = norm(y);
  if (ny > 0.0) {
    Point nearest(y.begin(), y.end());
    for (double& c : nearest) c /= ny;
    pts.push_back(nearest);
  }
  std::vector<MultiIndex> alphas;
  for (const MultiIndex& a : enumerate(K.dim(), order))
    if (a.order() == order) alphas.push_back(a);
  double best = 0.0;
  for (const Point& x : pts)
    for (double v : K.deriv_all(alphas, x, y)) best = std::max(best, std::abs(v));
  return best;
}

std::optional<std::pair<Point, Point>> sign_witness(const Kernel& K) {
  const int n = K.dim();
  std::vector<Point> xs = n <= 2 ? unit_ball_design(n) : std::vector<Point>{Point(static_cast<std::size_t>(n), 0.0)};
  xs.insert(xs.begin(), Point(static_cast<std::size_t>(n), 0.0));
  for (const Point& x : xs) {
    for (int j = 1; j <= 400; ++j) {
      double r = 0.025 * j;
      Point y = x;
      y[0] += r;
      if (K(x, y) < 0.0) return std::make_pair(x, y);
    }
  }
  return std::nullopt;
}

namespace {

Point random_in_ball(std::mt19937_64& rng, int n, double radius) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  while (true) {
    Point p(static_cast<std::size_t>(n));
    for (double& c : p) c = U(rng);
    if (norm(p) < 1.0) {
      for (double& c : p) c *= radius;
      return p;
    }
  }
}

}  // namespace

HypothesisReport validate_hypotheses(const Kernel& K, double theta, int m, int sample_budget, const QuadConfig& cfg,
                                     unsigned seed) {
  if (!(theta >= 0.0 && theta <= 2.0)) throw ValidationError("theta must lie in [0,2]");
  if (m < 0) throw ValidationError("m must be nonnegative");
  if (sample_budget < 1) throw ValidationError("sample budget must be positive");
  const int n = K.dim();
  if (n > 2) throw ValidationError("hypothesis validation supports n = 1, 2");

  HypothesisReport rep;
  rep.theta = theta;
  rep.m = m;
  std::mt19937_64 rng(seed);

  rep.taylor_available = m <= K.meta().max_taylor_order;
  if (!rep.taylor_available)
    rep.failures.push_back("taylor: order " + std::to_string(m) + " exceeds available " +
                           std::to_string(K.meta().max_taylor_order));

  // locint: ∫ min{|x-y|^ϑ, 1} |K(x,y)| dy at sampled x.
  rep.sample_points.push_back(Point(static_cast<std::size_t>(n), 0.0));
  while (static_cast<int>(rep.sample_points.size()) < sample_budget) rep.sample_points.push_back(random_in_ball(rng, n, 1.0));
  for (const Point& x : rep.sample_points) {
    try {
      QuadResult near = near_diagonal_moment(K, x, 1.0, theta, cfg, true);
      if (!near.converged) {
        rep.locint_converged = false;
        rep.locint_diagnostic = "near-diagonal shells do not converge (min{|x-y|^theta,1}|K| not integrable)";
        rep.locint_values.push_back(std::numeric_limits<double>::infinity());
        continue;
      }
      double total = near.value;
      if (!K.meta().support_radius || *K.meta().support_radius > 1.0) {
        auto absK = [&K, &x](std::span<const double> y) { return std::abs(K(x, y)); };
        QuadResult tail = integrate_tail(absK, n, 1.0, 0.0, K.tail_decay(0), cfg, x);
        if (!tail.converged) {
          rep.locint_converged = false;
          rep.locint_diagnostic = "kernel tail integral did not converge";
        }
        total += tail.value;
      }
      rep.locint_values.push_back(total);
    } catch (const DivergentTail& e) {
      rep.locint_converged = false;
      rep.locint_diagnostic = std::string("kernel tail: ") + e.what();
      rep.locint_values.push_back(std::numeric_limits<double>::infinity());
    } catch (const NumericalError& e) {
      rep.locint_converged = false;
      rep.locint_diagnostic = e.what();
      rep.locint_values.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (!rep.locint_converged) rep.failures.push_back("locint: " + rep.locint_diagnostic);

  // assym and sign on random pairs in B_1 × B_1.
  const int pairs = std::max(200, sample_budget);
  for (int i = 0; i < pairs; ++i) {
    Point x = random_in_ball(rng, n, 1.0);
    Point z = random_in_ball(rng, n, 1.0);
    if (norm(z) < 1e-3) continue;
    Point yp = x, ym = x;
    for (int d = 0; d < n; ++d) {
      yp[static_cast<std::size_t>(d)] += z[static_cast<std::size_t>(d)];
      ym[static_cast<std::size_t>(d)] -= z[static_cast<std::size_t>(d)];
    }
    double kp = K(x, yp), km = K(x, ym);
    rep.symmetry_residual = std::max(rep.symmetry_residual, std::abs(kp - km) / (1.0 + std::abs(kp)));
    Point yfar = x;
    for (int d = 0; d < n; ++d) yfar[static_cast<std::size_t>(d)] += 4.0 * z[static_cast<std::size_t>(d)];
    if (kp < 0.0) ++rep.sign_violations;
    if (K(x, yfar) < 0.0) ++rep.sign_violations;
  }
  if (K.meta().symmetric_in_z && rep.symmetry_residual > 1e-12)
    rep.failures.push_back("assym: residual " + std::to_string(rep.symmetry_residual));
  if (K.meta().nonnegative && rep.sign_violations > 0)
    rep.failures.push_back("positive: " + std::to_string(rep.sign_violations) + " negative samples");

  // taylor: analytic jets against finite differences away from the diagonal.
  if (K.radial() && rep.taylor_available) {
    int top = std::min(m, 2);
    for (int s = 0; s < 4; ++s) {
      Point x = random_in_ball(rng, n, 1.0);
      Point y = random_in_ball(rng, n, 1.0);
      double ny = norm(y);
      for (double& c : y) c = 3.5 * c / std::max(ny, 1e-3);
      for (const MultiIndex& a : enumerate(n, top)) {
        double an = K.deriv(a, x, y).value;
        auto f = [&K, &y](std::span<const double> p) { return K(p, y); };
        double fd = finite_difference_deriv(f, a, x).value;
        double scale = std::max(std::abs(an), 1e-300);
        if (std::abs(an) < 1e-12 && std::abs(fd) < 1e-12) continue;
        rep.derivative_mismatch = std::max(rep.derivative_mismatch, std::abs(an - fd) / scale);
      }
    }
    if (rep.derivative_mismatch > 1e-5)
      rep.failures.push_back("taylor: analytic and finite-difference derivatives differ by " +
                             std::to_string(rep.derivative_mismatch));
  }

  if (!K.meta().admissible_theta.contains(theta) && rep.locint_converged)
    rep.failures.push_back("locint: theta " + std::to_string(theta) + " outside admissible range " +
                           K.meta().admissible_theta.str());
  rep.pass = rep.failures.empty();
  return rep;
}

}  // namespace nlop
