#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlop/multiindex.hpp"

namespace nlop {

enum class KernelKind { morse, buckingham, gauss, abel, mollifier, frac_lap, frac_lap_comparable, custom };

std::string to_string(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& name);
const std::vector<KernelKind>& builtin_kernel_kinds();

struct KernelSpec {
  KernelKind kind = KernelKind::gauss;
  int dim = 1;
  double s = 0.5;
  double lambda = 1.0;
  double Lambda = 1.0;
  /// Desingularisation level: the kernel is clamped to [-1/ε, 1/ε].
  std::optional<double> epsilon;
  /// Scale the fractional-Laplacian family by C_{n,s}.
  bool normalized = false;

  /// Key-value form used by config files: name, s, lambda, Lambda, epsilon, dim, normalized.
  std::map<std::string, std::string> to_key_values() const;
  static KernelSpec from_key_values(const std::map<std::string, std::string>& kv);
};

/// Set of ϑ for which the near-diagonal integrability condition holds.
struct ThetaRange {
  double lo = 0.0;
  double hi = 2.0;
  bool lo_open = false;
  bool empty = false;

  bool contains(double theta) const;
  std::string str() const;
};

struct Derivative {
  double value = 0.0;
  double err_est = 0.0;
  bool analytic = true;
};

namespace detail {
struct RadialProfile;
}

class Kernel {
 public:
  using Callback = std::function<double(std::span<const double>, std::span<const double>)>;

  struct Metadata {
    bool symmetric_in_z = true;
    bool nonnegative = true;
    double singularity_order = 0.0;
    ThetaRange admissible_theta;
    int max_taylor_order = 2;
    /// |∂^α K(x,y)| ≲ |x-y|^{-(tail_decay + |α|·tail_decay_gain)} at infinity.
    double tail_decay = 16.0;
    double tail_decay_gain = 0.0;
    std::optional<double> support_radius;
    bool translation_invariant = true;
  };

  /// Generic x-dependent kernel; derivatives by finite differences.
  static Kernel custom(int dim, Callback eval, Metadata meta, std::string name = "custom");

  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  const Metadata& meta() const { return meta_; }
  const std::optional<KernelSpec>& spec() const { return spec_; }
  bool radial() const { return profile_ != nullptr; }

  double operator()(std::span<const double> x, std::span<const double> y) const;
  /// Radial profile k(r); only for radial kernels.
  double profile(double r) const;

  /// ∂^α_x K(x,y): analytic jets for radial kernels, finite differences otherwise.
  Derivative deriv(const MultiIndex& alpha, std::span<const double> x, std::span<const double> y) const;
  /// Values of several ∂^α_x K(x,y) sharing one profile jet.
  std::vector<double> deriv_all(std::span<const MultiIndex> alphas, std::span<const double> x,
                                std::span<const double> y) const;

  /// Power-law decay exponent of |∂^α_x K| at infinity for |α| = order.
  double tail_decay(int order) const { return meta_.tail_decay + order * meta_.tail_decay_gain; }

 private:
  Kernel() = default;
  friend Kernel build(const KernelSpec& spec);

  int dim_ = 1;
  std::string name_;
  Metadata meta_;
  std::optional<KernelSpec> spec_;
  std::shared_ptr<const detail::RadialProfile> profile_;
  Callback callback_;
};

Kernel build(const KernelSpec& spec);

Derivative deriv_x(const Kernel& K, const MultiIndex& alpha, std::span<const double> x, std::span<const double> y);

/// Central differences with two Richardson levels; used as fallback and oracle.
Derivative finite_difference_deriv(const std::function<double(std::span<const double>)>& f, const MultiIndex& alpha,
                                   std::span<const double> x);

/// C_{n,s} = s 4^s Γ(n/2+s) / (π^{n/2} Γ(1-s)).
double fractional_laplacian_constant(int n, double s);

/// sup over |α| = order and x ∈ B_1 of |∂^α_x K(x,y)|, approximated by the
/// max over a fixed design (16 points for n=1, 33 for n=2) plus the point of
/// B_1 closest to y, where radial profiles with monotone derivatives peak.
double sup_deriv_on_unit_ball(const Kernel& K, int order, std::span<const double> y);

/// Design points used by sup_deriv_on_unit_ball.
std::vector<Point> unit_ball_design(int dim);

/// A pair (x, y) with x ∈ B_1 and K(x,y) < 0, if sampling finds one.
std::optional<std::pair<Point, Point>> sign_witness(const Kernel& K);

struct QuadConfig;

struct HypothesisReport {
  double theta = 0.0;
  int m = 0;
  std::vector<Point> sample_points;
  std::vector<double> locint_values;
  bool locint_converged = true;
  std::string locint_diagnostic;
  double symmetry_residual = 0.0;
  int sign_violations = 0;
  bool taylor_available = true;
  double derivative_mismatch = 0.0;
  bool pass = true;
  std::vector<std::string> failures;
};

HypothesisReport validate_hypotheses(const Kernel& K, double theta, int m, int sample_budget, const QuadConfig& cfg,
                                     unsigned seed = 1);

}  // namespace nlop
