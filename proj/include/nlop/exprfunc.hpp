#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlop/kernels.hpp"
#include "nlop/multiindex.hpp"

namespace nlop {

/// Arithmetic expression over the coordinates x1..xn.
///
/// Grammar, loosest binding first:
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?
///   primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Identifiers: x1..xn, r (= |x|), pi, e, inf. Functions: exp, log, abs,
/// sqrt, min, max, ind(a, b) = indicator of a <= |x| <= b with constant a, b.
class Expr {
 public:
  enum class Op { number, coord, radius, neg, add, sub, mul, div, pow, call };

  struct Node {
    Op op = Op::number;
    double number = 0.0;
    int coord = 0;
    std::string fn;
    std::vector<std::shared_ptr<const Node>> args;
  };

  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> root, int dim) : root_(std::move(root)), dim_(dim) {}

  int dim() const { return dim_; }
  const Node& root() const { return *root_; }

  /// Throws DomainError on division by zero, log/sqrt outside the domain,
  /// non-integer powers of negative numbers, or non-finite results.
  double eval(std::span<const double> x) const;

  /// Fully parenthesised canonical form; parse(print()) reproduces the tree.
  std::string print() const;

  /// Structural growth bound g with |e(x)| ≲ (1+|x|)^g; -inf for decay faster
  /// than any power, nullopt when the structure does not determine it.
  std::optional<double> growth() const;
  /// Radii |x| = b where the expression may fail to be smooth.
  std::vector<double> radial_breaks() const;
  /// Radius beyond which the expression vanishes, when ind(...) factors force it.
  std::optional<double> support_radius() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const Node> root_;
  int dim_ = 1;
};

Expr parse(const std::string& src, int n);

/// A function u: R^n -> R with the metadata the hypothesis checks need.
struct ScalarField {
  using Eval = std::function<double(std::span<const double>)>;
  using Gradient = std::function<Point(std::span<const double>)>;

  int dim = 1;
  Eval eval;
  std::optional<Gradient> gradient;
  /// Claimed regularity class ϑ ∈ [0,2] on B_4.
  double theta_class = 2.0;
  /// Regularity near a given point, used by near-diagonal quadrature; falls
  /// back to theta_class.
  std::function<double(std::span<const double>)> local_theta;
  /// |u(y)| ≲ (1+|y|)^growth; -inf when u decays faster than any power.
  double growth_exponent = 0.0;
  std::vector<double> radial_breaks;
  std::optional<double> support_radius;
  std::string name;

  double operator()(std::span<const double> x) const { return eval(x); }
  double theta_at(std::span<const double> x) const { return local_theta ? local_theta(x) : theta_class; }
  /// Analytic gradient when present, central differences otherwise.
  Point gradient_at(std::span<const double> x) const;
};

ScalarField from_expr(const Expr& e, double theta_class = 2.0, std::optional<double> growth = std::nullopt);

using Params = std::map<std::string, double>;

/// Catalog: constant(c), coordinate(i), monomial(a | a1,a2), bump(r),
/// counterexample_uk(k), getoor(s), indicator_annulus(a,b),
/// lemcs_footnote(k,s).
ScalarField builtin(const std::string& name, const Params& params, int dim = 1);
const std::vector<std::string>& builtin_names();

/// Accepts either a builtin written as `name(key=value, ...)` or an expression.
ScalarField parse_function(const std::string& src, int dim, std::optional<double> theta = std::nullopt,
                           std::optional<double> growth = std::nullopt);

/// Largest growth exponent seen by sampling |u| on geometric radii; used when
/// an expression's structure does not fix its growth.
double estimate_growth(const ScalarField::Eval& u, int dim);

struct QuadConfig;

struct MembershipReport {
  int m = 0;
  double R_probe = 0.0;
  std::vector<Point> x_samples;
  std::vector<double> ring_values;
  bool ring_pass = true;
  double mcond_value = 0.0;
  bool mcond_pass = true;
  bool pass = true;
  std::vector<std::string> diagnostics;
};

MembershipReport check_membership(const ScalarField& u, const Kernel& K, int m, double R_probe, const QuadConfig& cfg);

}  // namespace nlop
