#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nlop {

using Point = std::vector<double>;

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries);
  MultiIndex(std::initializer_list<int> entries) : MultiIndex(std::vector<int>(entries)) {}

  static MultiIndex zero(int dim) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(dim), 0)); }
  static MultiIndex unit(int dim, int axis);

  int dim() const { return static_cast<int>(entries_.size()); }
  int order() const { return order_; }
  int operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  std::span<const int> entries() const { return entries_; }

  MultiIndex operator+(const MultiIndex& other) const;
  MultiIndex operator-(const MultiIndex& other) const;
  /// Componentwise β ≤ γ.
  bool componentwise_leq(const MultiIndex& other) const;

  bool operator==(const MultiIndex& other) const { return entries_ == other.entries_; }

  std::string str() const;

 private:
  std::vector<int> entries_;
  int order_ = 0;
};

/// Graded order: lower total degree first, then lexicographically larger
/// entries first, so (0,0) < (1,0) < (0,1) < (2,0) < (1,1) < (0,2).
struct GradedLex {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const;
};

/// All α in n variables with |α| ≤ max_degree, graded-lex. max_degree = -1
/// gives the empty list (the polynomial space of the m = 0 case).
std::vector<MultiIndex> enumerate(int n, int max_degree);

/// N_m = Σ_{j<m} C(j+n-1, n-1): dimension of polynomials of degree ≤ m-1.
std::int64_t solution_space_dim(int n, int m);

std::int64_t factorial(const MultiIndex& alpha);
double monomial(const MultiIndex& alpha, std::span<const double> x);
/// Product of componentwise binomials; throws ValidationError unless β ≤ γ.
std::int64_t binom_multi(const MultiIndex& gamma, const MultiIndex& beta);
std::int64_t binomial(int n, int k);

class Polynomial {
 public:
  Polynomial(int dim, int max_degree);

  int dim() const { return dim_; }
  int max_degree() const { return max_degree_; }
  const std::map<MultiIndex, double, GradedLex>& coeffs() const { return coeffs_; }

  double coeff(const MultiIndex& alpha) const;
  void set(const MultiIndex& alpha, double value);
  void add(const MultiIndex& alpha, double value);

  double operator()(std::span<const double> x) const;

  /// Coefficients over enumerate(dim, max_degree), zeros included.
  std::vector<double> coefficient_vector() const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial operator-() const;

 private:
  int dim_;
  int max_degree_;
  std::map<MultiIndex, double, GradedLex> coeffs_;
};

struct PolyFit {
  Polynomial poly;
  double residual_sup;
};

/// Discrete least-squares fit over the monomials of degree ≤ max_degree.
/// residual_sup is the max |value - fit| over the samples, an upper bound for
/// the best uniform approximation error on that sample set.
PolyFit best_poly_fit(std::span<const std::pair<Point, double>> samples, int n, int max_degree);

}  // namespace nlop
