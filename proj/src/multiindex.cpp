#include "nlop/multiindex.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nlop/error.hpp"

namespace nlop {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("integer overflow in multi-index arithmetic");
  return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error("integer overflow in multi-index arithmetic");
  return out;
}

}  // namespace

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int e : entries_) {
    if (e < 0) throw ValidationError("multi-index entries must be nonnegative");
    order_ += e;
  }
}

MultiIndex MultiIndex::unit(int dim, int axis) {
  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  e.at(static_cast<std::size_t>(axis)) = 1;
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  if (dim() != other.dim()) throw ValidationError("multi-index dimension mismatch");
  std::vector<int> e(entries_);
  for (int i = 0; i < dim(); ++i) e[static_cast<std::size_t>(i)] += other[i];
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::operator-(const MultiIndex& other) const {
  if (!other.componentwise_leq(*this)) throw ValidationError("multi-index difference would be negative");
  std::vector<int> e(entries_);
  for (int i = 0; i < dim(); ++i) e[static_cast<std::size_t>(i)] -= other[i];
  return MultiIndex(std::move(e));
}

bool MultiIndex::componentwise_leq(const MultiIndex& other) const {
  if (dim() != other.dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if ((*this)[i] > other[i]) return false;
  return true;
}

std::string MultiIndex::str() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim(); ++i) os << (i ? "," : "") << (*this)[i];
  os << ')';
  return os.str();
}

bool GradedLex::operator()(const MultiIndex& a, const MultiIndex& b) const {
  if (a.order() != b.order()) return a.order() < b.order();
  return std::lexicographical_compare(b.entries().begin(), b.entries().end(), a.entries().begin(),
                                      a.entries().end());
}

std::vector<MultiIndex> enumerate(int n, int max_degree) {
  if (n < 1) throw ValidationError("enumerate: dimension must be >= 1");
  if (max_degree < -1) throw ValidationError("enumerate: max_degree must be >= -1");
  std::vector<MultiIndex> out;
  std::vector<int> e(static_cast<std::size_t>(n), 0);
  for (int degree = 0; degree <= max_degree; ++degree) {
    // Lexicographically decreasing compositions of `degree` into n parts.
    std::vector<MultiIndex> level;
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
      if (pos == n - 1) {
        e[static_cast<std::size_t>(pos)] = remaining;
        level.emplace_back(e);
        return;
      }
      for (int v = remaining; v >= 0; --v) {
        e[static_cast<std::size_t>(pos)] = v;
        self(self, pos + 1, remaining - v);
      }
    };
    rec(rec, 0, degree);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    // r * (n - k + i) is divisible by i at every step.
    r = checked_mul(r, n - k + i) / i;
  }
  return r;
}

std::int64_t solution_space_dim(int n, int m) {
  if (n < 1) throw ValidationError("solution_space_dim: dimension must be >= 1");
  if (m < 0) throw ValidationError("solution_space_dim: m must be >= 0");
  std::int64_t total = 0;
  for (int j = 0; j < m; ++j) total = checked_add(total, binomial(j + n - 1, n - 1));
  return total;
}

std::int64_t factorial(const MultiIndex& alpha) {
  std::int64_t r = 1;
  for (int a : alpha.entries())
    for (int i = 2; i <= a; ++i) r = checked_mul(r, i);
  return r;
}

double monomial(const MultiIndex& alpha, std::span<const double> x) {
  if (static_cast<int>(x.size()) != alpha.dim()) throw ValidationError("monomial: point dimension mismatch");
  double r = 1.0;
  for (int i = 0; i < alpha.dim(); ++i) {
    for (int p = 0; p < alpha[i]; ++p) r *= x[static_cast<std::size_t>(i)];
  }
  return r;
}

std::int64_t binom_multi(const MultiIndex& gamma, const MultiIndex& beta) {
  if (!beta.componentwise_leq(gamma)) throw ValidationError("binom_multi: requires beta <= gamma componentwise");
  std::int64_t r = 1;
  for (int i = 0; i < gamma.dim(); ++i) r = checked_mul(r, binomial(gamma[i], beta[i]));
  return r;
}

Polynomial::Polynomial(int dim, int max_degree) : dim_(dim), max_degree_(max_degree) {
  if (dim < 1) throw ValidationError("polynomial dimension must be >= 1");
  if (max_degree < -1) throw ValidationError("polynomial max_degree must be >= -1");
}

double Polynomial::coeff(const MultiIndex& alpha) const {
  auto it = coeffs_.find(alpha);
  return it == coeffs_.end() ? 0.0 : it->second;
}

void Polynomial::set(const MultiIndex& alpha, double value) {
  if (alpha.dim() != dim_) throw ValidationError("polynomial: multi-index dimension mismatch");
  if (alpha.order() > max_degree_) throw ValidationError("polynomial: monomial degree exceeds max_degree");
  coeffs_[alpha] = value;
}

void Polynomial::add(const MultiIndex& alpha, double value) { set(alpha, coeff(alpha) + value); }

double Polynomial::operator()(std::span<const double> x) const {
  double acc = 0.0;
  for (const auto& [alpha, c] : coeffs_) acc += c * monomial(alpha, x);
  return acc;
}

std::vector<double> Polynomial::coefficient_vector() const {
  std::vector<double> out;
  for (const auto& alpha : enumerate(dim_, max_degree_)) out.push_back(coeff(alpha));
  return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  if (other.dim_ != dim_) throw ValidationError("polynomial dimension mismatch");
  max_degree_ = std::max(max_degree_, other.max_degree_);
  for (const auto& [alpha, c] : other.coeffs_) add(alpha, c);
  return *this;
}

Polynomial Polynomial::operator-() const {
  Polynomial out(*this);
  for (auto& [alpha, c] : out.coeffs_) c = -c;
  return out;
}

PolyFit best_poly_fit(std::span<const std::pair<Point, double>> samples, int n, int max_degree) {
  const auto basis = enumerate(n, max_degree);
  Polynomial poly(n, max_degree);
  if (basis.empty()) {
    double sup = 0.0;
    for (const auto& s : samples) sup = std::max(sup, std::abs(s.second));
    return {poly, sup};
  }
  if (samples.size() < basis.size())
    throw ValidationError("best_poly_fit: need at least " + std::to_string(basis.size()) + " samples");

  const auto rows = static_cast<Eigen::Index>(samples.size());
  const auto cols = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd V(rows, cols);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& [pt, value] = samples[static_cast<std::size_t>(i)];
    if (static_cast<int>(pt.size()) != n) throw ValidationError("best_poly_fit: sample dimension mismatch");
    for (Eigen::Index j = 0; j < cols; ++j) V(i, j) = monomial(basis[static_cast<std::size_t>(j)], pt);
    rhs(i) = value;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
  qr.setThreshold(1e-12);
  if (qr.rank() < cols) throw NumericalError("best_poly_fit: degenerate sample geometry (rank-deficient system)");
  Eigen::VectorXd c = qr.solve(rhs);
  for (Eigen::Index j = 0; j < cols; ++j) poly.set(basis[static_cast<std::size_t>(j)], c(j));

  double sup = 0.0;
  for (const auto& [pt, value] : samples) sup = std::max(sup, std::abs(value - poly(pt)));
  return {poly, sup};
}

}  // namespace nlop
