#include "nlop/exprfunc.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <regex>

#include "nlop/error.hpp"
#include "nlop/quadrature.hpp"

namespace nlop {

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;
using Op = Expr::Op;

constexpr double kInf = std::numeric_limits<double>::infinity();

NodePtr make(Op op, std::vector<NodePtr> args = {}, double number = 0.0, int coord = 0, std::string fn = {}) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->args = std::move(args);
  n->number = number;
  n->coord = coord;
  n->fn = std::move(fn);
  return n;
}

int arity(const std::string& fn) {
  if (fn == "exp" || fn == "log" || fn == "abs" || fn == "sqrt") return 1;
  if (fn == "min" || fn == "max" || fn == "ind") return 2;
  return -1;
}

bool depends_on_x(const Expr::Node& n) {
  if (n.op == Op::coord || n.op == Op::radius) return true;
  return std::any_of(n.args.begin(), n.args.end(), [](const NodePtr& a) { return depends_on_x(*a); });
}

class Parser {
 public:
  Parser(const std::string& src, int n) : s_(src), n_(n) {}

  NodePtr parse() {
    skip();
    if (pos_ >= s_.size()) throw SyntaxError("empty expression", pos_);
    NodePtr e = expr();
    skip();
    if (pos_ < s_.size()) throw SyntaxError(std::string("unexpected '") + s_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= s_.size()) throw SyntaxError(std::string("expected '") + c + "' before end of input", pos_);
      throw SyntaxError(std::string("expected '") + c + "'", pos_);
    }
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (true) {
      if (accept('+'))
        lhs = make(Op::add, {lhs, term()});
      else if (accept('-'))
        lhs = make(Op::sub, {lhs, term()});
      else
        return lhs;
    }
  }
  NodePtr term() {
    NodePtr lhs = unary();
    while (true) {
      if (accept('*'))
        lhs = make(Op::mul, {lhs, unary()});
      else if (accept('/'))
        lhs = make(Op::div, {lhs, unary()});
      else
        return lhs;
    }
  }
  NodePtr unary() {
    if (accept('-')) return make(Op::neg, {unary()});
    if (accept('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Op::pow, {base, unary()});
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) throw SyntaxError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw SyntaxError(std::string("unexpected '") + c + "'", pos_);
  }
  NodePtr number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    std::string text = s_.substr(start, pos_ - start);
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || text == ".") throw SyntaxError("malformed number '" + text + "'", start);
    return make(Op::number, {}, v);
  }
  NodePtr identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    std::string id = s_.substr(start, pos_ - start);
    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      int k = arity(id);
      if (k < 0) throw SyntaxError("unknown function '" + id + "'", start);
      ++pos_;
      std::vector<NodePtr> args{expr()};
      while (accept(',')) args.push_back(expr());
      expect(')');
      if (static_cast<int>(args.size()) != k)
        throw SyntaxError("function '" + id + "' takes " + std::to_string(k) + " argument(s), got " +
                              std::to_string(args.size()),
                          start);
      if (id == "ind" && (depends_on_x(*args[0]) || depends_on_x(*args[1])))
        throw SyntaxError("ind(a, b) needs constant bounds", start);
      return make(Op::call, std::move(args), 0.0, 0, id);
    }
    if (id == "r") return make(Op::radius);
    if (id == "pi") return make(Op::number, {}, std::numbers::pi);
    if (id == "e") return make(Op::number, {}, std::numbers::e);
    if (id == "inf") return make(Op::number, {}, kInf);
    if (id.size() >= 2 && id[0] == 'x' &&
        std::all_of(id.begin() + 1, id.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      int idx = std::stoi(id.substr(1));
      if (idx >= 1 && idx <= n_) return make(Op::coord, {}, 0.0, idx);
    }
    throw SyntaxError("unknown identifier '" + id + "'", start);
  }

  const std::string& s_;
  int n_;
  std::size_t pos_ = 0;
};

double eval_node(const Expr::Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::number: return n.number;
    case Op::coord: return x[static_cast<std::size_t>(n.coord - 1)];
    case Op::radius: {
      double s = 0.0;
      for (double c : x) s += c * c;
      return std::sqrt(s);
    }
    case Op::neg: return -eval_node(*n.args[0], x);
    case Op::add: return eval_node(*n.args[0], x) + eval_node(*n.args[1], x);
    case Op::sub: return eval_node(*n.args[0], x) - eval_node(*n.args[1], x);
    case Op::mul: return eval_node(*n.args[0], x) * eval_node(*n.args[1], x);
    case Op::div: {
      double b = eval_node(*n.args[1], x);
      if (b == 0.0) throw DomainError("division by zero");
      return eval_node(*n.args[0], x) / b;
    }
    case Op::pow: {
      double a = eval_node(*n.args[0], x), b = eval_node(*n.args[1], x);
      if (a < 0.0 && b != std::floor(b)) throw DomainError("non-integer power of a negative number");
      if (a == 0.0 && b < 0.0) throw DomainError("division by zero");
      return std::pow(a, b);
    }
    case Op::call: {
      const std::string& f = n.fn;
      if (f == "ind") {
        double r = eval_node(Expr::Node{Op::radius, 0.0, 0, {}, {}}, x);
        double a = eval_node(*n.args[0], x), b = eval_node(*n.args[1], x);
        return (r >= a && r <= b) ? 1.0 : 0.0;
      }
      double a = eval_node(*n.args[0], x);
      if (f == "exp") return std::exp(a);
      if (f == "log") {
        if (!(a > 0.0)) throw DomainError("log of a non-positive number");
        return std::log(a);
      }
      if (f == "abs") return std::abs(a);
      if (f == "sqrt") {
        if (a < 0.0) throw DomainError("sqrt of a negative number");
        return std::sqrt(a);
      }
      double b = eval_node(*n.args[1], x);
      if (f == "min") return std::min(a, b);
      if (f == "max") return std::max(a, b);
      throw DomainError("unknown function " + f);
    }
  }
  return 0.0;
}

std::string fmt_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "(-inf)";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_node(const Expr::Node& n, std::string& out) {
  auto bin = [&](const char* op) {
    out += '(';
    print_node(*n.args[0], out);
    out += op;
    print_node(*n.args[1], out);
    out += ')';
  };
  switch (n.op) {
    case Op::number: out += fmt_number(n.number); break;
    case Op::coord: out += "x" + std::to_string(n.coord); break;
    case Op::radius: out += "r"; break;
    case Op::neg:
      out += "(-";
      print_node(*n.args[0], out);
      out += ')';
      break;
    case Op::add: bin("+"); break;
    case Op::sub: bin("-"); break;
    case Op::mul: bin("*"); break;
    case Op::div: bin("/"); break;
    case Op::pow: bin("^"); break;
    case Op::call:
      out += n.fn + "(";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ",";
        print_node(*n.args[i], out);
      }
      out += ")";
      break;
  }
}

bool equal_nodes(const Expr::Node& a, const Expr::Node& b) {
  if (a.op != b.op || a.args.size() != b.args.size()) return false;
  if (a.op == Op::number && !(a.number == b.number)) return false;
  if (a.op == Op::coord && a.coord != b.coord) return false;
  if (a.op == Op::call && a.fn != b.fn) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!equal_nodes(*a.args[i], *b.args[i])) return false;
  return true;
}

double constant_value(const Expr::Node& n) {
  std::array<double, 8> zero{};
  return eval_node(n, std::span<const double>(zero.data(), 8));
}

bool nonnegative(const Expr::Node& n) {
  switch (n.op) {
    case Op::number: return n.number >= 0.0;
    case Op::radius: return true;
    case Op::mul:
    case Op::add:
    case Op::div: return nonnegative(*n.args[0]) && nonnegative(*n.args[1]);
    case Op::pow: {
      if (nonnegative(*n.args[0])) return true;
      if (depends_on_x(*n.args[1])) return false;
      double p = constant_value(*n.args[1]);
      return p == std::floor(p) && std::fmod(p, 2.0) == 0.0;
    }
    case Op::call: return n.fn == "abs" || n.fn == "sqrt" || n.fn == "exp" || n.fn == "ind";
    default: return false;
  }
}

std::optional<double> growth_node(const Expr::Node& n) {
  using R = std::optional<double>;
  auto both = [](R a, R b, auto f) -> R {
    if (!a || !b) return std::nullopt;
    return f(*a, *b);
  };
  switch (n.op) {
    case Op::number: return 0.0;
    case Op::coord:
    case Op::radius: return 1.0;
    case Op::neg: return growth_node(*n.args[0]);
    case Op::add:
    case Op::sub:
      return both(growth_node(*n.args[0]), growth_node(*n.args[1]), [](double a, double b) { return std::max(a, b); });
    case Op::mul:
      return both(growth_node(*n.args[0]), growth_node(*n.args[1]), [](double a, double b) {
        if (a == -kInf || b == -kInf) return -kInf;
        return a + b;
      });
    case Op::div:
      if (!depends_on_x(*n.args[1])) return growth_node(*n.args[0]);
      return std::nullopt;
    case Op::pow: {
      if (depends_on_x(*n.args[1])) return std::nullopt;
      double p = constant_value(*n.args[1]);
      R g = growth_node(*n.args[0]);
      if (!g) return std::nullopt;
      if (p == 0.0) return 0.0;
      if (p > 0.0) return *g == -kInf ? -kInf : p * *g;
      if (!depends_on_x(*n.args[0])) return 0.0;
      return std::nullopt;
    }
    case Op::call: {
      const std::string& f = n.fn;
      if (f == "ind") return 0.0;
      R a = growth_node(*n.args[0]);
      if (f == "abs") return a;
      if (f == "sqrt") return a ? R(*a / 2.0) : std::nullopt;
      if (f == "log") return a ? R(*a > 0.0 ? 0.01 : 0.0) : std::nullopt;
      if (f == "min" || f == "max")
        return both(a, growth_node(*n.args[1]), [](double u, double v) { return std::max(u, v); });
      if (f == "exp") {
        if (!depends_on_x(*n.args[0])) return 0.0;
        if (a && *a <= 0.0) return 0.0;
        const Expr::Node& arg = *n.args[0];
        if (arg.op == Op::neg && nonnegative(*arg.args[0])) {
          R g = growth_node(*arg.args[0]);
          return (g && *g > 0.0) ? -kInf : 0.0;
        }
        return std::nullopt;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<double> support_node(const Expr::Node& n) {
  switch (n.op) {
    case Op::call:
      if (n.fn == "ind") {
        double b = constant_value(*n.args[1]);
        if (std::isfinite(b)) return b;
      }
      if (n.fn == "abs") return support_node(*n.args[0]);
      return std::nullopt;
    case Op::neg: return support_node(*n.args[0]);
    case Op::div: return support_node(*n.args[0]);
    case Op::mul: {
      auto a = support_node(*n.args[0]), b = support_node(*n.args[1]);
      if (a && b) return std::min(*a, *b);
      return a ? a : b;
    }
    case Op::add:
    case Op::sub: {
      auto a = support_node(*n.args[0]), b = support_node(*n.args[1]);
      if (a && b) return std::max(*a, *b);
      return std::nullopt;
    }
    case Op::pow: {
      if (depends_on_x(*n.args[1])) return std::nullopt;
      if (constant_value(*n.args[1]) > 0.0) return support_node(*n.args[0]);
      return std::nullopt;
    }
    default: return std::nullopt;
  }
}

void breaks_node(const Expr::Node& n, std::vector<double>& out) {
  if (n.op == Op::call && n.fn == "ind") {
    for (const NodePtr& a : n.args) {
      double v = constant_value(*a);
      if (std::isfinite(v) && v > 0.0) out.push_back(v);
    }
  }
  if (n.op == Op::call && n.fn == "abs" && depends_on_x(*n.args[0])) out.push_back(0.0);
  for (const NodePtr& a : n.args) breaks_node(*a, out);
}

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return std::sqrt(s);
}

double param(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void allow_keys(const std::string& name, const Params& p, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : p) {
    bool ok = std::any_of(keys.begin(), keys.end(), [&k](const char* a) { return k == a; });
    if (!ok) throw ValidationError("builtin '" + name + "' has no parameter '" + k + "'");
  }
}

}  // namespace

double Expr::eval(std::span<const double> x) const {
  if (!root_) throw ValidationError("empty expression");
  if (static_cast<int>(x.size()) != dim_) throw ValidationError("point dimension does not match the expression");
  double v = eval_node(*root_, x);
  if (!std::isfinite(v)) throw DomainError("expression value is not finite");
  return v;
}

std::string Expr::print() const {
  std::string out;
  if (root_) print_node(*root_, out);
  return out;
}

std::optional<double> Expr::growth() const { return root_ ? growth_node(*root_) : std::nullopt; }

std::vector<double> Expr::radial_breaks() const {
  std::vector<double> out;
  if (root_) breaks_node(*root_, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<double> Expr::support_radius() const { return root_ ? support_node(*root_) : std::nullopt; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.dim_ != b.dim_) return false;
  if (!a.root_ || !b.root_) return !a.root_ && !b.root_;
  return equal_nodes(*a.root_, *b.root_);
}

Expr parse(const std::string& src, int n) {
  if (n < 1) throw ValidationError("dimension must be positive");
  return Expr(Parser(src, n).parse(), n);
}

Point ScalarField::gradient_at(std::span<const double> x) const {
  if (gradient) return (*gradient)(x);
  Point g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    MultiIndex a = MultiIndex::unit(static_cast<int>(x.size()), static_cast<int>(i));
    g[i] = finite_difference_deriv(eval, a, x).value;
  }
  return g;
}

double estimate_growth(const ScalarField::Eval& u, int dim) {
  std::vector<Point> dirs;
  if (dim == 1) {
    dirs = {{1.0}, {-1.0}};
  } else {
    for (int a = 0; a < 8; ++a) {
      double t = (a + 0.5) * std::numbers::pi / 4.0;
      Point w(static_cast<std::size_t>(dim), 0.0);
      w[0] = std::cos(t);
      w[1] = std::sin(t);
      dirs.push_back(w);
    }
  }
  std::vector<double> logs;
  for (int k = 10; k <= 40; ++k) {
    double rho = std::ldexp(1.0, k);
    double mx = 0.0;
    for (const Point& w : dirs) {
      Point y = w;
      for (double& c : y) c *= rho;
      try {
        double v = std::abs(u(y));
        if (std::isfinite(v)) mx = std::max(mx, v);
      } catch (const DomainError&) {
      }
    }
    logs.push_back(mx > 0.0 ? std::log2(mx) : -kInf);
  }
  double slope = -kInf;
  for (std::size_t i = logs.size() - 10; i + 1 < logs.size(); ++i) {
    double d = logs[i + 1] - logs[i];
    if (std::isnan(d)) d = -kInf;
    slope = std::max(slope, d);
  }
  if (slope < -30.0) return -kInf;
  return slope + 0.05;
}

ScalarField from_expr(const Expr& e, double theta_class, std::optional<double> growth) {
  if (!(theta_class >= 0.0 && theta_class <= 2.0)) throw ValidationError("theta_class must lie in [0,2]");
  ScalarField u;
  u.dim = e.dim();
  u.eval = [e](std::span<const double> x) { return e.eval(x); };
  u.theta_class = theta_class;
  u.radial_breaks = e.radial_breaks();
  u.support_radius = e.support_radius();
  u.name = e.print();
  if (theta_class < 2.0) {
    // Structural kinks and jumps sit on the break spheres; elsewhere the expression is smooth.
    u.local_theta = [breaks = u.radial_breaks, theta_class](std::span<const double> x) {
      double r = norm(x);
      for (double b : breaks)
        if (std::abs(r - b) < 1e-12) return theta_class;
      return 2.0;
    };
  }
  if (growth) {
    u.growth_exponent = *growth;
  } else if (u.support_radius) {
    u.growth_exponent = -kInf;
  } else if (auto g = e.growth()) {
    u.growth_exponent = *g;
  } else {
    u.growth_exponent = estimate_growth(u.eval, u.dim);
  }
  return u;
}

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"constant",         "coordinate", "monomial", "bump",
                                                 "counterexample_uk", "getoor",     "indicator_annulus",
                                                 "lemcs_footnote"};
  return names;
}

ScalarField builtin(const std::string& name, const Params& params, int dim) {
  if (dim < 1 || dim > 2) throw ValidationError("builtin functions support n = 1, 2");
  ScalarField u;
  u.dim = dim;
  u.name = name;
  auto jump_theta = [](std::vector<double> radii) {
    return [radii](std::span<const double> x) {
      double r = norm(x);
      for (double b : radii)
        if (std::abs(r - b) < 1e-12) return 0.0;
      return 2.0;
    };
  };
  if (name == "constant") {
    allow_keys(name, params, {"c"});
    double c = param(params, "c", 1.0);
    u.eval = [c](std::span<const double>) { return c; };
    u.gradient = [dim](std::span<const double>) { return Point(static_cast<std::size_t>(dim), 0.0); };
    u.growth_exponent = 0.0;
  } else if (name == "coordinate") {
    allow_keys(name, params, {"i"});
    double i = param(params, "i", 1.0);
    if (i != std::floor(i) || i < 1 || i > dim) throw ValidationError("coordinate index out of range");
    auto k = static_cast<std::size_t>(i) - 1;
    u.eval = [k](std::span<const double> x) { return x[k]; };
    u.gradient = [k, dim](std::span<const double>) {
      Point g(static_cast<std::size_t>(dim), 0.0);
      g[k] = 1.0;
      return g;
    };
    u.growth_exponent = 1.0;
  } else if (name == "monomial") {
    std::vector<int> e(static_cast<std::size_t>(dim), 0);
    if (dim == 1) {
      allow_keys(name, params, {"a", "a1"});
      e[0] = static_cast<int>(param(params, "a", param(params, "a1", 1.0)));
    } else {
      allow_keys(name, params, {"a1", "a2"});
      e[0] = static_cast<int>(param(params, "a1", 0.0));
      e[1] = static_cast<int>(param(params, "a2", 0.0));
    }
    for (const auto& [k, v] : params)
      if (v < 0.0 || v != std::floor(v)) throw ValidationError("monomial exponents must be nonnegative integers");
    MultiIndex alpha(e);
    u.eval = [alpha](std::span<const double> x) { return monomial(alpha, x); };
    u.gradient = [alpha, dim](std::span<const double> x) {
      Point g(static_cast<std::size_t>(dim), 0.0);
      for (int i = 0; i < dim; ++i) {
        if (alpha[i] == 0) continue;
        std::vector<int> d(alpha.entries().begin(), alpha.entries().end());
        --d[static_cast<std::size_t>(i)];
        g[static_cast<std::size_t>(i)] = alpha[i] * monomial(MultiIndex(d), x);
      }
      return g;
    };
    u.growth_exponent = alpha.order();
    u.name = "monomial(" + alpha.str() + ")";
  } else if (name == "bump") {
    allow_keys(name, params, {"r"});
    double r = param(params, "r", 1.0);
    if (!(r > 0.0)) throw ValidationError("bump radius must be positive");
    u.eval = [r](std::span<const double> x) {
      double q = 0.0;
      for (double c : x) q += c * c;
      q /= r * r;
      return q < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - q)) : 0.0;
    };
    u.gradient = [r](std::span<const double> x) {
      double q = 0.0;
      for (double c : x) q += c * c;
      q /= r * r;
      Point g(x.size(), 0.0);
      if (q >= 1.0) return g;
      double v = std::exp(1.0 - 1.0 / (1.0 - q));
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = -v * 2.0 * x[i] / (r * r * (1.0 - q) * (1.0 - q));
      return g;
    };
    u.growth_exponent = -kInf;
    u.support_radius = r;
    u.radial_breaks = {r};
  } else if (name == "counterexample_uk") {
    allow_keys(name, params, {"k"});
    if (dim != 1) throw ValidationError("counterexample_uk is one-dimensional");
    double k = param(params, "k", 10.0);
    if (!(k > 1.0)) throw ValidationError("counterexample_uk needs k > 1");
    u.eval = [k](std::span<const double> x) { return x[0] > k ? k * x[0] : 0.0; };
    u.gradient = [k](std::span<const double> x) { return Point{x[0] > k ? k : 0.0}; };
    u.growth_exponent = 1.0;
    u.radial_breaks = {k};
    u.theta_class = k >= 4.0 ? 2.0 : 0.0;
    u.local_theta = jump_theta({k});
  } else if (name == "getoor") {
    allow_keys(name, params, {"s"});
    double s = param(params, "s", 0.5);
    if (!(s > 0.0 && s < 1.0)) throw ValidationError("getoor needs 0 < s < 1");
    u.eval = [s](std::span<const double> x) {
      double q = 0.0;
      for (double c : x) q += c * c;
      return q < 1.0 ? std::pow(1.0 - q, s) : 0.0;
    };
    u.gradient = [s](std::span<const double> x) {
      double q = 0.0;
      for (double c : x) q += c * c;
      Point g(x.size(), 0.0);
      if (q >= 1.0) return g;
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = -2.0 * s * x[i] * std::pow(1.0 - q, s - 1.0);
      return g;
    };
    u.theta_class = s;
    u.local_theta = [s](std::span<const double> x) { return std::abs(norm(x) - 1.0) < 1e-12 ? s : 2.0; };
    u.growth_exponent = -kInf;
    u.support_radius = 1.0;
    u.radial_breaks = {1.0};
    char buf[64];
    std::snprintf(buf, sizeof buf, "getoor(s=%g)", s);
    u.name = buf;
  } else if (name == "indicator_annulus") {
    allow_keys(name, params, {"a", "b"});
    double a = param(params, "a", 1.0), b = param(params, "b", 2.0);
    if (!(a >= 0.0 && b > a)) throw ValidationError("indicator_annulus needs 0 <= a < b");
    u.eval = [a, b](std::span<const double> x) {
      double r = norm(x);
      return (r >= a && r <= b) ? 1.0 : 0.0;
    };
    u.gradient = [dim](std::span<const double>) { return Point(static_cast<std::size_t>(dim), 0.0); };
    u.growth_exponent = std::isfinite(b) ? -kInf : 0.0;
    if (std::isfinite(b)) u.support_radius = b;
    u.radial_breaks = {a, b};
    u.theta_class = a >= 4.0 ? 2.0 : 0.0;
    u.local_theta = jump_theta({a, b});
  } else if (name == "lemcs_footnote") {
    allow_keys(name, params, {"k", "s"});
    if (dim != 1) throw ValidationError("lemcs_footnote is one-dimensional");
    double k = param(params, "k", 10.0), s = param(params, "s", 0.5);
    if (!(k > 1.0)) throw ValidationError("lemcs_footnote needs k > 1");
    if (!(s > 0.0 && s < 1.0)) throw ValidationError("lemcs_footnote needs 0 < s < 1");
    const double lk = std::log(k);
    u.eval = [k, s, lk](std::span<const double> x) {
      return (x[0] > k && x[0] < k * k) ? -std::pow(x[0], 2.0 * s) / lk : 0.0;
    };
    u.growth_exponent = -kInf;
    u.support_radius = k * k;
    u.radial_breaks = {k, k * k};
    u.theta_class = k >= 4.0 ? 2.0 : 0.0;
    u.local_theta = jump_theta({k, k * k});
  } else {
    throw ValidationError("unknown builtin function '" + name + "'");
  }
  if (u.name == name && !params.empty()) {
    std::string args;
    for (const auto& [k, v] : params) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%s=%.17g", args.empty() ? "" : ",", k.c_str(), v);
      args += buf;
    }
    u.name = name + "(" + args + ")";
  }
  return u;
}

ScalarField parse_function(const std::string& src, int dim, std::optional<double> theta,
                           std::optional<double> growth) {
  static const std::regex call(R"(^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$)");
  std::smatch m;
  ScalarField u;
  bool is_builtin = false;
  if (std::regex_match(src, m, call)) {
    std::string name = m[1];
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      is_builtin = true;
      Params p;
      std::string body = m[2];
      static const std::regex kv(R"(\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^,]+?)\s*(,|$))");
      std::size_t consumed = 0;
      for (auto it = std::sregex_iterator(body.begin(), body.end(), kv); it != std::sregex_iterator(); ++it) {
        if (static_cast<std::size_t>(it->position()) != consumed)
          throw SyntaxError("malformed builtin parameters", static_cast<std::size_t>(m.position(2)) + consumed);
        std::string key = (*it)[1], val = (*it)[2];
        char* end = nullptr;
        double v = std::strtod(val.c_str(), &end);
        if (end != val.c_str() + val.size()) {
          Expr ce = parse(val, 1);
          std::array<double, 1> zero{0.0};
          v = ce.eval(zero);
        }
        if (p.count(key)) throw ValidationError("duplicate builtin parameter '" + key + "'");
        p[key] = v;
        consumed = static_cast<std::size_t>(it->position() + it->length());
      }
      if (consumed != body.size() && body.find_first_not_of(" \t", consumed) != std::string::npos)
        throw SyntaxError("malformed builtin parameters", static_cast<std::size_t>(m.position(2)) + consumed);
      u = builtin(name, p, dim);
    }
  }
  if (!is_builtin) u = from_expr(parse(src, dim), theta.value_or(2.0), growth);
  if (theta) {
    if (!(*theta >= 0.0 && *theta <= 2.0)) throw ValidationError("theta_class must lie in [0,2]");
    u.theta_class = *theta;
    // Expressions already localise the claim to their break spheres.
    if (is_builtin) u.local_theta = nullptr;
  }
  if (growth) u.growth_exponent = *growth;
  return u;
}

MembershipReport check_membership(const ScalarField& u, const Kernel& K, int m, double R_probe, const QuadConfig& cfg) {
  const int n = K.dim();
  if (u.dim != n) throw ValidationError("function and kernel dimensions differ");
  if (n > 2) throw ValidationError("membership checks support n = 1, 2");
  if (m < 0 || m > K.meta().max_taylor_order)
    throw ValidationError("m must lie in [0, max_taylor_order] for this kernel");
  if (!(R_probe > 3.0)) throw ValidationError("R_probe must exceed 3");
  MembershipReport rep;
  rep.m = m;
  rep.R_probe = R_probe;
  // These integrals only decide finiteness; a screening tolerance suffices.
  QuadConfig screen = cfg;
  screen.abs_tol = std::max(cfg.abs_tol, 1e-6);
  screen.rel_tol = std::max(cfg.rel_tol, 1e-4);
  if (n == 1)
    rep.x_samples = {{-0.5}, {0.0}, {0.5}};
  else
    rep.x_samples = {{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}};

  std::vector<MultiIndex> low = enumerate(n, m - 1);
  for (const Point& x : rep.x_samples) {
    if (low.empty()) {
      rep.ring_values.push_back(0.0);
      continue;
    }
    auto f = [&](std::span<const double> y) {
      double uy = std::abs(u(y));
      if (uy == 0.0) return 0.0;
      double s = 0.0;
      for (const MultiIndex& a : low) s += std::abs(K.deriv(a, x, y).value);
      return uy * s;
    };
    double outer = R_probe;
    if (u.support_radius) outer = std::clamp(*u.support_radius, 3.0, R_probe);
    QuadResult q = integrate_region(f, Annulus{Point(static_cast<std::size_t>(n), 0.0), 3.0, outer}, n, screen,
                                    u.radial_breaks);
    rep.ring_values.push_back(q.value);
    if (!q.converged || !std::isfinite(q.value)) {
      rep.ring_pass = false;
      rep.diagnostics.push_back("ring: annulus integral did not converge at x = " + std::to_string(x[0]));
    }
  }

  std::vector<MultiIndex> top;
  for (const MultiIndex& a : enumerate(n, m))
    if (a.order() == m) top.push_back(a);
  auto g = [&](std::span<const double> y) {
    double uy = std::abs(u(y));
    if (uy == 0.0) return 0.0;
    return uy * sup_deriv_on_unit_ball(K, m, y);
  };
  try {
    QuadResult q;
    if (u.support_radius && *u.support_radius <= 3.0) {
      q = QuadResult{};
    } else if (u.support_radius) {
      q = integrate_region(g, Annulus{Point(static_cast<std::size_t>(n), 0.0), 3.0, *u.support_radius}, n, screen,
                           u.radial_breaks);
    } else {
      q = integrate_tail(g, n, 3.0, u.growth_exponent, K.tail_decay(m), screen, {}, u.radial_breaks);
    }
    rep.mcond_value = q.value;
    if (!q.converged || !std::isfinite(q.value)) {
      rep.mcond_pass = false;
      rep.diagnostics.push_back("mcond: tail integral did not converge (err " + std::to_string(q.err_est) + ")");
    }
  } catch (const DivergentTail& e) {
    rep.mcond_pass = false;
    rep.mcond_value = kInf;
    rep.diagnostics.push_back(std::string("mcond: ") + e.what());
  }
  rep.pass = rep.ring_pass && rep.mcond_pass;
  return rep;
}

}  // namespace nlop
