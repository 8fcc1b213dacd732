#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nlop/dirichlet.hpp"
#include "nlop/kernels.hpp"
#include "nlop/quadrature.hpp"
#include "nlop/viscosity.hpp"

namespace nlop {

/// TOML-style key-value file: `[section]` headers, `key = value` lines, `#`
/// comments, quoted strings and `[a, b, c]` number lists. Keys are stored as
/// "section.key".
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

  std::string text(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

  /// Entries of one section with the prefix removed.
  std::map<std::string, std::string> section(const std::string& name) const;

  /// Throws ValidationError naming the first key outside `allowed`.
  /// "section.*" admits every key of a section.
  void reject_unknown(const std::set<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> entries_;
  std::string origin_;
};

std::vector<double> parse_number_list(const std::string& src);

/// [quad] abs_tol, rel_tol, max_depth, max_panels, tail_policy, fixed_radius.
QuadConfig quad_config_from(const Config& c);

struct DirichletRun {
  KernelSpec kernel;
  std::string f = "1";
  std::string g = "0";
  int m = 0;
  int N = 160;
  DirichletOptions options;
  QuadConfig quad;
  std::string json_path = "dirichlet.json";
  std::string csv_path = "dirichlet.csv";

  static DirichletRun from(const Config& c);
};

struct ViscosityRun {
  KernelSpec kernel;
  std::string u;
  std::string f;
  int m = 0;
  std::vector<double> R_schedule{8.0, 32.0};
  /// Touching points, one coordinate tuple per point flattened in order.
  std::vector<double> points{0.0};
  std::vector<double> below_curvatures{-4.0};
  std::vector<double> above_curvatures;
  double radius = 0.25;
  ViscosityOptions options;
  QuadConfig quad;
  std::string json_path = "viscosity.json";

  static ViscosityRun from(const Config& c);
  /// Paraboloid tests at every point: below curvatures first, then above.
  std::vector<TouchingTest> battery(const ScalarField& u_field) const;
};

}  // namespace nlop
