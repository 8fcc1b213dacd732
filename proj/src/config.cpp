#include "nlop/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "nlop/error.hpp"

namespace nlop {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// '#' outside quotes starts a comment.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

double to_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, d);
  if (ec != std::errc() || p != end || v.empty()) throw ValidationError("config key '" + key + "': not a number: '" + v + "'");
  return d;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& src) {
  std::string s = trim(src);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<double> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double("list", trim(item)));
  return out;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  std::istringstream in(text);
  std::string raw, section;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ValidationError(origin + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) fail("bad section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!valid_key(key)) fail("bad key '" + key + "'");
    if (value.empty()) fail("empty value for '" + key + "'");
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') fail("unterminated string for '" + key + "'");
      value = value.substr(1, value.size() - 2);
    } else if (value.front() == '[' && value.back() != ']') {
      fail("unterminated list for '" + key + "'");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (!c.entries_.emplace(full, value).second) fail("duplicate key '" + full + "'");
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string Config::text(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError(origin_ + ": missing key '" + key + "'");
  return it->second;
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

double Config::number(const std::string& key) const { return to_double(key, text(key)); }

double Config::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

int Config::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const std::string v = text(key);
  int i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec != std::errc() || p != v.data() + v.size()) throw ValidationError("config key '" + key + "': not an integer: '" + v + "'");
  return i;
}

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = text(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError("config key '" + key + "' must be true or false");
}

std::vector<double> Config::numbers(const std::string& key) const {
  try {
    return parse_number_list(text(key));
  } catch (const ValidationError&) {
    throw ValidationError("config key '" + key + "': bad number list '" + text(key) + "'");
  }
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? numbers(key) : fallback;
}

std::map<std::string, std::string> Config::section(const std::string& name) const {
  std::map<std::string, std::string> out;
  const std::string prefix = name + ".";
  for (const auto& [k, v] : entries_)
    if (k.rfind(prefix, 0) == 0) out.emplace(k.substr(prefix.size()), v);
  return out;
}

void Config::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : entries_) {
    if (allowed.count(k)) continue;
    const auto dot = k.find('.');
    if (dot != std::string::npos && allowed.count(k.substr(0, dot) + ".*")) continue;
    throw ValidationError(origin_ + ": unknown key '" + k + "'");
  }
}

QuadConfig quad_config_from(const Config& c) {
  QuadConfig q;
  q.abs_tol = c.number("quad.abs_tol", q.abs_tol);
  q.rel_tol = c.number("quad.rel_tol", q.rel_tol);
  q.max_depth = c.integer("quad.max_depth", q.max_depth);
  q.max_panels = c.integer("quad.max_panels", q.max_panels);
  const std::string policy = c.text("quad.tail_policy", "growth_certified");
  if (policy == "growth_certified")
    q.tail_policy = TailPolicy::growth_certified;
  else if (policy == "fixed_radius")
    q.tail_policy = TailPolicy::fixed_radius;
  else
    throw ValidationError("quad.tail_policy must be growth_certified or fixed_radius");
  q.fixed_radius = c.number("quad.fixed_radius", q.fixed_radius);
  if (!(q.abs_tol > 0.0) || !(q.rel_tol > 0.0) || q.max_depth < 1 || q.max_panels < 1)
    throw ValidationError("quadrature tolerances and limits must be positive");
  return q;
}

namespace {

const std::set<std::string> kQuadKeys{"quad.abs_tol",    "quad.rel_tol",     "quad.max_depth",
                                      "quad.max_panels", "quad.tail_policy", "quad.fixed_radius"};

std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(kQuadKeys.begin(), kQuadKeys.end());
  keys.insert("kernel.*");
  return keys;
}

}  // namespace

DirichletRun DirichletRun::from(const Config& c) {
  c.reject_unknown(with_common({"problem.f", "problem.g", "problem.m", "problem.N", "solver.far_field",
                                "solver.verify_points", "solver.residual_tol", "solver.R_schedule", "output.json",
                                "output.csv"}));
  DirichletRun r;
  r.kernel = KernelSpec::from_key_values(c.section("kernel"));
  r.f = c.text("problem.f", r.f);
  r.g = c.text("problem.g", r.g);
  r.m = c.integer("problem.m", r.m);
  r.N = c.integer("problem.N", r.N);
  const std::string ff = c.text("solver.far_field", "cubic");
  if (ff == "cubic")
    r.options.far_field = Interpolation::cubic;
  else if (ff == "linear")
    r.options.far_field = Interpolation::linear;
  else
    throw ValidationError("solver.far_field must be cubic or linear");
  r.options.verify_points = c.integer("solver.verify_points", r.options.verify_points);
  r.options.residual_tol = c.number("solver.residual_tol", r.options.residual_tol);
  r.options.R_schedule = c.numbers("solver.R_schedule", r.options.R_schedule);
  r.quad = quad_config_from(c);
  r.json_path = c.text("output.json", r.json_path);
  r.csv_path = c.text("output.csv", r.csv_path);
  if (r.options.verify_points < 1) throw ValidationError("solver.verify_points must be positive");
  return r;
}

ViscosityRun ViscosityRun::from(const Config& c) {
  c.reject_unknown(with_common({"problem.u", "problem.f", "problem.m", "problem.R_schedule", "tests.points",
                                "tests.below", "tests.above", "tests.radius", "options.glue_radius",
                                "options.margin_tol", "options.touch_tol", "options.uniform_tol", "output.json"}));
  ViscosityRun r;
  r.kernel = KernelSpec::from_key_values(c.section("kernel"));
  r.u = c.text("problem.u");
  r.f = c.text("problem.f");
  r.m = c.integer("problem.m", r.m);
  r.R_schedule = c.numbers("problem.R_schedule", r.R_schedule);
  r.points = c.numbers("tests.points", r.points);
  r.below_curvatures = c.numbers("tests.below", r.below_curvatures);
  r.above_curvatures = c.numbers("tests.above", r.above_curvatures);
  r.radius = c.number("tests.radius", r.radius);
  r.options.glue_radius = c.number("options.glue_radius", r.options.glue_radius);
  r.options.margin_tol = c.number("options.margin_tol", r.options.margin_tol);
  r.options.touch_tol = c.number("options.touch_tol", r.options.touch_tol);
  r.options.uniform_tol = c.number("options.uniform_tol", r.options.uniform_tol);
  r.quad = quad_config_from(c);
  r.json_path = c.text("output.json", r.json_path);
  if (r.points.empty() || r.points.size() % static_cast<std::size_t>(r.kernel.dim) != 0)
    throw ValidationError("tests.points must hold whole points of dimension " + std::to_string(r.kernel.dim));
  if (r.below_curvatures.empty() && r.above_curvatures.empty()) throw ValidationError("no curvatures given");
  return r;
}

std::vector<TouchingTest> ViscosityRun::battery(const ScalarField& u_field) const {
  std::vector<TouchingTest> out;
  const std::size_t n = static_cast<std::size_t>(kernel.dim);
  for (std::size_t i = 0; i < points.size(); i += n) {
    Point x0(points.begin() + static_cast<std::ptrdiff_t>(i), points.begin() + static_cast<std::ptrdiff_t>(i + n));
    for (auto& t : paraboloid_family(u_field, x0, below_curvatures, Side::below, radius)) out.push_back(std::move(t));
    for (auto& t : paraboloid_family(u_field, x0, above_curvatures, Side::above, radius)) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace nlop
