#include "nlop/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nlop/error.hpp"

namespace nlop {

Json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

Json points(const std::vector<Point>& pts) {
  Json a = Json::array();
  for (const Point& p : pts) a.push_back(nums(p));
  return a;
}

Json to_json(const QuadConfig& q) {
  return {{"abs_tol", q.abs_tol},
          {"rel_tol", q.rel_tol},
          {"max_depth", q.max_depth},
          {"max_panels", q.max_panels},
          {"tail_policy", q.tail_policy == TailPolicy::fixed_radius ? "fixed_radius" : "growth_certified"},
          {"fixed_radius", q.fixed_radius}};
}

Json to_json(const KernelSpec& k) {
  Json j{{"name", to_string(k.kind)}, {"dim", k.dim},       {"s", k.s},
         {"lambda", k.lambda},       {"Lambda", k.Lambda}, {"normalized", k.normalized}};
  j["epsilon"] = k.epsilon ? Json(*k.epsilon) : Json(nullptr);
  return j;
}

Json to_json(const Kernel::Metadata& m) {
  Json j{{"symmetric_in_z", m.symmetric_in_z},
         {"nonnegative", m.nonnegative},
         {"singularity_order", m.singularity_order},
         {"admissible_theta", m.admissible_theta.str()},
         {"max_taylor_order", m.max_taylor_order},
         {"tail_decay", num(m.tail_decay)},
         {"tail_decay_gain", m.tail_decay_gain},
         {"translation_invariant", m.translation_invariant}};
  j["support_radius"] = m.support_radius ? num(*m.support_radius) : Json(nullptr);
  return j;
}

Json to_json(const HypothesisReport& r) {
  return {{"theta", r.theta},
          {"m", r.m},
          {"sample_points", points(r.sample_points)},
          {"locint_values", nums(r.locint_values)},
          {"locint_converged", r.locint_converged},
          {"locint_diagnostic", r.locint_diagnostic},
          {"symmetry_residual", num(r.symmetry_residual)},
          {"sign_violations", r.sign_violations},
          {"taylor_available", r.taylor_available},
          {"derivative_mismatch", num(r.derivative_mismatch)},
          {"pass", r.pass},
          {"failures", r.failures}};
}

Json to_json(const MembershipReport& r) {
  return {{"m", r.m},
          {"R_probe", r.R_probe},
          {"x_samples", points(r.x_samples)},
          {"ring_values", nums(r.ring_values)},
          {"ring_pass", r.ring_pass},
          {"mcond_value", num(r.mcond_value)},
          {"mcond_pass", r.mcond_pass},
          {"pass", r.pass},
          {"diagnostics", r.diagnostics}};
}

Json to_json(const QuadResult& r) {
  return {{"value", num(r.value)}, {"err_est", num(r.err_est)}, {"evaluations", r.evaluations}, {"converged", r.converged}};
}

Json to_json(const Polynomial& p) {
  Json basis = Json::array();
  if (p.max_degree() >= 0)
    for (const MultiIndex& a : enumerate(p.dim(), p.max_degree())) basis.push_back(a.str());
  return {{"dim", p.dim()}, {"degree", p.max_degree()}, {"basis", basis}, {"coefficients", nums(p.coefficient_vector())}};
}

Json to_json(const Decomposition& d) {
  Json theta = Json::object();
  for (const auto& [a, v] : d.theta) theta[a.str()] = num(v);
  return {{"x", nums(d.x)},
          {"m", d.m},
          {"f1", to_json(d.f1)},
          {"f2", to_json(d.f2)},
          {"fstar", to_json(d.fstar)},
          {"P", to_json(d.P)},
          {"P_at_x", num(d.P(d.x))},
          {"P_err", num(d.P_err)},
          {"theta", theta},
          {"total", num(d.total)},
          {"err_est", num(d.err_est())},
          {"converged", d.converged()}};
}

Json to_json(const LimitReport& r) {
  Json fR = Json::array(), PR = Json::array();
  for (const auto& row : r.fR_values) fR.push_back(nums(row));
  for (const Polynomial& p : r.P_R) PR.push_back(to_json(p));
  Json j{{"m", r.m},
         {"grid", points(r.grid)},
         {"R_schedule", nums(r.R_schedule)},
         {"f_R", fR},
         {"P_R", PR},
         {"quad_err", nums(r.quad_err)},
         {"tail_bounds", nums(r.tail_bounds)},
         {"f_limit", nums(r.f_limit)},
         {"f_limit_err", nums(r.f_limit_err)},
         {"successive_residuals", nums(r.successive_residuals)},
         {"limit_residuals", nums(r.limit_residuals)},
         {"converged", r.converged},
         {"diagnostic", r.diagnostic}};
  j["converged_at"] = r.converged_at ? Json(*r.converged_at) : Json(nullptr);
  return j;
}

namespace {

Json verdict(const HypothesisVerdict& v) { return {{"name", v.name}, {"value", num(v.value)}, {"holds", v.holds}}; }

}  // namespace

Json to_json(const StabilityReport& r) {
  Json entries = Json::array(), hyps = Json::array();
  for (const StabilityEntry& e : r.entries)
    entries.push_back({{"label", e.label},
                       {"b4_distance", num(e.b4_distance)},
                       {"b4_gradient_distance", num(e.b4_gradient_distance)},
                       {"conuk2", num(e.conuk2)},
                       {"tail", nums(e.tail)},
                       {"middle_range", num(e.middle_range)},
                       {"f_values", nums(e.f_values)},
                       {"sup_to_limit", num(e.sup_to_limit)},
                       {"quad_err", num(e.quad_err)},
                       {"ok", e.ok},
                       {"error", e.error}});
  for (const HypothesisVerdict& h : r.hypotheses) hyps.push_back(verdict(h));
  Json j{{"m", r.m},           {"grid", points(r.grid)}, {"radii", nums(r.radii)},
         {"f_limit", nums(r.f_limit)}, {"entries", entries}, {"hypotheses", hyps},
         {"conclusion", verdict(r.conclusion)}};
  j["monotone_from"] = r.monotone_from ? Json(*r.monotone_from) : Json(nullptr);
  return j;
}

Json to_json(const PolyRecovery& r) {
  return {{"P", to_json(r.P)},
          {"residual", num(r.residual)},
          {"minimax_residual", num(r.minimax_residual)},
          {"pass", r.pass}};
}

Json to_json(const DirichletSolution& s) {
  return {{"nodes", nums(s.nodes)},
          {"values", nums(s.values)},
          {"verify_x", nums(s.verify_x)},
          {"verify_residuals", nums(s.verify_residuals)},
          {"residual", num(s.residual)},
          {"ok", s.ok},
          {"diagnostic", s.diagnostic}};
}

Json to_json(const SolutionFamily& f) {
  Json members = Json::array(), gram = Json::array();
  for (const DirichletSolution& s : f.members) members.push_back(to_json(s));
  for (const auto& row : f.gram) gram.push_back(nums(row));
  return {{"members", members}, {"gram", gram}, {"gram_det", num(f.gram_det)}, {"independent", f.independent}};
}

Json to_json(const TouchingTest& t) {
  return {{"x0", nums(t.x0)},
          {"phi", t.phi.name},
          {"side", to_string(t.side)},
          {"touch_gap", num(t.touch_gap)},
          {"contact_error", num(t.contact_error)},
          {"curvature", num(t.curvature)},
          {"recentered", t.recentered}};
}

Json to_json(const ViscosityReport& r) {
  Json tests = Json::array(), margins = Json::array();
  for (std::size_t i = 0; i < r.tests.size(); ++i) {
    Json t = to_json(r.tests[i]);
    t["applicable"] = i < r.applicable.size() && r.applicable[i];
    tests.push_back(t);
  }
  for (const ViscosityMargin& m : r.margins)
    margins.push_back({{"test", m.test},
                       {"R", num(m.R)},
                       {"A_test", num(m.A_test)},
                       {"target", num(m.target)},
                       {"margin", num(m.margin)},
                       {"quad_err", num(m.quad_err)}});
  return {{"m", r.m},
          {"R_schedule", nums(r.R_schedule)},
          {"tests", tests},
          {"margins", margins},
          {"min_margin", num(r.min_margin)},
          {"uniform_gap", nums(r.uniform_gap)},
          {"pass", r.pass},
          {"verdict", r.verdict}};
}

Json to_json(const DirichletRun& r) {
  return {{"kernel", to_json(r.kernel)},
          {"problem", {{"f", r.f}, {"g", r.g}, {"m", r.m}, {"N", r.N}}},
          {"solver",
           {{"far_field", r.options.far_field == Interpolation::cubic ? "cubic" : "linear"},
            {"verify_points", r.options.verify_points},
            {"residual_tol", r.options.residual_tol},
            {"R_schedule", nums(r.options.R_schedule)}}},
          {"quad", to_json(r.quad)},
          {"output", {{"json", r.json_path}, {"csv", r.csv_path}}}};
}

Json to_json(const ViscosityRun& r) {
  return {{"kernel", to_json(r.kernel)},
          {"problem", {{"u", r.u}, {"f", r.f}, {"m", r.m}, {"R_schedule", nums(r.R_schedule)}}},
          {"tests",
           {{"points", nums(r.points)},
            {"below", nums(r.below_curvatures)},
            {"above", nums(r.above_curvatures)},
            {"radius", r.radius}}},
          {"options",
           {{"glue_radius", r.options.glue_radius},
            {"margin_tol", r.options.margin_tol},
            {"touch_tol", r.options.touch_tol},
            {"uniform_tol", r.options.uniform_tol}}},
          {"quad", to_json(r.quad)},
          {"output", {{"json", r.json_path}}}};
}

Json envelope(const std::string& command, const Json& config, const Json& result, const std::string& status) {
  return {{"command", command}, {"config", config}, {"result", result}, {"status", status}};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

std::string limit_csv(const LimitReport& r) {
  std::ostringstream os;
  const std::size_t n = r.grid.empty() ? 0 : r.grid.front().size();
  for (std::size_t d = 0; d < n; ++d) os << (d ? "," : "") << "x" << d + 1;
  for (double R : r.R_schedule) os << ",f_R=" << format_number(R);
  os << ",f_u\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    for (std::size_t d = 0; d < n; ++d) os << (d ? "," : "") << format_number(r.grid[i][d]);
    for (const auto& row : r.fR_values) os << "," << format_number(row[i]);
    os << "," << (i < r.f_limit.size() ? format_number(r.f_limit[i]) : "nan") << "\n";
  }
  return os.str();
}

std::string dirichlet_csv(const DirichletSolution& s) {
  std::ostringstream os;
  os << "node,value\n";
  for (std::size_t i = 0; i < s.nodes.size(); ++i) os << format_number(s.nodes[i]) << "," << format_number(s.values[i]) << "\n";
  return os.str();
}

std::string family_csv(const SolutionFamily& f) {
  std::ostringstream os;
  os << "node";
  for (std::size_t j = 0; j < f.members.size(); ++j) os << ",u" << j;
  os << "\n";
  if (f.members.empty()) return os.str();
  const auto& nodes = f.members.front().nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    os << format_number(nodes[i]);
    for (const DirichletSolution& s : f.members) os << "," << format_number(s.values[i]);
    os << "\n";
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

}  // namespace nlop
