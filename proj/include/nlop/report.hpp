#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "nlop/analysis.hpp"
#include "nlop/config.hpp"
#include "nlop/dirichlet.hpp"
#include "nlop/kernels.hpp"
#include "nlop/operator.hpp"
#include "nlop/viscosity.hpp"

namespace nlop {

using Json = nlohmann::json;

/// Finite values as numbers; inf, -inf and nan as strings, which plain JSON lacks.
Json num(double v);
Json nums(const std::vector<double>& v);
Json points(const std::vector<Point>& pts);

Json to_json(const QuadConfig& q);
Json to_json(const KernelSpec& k);
Json to_json(const Kernel::Metadata& meta);
Json to_json(const HypothesisReport& r);
Json to_json(const MembershipReport& r);
Json to_json(const QuadResult& r);
/// Coefficients in graded-lex order over the full basis of the degree.
Json to_json(const Polynomial& p);
Json to_json(const Decomposition& d);
Json to_json(const LimitReport& r);
Json to_json(const StabilityReport& r);
Json to_json(const PolyRecovery& r);
Json to_json(const DirichletSolution& s);
Json to_json(const SolutionFamily& f);
Json to_json(const TouchingTest& t);
Json to_json(const ViscosityReport& r);
Json to_json(const DirichletRun& r);
Json to_json(const ViscosityRun& r);

/// {"command", "config", "result", "status"}; config is the full resolved input.
Json envelope(const std::string& command, const Json& config, const Json& result, const std::string& status);

/// Two-space indented JSON with sorted keys and a trailing newline.
std::string dump(const Json& j);

/// Shortest round-trip decimal, '.' separator.
std::string format_number(double v);

/// Header row then one row per grid point: coordinates, then f_R for each R, then f_u.
std::string limit_csv(const LimitReport& r);
/// node,value
std::string dirichlet_csv(const DirichletSolution& s);
/// node followed by one value column per family member.
std::string family_csv(const SolutionFamily& f);

void write_text(const std::string& path, const std::string& text);

}  // namespace nlop
