#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlop/analysis.hpp"
#include "nlop/config.hpp"
#include "nlop/dirichlet.hpp"
#include "nlop/error.hpp"
#include "nlop/report.hpp"
#include "nlop/viscosity.hpp"

using namespace nlop;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kNumerical = 2;

struct KernelArgs {
  std::string name = "frac_lap";
  double s = 0.5;
  std::optional<double> eps;
  int n = 1;
  double lambda = 1.0;
  double Lambda = 1.0;
  bool normalized = false;

  void add(CLI::App* app) {
    app->add_option("--kernel", name, "kernel family")->capture_default_str();
    app->add_option("--s", s, "fractional order")->capture_default_str();
    app->add_option("--eps", eps, "desingularisation level");
    app->add_option("--n", n, "space dimension")->capture_default_str();
    app->add_option("--lambda", lambda, "lower ellipticity constant")->capture_default_str();
    app->add_option("--Lambda", Lambda, "upper ellipticity constant")->capture_default_str();
    app->add_flag("--normalized", normalized, "scale by the fractional Laplacian constant");
  }

  KernelSpec spec() const {
    KernelSpec k;
    k.kind = parse_kernel_kind(name);
    k.s = s;
    k.epsilon = eps;
    k.dim = n;
    k.lambda = lambda;
    k.Lambda = Lambda;
    k.normalized = normalized;
    return k;
  }
};

struct QuadArgs {
  QuadConfig q;
  void add(CLI::App* app) {
    app->add_option("--abs-tol", q.abs_tol, "absolute quadrature tolerance")->capture_default_str();
    app->add_option("--rel-tol", q.rel_tol, "relative quadrature tolerance")->capture_default_str();
    app->add_option("--max-depth", q.max_depth, "adaptive refinement depth")->capture_default_str();
  }
};

struct Output {
  std::string json;
  std::string csv;
  void add(CLI::App* app, bool with_csv) {
    app->add_option("--json", json, "write the JSON report here instead of stdout");
    if (with_csv) app->add_option("--csv", csv, "also write a CSV table here");
  }
};

std::vector<double> split_numbers(const std::string& src, const std::string& what) {
  try {
    return parse_number_list(src);
  } catch (const ValidationError&) {
    throw ValidationError(what + ": bad number list '" + src + "'");
  }
}

void emit(const Json& report, const std::string& path) {
  if (path.empty())
    std::cout << dump(report);
  else
    write_text(path, dump(report));
}

int run_kernels_list(const std::string& json_path) {
  Json kernels = Json::array();
  for (KernelKind kind : builtin_kernel_kinds()) {
    KernelSpec k;
    k.kind = kind;
    Kernel K = build(k);
    kernels.push_back({{"name", to_string(kind)}, {"defaults", to_json(k)}, {"metadata", to_json(K.meta())}});
  }
  emit(envelope("kernels list", Json::object(), kernels, "ok"), json_path);
  return kOk;
}

int run_kernels_validate(const KernelArgs& ka, double theta, int m, int samples, unsigned seed, const QuadArgs& qa,
                         const std::string& json_path) {
  Kernel K = build(ka.spec());
  HypothesisReport r = validate_hypotheses(K, theta, m, samples, qa.q, seed);
  Json cfg{{"kernel", to_json(ka.spec())}, {"theta", theta}, {"m", m}, {"samples", samples}, {"seed", seed},
           {"quad", to_json(qa.q)}};
  Json result = to_json(r);
  result["metadata"] = to_json(K.meta());
  emit(envelope("kernels validate", cfg, result, r.pass ? "ok" : "hypotheses failed"), json_path);
  return r.pass ? kOk : kValidation;
}

int run_eval(const KernelArgs& ka, const std::string& func, std::optional<double> theta, const std::string& x_src,
             const std::string& tau_src, int m, bool direct, bool check, const QuadArgs& qa, const std::string& json_path) {
  Kernel K = build(ka.spec());
  ScalarField u = parse_function(func, ka.n, theta);
  Point x = split_numbers(x_src, "--x");
  CutoffSpec tau = CutoffSpec::parse(tau_src);
  Decomposition d = decompose(u, K, tau, m, x, qa.q, check);
  Json cfg{{"kernel", to_json(ka.spec())}, {"func", func}, {"x", nums(x)}, {"tau", tau.str()}, {"m", m},
           {"direct", direct}, {"check_hypotheses", check}, {"quad", to_json(qa.q)}};
  cfg["theta"] = theta ? Json(*theta) : Json(nullptr);
  Json result = to_json(d);
  if (direct) result["direct"] = to_json(direct_apply(apply_cutoff(u, tau), K, x, qa.q));
  const bool ok = d.converged();
  emit(envelope("eval", cfg, result, ok ? "ok" : "quadrature not converged"), json_path);
  return ok ? kOk : kNumerical;
}

int run_converge(const KernelArgs& ka, const std::string& func, std::optional<double> theta, int m,
                 const std::string& schedule_src, const std::string& grid_src, double tol, bool check,
                 const QuadArgs& qa, const Output& out) {
  Kernel K = build(ka.spec());
  ScalarField u = parse_function(func, ka.n, theta);
  std::vector<double> schedule = split_numbers(schedule_src, "--R-schedule");
  std::vector<Point> grid;
  if (grid_src.empty()) {
    grid = unit_ball_grid(ka.n);
  } else {
    if (ka.n != 1) throw ValidationError("--grid lists 1-D points; use the default grid for n > 1");
    for (double v : split_numbers(grid_src, "--grid")) grid.push_back({v});
  }
  LimitOptions opts;
  opts.tol = tol;
  opts.check_hypotheses = check;
  LimitReport r = limit_driver(u, K, m, grid, schedule, qa.q, opts);
  Json cfg{{"kernel", to_json(ka.spec())}, {"func", func}, {"m", m}, {"R_schedule", nums(schedule)},
           {"grid", points(grid)}, {"tol", tol}, {"check_hypotheses", check}, {"quad", to_json(qa.q)}};
  cfg["theta"] = theta ? Json(*theta) : Json(nullptr);
  emit(envelope("converge", cfg, to_json(r), r.converged ? "ok" : "not converged"), out.json);
  if (!out.csv.empty()) write_text(out.csv, limit_csv(r));
  return r.converged ? kOk : kNumerical;
}

int run_counterexample(double k, double R, int grid_n, const QuadArgs& qa, const Output& out) {
  if (grid_n < 1) throw ValidationError("--grid must be positive");
  std::vector<double> xs;
  for (int i = 0; i < grid_n; ++i) xs.push_back(grid_n == 1 ? 0.0 : -0.5 + static_cast<double>(i) / (grid_n - 1));
  Json rows = Json::array();
  std::string csv = "x,closed_form,quadrature,err_est,rel_diff,A_truncated,f_k\n";
  bool ok = true;
  for (double x : xs) {
    CounterexampleCase c{k, R, x};
    c.validate();
    const double closed = counterexample_truncated(k, R, x);
    QuadResult q = counterexample_quadrature(k, R, x, qa.q);
    const double rel = std::abs(q.value - closed) / std::max(std::abs(closed), 1e-300);
    const double fk = counterexample_fk(k, x);
    ok = ok && q.converged;
    rows.push_back({{"x", x},
                    {"closed_form", num(closed)},
                    {"quadrature", to_json(q)},
                    {"rel_diff", num(rel)},
                    {"A_truncated", num(-closed)},
                    {"f_k", num(fk)}});
    csv += format_number(x) + "," + format_number(closed) + "," + format_number(q.value) + "," +
           format_number(q.err_est) + "," + format_number(rel) + "," + format_number(-closed) + "," +
           format_number(fk) + "\n";
  }
  Json cfg{{"k", k}, {"R", R}, {"grid", grid_n}, {"quad", to_json(qa.q)}};
  emit(envelope("counterexample", cfg, {{"rows", rows}}, ok ? "ok" : "quadrature not converged"), out.json);
  if (!out.csv.empty()) write_text(out.csv, csv);
  return ok ? kOk : kNumerical;
}

int run_dirichlet(bool family, const std::string& path, const Output& out) {
  DirichletRun run = DirichletRun::from(Config::load(path));
  if (!out.json.empty()) run.json_path = out.json;
  if (!out.csv.empty()) run.csv_path = out.csv;
  Json result;
  std::string csv, status = "ok";
  int code = kOk;
  if (family) {
    SolutionFamily f = solution_family(run.kernel, run.m, run.N, run.quad, run.options);
    result = to_json(f);
    csv = family_csv(f);
    bool members_ok = true;
    for (const DirichletSolution& s : f.members) members_ok = members_ok && s.ok;
    if (!f.independent || !members_ok) status = "family degenerate or unverified", code = kNumerical;
  } else {
    DirichletProblem pb;
    pb.kernel = run.kernel;
    pb.f = parse_function(run.f, run.kernel.dim);
    pb.g = parse_function(run.g, run.kernel.dim);
    pb.m = run.m;
    pb.N = run.N;
    DirichletSolution s = run.m == 0 ? solve_standard(pb, run.quad, run.options) : solve_generalized(pb, run.quad, run.options);
    result = to_json(s);
    result["u_at_0"] = num(s.extension(Point(static_cast<std::size_t>(run.kernel.dim), 0.0)));
    csv = dirichlet_csv(s);
    if (!s.ok) status = "residual above tolerance", code = kNumerical;
  }
  write_text(run.json_path, dump(envelope(family ? "dirichlet family" : "dirichlet solve", to_json(run), result, status)));
  write_text(run.csv_path, csv);
  return code;
}

int run_viscosity(const std::string& path, const std::string& json_override) {
  ViscosityRun run = ViscosityRun::from(Config::load(path));
  if (!json_override.empty()) run.json_path = json_override;
  Kernel K = build(run.kernel);
  ScalarField u = parse_function(run.u, run.kernel.dim);
  ScalarField f = parse_function(run.f, run.kernel.dim);
  ViscosityReport r = check_viscosity(u, K, f, run.m, run.R_schedule, run.battery(u), run.quad, run.options);
  write_text(run.json_path, dump(envelope("viscosity check", to_json(run), to_json(r), r.verdict)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal operators on functions of polynomial growth"};
  app.require_subcommand(1);

  KernelArgs ka;
  QuadArgs qa;
  Output out;

  CLI::App* kernels = app.add_subcommand("kernels", "kernel inspection");
  kernels->require_subcommand(1);
  CLI::App* klist = kernels->add_subcommand("list", "metadata of the built-in kernels");
  klist->add_option("--json", out.json, "write the JSON report here instead of stdout");
  CLI::App* kval = kernels->add_subcommand("validate", "sampled hypothesis checks");
  double theta_v = 2.0;
  int m_v = 0, samples = 8;
  unsigned seed = 1;
  ka.add(kval);
  qa.add(kval);
  kval->add_option("--theta", theta_v, "regularity exponent")->capture_default_str();
  kval->add_option("--m", m_v, "Taylor order")->capture_default_str();
  kval->add_option("--samples", samples, "sample points in the unit ball")->capture_default_str();
  kval->add_option("--seed", seed, "seed of the sample design")->capture_default_str();
  kval->add_option("--json", out.json, "write the JSON report here instead of stdout");

  std::string func = "bump", x_src = "0", tau_src = "sharp:8", schedule_src = "4,8,16,32,64,128,256,512", grid_src;
  std::optional<double> theta;
  int m = 0;
  bool direct = false, no_check = false;
  double tol = 1e-6;

  CLI::App* eval = app.add_subcommand("eval", "cut-off decomposition at one point");
  ka.add(eval);
  qa.add(eval);
  eval->add_option("--func", func, "expression or builtin(name=value)")->capture_default_str();
  eval->add_option("--theta", theta, "declared regularity of the function");
  eval->add_option("--x", x_src, "evaluation point, comma separated")->capture_default_str();
  eval->add_option("--tau", tau_src, "sharp:R or smooth:R,w")->capture_default_str();
  eval->add_option("--m", m, "Taylor order")->capture_default_str();
  eval->add_flag("--direct", direct, "also integrate A(tau u)(x) directly");
  eval->add_flag("--no-check", no_check, "skip the hypothesis checks");
  out.add(eval, false);

  CLI::App* conv = app.add_subcommand("converge", "limit in R of the decomposition on a grid");
  ka.add(conv);
  qa.add(conv);
  conv->add_option("--func", func, "expression or builtin(name=value)")->capture_default_str();
  conv->add_option("--theta", theta, "declared regularity of the function");
  conv->add_option("--m", m, "Taylor order")->capture_default_str();
  conv->add_option("--R-schedule", schedule_src, "increasing radii, comma separated")->capture_default_str();
  conv->add_option("--grid", grid_src, "1-D grid points, comma separated (default: unit-ball grid)");
  conv->add_option("--tol", tol, "convergence tolerance")->capture_default_str();
  conv->add_flag("--no-check", no_check, "skip the hypothesis checks");
  out.add(conv, true);

  double k = 10.0, R = 100.0;
  int grid_n = 3;
  CLI::App* cex = app.add_subcommand("counterexample", "closed form against quadrature for the shifted family");
  qa.add(cex);
  cex->add_option("--k", k, "family index")->capture_default_str();
  cex->add_option("--R", R, "cut-off radius")->capture_default_str();
  cex->add_option("--grid", grid_n, "number of points in [-1/2, 1/2]")->capture_default_str();
  out.add(cex, true);

  std::string config_path;
  CLI::App* dir = app.add_subcommand("dirichlet", "Dirichlet problem on (-1, 1)");
  dir->require_subcommand(1);
  CLI::App* dsolve = dir->add_subcommand("solve", "solve one problem");
  CLI::App* dfam = dir->add_subcommand("family", "solutions with polynomial exterior data");
  for (CLI::App* sub : {dsolve, dfam}) {
    sub->add_option("--config", config_path, "key-value problem file")->required();
    out.add(sub, true);
  }

  CLI::App* vis = app.add_subcommand("viscosity", "viscosity inequalities");
  vis->require_subcommand(1);
  CLI::App* vcheck = vis->add_subcommand("check", "paraboloid test battery");
  vcheck->add_option("--config", config_path, "key-value problem file")->required();
  vcheck->add_option("--json", out.json, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*klist) return run_kernels_list(out.json);
    if (*kval) return run_kernels_validate(ka, theta_v, m_v, samples, seed, qa, out.json);
    if (*eval) return run_eval(ka, func, theta, x_src, tau_src, m, direct, !no_check, qa, out.json);
    if (*conv) return run_converge(ka, func, theta, m, schedule_src, grid_src, tol, !no_check, qa, out);
    if (*cex) return run_counterexample(k, R, grid_n, qa, out);
    if (*dsolve) return run_dirichlet(false, config_path, out);
    if (*dfam) return run_dirichlet(true, config_path, out);
    if (*vcheck) return run_viscosity(config_path, out.json);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}
