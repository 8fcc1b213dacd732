#include <cmath>
#include <limits>
#include <string>

#include "doctest.h"
#include "nlop/report.hpp"

using namespace nlop;

TEST_CASE("key-value parsing") {
  Config c = Config::parse(R"(
# comment
top = 3
[kernel]
name = frac_lap   # trailing comment
s = 0.5
normalized = true
[problem]
f = "x1 # not a comment"
R_schedule = [8, 16, 32.5]
)");
  CHECK(c.integer("top", 0) == 3);
  CHECK(c.text("kernel.name") == "frac_lap");
  CHECK(c.number("kernel.s") == 0.5);
  CHECK(c.boolean("kernel.normalized", false));
  CHECK(c.text("problem.f") == "x1 # not a comment");
  CHECK(c.numbers("problem.R_schedule") == std::vector<double>{8, 16, 32.5});
  CHECK(c.number("missing.key", 7.0) == 7.0);
  CHECK(c.section("kernel").size() == 3);
  CHECK_THROWS_AS(c.text("missing.key"), ValidationError);
  CHECK_THROWS_AS(c.number("kernel.name"), ValidationError);
  CHECK_THROWS_AS(c.boolean("kernel.s", false), ValidationError);
}

TEST_CASE("malformed files are rejected") {
  CHECK_THROWS_AS(Config::parse("a = 1\na = 2"), ValidationError);
  CHECK_THROWS_AS(Config::parse("[open\nx = 1"), ValidationError);
  CHECK_THROWS_AS(Config::parse("novalue ="), ValidationError);
  CHECK_THROWS_AS(Config::parse("just text"), ValidationError);
  CHECK_THROWS_AS(Config::parse("s = \"unterminated"), ValidationError);
  CHECK_THROWS_AS(Config::parse("l = [1, 2"), ValidationError);
  CHECK_THROWS_AS(Config::parse("l = [1, x]").numbers("l"), ValidationError);
  CHECK_THROWS_AS(Config::load("/nonexistent/dir/file.toml"), ValidationError);
}

TEST_CASE("run configs validate and reject unknown keys") {
  const std::string base = "[kernel]\nname = frac_lap\ns = 0.5\nnormalized = true\n[problem]\nf = 1\ng = 0\nN = 40\n";
  DirichletRun d = DirichletRun::from(Config::parse(base));
  CHECK(d.kernel.kind == KernelKind::frac_lap);
  CHECK(d.N == 40);
  CHECK(d.options.far_field == Interpolation::cubic);
  CHECK(d.quad.abs_tol == QuadConfig{}.abs_tol);
  CHECK_THROWS_AS(DirichletRun::from(Config::parse(base + "typo = 1\n")), ValidationError);
  CHECK_THROWS_AS(DirichletRun::from(Config::parse(base + "[solver]\nfar_field = quintic\n")), ValidationError);
  CHECK_THROWS_AS(DirichletRun::from(Config::parse(base + "[kernel2]\nname = gauss\n")), ValidationError);
  CHECK_THROWS_AS(DirichletRun::from(Config::parse(base + "[quad]\nabs_tol = -1\n")), ValidationError);
  CHECK_THROWS_AS(DirichletRun::from(Config::parse(base + "[kernel]\ns = 0.75\n")), ValidationError);
  // Unknown kernel keys are caught by the kernel spec itself.
  CHECK_THROWS_AS(DirichletRun::from(Config::parse("[kernel]\nname = frac_lap\nsigma = 1\n")), ValidationError);

  const std::string vis =
      "[kernel]\nname = frac_lap\nnormalized = true\n[problem]\nu = \"getoor(s=0.5)\"\nf = 1\n"
      "R_schedule = [8, 32]\n[tests]\npoints = [-0.5, 0, 0.5]\nbelow = [-4]\nabove = [-0.5]\n";
  ViscosityRun v = ViscosityRun::from(Config::parse(vis));
  CHECK(v.points.size() == 3);
  CHECK(v.battery(parse_function(v.u, 1)).size() == 6);
  CHECK_THROWS_AS(ViscosityRun::from(Config::parse(vis + "[options]\nglue = 1\n")), ValidationError);
  CHECK_THROWS_AS(ViscosityRun::from(Config::parse("[kernel]\nname = frac_lap\n[problem]\nf = 1\n")), ValidationError);
}

TEST_CASE("json output is sorted and stable") {
  Json j = envelope("test", {{"zeta", 1}, {"alpha", 2}}, {{"b", num(0.1)}, {"a", nums({1.0, 2.5})}}, "ok");
  const std::string s = dump(j);
  CHECK(s.find("\"alpha\"") < s.find("\"zeta\""));
  CHECK(s.find("\"command\"") < s.find("\"config\""));
  CHECK(s.find("\"config\"") < s.find("\"result\""));
  CHECK(s.back() == '\n');
  CHECK(dump(Json::parse(s)) == s);
  // Round trip of doubles is exact.
  CHECK(Json::parse(dump(num(0.1))).get<double>() == 0.1);
  CHECK(num(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(num(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(num(std::nan("")) == "nan");
}

TEST_CASE("polynomial coefficients in graded-lex order") {
  Polynomial P(2, 2);
  P.set(MultiIndex{1, 0}, 3.0);
  P.set(MultiIndex{0, 2}, -1.0);
  Json j = to_json(P);
  REQUIRE(j["basis"].size() == 6);
  CHECK(j["basis"][1] == MultiIndex{1, 0}.str());
  CHECK(j["basis"][2] == MultiIndex{0, 1}.str());
  CHECK(j["coefficients"] == Json::array({0.0, 3.0, 0.0, 0.0, 0.0, -1.0}));
}

TEST_CASE("csv writers") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.5e-12) == "-2.5e-12");
  CHECK(format_number(3.0) == "3");

  LimitReport r;
  r.grid = {{-0.5}, {0.5}};
  r.R_schedule = {8, 16};
  r.fR_values = {{1.0, 2.0}, {1.5, 2.5}};
  r.f_limit = {1.75, 2.75};
  CHECK(limit_csv(r) == "x1,f_R=8,f_R=16,f_u\n-0.5,1,1.5,1.75\n0.5,2,2.5,2.75\n");

  DirichletSolution s;
  s.nodes = {-0.5, 0.5};
  s.values = {0.25, 0.75};
  CHECK(dirichlet_csv(s) == "node,value\n-0.5,0.25\n0.5,0.75\n");
  SolutionFamily f;
  f.members = {s, s};
  CHECK(family_csv(f) == "node,u0,u1\n-0.5,0.25,0.25\n0.5,0.75,0.75\n");
}

TEST_CASE("reports carry their fields") {
  QuadConfig cfg;
  KernelSpec k;
  k.kind = KernelKind::frac_lap;
  k.s = 0.5;
  Kernel K = build(k);
  Decomposition d = decompose(builtin("bump", {}), K, CutoffSpec::sharp(8), 1, Point{0.25}, cfg);
  Json j = to_json(d);
  CHECK(j["m"] == 1);
  CHECK(j["total"].get<double>() == d.total);
  CHECK(j["P"]["coefficients"].size() == 1);
  CHECK(to_json(k)["name"] == "frac_lap");
  CHECK(to_json(K.meta())["admissible_theta"] == K.meta().admissible_theta.str());
  CHECK(to_json(cfg)["tail_policy"] == "growth_certified");
}
