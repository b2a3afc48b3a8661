#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "popde/discretize.hpp"
#include "popde/errors.hpp"
#include "popde/problems.hpp"

using namespace popde;

namespace {

// symbol-space evaluation helper: values[i] indexed by SymbolTable layout
double eval_equation(const Equation& eq, const std::vector<double>& sym_values, double x,
                     double y) {
  return eq.lhs.evaluate(sym_values) - (eq.rhs ? eq.rhs(x, y) : 0.0);
}

}  // namespace

TEST_CASE("preset lookup") {
  for (const auto& name : preset_names()) CHECK(preset(name).name == name);
  CHECK_THROWS_AS(preset("no_such_problem"), LookupError);
}

TEST_CASE("linear_ode preset carries the paper data") {
  DiffProblem p = preset("linear_ode");
  CHECK(p.domain.dims == 1);
  CHECK(p.domain.x_min == 0.0);
  CHECK(p.domain.x_max == 1.0);
  CHECK(p.unknowns == 1);
  REQUIRE(p.boundary.size() == 2);
  const double e2 = std::exp(2.0);
  CHECK(p.boundary[0].rhs(0.0, 0.0) == doctest::Approx(-2.0 * e2));
  CHECK(p.boundary[1].rhs(1.0, 0.0) == doctest::Approx(-2.0));
  CHECK(p.objective.kind == ObjectiveKind::neg_sum);
}

TEST_CASE("elliptic_bifur preset bounds") {
  DiffProblem p = preset("elliptic_bifur");
  CHECK(p.lbd == std::vector<double>{0.0});
  CHECK(p.ubd == std::vector<double>{1.0});
  CHECK(p.domain.dims == 2);
}

TEST_CASE("double_integrator preset bounds") {
  DiffProblem p = preset("double_integrator");
  CHECK(p.lbd == std::vector<double>{-1.0, -1.0, -1.0});
  CHECK(p.ubd == std::vector<double>{10.0, 10.0, 1.0});
  CHECK(p.objective.kind == ObjectiveKind::free_time);
  REQUIRE(p.scalar_names.size() == 1);
  CHECK(p.scalar_names[0] == "T");
}

TEST_CASE("reaction_diffusion midpoint objective and Neumann data") {
  DiffProblem p = preset("reaction_diffusion");
  CHECK(p.objective.kind == ObjectiveKind::midpoint);
  CHECK(p.objective.midpoint_unknown == 0);
  CHECK(p.unknowns == 2);
  CHECK(p.boundary.size() == 4);
  CHECK(p.ubd == std::vector<double>{14.0, 14.0});
}

TEST_CASE("analytic solutions satisfy the preset equations symbolically") {
  const double e2 = std::exp(2.0);

  SUBCASE("linear ODE") {
    DiffProblem p = preset("linear_ode");
    SymbolTable st = p.symbols();
    for (double x : {0.0, 0.3, 0.72, 1.0}) {
      double u = e2 * std::exp(-2.0 * x);
      std::vector<double> sym(st.count(), 0.0);
      sym[st.u(0)] = u;
      sym[st.ux(0)] = -2.0 * u;
      sym[st.uxx(0)] = 4.0 * u;
      sym[st.x()] = x;
      for (const auto& eq : p.interior)
        CHECK(std::fabs(eval_equation(eq, sym, x, 0.0)) <= 1e-10);
    }
    // boundary rows at their own faces
    std::vector<double> sym(st.count(), 0.0);
    sym[st.u(0)] = e2;
    sym[st.ux(0)] = -2.0 * e2;
    CHECK(std::fabs(p.boundary[0].lhs.evaluate(sym) - p.boundary[0].rhs(0, 0)) <= 1e-10);
    sym[st.u(0)] = 1.0;
    sym[st.ux(0)] = -2.0;
    CHECK(std::fabs(p.boundary[1].lhs.evaluate(sym) - p.boundary[1].rhs(1, 0)) <= 1e-10);
  }

  SUBCASE("linear PDE") {
    DiffProblem p = preset("linear_pde");
    SymbolTable st = p.symbols();
    for (double x : {0.0, 0.4, 1.0})
      for (double y : {0.0, 0.6, 1.0}) {
        double u = std::exp(x + y);
        std::vector<double> sym(st.count(), 0.0);
        sym[st.u(0)] = u;
        sym[st.uxx(0)] = u;
        sym[st.uyy(0)] = u;
        sym[st.x()] = x;
        sym[st.y()] = y;
        for (const auto& eq : p.interior)
          CHECK(std::fabs(eval_equation(eq, sym, x, y)) <= 1e-10);
        for (const auto& eq : p.boundary)
          CHECK(std::fabs(eq.lhs.evaluate(sym) - eq.rhs(x, y)) <= 1e-10);
      }
  }
}

TEST_CASE("shift_to_nonnegative") {
  SUBCASE("identity when lbd = 0") {
    auto [q, rep] = shift_to_nonnegative(preset("linear_ode"));
    CHECK(rep.is_identity());
    CHECK(q.lbd[0] == 0.0);
  }

  SUBCASE("double integrator states move to [0, 11]") {
    auto [q, rep] = shift_to_nonnegative(preset("double_integrator"));
    CHECK(rep.shift == std::vector<double>{-1.0, -1.0, -1.0});
    CHECK(q.lbd == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(q.ubd == std::vector<double>{11.0, 11.0, 2.0});
  }

  SUBCASE("substitution rewrites the equations") {
    // u' = u with lbd = -2 becomes u~' = u~ - 2
    DiffProblem p;
    p.name = "toy";
    p.domain = {1, 0.0, 1.0};
    p.unknowns = 1;
    p.lbd = {-2.0};
    p.ubd = {3.0};
    SymbolTable st = p.symbols();
    int ns = st.count();
    p.interior.push_back({Polynomial::variable(ns, st.ux(0)) - Polynomial::variable(ns, st.u(0)),
                          Sampler{}, EqScheme::central, "toy"});
    p.objective.kind = ObjectiveKind::neg_sum;
    auto [q, rep] = shift_to_nonnegative(p);
    CHECK(rep.shift == std::vector<double>{-2.0});
    const Polynomial& h = q.interior[0].lhs;
    CHECK(h.coefficient(Monomial::var(st.ux(0))) == doctest::Approx(1.0));
    CHECK(h.coefficient(Monomial::var(st.u(0))) == doctest::Approx(-1.0));
    CHECK(h.constant_term() == doctest::Approx(2.0));
  }
}

TEST_CASE("scale_domain_to_unit") {
  SUBCASE("identity on the unit domain") {
    auto [q, rep] = scale_domain_to_unit(preset("linear_ode"));
    CHECK(rep.is_identity());
  }

  SUBCASE("reaction-diffusion [0,5]: second derivative picks up 1/25") {
    DiffProblem p = preset("reaction_diffusion");
    SymbolTable st = p.symbols();
    double cxx_before = p.interior[0].lhs.coefficient(Monomial::var(st.uxx(0)));
    auto [q, rep] = scale_domain_to_unit(p);
    CHECK(rep.lx == doctest::Approx(5.0));
    double cxx_after = q.interior[0].lhs.coefficient(Monomial::var(st.uxx(0)));
    CHECK(cxx_after == doctest::Approx(cxx_before / 25.0));
  }

  SUBCASE("production OCP [0,4]: dynamics gain a factor 4 after normalization") {
    DiffProblem p = preset("prod_consumption");
    SymbolTable st = p.symbols();
    auto [q, rep] = scale_domain_to_unit(p);
    CHECK(rep.lx == doctest::Approx(4.0));
    // u0_x/4 - u1*u0 = 0 is the same dynamics as u0_x = 4*u1*u0
    const Polynomial& h = q.interior[0].lhs;
    double c_dx = h.coefficient(Monomial::var(st.ux(0)));
    double c_bil = h.coefficient(Monomial::var(st.u(0)) * Monomial::var(st.u(1)));
    CHECK(c_bil / c_dx == doctest::Approx(-4.0));
    CHECK(q.measure_scale == doctest::Approx(4.0));
  }

  SUBCASE("round trip: scaled equations agree with originals pointwise") {
    DiffProblem p = preset("reaction_diffusion");
    auto [q, rep] = scale_domain_to_unit(p);
    SymbolTable st = p.symbols();
    auto u = [](double x) { return std::sin(x) + 2.0; };
    auto v = [](double x) { return std::cos(0.7 * x) + 2.0; };
    for (double x : {0.8, 2.0, 4.3}) {
      std::vector<double> sym(st.count(), 0.0);
      sym[st.u(0)] = u(x);
      sym[st.ux(0)] = std::cos(x);
      sym[st.uxx(0)] = -std::sin(x);
      sym[st.u(1)] = v(x);
      sym[st.ux(1)] = -0.7 * std::sin(0.7 * x);
      sym[st.uxx(1)] = -0.49 * std::cos(0.7 * x);
      sym[st.x()] = x;

      double s = rep.to_unit_x(x);
      std::vector<double> sym_scaled = sym;
      sym_scaled[st.ux(0)] = sym[st.ux(0)] * rep.lx;
      sym_scaled[st.uxx(0)] = sym[st.uxx(0)] * rep.lx * rep.lx;
      sym_scaled[st.ux(1)] = sym[st.ux(1)] * rep.lx;
      sym_scaled[st.uxx(1)] = sym[st.uxx(1)] * rep.lx * rep.lx;
      sym_scaled[st.x()] = s;

      for (std::size_t e = 0; e < p.interior.size(); ++e) {
        double orig = p.interior[e].lhs.evaluate(sym) - p.interior[e].rhs(x, 0.0);
        double scal = q.interior[e].lhs.evaluate(sym_scaled) - q.interior[e].rhs(s, 0.0);
        CHECK(std::fabs(orig - scal) <= 1e-12 * std::max(1.0, std::fabs(orig)));
      }
    }
  }
}

TEST_CASE("problem files reproduce the linear ODE preset") {
  const char* text = R"(
# linear second-order ODE with Neumann data
name = file_ode
dims = 1
domain_x = [0, 1]
unknowns = 1
bounds u0 = [0, 10]

interior {
  eq = u0_xx + 3*u0_x + 2*u0
  rhs = 0
}

boundary left {
  eq = u0_x
  rhs = -2*exp(2)
}

boundary right {
  eq = u0_x
  rhs = -2
}

objective {
  kind = neg_sum
}
)";
  DiffProblem file_p = parse_problem_text(text, "inline");
  DiffProblem ref = preset("linear_ode");

  Grid g = Grid::make(ref.domain, 11);
  POPInstance a = transcribe(file_p, g);
  POPInstance b = transcribe(ref, g);
  REQUIRE(a.eq_constraints.size() == b.eq_constraints.size());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> x(a.nvars);
  for (auto& v : x) v = d(rng);
  for (std::size_t r = 0; r < a.eq_constraints.size(); ++r) {
    double va = a.eq_constraints[r].evaluate(x);
    double vb = b.eq_constraints[r].evaluate(x);
    CHECK(std::fabs(va - vb) <= 1e-9 * std::max(1.0, std::fabs(vb)));
  }
}

TEST_CASE("expression samplers") {
  Sampler f = parse_sampler_expression("3*exp(x+y)");
  CHECK(f(0.5, 0.25) == doctest::Approx(3.0 * std::exp(0.75)));
  Sampler g = parse_sampler_expression("sin(pi*x) - 2^2");
  CHECK(g(0.5, 0.0) == doctest::Approx(1.0 - 4.0));
  CHECK_THROWS_AS(parse_sampler_expression("nope(x)"), LookupError);
}

TEST_CASE("grid and grid function validation") {
  Domain d{1, 0.0, 1.0};
  CHECK_THROWS_AS(Grid::make(d, 2), ParameterError);
  Grid g = Grid::make(d, 5);
  CHECK(g.dx() == doctest::Approx(0.25));
  CHECK(g.x(4) == doctest::Approx(1.0));
  GridFunction f = GridFunction::zeros(g, 1);
  f.values[0][2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(f.validate(), NumericError);
}
