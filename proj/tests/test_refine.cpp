#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "popde/conic.hpp"
#include "popde/discretize.hpp"
#include "popde/errors.hpp"
#include "popde/problems.hpp"
#include "popde/refine.hpp"
#include "popde/relaxation.hpp"

using namespace popde;

namespace {

// SDP warm start + polish on a preset, the Method-1 chain used everywhere
RefineResult run_chain(const DiffProblem& p, const Grid& g, int w, POPInstance* pop_out,
                       PresolveReport* rep_out) {
  POPInstance pop = transcribe(p, g);
  auto [red, rep] = presolve_fixed(pop);
  CliqueSet cs = csp_cliques(red);
  Relaxation rel = build_relaxation(red, cs, w);
  ConicSolution sol = solve(rel.sdp);
  std::vector<double> x0 = rep.expand(extract_point(sol.y, rel.index));
  if (pop_out) *pop_out = pop;
  if (rep_out) *rep_out = rep;
  return refine(pop, x0);
}

}  // namespace

TEST_CASE("linear ODE: SDP warm start polishes to the analytic solution") {
  DiffProblem p = preset("linear_ode");
  Grid g = Grid::make(p.domain, 101);
  RefineResult res = run_chain(p, g, 1, nullptr, nullptr);
  CHECK(res.converged);
  CHECK(res.max_eq_violation <= 1e-8);
  double e2 = std::exp(2.0), err = 0.0;
  for (int i = 0; i < 101; ++i)
    err = std::max(err, std::fabs(res.x[i] - e2 * std::exp(-2.0 * g.x(i))));
  CHECK(err <= 5e-3);
}

TEST_CASE("a feasible point of a square system returns unchanged") {
  DiffProblem p = preset("linear_ode");
  Grid g = Grid::make(p.domain, 41);
  POPInstance pop = transcribe(p, g);
  RefineResult first = run_chain(p, g, 1, nullptr, nullptr);
  REQUIRE(first.converged);
  RefineResult again = refine(pop, first.x);
  CHECK(again.iterations == 0);
  CHECK(again.converged);
  CHECK(again.max_eq_violation == doctest::Approx(first.max_eq_violation).epsilon(1e-9));
  CHECK(again.x == first.x);
}

TEST_CASE("inconsistent equalities settle at the least-squares point") {
  POPInstance pop;
  pop.nvars = 1;
  pop.objective = Polynomial(1);
  Polynomial h0 = Polynomial::variable(1, 0);
  Polynomial h1 = Polynomial::variable(1, 0) - Polynomial::constant(1, 1.0);
  pop.eq_constraints = {h0, h1};
  pop.lo = {-5.0};
  pop.hi = {5.0};
  RefineResult res = refine(pop, {0.2});
  CHECK_FALSE(res.converged);
  CHECK(res.x[0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(res.max_eq_violation == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("refinement does not worsen feasibility on converged runs") {
  DiffProblem p = preset("linear_ode");
  for (int n : {21, 51}) {
    Grid g = Grid::make(p.domain, n);
    POPInstance pop = transcribe(p, g);
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> d(0.0, 8.0);
    std::vector<double> x0(pop.nvars);
    for (auto& v : x0) v = d(rng);
    double viol0 = 0.0;
    for (const auto& h : pop.eq_constraints)
      viol0 = std::max(viol0, std::fabs(h.evaluate(x0)));
    RefineResult res = refine(pop, x0);
    CHECK(res.converged);
    CHECK(res.max_eq_violation <= viol0);
  }
}

TEST_CASE("bounds hold exactly and the elliptic run lands on the positive branch") {
  DiffProblem p = preset("elliptic_bifur");
  Grid g = Grid::make(p.domain, 13, 13);
  POPInstance pop;
  PresolveReport rep;
  RefineResult res = run_chain(p, g, 2, &pop, &rep);
  CHECK(res.converged);
  CHECK(res.max_eq_violation <= 1e-9);
  double mx = 0.0, mn = 1.0;
  for (double v : res.x) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  CHECK(mn >= 0.0);
  CHECK(mx <= 1.0);
  // nontrivial branch, far from the zero solution (discrete positive
  // solution peaks at 0.4328 on this grid)
  CHECK(mx >= 0.4);
  CHECK(mx == doctest::Approx(0.432807).epsilon(1e-3));

  // sandwich: the refined objective cannot undercut the SDP bound
  POPInstance red = presolve_fixed(pop).first;
  CliqueSet cs = csp_cliques(red);
  Relaxation rel = build_relaxation(red, cs, 2);
  ConicSolution sol = solve(rel.sdp);
  double bound = sol.dual_objective - rel.perturb_bound_correction;
  std::vector<double> xr(res.x.begin(), res.x.end());
  CHECK(bound <= pop.objective.evaluate(xr) + 1e-6);
}

TEST_CASE("jacobian check: analytic derivatives match finite differences") {
  DiffProblem p = preset("elliptic_bifur");
  Grid g = Grid::make(p.domain, 6, 6);
  POPInstance pop = transcribe(p, g);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> d(0.1, 0.9);
  std::vector<double> x(pop.nvars);
  for (auto& v : x) v = d(rng);
  CHECK(constraint_jacobian_check(pop, x) <= 1e-5);

  // affine constraints are matched to finite-difference exactness
  DiffProblem lin = preset("linear_ode");
  Grid gl = Grid::make(lin.domain, 11);
  POPInstance lpop = transcribe(lin, gl);
  std::vector<double> xl(lpop.nvars, 1.0);
  CHECK(constraint_jacobian_check(lpop, xl) <= 1e-9);

  // cubic: d/du (u^3) at u = 2 is 12
  POPInstance cub;
  cub.nvars = 1;
  cub.objective = Polynomial(1);
  Polynomial h = Polynomial::variable(1, 0).pow(3);
  cub.eq_constraints = {h};
  cub.lo = {-5.0};
  cub.hi = {5.0};
  CHECK(h.derivative(0).evaluate(std::vector<double>{2.0}) == doctest::Approx(12.0));
  CHECK(constraint_jacobian_check(cub, {2.0}) <= 1e-6);
}

TEST_CASE("start points are clipped into the box") {
  POPInstance pop;
  pop.nvars = 1;
  pop.objective = Polynomial::variable(1, 0);
  Polynomial h = Polynomial::variable(1, 0) - Polynomial::constant(1, 0.5);
  pop.eq_constraints = {h};
  pop.lo = {0.0};
  pop.hi = {1.0};
  RefineResult res = refine(pop, {7.0});
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(0.5).epsilon(1e-8));
}
