#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "popde/discretize.hpp"
#include "popde/errors.hpp"
#include "popde/problems.hpp"
#include "popde/relaxation.hpp"

using namespace popde;

namespace {

POPInstance box_pop(int nvars, double lo, double hi) {
  POPInstance pop;
  pop.nvars = nvars;
  pop.objective = Polynomial(nvars);
  pop.lo.assign(nvars, lo);
  pop.hi.assign(nvars, hi);
  return pop;
}

// independent oracle: maximal cliques of an explicit graph by brute force
std::vector<std::vector<int>> brute_force_max_cliques(int n,
                                                      const std::set<std::pair<int, int>>& edges) {
  auto connected = [&](int a, int b) {
    return edges.count({std::min(a, b), std::max(a, b)}) > 0;
  };
  std::vector<std::vector<int>> cliques;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> vs;
    for (int v = 0; v < n; ++v)
      if (mask & (1 << v)) vs.push_back(v);
    bool is_clique = true;
    for (std::size_t a = 0; a < vs.size() && is_clique; ++a)
      for (std::size_t b = a + 1; b < vs.size() && is_clique; ++b)
        is_clique = connected(vs[a], vs[b]);
    if (!is_clique) continue;
    bool maximal = true;
    for (int v = 0; v < n && maximal; ++v) {
      if (mask & (1 << v)) continue;
      bool extends = true;
      for (int u : vs) extends = extends && connected(u, v);
      if (extends) maximal = false;
    }
    if (maximal) cliques.push_back(vs);
  }
  std::sort(cliques.begin(), cliques.end());
  return cliques;
}

}  // namespace

TEST_CASE("banded chain yields consecutive-window cliques") {
  // three-point stencil chain on 5 nodes, interior constraints only
  POPInstance pop = box_pop(5, 0.0, 1.0);
  for (int i = 1; i <= 3; ++i) {
    Polynomial h(5);
    h.add_term(Monomial::var(i - 1), 1.0);
    h.add_term(Monomial::var(i), -2.0);
    h.add_term(Monomial::var(i + 1), 1.0);
    pop.eq_constraints.push_back(h);
  }
  CliqueSet cs = csp_cliques(pop);
  CHECK(cs.mode == "chordal");
  CHECK(cs.rip_certified);

  std::vector<std::vector<int>> got = cs.cliques;
  std::sort(got.begin(), got.end());
  // oracle: brute-force maximal cliques of the banded CSP graph
  std::set<std::pair<int, int>> edges;
  for (int i = 1; i <= 3; ++i) {
    edges.insert({i - 1, i});
    edges.insert({i, i + 1});
    edges.insert({i - 1, i + 1});
  }
  CHECK(got == brute_force_max_cliques(5, edges));
  CHECK(got == std::vector<std::vector<int>>{{0, 1, 2}, {1, 2, 3}, {2, 3, 4}});
}

TEST_CASE("dense constraint gives one clique, independent variables give singletons") {
  POPInstance dense = box_pop(4, -1.0, 1.0);
  Polynomial h(4);
  for (int v = 0; v < 4; ++v) h.add_term(Monomial::var(v), 1.0);
  h.add_term(Monomial{}, -1.0);
  dense.eq_constraints.push_back(h);
  CliqueSet cs = csp_cliques(dense);
  REQUIRE(cs.cliques.size() == 1);
  CHECK(cs.cliques[0] == std::vector<int>{0, 1, 2, 3});

  POPInstance indep = box_pop(2, -1.0, 1.0);
  Polynomial h0(2), h1(2);
  h0.add_term(Monomial::var(0, 2), 1.0);
  h0.add_term(Monomial{}, -0.25);
  h1.add_term(Monomial::var(1), 1.0);
  h1.add_term(Monomial{}, -0.5);
  indep.eq_constraints.push_back(h0);
  indep.eq_constraints.push_back(h1);
  CliqueSet cs2 = csp_cliques(indep);
  REQUIRE(cs2.cliques.size() == 2);
  CHECK(cs2.cliques[0].size() == 1);
  CHECK(cs2.cliques[1].size() == 1);
  CHECK(cs2.rip_certified);
}

TEST_CASE("owners prefer the smallest containing clique") {
  POPInstance pop = box_pop(3, 0.0, 1.0);
  Polynomial wide(3);
  wide.add_term(Monomial::var(0) * Monomial::var(1) * Monomial::var(2), 1.0);
  wide.add_term(Monomial{}, -0.1);
  pop.eq_constraints.push_back(wide);
  Polynomial narrow(3);
  narrow.add_term(Monomial::var(1), 1.0);
  narrow.add_term(Monomial{}, -0.4);
  pop.eq_constraints.push_back(narrow);
  CliqueSet cs = csp_cliques(pop);
  REQUIRE(cs.cliques.size() == 1);  // the triple absorbs everything
  CHECK(cs.owner_eq == std::vector<int>{0, 0});
}

TEST_CASE("running intersection checker") {
  CHECK(check_running_intersection({{0, 1, 2}, {1, 2, 3}, {2, 3, 4}}));
  // the 2-D star pattern that cannot satisfy RIP
  CHECK_FALSE(check_running_intersection({{0, 1, 2}, {1, 3, 4}, {2, 3, 5}}));
}

TEST_CASE("relaxation order floor") {
  POPInstance pop = box_pop(1, 0.0, 2.0);
  Polynomial h(1);
  h.add_term(Monomial::var(0, 2), 1.0);
  h.add_term(Monomial{}, -1.0);
  pop.eq_constraints.push_back(h);
  pop.objective = Polynomial::variable(1, 0);
  CHECK(relaxation_order_min(pop) == 1);
  CliqueSet cs = csp_cliques(pop);
  CHECK_THROWS_AS(build_relaxation(pop, cs, 0), ParameterError);

  POPInstance quart = box_pop(1, -1.0, 1.0);
  quart.objective = Polynomial::variable(1, 0).pow(4);
  CHECK(relaxation_order_min(quart) == 2);
}

TEST_CASE("linear ODE relaxation at w=1 has 4x4 moment blocks per clique") {
  DiffProblem p = preset("linear_ode");
  Grid g = Grid::make(p.domain, 21);
  POPInstance pop = transcribe(p, g);
  CliqueSet cs = csp_cliques(pop);
  CHECK(cs.mode == "chordal");
  CHECK(cs.max_clique_size() == 3);
  Relaxation rel = build_relaxation(pop, cs, 1, {0.0, 0});
  CHECK(rel.w_min == 1);
  for (std::size_t t = 0; t < cs.cliques.size(); ++t) {
    CHECK(rel.sdp.blocks[t].dim == 4);  // basis {1, u_{i-1}, u_i, u_{i+1}}
  }
  // all transcription equalities appear as affine moment rows
  CHECK(rel.sdp.equalities.size() == pop.eq_constraints.size());
  // box on every degree-1 moment
  CHECK(rel.sdp.box_index.size() == static_cast<std::size_t>(pop.nvars));
}

TEST_CASE("shared monomials glue across overlapping cliques") {
  POPInstance pop = box_pop(3, 0.0, 1.0);
  Polynomial h1(3), h2(3);
  h1.add_term(Monomial::var(0) * Monomial::var(1), 1.0);
  h1.add_term(Monomial{}, -0.25);
  h2.add_term(Monomial::var(1) * Monomial::var(2), 1.0);
  h2.add_term(Monomial{}, -0.25);
  pop.eq_constraints.push_back(h1);
  pop.eq_constraints.push_back(h2);
  CliqueSet cs = csp_cliques(pop);
  REQUIRE(cs.cliques.size() == 2);
  Relaxation rel = build_relaxation(pop, cs, 1, {0.0, 0});

  // x1^2 sits in both moment blocks under one moment position
  int pos = rel.index.find(Monomial::var(1, 2));
  REQUIRE(pos >= 0);
  int hits = 0;
  for (const auto& blk : rel.sdp.blocks)
    for (const auto& e : blk.entries)
      if (e.y == pos) ++hits;
  CHECK(hits >= 2);

  // without gluing each block would carry its own copy of the overlap's
  // monomials: the global index must be smaller than the per-block total
  std::size_t separate_count = 0;
  for (const auto& blk : rel.sdp.blocks) {
    std::set<int> distinct;
    for (const auto& e : blk.entries)
      if (e.y >= 0) distinct.insert(e.y);
    separate_count += distinct.size();
  }
  CHECK(static_cast<std::size_t>(rel.index.size()) < separate_count);
}

TEST_CASE("perturbation is deterministic and bounded") {
  POPInstance pop = box_pop(3, -1.0, 2.0);
  pop.objective = Polynomial::variable(3, 0);
  Polynomial h(3);
  h.add_term(Monomial::var(0), 1.0);
  h.add_term(Monomial::var(1), 1.0);
  h.add_term(Monomial::var(2), 1.0);
  h.add_term(Monomial{}, -1.0);
  pop.eq_constraints.push_back(h);
  CliqueSet cs = csp_cliques(pop);
  Relaxation r1 = build_relaxation(pop, cs, 1);
  Relaxation r2 = build_relaxation(pop, cs, 1);
  CHECK(r1.sdp.c == r2.sdp.c);
  // perturbation shifts each objective entry by at most its magnitude
  for (int s = 0; s < 3; ++s)
    CHECK(std::fabs(r1.sdp.c[s] - (s == 0 ? 1.0 : 0.0)) <= 1e-5);
  CHECK(r1.perturb_bound_correction > 0.0);
  CHECK(r1.perturb_bound_correction <= 1e-5 * 3 * 2.0);

  Relaxation r0 = build_relaxation(pop, cs, 1, {0.0, 0});
  CHECK(r0.perturb_bound_correction == 0.0);
}

TEST_CASE("sdp text dump round trip") {
  DiffProblem p = preset("linear_ode");
  Grid g = Grid::make(p.domain, 9);
  POPInstance pop = transcribe(p, g);
  CliqueSet cs = csp_cliques(pop);
  Relaxation rel = build_relaxation(pop, cs, 1);

  std::ostringstream os;
  rel.sdp.write(os);
  std::istringstream is(os.str());
  SDPInstance back = SDPInstance::read(is);
  CHECK(back.ny == rel.sdp.ny);
  CHECK(back.c == rel.sdp.c);
  CHECK(back.c0 == rel.sdp.c0);
  CHECK(back.equalities.size() == rel.sdp.equalities.size());
  CHECK(back.blocks.size() == rel.sdp.blocks.size());
  for (std::size_t t = 0; t < back.blocks.size(); ++t) {
    CHECK(back.blocks[t].dim == rel.sdp.blocks[t].dim);
    CHECK(back.blocks[t].entries.size() == rel.sdp.blocks[t].entries.size());
  }
  CHECK(back.box_lo == rel.sdp.box_lo);
}

TEST_CASE("extract_point returns the degree-1 slice") {
  MomentIndex idx;
  idx.pop_nvars = 3;
  std::vector<double> y = {0.5, -0.25, 2.0, 9.0, 9.0};
  CHECK(extract_point(y, idx) == std::vector<double>{0.5, -0.25, 2.0});
}
