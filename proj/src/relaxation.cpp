#include "popde/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "popde/errors.hpp"

namespace popde {

namespace {

std::vector<int> sorted_support(const Polynomial& p) {
  auto s = p.support_vars();
  return std::vector<int>(s.begin(), s.end());
}

bool is_subset(const std::vector<int>& small, const std::vector<int>& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

// Correlative sparsity graph: edges between variables sharing a constraint,
// and between variables sharing an objective monomial.
std::vector<std::set<int>> csp_graph(const POPInstance& pop) {
  std::vector<std::set<int>> adj(pop.nvars);
  auto link_all = [&](const std::vector<int>& vars) {
    for (std::size_t a = 0; a < vars.size(); ++a)
      for (std::size_t b = a + 1; b < vars.size(); ++b) {
        adj[vars[a]].insert(vars[b]);
        adj[vars[b]].insert(vars[a]);
      }
  };
  for (const auto& h : pop.eq_constraints) link_all(sorted_support(h));
  for (const auto& g : pop.ineq_constraints) link_all(sorted_support(g));
  for (const auto& [m, c] : pop.objective.terms()) {
    std::vector<int> vars;
    for (auto [v, e] : m.factors()) vars.push_back(v);
    link_all(vars);
  }
  return adj;
}

void absorb_nested(std::vector<std::vector<int>>& cliques) {
  for (auto& c : cliques) std::sort(c.begin(), c.end());
  std::sort(cliques.begin(), cliques.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<std::vector<int>> keep;
  int max_var = 0;
  for (const auto& c : cliques)
    for (int v : c) max_var = std::max(max_var, v + 1);
  std::vector<std::vector<int>> member(max_var);  // var -> kept clique ids
  for (const auto& c : cliques) {
    bool absorbed = false;
    if (!c.empty()) {
      for (int id : member[c[0]]) {
        if (is_subset(c, keep[id])) {
          absorbed = true;
          break;
        }
      }
    }
    if (absorbed) continue;
    int id = static_cast<int>(keep.size());
    keep.push_back(c);
    for (int v : c) member[v].push_back(id);
  }
  cliques = std::move(keep);
}

// Greedy minimum-degree elimination producing the maximal cliques of a
// chordal extension, then a junction-tree (max intersection spanning tree)
// pre-order so running intersection holds.
std::vector<std::vector<int>> chordal_cliques(const POPInstance& pop) {
  std::vector<std::set<int>> adj = csp_graph(pop);
  int n = pop.nvars;
  std::vector<bool> eliminated(n, false);
  std::vector<std::vector<int>> candidates;
  candidates.reserve(n);

  std::multimap<int, int> bucket;  // degree -> vertex (lazily updated)
  std::vector<int> degree(n);
  for (int v = 0; v < n; ++v) {
    degree[v] = static_cast<int>(adj[v].size());
    bucket.insert({degree[v], v});
  }
  for (int step = 0; step < n; ++step) {
    int v = -1;
    while (!bucket.empty()) {
      auto it = bucket.begin();
      if (!eliminated[it->second] && degree[it->second] == it->first) {
        v = it->second;
        bucket.erase(it);
        break;
      }
      bucket.erase(it);
    }
    if (v < 0) break;
    std::vector<int> clique{v};
    for (int u : adj[v])
      if (!eliminated[u]) clique.push_back(u);
    std::sort(clique.begin(), clique.end());
    candidates.push_back(clique);
    eliminated[v] = true;
    // fill in among the remaining neighbours
    for (int a : clique) {
      if (a == v) continue;
      for (int b : clique) {
        if (b == v || b == a) continue;
        adj[a].insert(b);
      }
      adj[a].erase(v);
      degree[a] = 0;
      for (int u : adj[a])
        if (!eliminated[u]) ++degree[a];
      bucket.insert({degree[a], a});
    }
  }
  absorb_nested(candidates);
  return candidates;
}

// Pre-order of a maximum-intersection spanning tree of the clique graph.
std::vector<std::vector<int>> junction_tree_order(std::vector<std::vector<int>> cliques) {
  int d = static_cast<int>(cliques.size());
  if (d <= 1) return cliques;
  int max_var = 0;
  for (const auto& c : cliques)
    for (int v : c) max_var = std::max(max_var, v + 1);
  std::vector<std::vector<int>> member(max_var);
  for (int id = 0; id < d; ++id)
    for (int v : cliques[id]) member[v].push_back(id);

  std::vector<int> best(d, 0), parent(d, -1);
  std::vector<bool> in_tree(d, false);
  std::vector<int> order;
  // Prim over intersection weights, seeded at the largest clique
  int seed = 0;
  for (int i = 1; i < d; ++i)
    if (cliques[i].size() > cliques[seed].size()) seed = i;
  in_tree[seed] = true;
  order.push_back(seed);
  std::vector<int> inter(d, 0);
  auto bump_neighbors = [&](int id) {
    std::unordered_map<int, int> counts;
    for (int v : cliques[id])
      for (int other : member[v])
        if (!in_tree[other]) ++counts[other];
    for (auto [other, cnt] : counts)
      if (cnt > inter[other]) inter[other] = cnt;
  };
  bump_neighbors(seed);
  for (int step = 1; step < d; ++step) {
    int pick = -1;
    for (int i = 0; i < d; ++i)
      if (!in_tree[i] && (pick < 0 || inter[i] > inter[pick])) pick = i;
    in_tree[pick] = true;
    order.push_back(pick);
    bump_neighbors(pick);
  }
  std::vector<std::vector<int>> out;
  out.reserve(d);
  for (int id : order) out.push_back(std::move(cliques[id]));
  return out;
}

std::vector<std::vector<int>> support_cliques(const POPInstance& pop) {
  std::vector<std::vector<int>> cliques;
  for (const auto& h : pop.eq_constraints) cliques.push_back(sorted_support(h));
  for (const auto& g : pop.ineq_constraints) cliques.push_back(sorted_support(g));
  for (const auto& [m, c] : pop.objective.terms()) {
    std::vector<int> vars;
    for (auto [v, e] : m.factors()) vars.push_back(v);
    if (!vars.empty()) cliques.push_back(vars);
  }
  std::vector<bool> covered(pop.nvars, false);
  for (const auto& c : cliques)
    for (int v : c) covered[v] = true;
  for (int v = 0; v < pop.nvars; ++v)
    if (!covered[v]) cliques.push_back({v});
  cliques.erase(std::remove_if(cliques.begin(), cliques.end(),
                               [](const auto& c) { return c.empty(); }),
                cliques.end());
  absorb_nested(cliques);
  return junction_tree_order(std::move(cliques));
}

void assign_owners(const POPInstance& pop, CliqueSet& cs) {
  int max_var = pop.nvars;
  std::vector<std::vector<int>> member(max_var);
  for (int id = 0; id < static_cast<int>(cs.cliques.size()); ++id)
    for (int v : cs.cliques[id]) member[v].push_back(id);

  auto owner_of = [&](const Polynomial& p, const std::string& what) {
    std::vector<int> sup = sorted_support(p);
    if (sup.empty()) {
      // constant constraints own the first clique by convention
      return 0;
    }
    int best = -1;
    for (int id : member[sup[0]]) {
      if (!is_subset(sup, cs.cliques[id])) continue;
      if (best < 0 || cs.cliques[id].size() < cs.cliques[best].size() ||
          (cs.cliques[id].size() == cs.cliques[best].size() && id < best))
        best = id;
    }
    if (best < 0)
      throw StructuralError("no clique contains the support of " + what +
                            " (violates the clique construction)");
    return best;
  };
  cs.owner_eq.clear();
  cs.owner_ineq.clear();
  for (std::size_t i = 0; i < pop.eq_constraints.size(); ++i)
    cs.owner_eq.push_back(owner_of(pop.eq_constraints[i], "equality " + std::to_string(i)));
  for (std::size_t i = 0; i < pop.ineq_constraints.size(); ++i)
    cs.owner_ineq.push_back(owner_of(pop.ineq_constraints[i], "inequality " + std::to_string(i)));
}

}  // namespace

int CliqueSet::max_clique_size() const {
  std::size_t m = 0;
  for (const auto& c : cliques) m = std::max(m, c.size());
  return static_cast<int>(m);
}

void CliqueSet::validate(const POPInstance& pop) const {
  std::vector<bool> covered(pop.nvars, false);
  for (const auto& c : cliques)
    for (int v : c) {
      if (v < 0 || v >= pop.nvars) throw StructuralError("clique variable out of range");
      covered[v] = true;
    }
  for (int v = 0; v < pop.nvars; ++v)
    if (!covered[v]) throw StructuralError("variable " + std::to_string(v) + " not in any clique");
  if (owner_eq.size() != pop.eq_constraints.size() ||
      owner_ineq.size() != pop.ineq_constraints.size())
    throw StructuralError("owner lists out of sync with the POP");
  for (std::size_t i = 0; i < owner_eq.size(); ++i)
    if (!is_subset(sorted_support(pop.eq_constraints[i]), cliques[owner_eq[i]]))
      throw StructuralError("equality owner clique misses its support");
  for (std::size_t i = 0; i < owner_ineq.size(); ++i)
    if (!is_subset(sorted_support(pop.ineq_constraints[i]), cliques[owner_ineq[i]]))
      throw StructuralError("inequality owner clique misses its support");
}

bool check_running_intersection(const std::vector<std::vector<int>>& cliques) {
  std::set<int> seen;
  for (std::size_t j = 0; j < cliques.size(); ++j) {
    if (j == 0) {
      seen.insert(cliques[j].begin(), cliques[j].end());
      continue;
    }
    std::vector<int> inter;
    for (int v : cliques[j])
      if (seen.count(v)) inter.push_back(v);
    if (!inter.empty()) {
      bool housed = false;
      for (std::size_t k = 0; k < j && !housed; ++k)
        housed = is_subset(inter, cliques[k]);
      if (!housed) return false;
    }
    seen.insert(cliques[j].begin(), cliques[j].end());
  }
  return true;
}

CliqueSet csp_cliques(const POPInstance& pop, const CliqueOptions& opt) {
  pop.validate();
  CliqueSet cs;
  using Mode = CliqueOptions::Mode;
  Mode mode = opt.mode;

  if (mode == Mode::dense) {
    cs.cliques = {std::vector<int>(pop.nvars)};
    std::iota(cs.cliques[0].begin(), cs.cliques[0].end(), 0);
    cs.mode = "dense";
    cs.rip_certified = true;
  } else if (mode == Mode::support) {
    cs.cliques = support_cliques(pop);
    cs.mode = "support";
    cs.rip_certified = check_running_intersection(cs.cliques);
  } else {
    cs.cliques = junction_tree_order(chordal_cliques(pop));
    cs.mode = "chordal";
    cs.rip_certified = check_running_intersection(cs.cliques);
    if (mode == Mode::auto_select && cs.max_clique_size() > opt.chordal_size_cap) {
      CliqueSet alt;
      alt.cliques = support_cliques(pop);
      alt.mode = "support";
      alt.rip_certified = check_running_intersection(alt.cliques);
      if (alt.max_clique_size() < cs.max_clique_size()) cs = std::move(alt);
    }
  }
  assign_owners(pop, cs);
  cs.validate(pop);
  return cs;
}

int MomentIndex::find(const Monomial& m) const {
  auto it = position.find(m);
  return it == position.end() ? -1 : it->second;
}

void SDPInstance::validate() const {
  if (ny < 0) throw StructuralError("SDP with negative dimension");
  if (static_cast<int>(c.size()) != ny) throw StructuralError("SDP objective size mismatch");
  for (const auto& row : equalities)
    for (auto [i, v] : row.terms)
      if (i < 0 || i >= ny) throw StructuralError("SDP equality index out of range");
  for (const auto& b : blocks) {
    if (b.dim <= 0) throw StructuralError("SDP block with nonpositive dimension");
    for (const auto& e : b.entries) {
      if (e.row < 0 || e.col < e.row || e.col >= b.dim)
        throw StructuralError("SDP block entry outside the upper triangle");
      if (e.y < -1 || e.y >= ny) throw StructuralError("SDP block entry index out of range");
    }
  }
  if (box_index.size() != box_lo.size() || box_index.size() != box_hi.size())
    throw StructuralError("SDP box arrays out of sync");
  for (std::size_t i = 0; i < box_index.size(); ++i) {
    if (box_index[i] < 0 || box_index[i] >= ny)
      throw StructuralError("SDP box index out of range");
    if (!(box_lo[i] < box_hi[i])) throw StructuralError("SDP box needs lo < hi");
  }
}

namespace {

// enumerate monomials over `vars` with 1 <= degree <= maxdeg
void enumerate_monomials(const std::vector<int>& vars, int maxdeg,
                         const std::function<void(const Monomial&)>& emit) {
  std::vector<int> exps(vars.size(), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t idx, int remaining) {
    if (idx == vars.size()) {
      Monomial m;
      for (std::size_t k = 0; k < vars.size(); ++k)
        if (exps[k] > 0) m = m * Monomial::var(vars[k], exps[k]);
      if (!m.is_one()) emit(m);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      exps[idx] = e;
      rec(idx + 1, remaining - e);
    }
    exps[idx] = 0;
  };
  rec(0, maxdeg);
}

std::vector<Monomial> clique_basis(const std::vector<int>& vars, int deg) {
  std::vector<Monomial> basis{Monomial{}};
  enumerate_monomials(vars, deg, [&](const Monomial& m) { basis.push_back(m); });
  std::sort(basis.begin() + 1, basis.end(), Monomial::glex_less);
  return basis;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

int relaxation_order_min(const POPInstance& pop) {
  int w = std::max(1, (pop.objective.degree() + 1) / 2);
  for (const auto& h : pop.eq_constraints) w = std::max(w, (h.degree() + 1) / 2);
  for (const auto& g : pop.ineq_constraints) w = std::max(w, (g.degree() + 1) / 2);
  return w;
}

Relaxation build_relaxation(const POPInstance& pop, const CliqueSet& cliques, int w,
                            const RelaxationOptions& opt) {
  pop.validate();
  cliques.validate(pop);
  Relaxation rel;
  rel.w_min = relaxation_order_min(pop);
  if (w < rel.w_min)
    throw ParameterError("relaxation order " + std::to_string(w) + " below w_min = " +
                         std::to_string(rel.w_min));

  MomentIndex& idx = rel.index;
  idx.w = w;
  idx.pop_nvars = pop.nvars;
  // degree-1 moments first, in variable order
  for (int s = 0; s < pop.nvars; ++s) {
    Monomial m = Monomial::var(s);
    idx.position.emplace(m, s);
    idx.monomials.push_back(m);
  }
  auto intern = [&](const Monomial& m) {
    auto [it, inserted] = idx.position.try_emplace(m, idx.size());
    if (inserted) idx.monomials.push_back(m);
    return it->second;
  };
  for (const auto& cl : cliques.cliques)
    enumerate_monomials(cl, 2 * w, [&](const Monomial& m) { intern(m); });

  SDPInstance& sdp = rel.sdp;
  sdp.ny = idx.size();
  sdp.c.assign(sdp.ny, 0.0);

  // objective
  for (const auto& [m, coeff] : pop.objective.terms()) {
    if (m.is_one()) {
      sdp.c0 += coeff;
      continue;
    }
    int pos = idx.find(m);
    if (pos < 0)
      throw StructuralError("objective monomial not covered by the moment index");
    sdp.c[pos] += coeff;
  }

  // deterministic perturbation on the degree-1 moments
  rel.perturb_bound_correction = 0.0;
  if (opt.perturb != 0.0) {
    std::uint64_t state = opt.perturb_seed;
    std::vector<double> r(pop.nvars);
    double norm = 0.0;
    for (int s = 0; s < pop.nvars; ++s) {
      double v = (static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53) * 2.0 - 1.0;
      r[s] = v;
      norm += v * v;
    }
    norm = std::sqrt(std::max(norm, 1e-300));
    for (int s = 0; s < pop.nvars; ++s) {
      double rs = opt.perturb * r[s] / norm;
      sdp.c[s] += rs;
      rel.perturb_bound_correction +=
          std::fabs(rs) * std::max(std::fabs(pop.lo[s]), std::fabs(pop.hi[s]));
    }
  }

  // moment blocks per clique
  for (std::size_t t = 0; t < cliques.cliques.size(); ++t) {
    std::vector<Monomial> basis = clique_basis(cliques.cliques[t], w);
    SdpBlock blk;
    blk.dim = static_cast<int>(basis.size());
    blk.label = "moment_" + std::to_string(t);
    for (int a = 0; a < blk.dim; ++a)
      for (int b = a; b < blk.dim; ++b) {
        Monomial m = basis[a] * basis[b];
        blk.entries.push_back({a, b, m.is_one() ? -1 : intern(m), 1.0});
      }
    sdp.blocks.push_back(std::move(blk));
  }

  // localizing blocks for inequalities
  auto add_localizing = [&](const Polynomial& g, int owner, const std::string& label) {
    int wj = (g.degree() + 1) / 2;
    std::vector<Monomial> basis = clique_basis(cliques.cliques[owner], w - wj);
    SdpBlock blk;
    blk.dim = static_cast<int>(basis.size());
    blk.label = label;
    for (int a = 0; a < blk.dim; ++a)
      for (int b = a; b < blk.dim; ++b) {
        Monomial ab = basis[a] * basis[b];
        for (const auto& [gm, gc] : g.terms()) {
          Monomial m = ab * gm;
          blk.entries.push_back({a, b, m.is_one() ? -1 : intern(m), gc});
        }
      }
    sdp.blocks.push_back(std::move(blk));
  };
  for (std::size_t j = 0; j < pop.ineq_constraints.size(); ++j)
    add_localizing(pop.ineq_constraints[j], cliques.owner_ineq[j],
                   "loc_ineq_" + std::to_string(j));

  // box products (u_s - lo)(hi - u_s) >= 0 localized on the smallest clique
  // containing the variable; without them higher moments are unbounded and
  // relaxations of degree > 2 objectives have no finite optimum
  {
    std::vector<int> owner_var(pop.nvars, -1);
    for (int t = 0; t < static_cast<int>(cliques.cliques.size()); ++t)
      for (int v : cliques.cliques[t])
        if (owner_var[v] < 0 ||
            cliques.cliques[t].size() < cliques.cliques[owner_var[v]].size())
          owner_var[v] = t;
    for (int s = 0; s < pop.nvars; ++s) {
      Polynomial g(pop.nvars);
      g.add_term(Monomial::var(s, 2), -1.0);
      g.add_term(Monomial::var(s), pop.lo[s] + pop.hi[s]);
      g.add_term(Monomial{}, -pop.lo[s] * pop.hi[s]);
      add_localizing(g, owner_var[s], "box_" + std::to_string(s));
    }
  }

  // localizing matrices of equalities, entry-wise as affine rows (deduped)
  std::set<std::pair<std::vector<std::pair<int, double>>, double>> seen_rows;
  for (std::size_t i = 0; i < pop.eq_constraints.size(); ++i) {
    const Polynomial& h = pop.eq_constraints[i];
    int wi = (h.degree() + 1) / 2;
    std::vector<Monomial> basis = clique_basis(cliques.cliques[cliques.owner_eq[i]], w - wi);
    for (int a = 0; a < static_cast<int>(basis.size()); ++a)
      for (int b = a; b < static_cast<int>(basis.size()); ++b) {
        Monomial ab = basis[a] * basis[b];
        std::map<int, double> terms;
        double rhs = 0.0;
        for (const auto& [hm, hc] : h.terms()) {
          Monomial m = ab * hm;
          if (m.is_one())
            rhs -= hc;
          else
            terms[intern(m)] += hc;
        }
        LinRow row;
        for (auto [p, v] : terms)
          if (v != 0.0) row.terms.push_back({p, v});
        if (row.terms.empty()) {
          if (std::fabs(rhs) > 1e-9)
            throw NumericError("equality row reduced to an inconsistent constant");
          continue;
        }
        row.rhs = rhs;
        row.label = (i < pop.eq_labels.size() ? pop.eq_labels[i] : "eq") +
                    (a + b > 0 ? "*" + ab.to_string() : "");
        if (seen_rows.insert({row.terms, row.rhs}).second)
          sdp.equalities.push_back(std::move(row));
      }
  }

  // box on the degree-1 moments
  for (int s = 0; s < pop.nvars; ++s) {
    sdp.box_index.push_back(s);
    sdp.box_lo.push_back(pop.lo[s]);
    sdp.box_hi.push_back(pop.hi[s]);
  }

  sdp.validate();
  return rel;
}

std::vector<double> extract_point(const std::vector<double>& y, const MomentIndex& idx) {
  if (static_cast<int>(y.size()) < idx.pop_nvars)
    throw StructuralError("moment vector shorter than the POP dimension");
  return std::vector<double>(y.begin(), y.begin() + idx.pop_nvars);
}

void SDPInstance::write(std::ostream& os) const {
  os << "sdp ny " << ny << "\n";
  os.precision(17);
  os << "c0 " << c0 << "\n";
  for (int i = 0; i < ny; ++i)
    if (c[i] != 0.0) os << "obj " << i << " " << c[i] << "\n";
  for (const auto& row : equalities) {
    os << "eq " << row.rhs << " " << row.terms.size();
    for (auto [i, v] : row.terms) os << " " << i << " " << v;
    os << "\n";
  }
  for (const auto& b : blocks) {
    os << "block " << b.dim << " " << b.entries.size() << " " << b.label << "\n";
    for (const auto& e : b.entries)
      os << "entry " << e.row << " " << e.col << " " << e.y << " " << e.coeff << "\n";
  }
  for (std::size_t i = 0; i < box_index.size(); ++i)
    os << "box " << box_index[i] << " " << box_lo[i] << " " << box_hi[i] << "\n";
  os << "end\n";
}

SDPInstance SDPInstance::read(std::istream& is) {
  SDPInstance sdp;
  std::string line;
  SdpBlock* open = nullptr;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "sdp") {
      std::string kw;
      ls >> kw >> sdp.ny;
      sdp.c.assign(sdp.ny, 0.0);
    } else if (tag == "c0") {
      ls >> sdp.c0;
    } else if (tag == "obj") {
      int i;
      double v;
      ls >> i >> v;
      sdp.c.at(i) = v;
    } else if (tag == "eq") {
      LinRow row;
      std::size_t k;
      ls >> row.rhs >> k;
      for (std::size_t t = 0; t < k; ++t) {
        int i;
        double v;
        ls >> i >> v;
        row.terms.push_back({i, v});
      }
      sdp.equalities.push_back(std::move(row));
    } else if (tag == "block") {
      SdpBlock b;
      std::size_t ents;
      ls >> b.dim >> ents;
      std::getline(ls, b.label);
      if (!b.label.empty() && b.label.front() == ' ') b.label.erase(0, 1);
      sdp.blocks.push_back(std::move(b));
      open = &sdp.blocks.back();
    } else if (tag == "entry") {
      if (!open) throw IoError("sdp entry outside a block");
      SdpBlockEntry e{};
      ls >> e.row >> e.col >> e.y >> e.coeff;
      open->entries.push_back(e);
    } else if (tag == "box") {
      int i;
      double lo, hi;
      ls >> i >> lo >> hi;
      sdp.box_index.push_back(i);
      sdp.box_lo.push_back(lo);
      sdp.box_hi.push_back(hi);
    } else if (tag == "end") {
      break;
    } else {
      throw IoError("unknown sdp line tag '" + tag + "'");
    }
  }
  sdp.validate();
  return sdp;
}

}  // namespace popde
