#include "popde/pop.hpp"

#include <cmath>
#include <sstream>

#include "popde/errors.hpp"

namespace popde {

void POPInstance::validate() const {
  if (nvars <= 0) throw StructuralError("POP needs at least one variable");
  if (static_cast<int>(lo.size()) != nvars || static_cast<int>(hi.size()) != nvars)
    throw StructuralError("POP bounds size mismatch");
  for (int s = 0; s < nvars; ++s) {
    if (!std::isfinite(lo[s]) || !std::isfinite(hi[s]))
      throw StructuralError("POP bounds must be finite");
    if (!(lo[s] < hi[s]))
      throw StructuralError("POP bounds need lo < hi at variable " + std::to_string(s));
  }
  auto check_poly = [&](const Polynomial& p, const char* what) {
    if (p.nvars() != nvars) throw StructuralError(std::string(what) + " over wrong space");
    for (int v : p.support_vars())
      if (v < 0 || v >= nvars) throw StructuralError(std::string(what) + " uses bad variable");
  };
  check_poly(objective, "objective");
  for (const auto& h : eq_constraints) check_poly(h, "equality");
  for (const auto& g : ineq_constraints) check_poly(g, "inequality");
}

std::string POPInstance::dump() const {
  std::ostringstream os;
  std::vector<std::string> names(nvars);
  for (int s = 0; s < nvars; ++s)
    names[s] = s < static_cast<int>(var_info.size()) && !var_info[s].name.empty()
                   ? var_info[s].name
                   : "x" + std::to_string(s);
  os << "pop nvars " << nvars << "\n";
  os << "objective " << objective.to_string(names) << "\n";
  for (std::size_t i = 0; i < eq_constraints.size(); ++i) {
    os << "eq";
    if (i < eq_labels.size() && !eq_labels[i].empty()) os << " [" << eq_labels[i] << "]";
    os << " " << eq_constraints[i].to_string(names) << " = 0\n";
  }
  for (std::size_t i = 0; i < ineq_constraints.size(); ++i)
    os << "ineq " << ineq_constraints[i].to_string(names) << " >= 0\n";
  for (int s = 0; s < nvars; ++s)
    os << "box " << names[s] << " in [" << lo[s] << ", " << hi[s] << "]\n";
  return os.str();
}

std::vector<double> PresolveReport::expand(const std::vector<double>& reduced) const {
  std::vector<double> full(remap.size());
  for (std::size_t v = 0; v < remap.size(); ++v)
    full[v] = remap[v] >= 0 ? reduced[remap[v]] : value[v];
  return full;
}

std::pair<POPInstance, PresolveReport> presolve_fixed(const POPInstance& pop) {
  pop.validate();
  PresolveReport rep;
  rep.remap.assign(pop.nvars, 0);
  rep.value.assign(pop.nvars, 0.0);

  std::vector<bool> fixed(pop.nvars, false);
  std::vector<bool> keep_row(pop.eq_constraints.size(), true);
  for (std::size_t r = 0; r < pop.eq_constraints.size(); ++r) {
    const Polynomial& h = pop.eq_constraints[r];
    if (h.degree() != 1) continue;
    auto vars = h.support_vars();
    if (vars.size() != 1) continue;
    int v = *vars.begin();
    double a = h.coefficient(Monomial::var(v));
    double b = h.constant_term();
    if (a == 0.0 || fixed[v]) continue;
    double val = -b / a;
    // Pinned values sitting exactly on a box face are the problematic case.
    fixed[v] = true;
    rep.value[v] = val;
    keep_row[r] = false;
    ++rep.fixed_count;
  }
  if (rep.fixed_count == 0) {
    for (int v = 0; v < pop.nvars; ++v) rep.remap[v] = v;
    return {pop, rep};
  }
  if (rep.fixed_count == pop.nvars)
    throw StructuralError("presolve fixed every variable; nothing to relax");

  int next = 0;
  for (int v = 0; v < pop.nvars; ++v) rep.remap[v] = fixed[v] ? -1 : next++;

  POPInstance red;
  red.nvars = next;
  for (int v = 0; v < pop.nvars; ++v) {
    if (fixed[v]) continue;
    red.lo.push_back(pop.lo[v]);
    red.hi.push_back(pop.hi[v]);
    if (v < static_cast<int>(pop.var_info.size())) red.var_info.push_back(pop.var_info[v]);
  }
  red.objective = pop.objective.remap_vars(rep.remap, rep.value, next);
  for (std::size_t r = 0; r < pop.eq_constraints.size(); ++r) {
    if (!keep_row[r]) continue;
    Polynomial h = pop.eq_constraints[r].remap_vars(rep.remap, rep.value, next);
    if (h.is_zero()) continue;
    if (h.degree() == 0)
      throw NumericError("presolve found an inconsistent constant equality: " +
                         (r < pop.eq_labels.size() ? pop.eq_labels[r] : std::to_string(r)));
    red.eq_constraints.push_back(std::move(h));
    red.eq_labels.push_back(r < pop.eq_labels.size() ? pop.eq_labels[r] : "");
  }
  for (std::size_t r = 0; r < pop.ineq_constraints.size(); ++r) {
    Polynomial g = pop.ineq_constraints[r].remap_vars(rep.remap, rep.value, next);
    if (g.degree() == 0) continue;
    red.ineq_constraints.push_back(std::move(g));
    red.ineq_labels.push_back(r < pop.ineq_labels.size() ? pop.ineq_labels[r] : "");
  }
  red.validate();
  return {red, rep};
}

}  // namespace popde
