#pragma once

#include <string>
#include <vector>

#include "popde/poly.hpp"

namespace popde {

// Where a POP variable came from: a grid unknown at a node, or an extra
// scalar (e.g. a free final time).
struct PopVarInfo {
  int unknown = -1;  // -1 for scalars
  int i = 0, j = 0;
  int scalar = -1;
  std::string name;
};

// min objective  s.t.  eq == 0, ineq >= 0, lo <= x <= hi.
struct POPInstance {
  int nvars = 0;
  Polynomial objective;
  std::vector<Polynomial> eq_constraints;
  std::vector<std::string> eq_labels;
  std::vector<Polynomial> ineq_constraints;
  std::vector<std::string> ineq_labels;
  std::vector<double> lo, hi;
  std::vector<PopVarInfo> var_info;

  void validate() const;
  std::string dump() const;
};

struct PresolveReport {
  // remap[v] >= 0: position of v in the reduced POP; -1: fixed to value[v]
  std::vector<int> remap;
  std::vector<double> value;
  int fixed_count = 0;

  // Re-inserts fixed coordinates into a reduced-space vector.
  std::vector<double> expand(const std::vector<double>& reduced) const;
};

// Eliminates variables pinned by single-variable linear equalities
// (a*x_s + b = 0). Keeps the relaxation's PSD blocks strictly feasible when
// Dirichlet rows would otherwise force zero diagonals.
std::pair<POPInstance, PresolveReport> presolve_fixed(const POPInstance& pop);

}  // namespace popde
