#pragma once

#include <iosfwd>
#include <vector>

#include "popde/pop.hpp"

namespace popde {

struct RefineSettings {
  double tol_eq = 1e-9;
  double tol_step = 1e-8;
  int max_iter = 200;  // combined outer/inner budget
  std::ostream* log = nullptr;
};

struct RefineResult {
  std::vector<double> x;
  double objective = 0.0;
  double max_eq_violation = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Polishes a point against the POP equalities and bounds: augmented
// Lagrangian outer loop, bound-projected Newton inner steps with analytic
// gradients and Hessians. Bounds hold exactly at every iterate.
RefineResult refine(const POPInstance& pop, std::vector<double> x0,
                    const RefineSettings& settings = {});

// Worst relative deviation between the analytic constraint Jacobian and
// central finite differences at x.
double constraint_jacobian_check(const POPInstance& pop, const std::vector<double>& x);

}  // namespace popde
