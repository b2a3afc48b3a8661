#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "popde/relaxation.hpp"

namespace popde {

enum class SolveStatus { optimal, near_optimal, infeasible, unbounded, max_iter };

const char* to_string(SolveStatus s);

struct ConicSettings {
  double tol_feas = 1e-7;
  double tol_gap = 1e-7;
  double tol_psd = 1e-8;
  int max_iter = 100;
  std::ostream* log = nullptr;
};

struct ConicSolution {
  std::vector<double> y;
  std::vector<Eigen::MatrixXd> block_matrices;  // primal PSD slacks C + A(y)
  double objective_value = 0.0;                 // c'y + c0
  double dual_objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

// Primal-dual interior-point method with Nesterov-Todd scaling over the PSD
// blocks and a standard log-barrier treatment of the box. Deterministic for
// fixed inputs and settings.
ConicSolution solve(const SDPInstance& sdp, const ConicSettings& settings = {});

// Residuals recomputed from scratch, independent of the solver's internal
// bookkeeping.
struct VerifyReport {
  double eq_residual = 0.0;       // max |a'y - rhs|
  double block_min_eig = 0.0;     // min over blocks of lambda_min(C + A(y))
  double box_violation = 0.0;     // max bound violation
  double gap = 0.0;               // |primal - dual|/(1+|primal|+|dual|)
};

VerifyReport verify(const SDPInstance& sdp, const ConicSolution& sol);

}  // namespace popde
