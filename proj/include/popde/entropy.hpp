#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "popde/problems.hpp"

namespace popde {

// Truncated moment vector indexed by multi-indices with i+j <= M, in graded
// order ((0,0), (1,0), (0,1), (2,0), ...; plain (0),(1),...,(M) in 1-D).
struct MomentVector {
  int dims = 1;
  int order = 0;
  Domain domain{1, 0.0, 1.0, 0.0, 1.0};
  std::vector<std::pair<int, int>> index;
  std::vector<double> values;

  static std::vector<std::pair<int, int>> make_index(int dims, int order);
  int count() const { return static_cast<int>(index.size()); }
  int find(int i, int j) const;
  double value(int i, int j) const;
  void validate() const;
};

enum class MomentWeights { full_node, trapezoid };

// Riemann-sum moments of the measure u dx dy from a grid function. The
// default weighting sums every node with weight dx*dy; the trapezoid mode
// halves the boundary weights.
MomentVector discrete_moments(const GridFunction& u, int unknown, int order,
                              MomentWeights weights = MomentWeights::full_node);

struct MaxentSettings {
  int points_per_dim = 0;  // 0 = default: 2001 in 1-D, 201 per axis in 2-D
  double tol_grad = 1e-8;
  int max_iter = 200;
  double eval_exponent_cap = 50.0;
  std::ostream* log = nullptr;
};

// exp(sum v_ij x^i y^j) density estimate on the unit domain.
struct EntropyEstimate {
  int dims = 1;
  int order = 0;
  Domain domain{1, 0.0, 1.0, 0.0, 1.0};
  std::vector<std::pair<int, int>> index;
  std::vector<double> v;
  bool converged = false;
  double grad_norm = 0.0;
  int iterations = 0;
  double eval_exponent_cap = 50.0;

  double exponent(double x, double y = 0.0) const;
};

struct EstimateValues {
  std::vector<double> values;
  bool cap_hit = false;  // the exponent cap clipped at least one point
};

// Maximizes the concave entropy dual by Newton's method with backtracking.
// The moment domain must already be scaled to [0,1]^dims.
EntropyEstimate maxent_fit(const MomentVector& m, const MaxentSettings& settings = {});

EstimateValues evaluate_estimate(const EntropyEstimate& e,
                                 std::span<const std::array<double, 2>> pts);

// Quadrature moments of the fitted density up to the given order, using the
// same composite trapezoid rule family as the fit.
MomentVector estimate_moments(const EntropyEstimate& e, int order, int points_per_dim = 0);

struct ErrorReport {
  double avg_error = 0.0;  // signed, node sum weighted by dx (dx*dy in 2-D)
  double max_error = 0.0;
  std::vector<double> differences;  // per node, reference minus estimate
};

// Paper-style error metrics of the estimate against reference node values.
ErrorReport error_metrics(const Grid& grid, std::span<const double> reference,
                          const EntropyEstimate& e);

// Dual objective value, gradient and Hessian at v (exposed for the property
// suite: the gradient must match finite differences and the Hessian is minus
// a moment matrix, hence negative semidefinite).
struct DualState {
  double objective;
  std::vector<double> gradient;
  std::vector<std::vector<double>> hessian;
};
DualState maxent_dual_state(const MomentVector& m, std::span<const double> v,
                            int points_per_dim = 0);

}  // namespace popde
