#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "popde/poly.hpp"

namespace popde {

struct Domain {
  int dims = 1;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;  // ignored when dims == 1

  double volume() const;
  bool is_unit() const;
  void validate() const;
};

// Pointwise data sampler; the y argument is ignored for 1-D problems.
using Sampler = std::function<double(double, double)>;

// Equation polynomials live over a fixed symbol space:
//   per unknown k: u_k, u_k_x, u_k_xx, u_k_y, u_k_yy
//   then the coordinates x, y and any extra scalar unknowns (e.g. a free
//   final time), in declaration order.
struct SymbolTable {
  int unknowns = 1;
  std::vector<std::string> scalar_names;

  int count() const { return 5 * unknowns + 2 + static_cast<int>(scalar_names.size()); }
  int u(int k) const { return 5 * k; }
  int ux(int k) const { return 5 * k + 1; }
  int uxx(int k) const { return 5 * k + 2; }
  int uy(int k) const { return 5 * k + 3; }
  int uyy(int k) const { return 5 * k + 4; }
  int x() const { return 5 * unknowns; }
  int y() const { return 5 * unknowns + 1; }
  int scalar(int j) const { return 5 * unknowns + 2 + j; }
  std::vector<std::string> names() const;
};

// central: derivatives replaced by centered stencils at interior nodes.
// pairwise_trapezoid: first-order-in-x dynamics "u_k_x - g(...) = 0"
// transcribed between consecutive nodes with the implicit trapezoid rule
// (1-D only); keeps constraints polynomial and supports of size <= 2
// unknowns per node pair.
enum class EqScheme { central, pairwise_trapezoid };

struct Equation {
  Polynomial lhs;  // over the SymbolTable space
  Sampler rhs;     // right-hand side sampled at grid nodes
  EqScheme scheme = EqScheme::central;
  std::string label;
};

enum class Face { left, right, bottom, top };

struct BoundaryEquation {
  Face face = Face::left;
  Polynomial lhs;  // may use u_k and first-derivative symbols (one-sided)
  Sampler rhs;
  std::string label;
};

enum class ObjectiveKind { neg_sum, midpoint, integral_functional, free_time };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::neg_sum;
  Polynomial integrand;      // integral_functional only; no derivative symbols
  int midpoint_unknown = 0;  // midpoint only
  int time_scalar = 0;       // free_time only: index into scalar_names
};

// A (stationary) differential problem of the supported rectangular-domain
// polynomial class, together with the bounds the relaxation requires.
struct DiffProblem {
  std::string name;
  Domain domain;
  int unknowns = 1;
  std::vector<std::string> scalar_names;
  std::vector<std::pair<double, double>> scalar_bounds;
  std::vector<Equation> interior;
  std::vector<BoundaryEquation> boundary;
  std::vector<double> lbd, ubd;  // per unknown
  Objective objective;
  // accumulates affine changes of variables (dt = measure_scale * ds) so
  // integral objectives keep their original normalization
  double measure_scale = 1.0;
  // optional per-node bound tightening: (unknown, x, y) -> [lo, hi]
  std::function<std::pair<double, double>(int, double, double)> bound_override;
  std::vector<Sampler> analytic;  // reference solutions when known (may be empty)

  SymbolTable symbols() const { return SymbolTable{unknowns, scalar_names}; }
  void validate() const;
};

struct Grid {
  Domain domain;
  int nx = 2, ny = 1;

  static Grid make(const Domain& d, int nx, int ny = 1);
  double dx() const { return (domain.x_max - domain.x_min) / (nx - 1); }
  double dy() const { return ny > 1 ? (domain.y_max - domain.y_min) / (ny - 1) : 1.0; }
  double x(int i) const { return domain.x_min + i * dx(); }
  double y(int j) const { return domain.dims == 2 ? domain.y_min + j * dy() : 0.0; }
  int nodes() const { return nx * ny; }
  int node(int i, int j) const { return j * nx + i; }
};

struct GridFunction {
  Grid grid;
  std::vector<std::vector<double>> values;  // [unknown][node]

  static GridFunction zeros(const Grid& g, int unknowns);
  int unknowns() const { return static_cast<int>(values.size()); }
  double& at(int k, int i, int j) { return values[k][grid.node(i, j)]; }
  double at(int k, int i, int j) const { return values[k][grid.node(i, j)]; }
  void validate() const;
};

DiffProblem preset(const std::string& name);
std::vector<std::string> preset_names();

struct ShiftReport {
  std::vector<double> shift;  // u = u_tilde + shift[k]
  bool is_identity() const;
};

// Rewrites the problem in u_tilde = u - lbd so every unknown is nonnegative.
std::pair<DiffProblem, ShiftReport> shift_to_nonnegative(const DiffProblem& p);

struct ScaleReport {
  double x0 = 0.0, lx = 1.0;
  double y0 = 0.0, ly = 1.0;
  double to_orig_x(double s) const { return x0 + lx * s; }
  double to_orig_y(double t) const { return y0 + ly * t; }
  double to_unit_x(double x) const { return (x - x0) / lx; }
  double to_unit_y(double y) const { return (y - y0) / ly; }
  bool is_identity() const { return x0 == 0 && lx == 1 && y0 == 0 && ly == 1; }
};

// Affine change of variables mapping the domain onto [0,1]^dims, with
// derivative symbols rescaled by the chain rule.
std::pair<DiffProblem, ScaleReport> scale_domain_to_unit(const DiffProblem& p);

// Problem files: key/value text with nested sections; see README for the
// format. Equations are polynomial strings over the reserved symbol names.
DiffProblem load_problem_file(const std::string& path);
DiffProblem parse_problem_text(const std::string& text, const std::string& origin);

// Arithmetic expression evaluator used for right-hand sides in problem files
// ("3*exp(x+y)", "sin(pi*x)", ...).
Sampler parse_sampler_expression(const std::string& text);

}  // namespace popde
