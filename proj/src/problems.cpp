#include "popde/problems.hpp"

#include <cmath>

#include "popde/errors.hpp"

namespace popde {

double Domain::volume() const {
  double v = x_max - x_min;
  if (dims == 2) v *= y_max - y_min;
  return v;
}

bool Domain::is_unit() const {
  if (x_min != 0.0 || x_max != 1.0) return false;
  return dims == 1 || (y_min == 0.0 && y_max == 1.0);
}

void Domain::validate() const {
  if (dims != 1 && dims != 2) throw StructuralError("domain dims must be 1 or 2");
  if (!(x_min < x_max)) throw StructuralError("domain requires x_min < x_max");
  if (dims == 2 && !(y_min < y_max)) throw StructuralError("domain requires y_min < y_max");
}

std::vector<std::string> SymbolTable::names() const {
  std::vector<std::string> n;
  for (int k = 0; k < unknowns; ++k) {
    std::string u = "u" + std::to_string(k);
    n.push_back(u);
    n.push_back(u + "_x");
    n.push_back(u + "_xx");
    n.push_back(u + "_y");
    n.push_back(u + "_yy");
  }
  n.push_back("x");
  n.push_back("y");
  for (const auto& s : scalar_names) n.push_back(s);
  return n;
}

void DiffProblem::validate() const {
  domain.validate();
  if (unknowns < 1) throw StructuralError("problem needs at least one unknown");
  if (static_cast<int>(lbd.size()) != unknowns || static_cast<int>(ubd.size()) != unknowns)
    throw StructuralError("bounds must be given for every unknown");
  for (int k = 0; k < unknowns; ++k)
    if (!(lbd[k] < ubd[k])) throw StructuralError("bounds require lbd < ubd for every unknown");
  if (scalar_bounds.size() != scalar_names.size())
    throw StructuralError("every extra scalar needs bounds");
  int ns = symbols().count();
  for (const auto& eq : interior)
    if (eq.lhs.nvars() != ns) throw StructuralError("interior equation over wrong symbol space");
  for (const auto& eq : boundary)
    if (eq.lhs.nvars() != ns) throw StructuralError("boundary equation over wrong symbol space");
  if (objective.kind == ObjectiveKind::free_time &&
      (objective.time_scalar < 0 ||
       objective.time_scalar >= static_cast<int>(scalar_names.size())))
    throw StructuralError("free_time objective needs a valid scalar index");
}

Grid Grid::make(const Domain& d, int nx, int ny) {
  d.validate();
  Grid g{d, nx, d.dims == 2 ? ny : 1};
  if (g.nx < 3) throw ParameterError("grid needs N_x >= 3");
  if (d.dims == 2 && g.ny < 3) throw ParameterError("grid needs N_y >= 3 in 2-D");
  return g;
}

GridFunction GridFunction::zeros(const Grid& g, int unknowns) {
  GridFunction f;
  f.grid = g;
  f.values.assign(unknowns, std::vector<double>(g.nodes(), 0.0));
  return f;
}

void GridFunction::validate() const {
  for (const auto& vk : values) {
    if (static_cast<int>(vk.size()) != grid.nodes())
      throw StructuralError("grid function shape mismatch");
    for (double v : vk)
      if (!std::isfinite(v)) throw NumericError("grid function holds a non-finite value");
  }
}

namespace {

Sampler constant_sampler(double c) {
  return [c](double, double) { return c; };
}

DiffProblem make_linear_ode() {
  DiffProblem p;
  p.name = "linear_ode";
  p.domain = {1, 0.0, 1.0};
  p.unknowns = 1;
  p.lbd = {0.0};
  p.ubd = {10.0};
  SymbolTable st = p.symbols();
  int ns = st.count();
  auto sym = [&](int i) { return Polynomial::variable(ns, i); };

  p.interior.push_back({sym(st.uxx(0)) + 3.0 * sym(st.ux(0)) + 2.0 * sym(st.u(0)),
                        constant_sampler(0.0), EqScheme::central, "ode"});
  const double e2 = std::exp(2.0);
  p.boundary.push_back({Face::left, sym(st.ux(0)), constant_sampler(-2.0 * e2), "neumann_left"});
  p.boundary.push_back({Face::right, sym(st.ux(0)), constant_sampler(-2.0), "neumann_right"});
  p.objective.kind = ObjectiveKind::neg_sum;
  p.analytic = {[e2](double x, double) { return e2 * std::exp(-2.0 * x); }};
  return p;
}

// The stated closed-form solution e^{x+y} satisfies u_xx + u_yy = 2 e^{x+y};
// the right-hand side is chosen to keep that solution exact.
DiffProblem make_linear_pde() {
  DiffProblem p;
  p.name = "linear_pde";
  p.domain = {2, 0.0, 1.0, 0.0, 1.0};
  p.unknowns = 1;
  p.lbd = {0.0};
  p.ubd = {10.0};
  SymbolTable st = p.symbols();
  int ns = st.count();
  auto sym = [&](int i) { return Polynomial::variable(ns, i); };

  Sampler f = [](double x, double y) { return 2.0 * std::exp(x + y); };
  Sampler g = [](double x, double y) { return std::exp(x + y); };
  p.interior.push_back({sym(st.uxx(0)) + sym(st.uyy(0)), f, EqScheme::central, "poisson"});
  for (Face face : {Face::left, Face::right, Face::bottom, Face::top})
    p.boundary.push_back({face, sym(st.u(0)), g, "dirichlet"});
  p.objective.kind = ObjectiveKind::neg_sum;
  p.analytic = {[](double x, double y) { return std::exp(x + y); }};
  return p;
}

DiffProblem make_elliptic_bifur() {
  DiffProblem p;
  p.name = "elliptic_bifur";
  p.domain = {2, 0.0, 1.0, 0.0, 1.0};
  p.unknowns = 1;
  p.lbd = {0.0};
  p.ubd = {1.0};
  SymbolTable st = p.symbols();
  int ns = st.count();
  auto sym = [&](int i) { return Polynomial::variable(ns, i); };

  Polynomial u = sym(st.u(0));
  p.interior.push_back({sym(st.uxx(0)) + sym(st.uyy(0)) + 22.0 * (u - u * u * u),
                        constant_sampler(0.0), EqScheme::central, "bifurcation"});
  for (Face face : {Face::left, Face::right, Face::bottom, Face::top})
    p.boundary.push_back({face, sym(st.u(0)), constant_sampler(0.0), "dirichlet0"});
  p.objective.kind = ObjectiveKind::neg_sum;
  return p;
}

DiffProblem make_reaction_diffusion() {
  DiffProblem p;
  p.name = "reaction_diffusion";
  p.domain = {1, 0.0, 5.0};
  p.unknowns = 2;
  p.lbd = {0.0, 0.0};
  p.ubd = {14.0, 14.0};
  SymbolTable st = p.symbols();
  int ns = st.count();
  auto sym = [&](int i) { return Polynomial::variable(ns, i); };

  Polynomial u = sym(st.u(0)), v = sym(st.u(1));
  Polynomial eq_u = (1.0 / 20.0) * sym(st.uxx(0)) +
                    (1.0 / 9.0) * (35.0 * u + 16.0 * u * u - u * u * u) - u * v;
  Polynomial eq_v = 4.0 * sym(st.uxx(1)) - (v + 0.4 * v * v) + u * v;
  p.interior.push_back({eq_u, constant_sampler(0.0), EqScheme::central, "u"});
  p.interior.push_back({eq_v, constant_sampler(0.0), EqScheme::central, "v"});
  for (int k = 0; k < 2; ++k) {
    p.boundary.push_back({Face::left, sym(st.ux(k)), constant_sampler(0.0), "neumann_left"});
    p.boundary.push_back({Face::right, sym(st.ux(k)), constant_sampler(0.0), "neumann_right"});
  }
  p.objective.kind = ObjectiveKind::midpoint;
  p.objective.midpoint_unknown = 0;
  return p;
}

DiffProblem make_prod_consumption() {
  DiffProblem p;
  p.name = "prod_consumption";
  p.domain = {1, 0.0, 4.0};
  p.unknowns = 2;  // u0 = state, u1 = control
  p.lbd = {0.0, 0.0};
  p.ubd = {10.0, 1.0};
  SymbolTable st = p.symbols();
  int ns = st.count();
  auto sym = [&](int i) { return Polynomial::variable(ns, i); };

  p.interior.push_back({sym(st.ux(0)) - sym(st.u(1)) * sym(st.u(0)), constant_sampler(0.0),
                        EqScheme::pairwise_trapezoid, "dynamics"});
  p.boundary.push_back({Face::left, sym(st.u(0)), constant_sampler(0.25), "initial"});
  p.objective.kind = ObjectiveKind::integral_functional;
  p.objective.integrand = -(Polynomial::constant(ns, 1.0) - sym(st.u(1))) * sym(st.u(0));
  // state confined to [0,1] over the first unit of time
  p.bound_override = [](int k, double x, double) -> std::pair<double, double> {
    if (k == 0 && x <= 1.0 + 1e-12) return {0.0, 1.0};
    if (k == 0) return {0.0, 10.0};
    return {0.0, 1.0};
  };
  return p;
}

DiffProblem make_double_integrator() {
  DiffProblem p;
  p.name = "double_integrator";
  // posed on scaled time s in [0,1] with the horizon T as an extra variable
  p.domain = {1, 0.0, 1.0};
  p.unknowns = 3;  // u0 = x1, u1 = x2, u2 = control
  p.lbd = {-1.0, -1.0, -1.0};
  p.ubd = {10.0, 10.0, 1.0};
  p.scalar_names = {"T"};
  p.scalar_bounds = {{0.1, 10.0}};
  SymbolTable st = p.symbols();
  int ns = st.count();
  auto sym = [&](int i) { return Polynomial::variable(ns, i); };

  Polynomial T = sym(st.scalar(0));
  p.interior.push_back({sym(st.ux(0)) - T * sym(st.u(1)), constant_sampler(0.0),
                        EqScheme::pairwise_trapezoid, "dyn_x1"});
  p.interior.push_back({sym(st.ux(1)) - T * sym(st.u(2)), constant_sampler(0.0),
                        EqScheme::pairwise_trapezoid, "dyn_x2"});
  p.boundary.push_back({Face::left, sym(st.u(0)), constant_sampler(0.8), "x1_init"});
  p.boundary.push_back({Face::left, sym(st.u(1)), constant_sampler(-1.0), "x2_init"});
  p.boundary.push_back({Face::right, sym(st.u(0)), constant_sampler(0.0), "x1_final"});
  p.boundary.push_back({Face::right, sym(st.u(1)), constant_sampler(0.0), "x2_final"});
  p.objective.kind = ObjectiveKind::free_time;
  p.objective.time_scalar = 0;
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"linear_ode",         "linear_pde",       "elliptic_bifur",
          "reaction_diffusion", "prod_consumption", "double_integrator"};
}

DiffProblem preset(const std::string& name) {
  DiffProblem p;
  if (name == "linear_ode")
    p = make_linear_ode();
  else if (name == "linear_pde")
    p = make_linear_pde();
  else if (name == "elliptic_bifur")
    p = make_elliptic_bifur();
  else if (name == "reaction_diffusion")
    p = make_reaction_diffusion();
  else if (name == "prod_consumption")
    p = make_prod_consumption();
  else if (name == "double_integrator")
    p = make_double_integrator();
  else
    throw LookupError("unknown preset '" + name + "'");
  p.validate();
  return p;
}

bool ShiftReport::is_identity() const {
  for (double s : shift)
    if (s != 0.0) return false;
  return true;
}

std::pair<DiffProblem, ShiftReport> shift_to_nonnegative(const DiffProblem& p) {
  ShiftReport rep;
  rep.shift.assign(p.unknowns, 0.0);
  bool any = false;
  for (int k = 0; k < p.unknowns; ++k)
    if (p.lbd[k] < 0.0) {
      rep.shift[k] = p.lbd[k];
      any = true;
    }
  if (!any) return {p, rep};

  DiffProblem q = p;
  SymbolTable st = p.symbols();
  int ns = st.count();
  std::map<int, Polynomial> subs;
  for (int i = 0; i < ns; ++i) subs.emplace(i, Polynomial::variable(ns, i));
  for (int k = 0; k < p.unknowns; ++k) {
    subs.at(st.u(k)) =
        Polynomial::variable(ns, st.u(k)) + Polynomial::constant(ns, rep.shift[k]);
    q.lbd[k] = 0.0;
    q.ubd[k] = p.ubd[k] - rep.shift[k];
  }
  for (auto& eq : q.interior) eq.lhs = eq.lhs.substitute(subs, ns);
  for (auto& eq : q.boundary) eq.lhs = eq.lhs.substitute(subs, ns);
  if (q.objective.kind == ObjectiveKind::integral_functional)
    q.objective.integrand = q.objective.integrand.substitute(subs, ns);
  if (p.bound_override) {
    auto base = p.bound_override;
    auto shift = rep.shift;
    q.bound_override = [base, shift](int k, double x, double y) {
      auto [lo, hi] = base(k, x, y);
      return std::make_pair(lo - shift[k], hi - shift[k]);
    };
  }
  for (int k = 0; k < static_cast<int>(q.analytic.size()); ++k) {
    if (!q.analytic[k]) continue;
    auto base = q.analytic[k];
    double s = rep.shift[k];
    q.analytic[k] = [base, s](double x, double y) { return base(x, y) - s; };
  }
  return {q, rep};
}

std::pair<DiffProblem, ScaleReport> scale_domain_to_unit(const DiffProblem& p) {
  ScaleReport rep;
  rep.x0 = p.domain.x_min;
  rep.lx = p.domain.x_max - p.domain.x_min;
  if (p.domain.dims == 2) {
    rep.y0 = p.domain.y_min;
    rep.ly = p.domain.y_max - p.domain.y_min;
  }
  if (rep.is_identity()) return {p, rep};

  DiffProblem q = p;
  q.domain.x_min = 0.0;
  q.domain.x_max = 1.0;
  if (p.domain.dims == 2) {
    q.domain.y_min = 0.0;
    q.domain.y_max = 1.0;
  }
  SymbolTable st = p.symbols();
  int ns = st.count();
  std::map<int, Polynomial> subs;
  for (int i = 0; i < ns; ++i) subs.emplace(i, Polynomial::variable(ns, i));
  // d/dx = (1/lx) d/ds and x = x0 + lx*s; same in y
  for (int k = 0; k < p.unknowns; ++k) {
    subs.at(st.ux(k)) = Polynomial::variable(ns, st.ux(k)) * (1.0 / rep.lx);
    subs.at(st.uxx(k)) = Polynomial::variable(ns, st.uxx(k)) * (1.0 / (rep.lx * rep.lx));
    subs.at(st.uy(k)) = Polynomial::variable(ns, st.uy(k)) * (1.0 / rep.ly);
    subs.at(st.uyy(k)) = Polynomial::variable(ns, st.uyy(k)) * (1.0 / (rep.ly * rep.ly));
  }
  subs.at(st.x()) =
      Polynomial::constant(ns, rep.x0) + Polynomial::variable(ns, st.x()) * rep.lx;
  subs.at(st.y()) =
      Polynomial::constant(ns, rep.y0) + Polynomial::variable(ns, st.y()) * rep.ly;

  auto rescale_sampler = [rep](const Sampler& f) -> Sampler {
    if (!f) return f;
    return [f, rep](double s, double t) { return f(rep.to_orig_x(s), rep.to_orig_y(t)); };
  };
  for (auto& eq : q.interior) {
    eq.lhs = eq.lhs.substitute(subs, ns);
    eq.rhs = rescale_sampler(eq.rhs);
  }
  for (auto& eq : q.boundary) {
    eq.lhs = eq.lhs.substitute(subs, ns);
    eq.rhs = rescale_sampler(eq.rhs);
  }
  if (q.objective.kind == ObjectiveKind::integral_functional) {
    q.objective.integrand = q.objective.integrand.substitute(subs, ns);
    q.measure_scale = p.measure_scale * rep.lx;
  }
  if (p.bound_override) {
    auto base = p.bound_override;
    q.bound_override = [base, rep](int k, double s, double t) {
      return base(k, rep.to_orig_x(s), rep.to_orig_y(t));
    };
  }
  for (auto& a : q.analytic) a = rescale_sampler(a);
  return {q, rep};
}

}  // namespace popde
