#include "popde/discretize.hpp"

#include <cmath>

#include "popde/errors.hpp"

namespace popde {

Polynomial fd_second(int nvars, int u_m1, int u_0, int u_p1, double delta) {
  if (delta <= 0.0) throw ParameterError("fd_second needs delta > 0");
  double w = 1.0 / (delta * delta);
  Polynomial p(nvars);
  p.add_term(Monomial::var(u_p1), w);
  p.add_term(Monomial::var(u_0), -2.0 * w);
  p.add_term(Monomial::var(u_m1), w);
  return p;
}

Polynomial fd_first_central(int nvars, int u_m1, int u_p1, double delta) {
  if (delta <= 0.0) throw ParameterError("fd_first_central needs delta > 0");
  double w = 1.0 / (2.0 * delta);
  Polynomial p(nvars);
  p.add_term(Monomial::var(u_p1), w);
  p.add_term(Monomial::var(u_m1), -w);
  return p;
}

int pop_var_index(const Grid& g, int unknowns, int k, int i, int j) {
  return g.node(i, j) * unknowns + k;
}

namespace {

struct Transcriber {
  const DiffProblem& p;
  const Grid& g;
  SymbolTable st;
  int m;       // unknowns
  int nvars;   // POP dimension
  int nscal;

  Transcriber(const DiffProblem& prob, const Grid& grid)
      : p(prob), g(grid), st(prob.symbols()), m(prob.unknowns) {
    nscal = static_cast<int>(p.scalar_names.size());
    nvars = g.nodes() * m + nscal;
  }

  int var(int k, int i, int j) const { return pop_var_index(g, m, k, i, j); }
  int scalar_var(int s) const { return g.nodes() * m + s; }
  Polynomial vp(int idx) const { return Polynomial::variable(nvars, idx); }

  std::string node_name(int i, int j) const {
    return p.domain.dims == 2 ? "(" + std::to_string(i) + "," + std::to_string(j) + ")"
                              : std::to_string(i);
  }

  // Substitutions shared by every node: coordinates and scalar variables.
  void base_subs(std::map<int, Polynomial>& subs, int i, int j) const {
    subs[st.x()] = Polynomial::constant(nvars, g.x(i));
    subs[st.y()] = Polynomial::constant(nvars, g.y(j));
    for (int s = 0; s < nscal; ++s) subs[st.scalar(s)] = vp(scalar_var(s));
  }

  std::map<int, Polynomial> interior_subs(int i, int j) const {
    std::map<int, Polynomial> subs;
    base_subs(subs, i, j);
    for (int k = 0; k < m; ++k) {
      subs[st.u(k)] = vp(var(k, i, j));
      subs[st.ux(k)] = fd_first_central(nvars, var(k, i - 1, j), var(k, i + 1, j), g.dx());
      subs[st.uxx(k)] = fd_second(nvars, var(k, i - 1, j), var(k, i, j), var(k, i + 1, j), g.dx());
      if (p.domain.dims == 2) {
        subs[st.uy(k)] = fd_first_central(nvars, var(k, i, j - 1), var(k, i, j + 1), g.dy());
        subs[st.uyy(k)] =
            fd_second(nvars, var(k, i, j - 1), var(k, i, j), var(k, i, j + 1), g.dy());
      }
    }
    return subs;
  }

  // Values-only substitution (no derivative symbols) at a node.
  std::map<int, Polynomial> value_subs(int i, int j) const {
    std::map<int, Polynomial> subs;
    base_subs(subs, i, j);
    for (int k = 0; k < m; ++k) subs[st.u(k)] = vp(var(k, i, j));
    return subs;
  }

  // Second-order one-sided first derivative, pointing into the domain.
  Polynomial one_sided_x(int k, int i, int j) const {
    double w = 1.0 / (2.0 * g.dx());
    Polynomial d(nvars);
    if (i == 0) {
      d.add_term(Monomial::var(var(k, 0, j)), -3.0 * w);
      d.add_term(Monomial::var(var(k, 1, j)), 4.0 * w);
      d.add_term(Monomial::var(var(k, 2, j)), -w);
    } else {
      d.add_term(Monomial::var(var(k, g.nx - 1, j)), 3.0 * w);
      d.add_term(Monomial::var(var(k, g.nx - 2, j)), -4.0 * w);
      d.add_term(Monomial::var(var(k, g.nx - 3, j)), w);
    }
    return d;
  }

  Polynomial one_sided_y(int k, int i, int j) const {
    double w = 1.0 / (2.0 * g.dy());
    Polynomial d(nvars);
    if (j == 0) {
      d.add_term(Monomial::var(var(k, i, 0)), -3.0 * w);
      d.add_term(Monomial::var(var(k, i, 1)), 4.0 * w);
      d.add_term(Monomial::var(var(k, i, 2)), -w);
    } else {
      d.add_term(Monomial::var(var(k, i, g.ny - 1)), 3.0 * w);
      d.add_term(Monomial::var(var(k, i, g.ny - 2)), -4.0 * w);
      d.add_term(Monomial::var(var(k, i, g.ny - 3)), w);
    }
    return d;
  }

  void boundary_row(POPInstance& pop, const BoundaryEquation& eq, int i, int j) const {
    std::map<int, Polynomial> subs = value_subs(i, j);
    bool uses_deriv = false;
    for (int k = 0; k < m; ++k) {
      auto sv = eq.lhs.support_vars();
      if (sv.count(st.uxx(k)) || sv.count(st.uyy(k)))
        throw StructuralError("second derivatives unsupported in boundary equations (node " +
                              node_name(i, j) + ")");
      if (sv.count(st.ux(k))) {
        if (i != 0 && i != g.nx - 1)
          throw StructuralError("x-derivative boundary condition off the x-faces");
        subs[st.ux(k)] = one_sided_x(k, i, j);
        uses_deriv = true;
      }
      if (sv.count(st.uy(k))) {
        if (j != 0 && j != g.ny - 1)
          throw StructuralError("y-derivative boundary condition off the y-faces");
        subs[st.uy(k)] = one_sided_y(k, i, j);
        uses_deriv = true;
      }
    }
    if (uses_deriv && (g.nx < 4 || (p.domain.dims == 2 && g.ny < 4)))
      throw StructuralError("one-sided boundary stencil out of range at node " + node_name(i, j));
    Polynomial h = eq.lhs.substitute(subs, nvars) -
                   Polynomial::constant(nvars, eq.rhs ? eq.rhs(g.x(i), g.y(j)) : 0.0);
    pop.eq_constraints.push_back(std::move(h));
    pop.eq_labels.push_back(eq.label + "@" + node_name(i, j));
  }

  // Splits "c*u_k_x + R = f" dynamics and applies the implicit trapezoid rule
  // on consecutive nodes.
  void pairwise_rows(POPInstance& pop, const Equation& eq) const {
    if (p.domain.dims != 1)
      throw StructuralError("trapezoid dynamics are 1-D only");
    int dyn_k = -1;
    double c = 0.0;
    Polynomial rest(st.count());
    for (const auto& [mon, coef] : eq.lhs.terms()) {
      int deriv_sym = -1;
      for (auto [v, e] : mon.factors()) {
        for (int k = 0; k < m; ++k)
          if (v == st.ux(k) || v == st.uxx(k) || v == st.uy(k) || v == st.uyy(k)) deriv_sym = v;
      }
      if (deriv_sym < 0) {
        rest.add_term(mon, coef);
        continue;
      }
      bool pure = mon.degree() == 1;
      int k_of = -1;
      for (int k = 0; k < m; ++k)
        if (deriv_sym == st.ux(k)) k_of = k;
      if (!pure || k_of < 0 || dyn_k >= 0)
        throw StructuralError("trapezoid dynamics need the form c*u_k_x + R(u) = f");
      dyn_k = k_of;
      c = coef;
    }
    if (dyn_k < 0) throw StructuralError("trapezoid dynamics without a u_k_x term");

    // normalized to (u_{i+1} - u_i)/dx - (g_i + g_{i+1})/2 = 0 with
    // g = (f - R)/c, the slope of the underlying dynamics
    double dx = g.dx();
    for (int i = 0; i + 1 < g.nx; ++i) {
      Polynomial row = (vp(var(dyn_k, i + 1, 0)) - vp(var(dyn_k, i, 0))) * (1.0 / dx);
      Polynomial r_i = rest.substitute(value_subs(i, 0), nvars);
      Polynomial r_ip = rest.substitute(value_subs(i + 1, 0), nvars);
      row = row + (r_i + r_ip) * (0.5 / c);
      double f_i = eq.rhs ? eq.rhs(g.x(i), 0.0) : 0.0;
      double f_ip = eq.rhs ? eq.rhs(g.x(i + 1), 0.0) : 0.0;
      row = row - Polynomial::constant(nvars, (f_i + f_ip) * 0.5 / c);
      pop.eq_constraints.push_back(std::move(row));
      pop.eq_labels.push_back(eq.label + "@" + std::to_string(i) + ".." + std::to_string(i + 1));
    }
  }

  void objective_into(POPInstance& pop) const {
    const Objective& obj = p.objective;
    Polynomial f(nvars);
    switch (obj.kind) {
      case ObjectiveKind::neg_sum:
        for (int k = 0; k < m; ++k)
          for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) f.add_term(Monomial::var(var(k, i, j)), -1.0);
        break;
      case ObjectiveKind::midpoint: {
        int mi = (g.nx - 1) / 2, mj = (g.ny - 1) / 2;
        f.add_term(Monomial::var(var(obj.midpoint_unknown, mi, mj)), -1.0);
        break;
      }
      case ObjectiveKind::integral_functional: {
        for (int k = 0; k < m; ++k) {
          auto sv = obj.integrand.support_vars();
          if (sv.count(st.ux(k)) || sv.count(st.uxx(k)) || sv.count(st.uy(k)) ||
              sv.count(st.uyy(k)))
            throw StructuralError("integral objective cannot use derivative symbols");
        }
        for (int j = 0; j < g.ny; ++j)
          for (int i = 0; i < g.nx; ++i) {
            double w = ((i == 0 || i == g.nx - 1) ? 0.5 : 1.0) * g.dx();
            if (p.domain.dims == 2) w *= ((j == 0 || j == g.ny - 1) ? 0.5 : 1.0) * g.dy();
            w *= p.measure_scale;
            Polynomial term = obj.integrand.substitute(value_subs(i, j), nvars) * w;
            f = f + term;
          }
        break;
      }
      case ObjectiveKind::free_time:
        f.add_term(Monomial::var(scalar_var(obj.time_scalar)), 1.0);
        break;
    }
    pop.objective = std::move(f);
  }

  POPInstance run() const {
    POPInstance pop;
    pop.nvars = nvars;
    pop.lo.resize(nvars);
    pop.hi.resize(nvars);
    pop.var_info.resize(nvars);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        for (int k = 0; k < m; ++k) {
          int s = var(k, i, j);
          double lo = p.lbd[k], hi = p.ubd[k];
          if (p.bound_override) {
            auto [l2, h2] = p.bound_override(k, g.x(i), g.y(j));
            lo = l2;
            hi = h2;
          }
          pop.lo[s] = lo;
          pop.hi[s] = hi;
          pop.var_info[s] = {k, i, j, -1, "u" + std::to_string(k) + "_" + node_name(i, j)};
        }
    for (int s = 0; s < nscal; ++s) {
      int v = scalar_var(s);
      pop.lo[v] = p.scalar_bounds[s].first;
      pop.hi[v] = p.scalar_bounds[s].second;
      pop.var_info[v] = {-1, 0, 0, s, p.scalar_names[s]};
    }

    for (const auto& eq : p.interior) {
      if (eq.scheme == EqScheme::pairwise_trapezoid) {
        pairwise_rows(pop, eq);
        continue;
      }
      if (p.domain.dims == 1) {
        for (int i = 1; i + 1 < g.nx; ++i) {
          Polynomial h = eq.lhs.substitute(interior_subs(i, 0), nvars) -
                         Polynomial::constant(nvars, eq.rhs ? eq.rhs(g.x(i), 0.0) : 0.0);
          pop.eq_constraints.push_back(std::move(h));
          pop.eq_labels.push_back(eq.label + "@" + std::to_string(i));
        }
      } else {
        for (int j = 1; j + 1 < g.ny; ++j)
          for (int i = 1; i + 1 < g.nx; ++i) {
            Polynomial h = eq.lhs.substitute(interior_subs(i, j), nvars) -
                           Polynomial::constant(nvars, eq.rhs ? eq.rhs(g.x(i), g.y(j)) : 0.0);
            pop.eq_constraints.push_back(std::move(h));
            pop.eq_labels.push_back(eq.label + "@" + node_name(i, j));
          }
      }
    }

    // Corners belong to the left/right faces; bottom/top cover the rest.
    for (const auto& eq : p.boundary) {
      switch (eq.face) {
        case Face::left:
          for (int j = 0; j < g.ny; ++j) boundary_row(pop, eq, 0, j);
          break;
        case Face::right:
          for (int j = 0; j < g.ny; ++j) boundary_row(pop, eq, g.nx - 1, j);
          break;
        case Face::bottom:
          if (p.domain.dims != 2) throw StructuralError("bottom face needs a 2-D domain");
          for (int i = 1; i + 1 < g.nx; ++i) boundary_row(pop, eq, i, 0);
          break;
        case Face::top:
          if (p.domain.dims != 2) throw StructuralError("top face needs a 2-D domain");
          for (int i = 1; i + 1 < g.nx; ++i) boundary_row(pop, eq, i, g.ny - 1);
          break;
      }
    }

    objective_into(pop);
    pop.validate();
    return pop;
  }
};

}  // namespace

POPInstance transcribe(const DiffProblem& p, const Grid& g) {
  p.validate();
  if (p.domain.dims != g.domain.dims) throw StructuralError("grid/problem dimension mismatch");
  return Transcriber(p, g).run();
}

double residual(const DiffProblem& p, const Grid& g, const GridFunction& u,
                const std::vector<double>& scalars) {
  u.validate();
  if (u.unknowns() != p.unknowns) throw StructuralError("grid function unknown count mismatch");
  if (static_cast<int>(scalars.size()) != static_cast<int>(p.scalar_names.size()))
    throw StructuralError("residual needs a value for every extra scalar");
  POPInstance pop = transcribe(p, g);
  std::vector<double> x(pop.nvars, 0.0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      for (int k = 0; k < p.unknowns; ++k)
        x[pop_var_index(g, p.unknowns, k, i, j)] = u.at(k, i, j);
  for (std::size_t s = 0; s < scalars.size(); ++s) x[g.nodes() * p.unknowns + s] = scalars[s];
  double worst = 0.0;
  for (const auto& h : pop.eq_constraints) worst = std::max(worst, std::fabs(h.evaluate(x)));
  return worst;
}

}  // namespace popde
