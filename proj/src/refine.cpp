#include "popde/refine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "popde/errors.hpp"

namespace popde {

namespace {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

// constraint with precomputed first and second derivative polynomials
struct Compiled {
  Polynomial h;
  std::vector<int> vars;
  std::vector<Polynomial> grad;
  std::vector<std::pair<std::pair<int, int>, Polynomial>> hess;  // slot pairs
};

Compiled compile(const Polynomial& h) {
  Compiled c;
  c.h = h;
  auto sup = h.support_vars();
  c.vars.assign(sup.begin(), sup.end());
  for (int v : c.vars) c.grad.push_back(h.derivative(v));
  for (std::size_t a = 0; a < c.vars.size(); ++a)
    for (std::size_t b = a; b < c.vars.size(); ++b) {
      Polynomial dd = c.grad[a].derivative(c.vars[b]);
      if (!dd.is_zero()) c.hess.push_back({{static_cast<int>(a), static_cast<int>(b)}, dd});
    }
  return c;
}

double eval_vec(const VectorXd& v, const Polynomial& p) {
  return p.evaluate(std::span<const double>(v.data(), v.size()));
}

struct Shared {
  const POPInstance& pop;
  const RefineSettings& st;
  int n, m;
  Compiled obj;
  std::vector<Compiled> eqs;       // row-normalized constraints
  std::vector<double> row_scale;   // original = scaled * row_scale

  explicit Shared(const POPInstance& p, const RefineSettings& s)
      : pop(p), st(s), n(p.nvars), m(static_cast<int>(p.eq_constraints.size())) {
    obj = compile(p.objective);
    row_scale.assign(m, 1.0);
    for (int i = 0; i < m; ++i) {
      double cmax = 0.0;
      for (const auto& [mon, c] : p.eq_constraints[i].terms())
        cmax = std::max(cmax, std::fabs(c));
      row_scale[i] = cmax > 0 ? cmax : 1.0;
      eqs.push_back(compile(p.eq_constraints[i] * (1.0 / row_scale[i])));
    }
  }

  void residuals(const VectorXd& x, VectorXd& h) const {
    for (int i = 0; i < m; ++i) {
      h[i] = eval_vec(x, eqs[i].h);
      if (!std::isfinite(h[i])) throw NumericError("non-finite constraint value in refine");
    }
  }

  double raw_violation(const VectorXd& x) const {
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
      worst = std::max(worst, std::fabs(eval_vec(x, eqs[i].h)) * row_scale[i]);
    return worst;
  }

  void jacobian(const VectorXd& x, std::vector<Eigen::Triplet<double>>& jt) const {
    jt.clear();
    for (int i = 0; i < m; ++i)
      for (std::size_t a = 0; a < eqs[i].vars.size(); ++a)
        jt.emplace_back(i, eqs[i].vars[a], eval_vec(x, eqs[i].grad[a]));
  }

  VectorXd clamp(const VectorXd& x) const {
    VectorXd y = x;
    for (int s = 0; s < n; ++s) y[s] = std::clamp(y[s], pop.lo[s], pop.hi[s]);
    return y;
  }
};

// Kuhn matching: one distinct variable per equality, so restoration can run
// on a square subsystem with everything else frozen.
std::vector<int> match_one_var_per_equality(const Shared& sh) {
  int n = sh.n, m = sh.m;
  std::vector<int> var_of_eq(m, -1), eq_of_var(n, -1);
  std::vector<char> visited(n, 0);
  std::function<bool(int)> try_assign = [&](int eq) -> bool {
    for (int v : sh.eqs[eq].vars) {
      if (visited[v]) continue;
      visited[v] = 1;
      if (eq_of_var[v] < 0 || try_assign(eq_of_var[v])) {
        eq_of_var[v] = eq;
        var_of_eq[eq] = v;
        return true;
      }
    }
    return false;
  };
  for (int eq = 0; eq < m; ++eq) {
    std::fill(visited.begin(), visited.end(), 0);
    if (!try_assign(eq)) return {};  // structurally deficient
  }
  return var_of_eq;
}

// Square and overdetermined systems: projected Levenberg Gauss-Newton on
// (1/2)||h(x)||^2 over the movable variables (all by default). The objective
// already did its work selecting the branch through the relaxation;
// feasibility is the whole job here.
void feasibility_newton(const Shared& sh, VectorXd& x, int& iters, int budget,
                        const std::vector<char>* movable = nullptr) {
  const int n = sh.n, m = sh.m;
  VectorXd h(m);
  std::vector<Eigen::Triplet<double>> jt;
  double lambda = 1e-10;
  int flat = 0;
  double prev_phi = std::numeric_limits<double>::infinity();

  for (; iters < budget; ++iters) {
    sh.residuals(x, h);
    double phi = 0.5 * h.squaredNorm();
    if (sh.raw_violation(x) <= sh.st.tol_eq) return;
    // progress stall at the numerical floor
    if (phi >= prev_phi * (1.0 - 1e-6)) {
      if (++flat >= 3) return;
    } else {
      flat = 0;
    }
    prev_phi = phi;

    sh.jacobian(x, jt);
    if (movable) {
      jt.erase(std::remove_if(jt.begin(), jt.end(),
                              [&](const auto& t) { return !(*movable)[t.col()]; }),
               jt.end());
    }
    SpMat J(m, n);
    J.setFromTriplets(jt.begin(), jt.end());
    VectorXd grad = J.transpose() * h;
    if (sh.st.log)
      (*sh.st.log) << "refine gn iter " << iters << " viol " << sh.raw_violation(x) << " phi "
                   << phi << " lambda " << lambda << "\n";

    SpMat H = SpMat(J.transpose()) * J;
    bool stepped = false;
    for (int attempt = 0; attempt < 20 && !stepped; ++attempt) {
      SpMat Hr = H;
      for (int s = 0; s < n; ++s) Hr.coeffRef(s, s) += lambda + 1e-16;
      Eigen::SimplicialLDLT<SpMat> ldlt(Hr);
      if (ldlt.info() == Eigen::Success) {
        VectorXd d = ldlt.solve(-grad);
        // one refinement sweep against the damped normal equations
        d += ldlt.solve(-grad - Hr.selfadjointView<Eigen::Lower>() * d);
        if (d.allFinite()) {
          double alpha = 1.0;
          for (int ls = 0; ls < 30; ++ls) {
            VectorXd xt = sh.clamp(x + alpha * d);
            VectorXd ht(m);
            sh.residuals(xt, ht);
            double phit = 0.5 * ht.squaredNorm();
            if (phit < phi * (1.0 - 1e-12)) {
              x = xt;
              stepped = true;
              lambda = std::max(lambda * 0.25, 1e-14);
              break;
            }
            alpha *= 0.5;
          }
        }
      }
      if (!stepped) lambda = std::max(lambda * 10.0, 1e-10);
    }
    if (!stepped) return;  // numerical floor
  }
}

// Underdetermined problems: augmented Lagrangian with first-order multiplier
// warm start and bound-projected Newton inner steps.
void augmented_lagrangian(const Shared& sh, VectorXd& x, int& iters, int budget,
                          double* objective_out) {
  const int n = sh.n, m = sh.m;
  VectorXd h(m);
  sh.residuals(x, h);

  VectorXd psi = VectorXd::Zero(m);
  {
    std::vector<Eigen::Triplet<double>> jt;
    sh.jacobian(x, jt);
    SpMat J(m, n);
    J.setFromTriplets(jt.begin(), jt.end());
    VectorXd g0 = VectorXd::Zero(n);
    for (std::size_t a = 0; a < sh.obj.vars.size(); ++a)
      g0[sh.obj.vars[a]] += eval_vec(x, sh.obj.grad[a]);
    SpMat JJt = (J * SpMat(J.transpose())).pruned();
    for (int i = 0; i < m; ++i) JJt.coeffRef(i, i) += 1e-10;
    Eigen::SimplicialLDLT<SpMat> ldlt(JJt);
    if (ldlt.info() == Eigen::Success) {
      VectorXd cand = ldlt.solve(-(J * g0));
      if (cand.allFinite()) psi = cand;
    }
  }

  double f0 = eval_vec(x, sh.obj.h);
  double rho =
      std::clamp(10.0 * std::max(1.0, std::fabs(f0)) / std::max(1.0, 0.5 * h.squaredNorm()),
                 10.0, 1e6);

  auto merit = [&](const VectorXd& v) {
    VectorXd hv(m);
    sh.residuals(v, hv);
    return eval_vec(v, sh.obj.h) + psi.dot(hv) + 0.5 * rho * hv.squaredNorm();
  };

  // classic multiplier-method schedule: the inner stationarity target omega
  // and the feasibility target eta tighten together; rho grows only when
  // feasibility misses its target
  double omega = 1e-2;
  double eta = std::max(1e-2, h.lpNorm<Eigen::Infinity>() * 0.1);
  const double edge = 1e-12;
  for (int outer = 0; outer < 200 && iters < budget; ++outer) {
    bool stationary = false;
    double prev_merit = std::numeric_limits<double>::infinity();
    int flat = 0;
    for (int inner = 0; inner < 60 && iters < budget; ++inner, ++iters) {
      sh.residuals(x, h);
      VectorXd w = psi + rho * h;

      VectorXd grad = VectorXd::Zero(n);
      for (std::size_t a = 0; a < sh.obj.vars.size(); ++a)
        grad[sh.obj.vars[a]] += eval_vec(x, sh.obj.grad[a]);
      std::vector<Eigen::Triplet<double>> trips;
      for (const auto& [ab, dd] : sh.obj.hess) {
        int va = sh.obj.vars[ab.first], vb = sh.obj.vars[ab.second];
        double v = eval_vec(x, dd);
        trips.emplace_back(va, vb, v);
        if (va != vb) trips.emplace_back(vb, va, v);
      }
      for (int i = 0; i < m; ++i) {
        const Compiled& c = sh.eqs[i];
        std::vector<double> g(c.vars.size());
        for (std::size_t a = 0; a < c.vars.size(); ++a) {
          g[a] = eval_vec(x, c.grad[a]);
          grad[c.vars[a]] += w[i] * g[a];
        }
        for (std::size_t a = 0; a < c.vars.size(); ++a)
          for (std::size_t b = 0; b < c.vars.size(); ++b)
            trips.emplace_back(c.vars[a], c.vars[b], rho * g[a] * g[b]);
        for (const auto& [ab, dd] : c.hess) {
          int va = c.vars[ab.first], vb = c.vars[ab.second];
          double v = w[i] * eval_vec(x, dd);
          trips.emplace_back(va, vb, v);
          if (va != vb) trips.emplace_back(vb, va, v);
        }
      }

      auto active_sets = [&](std::vector<int>& free_of, std::vector<int>& free_list) {
        free_list.clear();
        free_of.assign(n, -1);
        for (int s = 0; s < n; ++s) {
          bool at_lo = x[s] <= sh.pop.lo[s] + edge * (1 + std::fabs(sh.pop.lo[s]));
          bool at_hi = x[s] >= sh.pop.hi[s] - edge * (1 + std::fabs(sh.pop.hi[s]));
          if ((at_lo && grad[s] > 0) || (at_hi && grad[s] < 0)) continue;
          free_of[s] = static_cast<int>(free_list.size());
          free_list.push_back(s);
        }
      };
      std::vector<int> free_of, free_list;
      active_sets(free_of, free_list);

      double pg = 0.0;
      for (int s = 0; s < n; ++s)
        pg = std::max(pg,
                      std::fabs(std::clamp(x[s] - grad[s], sh.pop.lo[s], sh.pop.hi[s]) - x[s]));
      double viol = h.lpNorm<Eigen::Infinity>();
      double gscale = 1.0 + std::fabs(f0);
      if (sh.st.log)
        (*sh.st.log) << "refine al outer " << outer << " inner " << inner << " viol " << viol
                     << " pg " << pg << " rho " << rho << " omega " << omega << " free "
                     << free_list.size() << "\n";
      if (pg <= std::max(omega, sh.st.tol_step) * gscale || free_list.empty()) {
        stationary = true;
        break;
      }

      // Cauchy phase: bulk active-set identification by projected gradient
      if (static_cast<int>(free_list.size()) < n) {
        double phi_here = merit(x);
        double gn = grad.norm();
        double t = gn > 0 ? pg / gn : 0.0;
        for (int ls = 0; ls < 20 && t > 0; ++ls) {
          VectorXd xc = sh.clamp(x - t * grad);
          double decrease = grad.dot(x - xc);
          if (decrease <= 0) break;
          if (merit(xc) <= phi_here - 1e-4 * decrease) {
            x = xc;
            sh.residuals(x, h);
            w = psi + rho * h;
            grad.setZero();
            for (std::size_t a = 0; a < sh.obj.vars.size(); ++a)
              grad[sh.obj.vars[a]] += eval_vec(x, sh.obj.grad[a]);
            for (int i = 0; i < m; ++i)
              for (std::size_t a = 0; a < sh.eqs[i].vars.size(); ++a)
                grad[sh.eqs[i].vars[a]] += w[i] * eval_vec(x, sh.eqs[i].grad[a]);
            active_sets(free_of, free_list);
            break;
          }
          t *= 0.25;
        }
        if (free_list.empty()) {
          stationary = true;
          break;
        }
      }

      int nf = static_cast<int>(free_list.size());
      std::vector<Eigen::Triplet<double>> ftrips;
      for (const auto& t : trips) {
        int fa = free_of[t.row()], fb = free_of[t.col()];
        if (fa >= 0 && fb >= 0) ftrips.emplace_back(fa, fb, t.value());
      }
      VectorXd fgrad(nf);
      for (int k = 0; k < nf; ++k) fgrad[k] = grad[free_list[k]];
      SpMat H(nf, nf);
      H.setFromTriplets(ftrips.begin(), ftrips.end());

      double tau = 1e-10;
      VectorXd d;
      for (int attempt = 0; attempt < 12; ++attempt) {
        SpMat Hr = H;
        for (int k = 0; k < nf; ++k) Hr.coeffRef(k, k) += tau;
        Eigen::SimplicialLDLT<SpMat> ldlt(Hr);
        if (ldlt.info() == Eigen::Success) {
          d = ldlt.solve(-fgrad);
          if (d.allFinite() && d.dot(fgrad) < 0) break;
        }
        tau = std::max(tau * 100, 1e-8);
        d.resize(0);
      }
      if (d.size() == 0) d = -fgrad;

      double phi0 = merit(x);
      double slope = d.dot(fgrad);
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        VectorXd xt = x;
        for (int k = 0; k < nf; ++k) {
          int s = free_list[k];
          xt[s] = std::clamp(x[s] + alpha * d[k], sh.pop.lo[s], sh.pop.hi[s]);
        }
        double phit = merit(xt);
        if (phit <= phi0 + 1e-4 * alpha * slope || phit < phi0 - 1e-16 * std::fabs(phi0)) {
          x = xt;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        stationary = true;
        break;
      }
      double phinew = merit(x);
      if (phinew >= prev_merit - 1e-13 * (1.0 + std::fabs(prev_merit))) {
        if (++flat >= 2) {
          stationary = true;
          break;
        }
      } else {
        flat = 0;
      }
      prev_merit = phinew;
    }

    sh.residuals(x, h);
    double viol = h.lpNorm<Eigen::Infinity>();
    double raw = sh.raw_violation(x);
    if (sh.st.log)
      (*sh.st.log) << "refine al outer " << outer << " done viol " << viol << " raw " << raw
                   << " eta " << eta << "\n";
    if (raw <= sh.st.tol_eq && stationary && omega <= sh.st.tol_step * 10) break;
    if (viol <= eta || raw <= sh.st.tol_eq) {
      psi += rho * h;
      eta = std::max(eta * 0.2, 1e-16);
      omega = std::max(omega * 0.2, sh.st.tol_step);
    } else {
      rho *= 10.0;
      eta = std::max(viol * 0.5, 1e-16);
    }
    if (rho > 1e14) break;
  }
  *objective_out = eval_vec(x, sh.obj.h);
}

}  // namespace

RefineResult refine(const POPInstance& pop, std::vector<double> x0,
                    const RefineSettings& st) {
  pop.validate();
  int n = pop.nvars;
  int m = static_cast<int>(pop.eq_constraints.size());
  if (static_cast<int>(x0.size()) != n) throw StructuralError("refine start point size mismatch");

  Shared sh(pop, st);
  VectorXd x(n);
  for (int s = 0; s < n; ++s) {
    if (!std::isfinite(x0[s])) throw NumericError("refine start point holds a non-finite value");
    x[s] = std::clamp(x0[s], pop.lo[s], pop.hi[s]);
  }

  RefineResult res;
  res.max_eq_violation = sh.raw_violation(x);
  res.objective = eval_vec(x, sh.obj.h);

  // already a solution of a square (or overdetermined) discretized system
  if (res.max_eq_violation <= st.tol_eq && m >= n) {
    res.x.assign(x.data(), x.data() + n);
    res.converged = true;
    return res;
  }

  int iters = 0;
  if (m >= n) {
    feasibility_newton(sh, x, iters, st.max_iter);
    res.objective = eval_vec(x, sh.obj.h);
  } else {
    // restoration first: solve the square subsystem given by a variable
    // matching (states given controls, for transcribed dynamics) so the
    // augmented Lagrangian starts from a feasible point with meaningful
    // multiplier estimates
    std::vector<int> matched = match_one_var_per_equality(sh);
    if (!matched.empty()) {
      std::vector<char> movable(n, 0);
      for (int v : matched) movable[v] = 1;
      feasibility_newton(sh, x, iters, st.max_iter / 4, &movable);
    }
    if (sh.raw_violation(x) > st.tol_eq)
      feasibility_newton(sh, x, iters, st.max_iter / 4);
    augmented_lagrangian(sh, x, iters, st.max_iter, &res.objective);
  }

  res.x.assign(x.data(), x.data() + n);
  res.iterations = iters;
  res.max_eq_violation = sh.raw_violation(x);
  res.converged = res.max_eq_violation <= st.tol_eq;
  return res;
}

double constraint_jacobian_check(const POPInstance& pop, const std::vector<double>& x) {
  pop.validate();
  if (static_cast<int>(x.size()) != pop.nvars)
    throw StructuralError("jacobian check point size mismatch");
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("jacobian check at non-finite point");

  double worst = 0.0;
  std::vector<double> xp(x), xm(x);
  for (const auto& h : pop.eq_constraints) {
    for (int s : h.support_vars()) {
      double step = 1e-6 * (1.0 + std::fabs(x[s]));
      xp[s] = x[s] + step;
      xm[s] = x[s] - step;
      double fd = (h.evaluate(xp) - h.evaluate(xm)) / (2.0 * step);
      xp[s] = x[s];
      xm[s] = x[s];
      double an = h.derivative(s).evaluate(x);
      double dev = std::fabs(fd - an) / std::max(1.0, std::fabs(an));
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

}  // namespace popde
