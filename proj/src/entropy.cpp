#include "popde/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "popde/errors.hpp"
#include "popde/kernels.hpp"

namespace popde {

std::vector<std::pair<int, int>> MomentVector::make_index(int dims, int order) {
  std::vector<std::pair<int, int>> idx;
  if (dims == 1) {
    for (int i = 0; i <= order; ++i) idx.push_back({i, 0});
  } else {
    for (int d = 0; d <= order; ++d)
      for (int i = d; i >= 0; --i) idx.push_back({i, d - i});
  }
  return idx;
}

int MomentVector::find(int i, int j) const {
  for (std::size_t k = 0; k < index.size(); ++k)
    if (index[k] == std::make_pair(i, j)) return static_cast<int>(k);
  return -1;
}

double MomentVector::value(int i, int j) const {
  int k = find(i, j);
  if (k < 0) throw LookupError("moment index out of range");
  return values[k];
}

void MomentVector::validate() const {
  if (dims != 1 && dims != 2) throw StructuralError("moment vector dims must be 1 or 2");
  std::size_t expect = dims == 1 ? order + 1 : (order + 1) * (order + 2) / 2;
  if (index.size() != expect || values.size() != expect)
    throw StructuralError("moment vector has the wrong entry count");
  if (!(values[0] > 0.0)) throw NumericError("moment vector needs positive total mass m_0");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("moment vector holds a non-finite value");
}

MomentVector discrete_moments(const GridFunction& u, int unknown, int order,
                              MomentWeights weights) {
  u.validate();
  if (order < 0) throw ParameterError("moment order must be nonnegative");
  if (unknown < 0 || unknown >= u.unknowns())
    throw StructuralError("discrete_moments unknown index out of range");
  const Grid& g = u.grid;
  for (double v : u.values[unknown])
    if (v < 0.0)
      throw NumericError(
          "discrete moments need a nonnegative grid function; shift the problem first "
          "(u_tilde = u - lbd)");

  MomentVector m;
  m.dims = g.domain.dims;
  m.order = order;
  m.domain = g.domain;
  m.index = MomentVector::make_index(m.dims, order);
  m.values.assign(m.index.size(), 0.0);

  double dx = g.dx();
  double dy = m.dims == 2 ? g.dy() : 1.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      double wgt = dx * dy;
      if (weights == MomentWeights::trapezoid) {
        if (i == 0 || i == g.nx - 1) wgt *= 0.5;
        if (m.dims == 2 && (j == 0 || j == g.ny - 1)) wgt *= 0.5;
      }
      double uval = u.at(unknown, i, j) * wgt;
      double xs = g.x(i), ys = g.y(j);
      for (std::size_t k = 0; k < m.index.size(); ++k) {
        auto [a, b] = m.index[k];
        double t = uval;
        for (int e = 0; e < a; ++e) t *= xs;
        for (int e = 0; e < b; ++e) t *= ys;
        m.values[k] += t;
      }
    }
  return m;
}

namespace {

struct Quadrature {
  std::vector<double> weights;               // per node
  std::vector<std::vector<double>> basis;    // [moment index][node]
  int nodes = 0;
};

Quadrature build_quadrature(int dims, const std::vector<std::pair<int, int>>& index,
                            int points_per_dim) {
  int q = points_per_dim > 0 ? points_per_dim : (dims == 1 ? 2001 : 201);
  if (q < 2) throw ParameterError("quadrature needs at least two points per axis");
  Quadrature quad;
  double h = 1.0 / (q - 1);
  if (dims == 1) {
    quad.nodes = q;
    quad.weights.resize(q);
    for (int i = 0; i < q; ++i) quad.weights[i] = (i == 0 || i == q - 1) ? h / 2 : h;
    quad.basis.assign(index.size(), std::vector<double>(q));
    for (std::size_t k = 0; k < index.size(); ++k)
      for (int i = 0; i < q; ++i) quad.basis[k][i] = std::pow(i * h, index[k].first);
  } else {
    quad.nodes = q * q;
    quad.weights.resize(quad.nodes);
    std::vector<double> w1(q);
    for (int i = 0; i < q; ++i) w1[i] = (i == 0 || i == q - 1) ? h / 2 : h;
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < q; ++i) quad.weights[j * q + i] = w1[i] * w1[j];
    quad.basis.assign(index.size(), std::vector<double>(quad.nodes));
    for (std::size_t k = 0; k < index.size(); ++k) {
      auto [a, b] = index[k];
      for (int j = 0; j < q; ++j) {
        double yb = std::pow(j * h, b);
        for (int i = 0; i < q; ++i)
          quad.basis[k][j * q + i] = std::pow(i * h, a) * yb;
      }
    }
  }
  return quad;
}

// density values w_q = exp(sum_k v_k phi_k(x_q)) via the simd kernels
void density(const Quadrature& quad, std::span<const double> v, std::vector<double>& expo,
             std::vector<double>& w) {
  expo.assign(quad.nodes, 0.0);
  for (std::size_t k = 0; k < quad.basis.size(); ++k)
    if (v[k] != 0.0) kernels::axpy(expo.data(), v[k], quad.basis[k].data(), quad.nodes);
  w.resize(quad.nodes);
  kernels::vexp(expo.data(), w.data(), quad.nodes);
}

}  // namespace

DualState maxent_dual_state(const MomentVector& m, std::span<const double> v,
                            int points_per_dim) {
  m.validate();
  if (v.size() != m.index.size()) throw StructuralError("dual point size mismatch");
  Quadrature quad = build_quadrature(m.dims, m.index, points_per_dim);
  std::vector<double> expo, w;
  density(quad, v, expo, w);
  std::vector<double> ww(quad.nodes);
  for (int i = 0; i < quad.nodes; ++i) ww[i] = w[i] * quad.weights[i];

  DualState st;
  int K = m.count();
  double mass = 0.0;
  for (int i = 0; i < quad.nodes; ++i) mass += ww[i];
  st.objective = -mass;
  st.gradient.resize(K);
  for (int k = 0; k < K; ++k) {
    st.objective += m.values[k] * v[k];
    st.gradient[k] =
        m.values[k] - kernels::dot(quad.basis[k].data(), ww.data(), quad.nodes);
  }
  st.hessian.assign(K, std::vector<double>(K));
  for (int a = 0; a < K; ++a)
    for (int b = a; b < K; ++b) {
      double hab =
          -kernels::dot3(quad.basis[a].data(), quad.basis[b].data(), ww.data(), quad.nodes);
      st.hessian[a][b] = st.hessian[b][a] = hab;
    }
  return st;
}

EntropyEstimate maxent_fit(const MomentVector& m, const MaxentSettings& st) {
  m.validate();
  if (!m.domain.is_unit())
    throw ParameterError("maxent_fit needs the domain scaled to the unit box");

  int K = m.count();
  Quadrature quad = build_quadrature(m.dims, m.index, st.points_per_dim);

  EntropyEstimate est;
  est.dims = m.dims;
  est.order = m.order;
  est.domain = m.domain;
  est.index = m.index;
  est.eval_exponent_cap = st.eval_exponent_cap;
  est.v.assign(K, 0.0);
  est.v[0] = std::log(m.values[0]);  // matches total mass on the unit box

  std::vector<double> expo, w, ww(quad.nodes);
  Eigen::VectorXd g(K);
  Eigen::MatrixXd G(K, K);

  auto dual_value = [&](std::span<const double> v) {
    density(quad, v, expo, w);
    double mass = 0.0;
    for (int i = 0; i < quad.nodes; ++i) mass += w[i] * quad.weights[i];
    double val = -mass;
    for (int k = 0; k < K; ++k) val += m.values[k] * v[k];
    return val;
  };

  double best_grad = std::numeric_limits<double>::infinity();
  std::vector<double> best_v = est.v;
  double fv = dual_value(est.v);
  int it = 0;
  for (; it < st.max_iter; ++it) {
    // w already holds the density at est.v from the last dual_value call
    for (int i = 0; i < quad.nodes; ++i) ww[i] = w[i] * quad.weights[i];
    for (int k = 0; k < K; ++k)
      g[k] = m.values[k] - kernels::dot(quad.basis[k].data(), ww.data(), quad.nodes);
    double gnorm = g.lpNorm<Eigen::Infinity>();
    if (st.log)
      (*st.log) << "maxent iter " << it << " dual " << fv << " grad " << gnorm << "\n";
    if (gnorm < best_grad) {
      best_grad = gnorm;
      best_v = est.v;
    }
    if (gnorm <= st.tol_grad) break;

    // Gram matrix of the current density (= minus the dual Hessian)
    for (int a = 0; a < K; ++a)
      for (int b = a; b < K; ++b)
        G(a, b) = G(b, a) =
            kernels::dot3(quad.basis[a].data(), quad.basis[b].data(), ww.data(), quad.nodes);

    Eigen::VectorXd d;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
      d = ldlt.solve(g);
      ok = d.allFinite() && d.dot(g) > 0;
    }
    if (!ok) {
      // ill-conditioned Gram (high orders): eigenvalue-filtered pseudoinverse
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
      Eigen::VectorXd lam = eig.eigenvalues();
      double cut = std::max(lam.maxCoeff(), 0.0) * 1e-14 + 1e-300;
      Eigen::VectorXd inv = lam.unaryExpr([&](double l) { return l > cut ? 1.0 / l : 0.0; });
      d = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * g;
    }

    double slope = d.dot(g);
    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> trial(K);
    for (int ls = 0; ls < 60; ++ls) {
      for (int k = 0; k < K; ++k) trial[k] = est.v[k] + alpha * d[k];
      double ft = dual_value(trial);
      if (std::isfinite(ft) && ft >= fv + 1e-4 * alpha * slope) {
        est.v = trial;
        fv = ft;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }
  est.iterations = it;
  if (best_grad <= st.tol_grad) {
    est.converged = true;
  } else {
    est.v = best_v;
  }
  est.grad_norm = best_grad;
  return est;
}

double EntropyEstimate::exponent(double x, double y) const {
  double e = 0.0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    auto [a, b] = index[k];
    double t = v[k];
    for (int q = 0; q < a; ++q) t *= x;
    for (int q = 0; q < b; ++q) t *= y;
    e += t;
  }
  return e;
}

EstimateValues evaluate_estimate(const EntropyEstimate& e,
                                 std::span<const std::array<double, 2>> pts) {
  EstimateValues out;
  out.values.reserve(pts.size());
  for (const auto& p : pts) {
    double expo = e.exponent(p[0], p[1]);
    if (expo > e.eval_exponent_cap) {
      expo = e.eval_exponent_cap;
      out.cap_hit = true;
    }
    out.values.push_back(std::exp(expo));
  }
  return out;
}

MomentVector estimate_moments(const EntropyEstimate& e, int order, int points_per_dim) {
  MomentVector m;
  m.dims = e.dims;
  m.order = order;
  m.domain = e.domain;
  m.index = MomentVector::make_index(e.dims, order);
  m.values.assign(m.index.size(), 0.0);

  Quadrature quad = build_quadrature(e.dims, m.index, points_per_dim);
  // evaluate the density on the quadrature grid through the same basis
  // machinery (the estimate's own index may differ from the moment index)
  Quadrature eq = build_quadrature(e.dims, e.index, points_per_dim);
  std::vector<double> expo, w;
  density(eq, e.v, expo, w);
  for (std::size_t k = 0; k < m.index.size(); ++k) {
    double acc = kernels::dot3(quad.basis[k].data(), w.data(), quad.weights.data(),
                               quad.nodes);
    m.values[k] = acc;
  }
  return m;
}

ErrorReport error_metrics(const Grid& grid, std::span<const double> reference,
                          const EntropyEstimate& e) {
  if (static_cast<int>(reference.size()) != grid.nodes())
    throw StructuralError("error_metrics reference size mismatch");
  ErrorReport rep;
  double wgt = grid.dx() * (grid.domain.dims == 2 ? grid.dy() : 1.0);
  rep.differences.resize(grid.nodes());
  double sum = 0.0;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      int node = grid.node(i, j);
      double expo = e.exponent(grid.x(i), grid.y(j));
      if (expo > e.eval_exponent_cap) expo = e.eval_exponent_cap;
      double diff = reference[node] - std::exp(expo);
      rep.differences[node] = diff;
      sum += diff;
      rep.max_error = std::max(rep.max_error, std::fabs(diff));
    }
  rep.avg_error = wgt * sum;
  return rep;
}

}  // namespace popde
