#include "popde/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "popde/errors.hpp"

namespace popde {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct BlockData {
  int dim = 0;
  double scale = 1.0;   // block divided by this before solving
  MatrixXd constant;    // scaled C_t
  // entries grouped as (row, col, y, coeff), row <= col, already scaled
  std::vector<SdpBlockEntry> var_entries;
  std::vector<int> local_y;              // distinct y's in this block
  std::vector<int> entry_local;          // var_entries -> local_y slot
};

struct Work {
  // scaled problem data
  int ny = 0, me = 0, nb = 0;
  VectorXd c;
  double obj_scale = 1.0;
  SpMat A;        // me x ny, row-scaled
  VectorXd b;
  std::vector<BlockData> blocks;
  std::vector<int> box_idx;
  VectorXd lo, hi;

  // iterates
  VectorXd y, nu, lam, mu;
  std::vector<MatrixXd> S, X;

  // per-iteration scratch
  std::vector<MatrixXd> Winv, Sinv, R;
  VectorXd p, q;  // box slacks
};

MatrixXd assemble_block(const BlockData& bd, const VectorXd& y) {
  MatrixXd M = bd.constant;
  for (const auto& e : bd.var_entries) {
    double v = e.coeff * y[e.y];
    M(e.row, e.col) += v;
    if (e.row != e.col) M(e.col, e.row) += v;
  }
  return M;
}

// adjoint: < A_{t,s}, M > accumulated into out over the block's y's
void block_adjoint(const BlockData& bd, const MatrixXd& M, VectorXd& out, double sign) {
  for (const auto& e : bd.var_entries) {
    double v = e.row == e.col ? M(e.row, e.col) : 2.0 * M(e.row, e.col);
    out[e.y] += sign * e.coeff * v;
  }
}

double max_step_psd(const MatrixXd& S, const MatrixXd& dS) {
  // largest alpha with S + alpha dS PSD, via lambda_min of Ls^-1 dS Ls^-T
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd L = llt.matrixL();
  MatrixXd G = L.triangularView<Eigen::Lower>().solve(dS);
  G = L.triangularView<Eigen::Lower>().solve(G.transpose()).transpose();
  // G is symmetric up to round-off
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig((G + G.transpose()) * 0.5);
  double lmin = eig.eigenvalues().minCoeff();
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

struct KktSolver {
  SpMat M;  // (ny+me) x (ny+me), upper triangle
  Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt;
  std::vector<std::vector<int>> block_slots;  // per block: slot per local pair (i<=j)
  std::vector<int> diag_slots;                // ny diagonal slots
  std::vector<int> h_slots;                   // every slot written per iteration
  double delta = 1e-10;                       // dual regularization magnitude
  int tail = 0;                               // number of equality rows
  bool analyzed = false;

  // Builds the fixed sparsity pattern: H-pattern from block local pairs,
  // diagonal, and A in the off-diagonal corner with -delta I at the bottom.
  void setup(const Work& w) {
    int n = w.ny, m = w.me;
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 0.0);
    for (const auto& bd : w.blocks)
      for (std::size_t a = 0; a < bd.local_y.size(); ++a)
        for (std::size_t b = a; b < bd.local_y.size(); ++b) {
          int i = bd.local_y[a], j = bd.local_y[b];
          trips.emplace_back(std::min(i, j), std::max(i, j), 0.0);
        }
    for (int k = 0; k < w.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(w.A, k); it; ++it)
        trips.emplace_back(it.col(), n + it.row(), 0.0);  // upper triangle storage
    for (int r = 0; r < m; ++r) trips.emplace_back(n + r, n + r, 0.0);

    M.resize(n + m, n + m);
    M.setFromTriplets(trips.begin(), trips.end());
    M.makeCompressed();

    auto slot_of = [&](int row, int col) {
      for (SpMat::InnerIterator it(M, col); it; ++it)
        if (it.row() == row) return static_cast<int>(&it.valueRef() - M.valuePtr());
      throw StructuralError("kkt slot lookup failed");
    };
    diag_slots.resize(n);
    for (int i = 0; i < n; ++i) diag_slots[i] = slot_of(i, i);
    block_slots.clear();
    for (const auto& bd : w.blocks) {
      std::vector<int> slots;
      slots.reserve(bd.local_y.size() * (bd.local_y.size() + 1) / 2);
      for (std::size_t a = 0; a < bd.local_y.size(); ++a)
        for (std::size_t b = a; b < bd.local_y.size(); ++b) {
          int i = bd.local_y[a], j = bd.local_y[b];
          slots.push_back(slot_of(std::min(i, j), std::max(i, j)));
        }
      block_slots.push_back(std::move(slots));
    }
    h_slots = diag_slots;
    for (const auto& s : block_slots) h_slots.insert(h_slots.end(), s.begin(), s.end());
    std::sort(h_slots.begin(), h_slots.end());
    h_slots.erase(std::unique(h_slots.begin(), h_slots.end()), h_slots.end());

    // constant A part and regularized saddle diagonal
    for (int k = 0; k < w.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(w.A, k); it; ++it)
        M.valuePtr()[slot_of(it.col(), n + it.row())] = it.value();
    tail = m;
    for (int r = 0; r < m; ++r) M.valuePtr()[slot_of(n + r, n + r)] = -delta;
  }

  // H(y,y') = sum_t <A_y, Winv A_y' Winv> plus the box diagonal.
  void fill(const Work& w, const VectorXd& diag) {
    for (int s : h_slots) M.valuePtr()[s] = 0.0;
    for (int i = 0; i < w.ny; ++i) M.valuePtr()[diag_slots[i]] += diag[i];

    for (std::size_t t = 0; t < w.blocks.size(); ++t) {
      const BlockData& bd = w.blocks[t];
      const MatrixXd& Wi = w.Winv[t];
      int nloc = static_cast<int>(bd.local_y.size());
      MatrixXd G = MatrixXd::Zero(nloc, nloc);
      int ne = static_cast<int>(bd.var_entries.size());
      for (int e1 = 0; e1 < ne; ++e1) {
        const auto& f = bd.var_entries[e1];
        int lf = bd.entry_local[e1];
        for (int e2 = e1; e2 < ne; ++e2) {
          const auto& g = bd.var_entries[e2];
          int lg = bd.entry_local[e2];
          double base = Wi(f.row, g.row) * Wi(f.col, g.col) + Wi(f.row, g.col) * Wi(f.col, g.row);
          double mult;
          if (f.row == f.col && g.row == g.col)
            mult = 0.5 * base;  // = Wi(fr,gr)^2
          else if (f.row == f.col || g.row == g.col)
            mult = base;
          else
            mult = 2.0 * base;
          double v = f.coeff * g.coeff * mult;
          if (e1 == e2) {
            G(lf, lf) += v;
          } else if (lf == lg) {
            G(lf, lf) += 2.0 * v;
          } else {
            G(std::min(lf, lg), std::max(lf, lg)) += v;
          }
        }
      }
      const std::vector<int>& slots = block_slots[t];
      int k = 0;
      for (int a = 0; a < nloc; ++a)
        for (int b = a; b < nloc; ++b) M.valuePtr()[slots[k++]] += G(a, b);
    }
  }

  bool factorize() {
    if (!analyzed) {
      ldlt.analyzePattern(M);
      analyzed = true;
    }
    ldlt.factorize(M);
    return ldlt.info() == Eigen::Success;
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = ldlt.solve(rhs);
    // iterative refinement against the *unregularized* saddle system, the
    // factorized matrix acts as preconditioner; this removes the delta bias
    // from the equality rows (it otherwise floors the primal residual at
    // delta * |nu|). Guarded: a growing residual reverts the sweep.
    double rhs_norm = std::max(1e-300, rhs.lpNorm<Eigen::Infinity>());
    double best_res = std::numeric_limits<double>::infinity();
    VectorXd best_x = x;
    for (int sweep = 0; sweep < 8; ++sweep) {
      VectorXd r = rhs - M.selfadjointView<Eigen::Upper>() * x;
      r.tail(tail) -= delta * x.tail(tail);
      double rn = r.lpNorm<Eigen::Infinity>();
      if (rn < best_res) {
        best_res = rn;
        best_x = x;
      } else {
        break;
      }
      if (rn <= 1e-14 * rhs_norm) break;
      x += ldlt.solve(r);
    }
    return best_x;
  }
};

struct Direction {
  VectorXd dy, dnu, dlam, dmu;
  std::vector<MatrixXd> dS, dX;
};

}  // namespace

ConicSolution solve(const SDPInstance& sdp, const ConicSettings& st) {
  sdp.validate();
  Work w;
  w.ny = sdp.ny;
  w.me = static_cast<int>(sdp.equalities.size());
  w.nb = static_cast<int>(sdp.box_index.size());

  // objective scaling
  double cmax = 0.0;
  for (double v : sdp.c) cmax = std::max(cmax, std::fabs(v));
  w.obj_scale = std::max(1.0, cmax);
  w.c = VectorXd::Zero(w.ny);
  for (int i = 0; i < w.ny; ++i) w.c[i] = sdp.c[i] / w.obj_scale;

  // row-scaled equalities
  {
    std::vector<Eigen::Triplet<double>> trips;
    w.b = VectorXd::Zero(w.me);
    for (int r = 0; r < w.me; ++r) {
      const LinRow& row = sdp.equalities[r];
      double rmax = std::fabs(row.rhs);
      for (auto [i, v] : row.terms) rmax = std::max(rmax, std::fabs(v));
      double s = rmax > 0 ? 1.0 / rmax : 1.0;
      for (auto [i, v] : row.terms) trips.emplace_back(r, i, v * s);
      w.b[r] = row.rhs * s;
    }
    w.A.resize(w.me, w.ny);
    w.A.setFromTriplets(trips.begin(), trips.end());
    w.A.makeCompressed();
  }

  // block data, scaled by the largest coefficient
  for (const auto& blk : sdp.blocks) {
    BlockData bd;
    bd.dim = blk.dim;
    double bmax = 0.0;
    for (const auto& e : blk.entries) bmax = std::max(bmax, std::fabs(e.coeff));
    bd.scale = bmax > 0 ? bmax : 1.0;
    bd.constant = MatrixXd::Zero(blk.dim, blk.dim);
    std::unordered_map<int, int> local;
    for (const auto& e : blk.entries) {
      double v = e.coeff / bd.scale;
      if (e.y < 0) {
        bd.constant(e.row, e.col) += v;
        if (e.row != e.col) bd.constant(e.col, e.row) += v;
      } else {
        SdpBlockEntry se{e.row, e.col, e.y, v};
        auto [it, inserted] = local.try_emplace(e.y, static_cast<int>(bd.local_y.size()));
        if (inserted) bd.local_y.push_back(e.y);
        bd.entry_local.push_back(it->second);
        bd.var_entries.push_back(se);
      }
    }
    w.blocks.push_back(std::move(bd));
  }

  w.box_idx = sdp.box_index;
  w.lo = VectorXd::Zero(w.nb);
  w.hi = VectorXd::Zero(w.nb);
  for (int i = 0; i < w.nb; ++i) {
    w.lo[i] = sdp.box_lo[i];
    w.hi[i] = sdp.box_hi[i];
  }

  // initial point: box midpoints, zero elsewhere; fat slacks
  w.y = VectorXd::Zero(w.ny);
  for (int i = 0; i < w.nb; ++i) w.y[w.box_idx[i]] = 0.5 * (w.lo[i] + w.hi[i]);
  w.nu = VectorXd::Zero(w.me);
  w.lam = VectorXd::Constant(w.nb, 1.0);
  w.mu = VectorXd::Constant(w.nb, 1.0);
  w.S.resize(w.blocks.size());
  w.X.resize(w.blocks.size());
  for (std::size_t t = 0; t < w.blocks.size(); ++t) {
    MatrixXd M0 = assemble_block(w.blocks[t], w.y);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M0);
    double shift = std::max(1.0, -1.5 * eig.eigenvalues().minCoeff() + 1.0);
    w.S[t] = M0 + shift * MatrixXd::Identity(M0.rows(), M0.cols());
    w.X[t] = MatrixXd::Identity(M0.rows(), M0.cols());
  }
  w.p = VectorXd::Zero(w.nb);
  w.q = VectorXd::Zero(w.nb);

  KktSolver kkt;
  kkt.setup(w);

  double total_cone = 2.0 * w.nb;
  for (const auto& bd : w.blocks) total_cone += bd.dim;
  total_cone = std::max(total_cone, 1.0);

  ConicSolution sol;
  w.Winv.resize(w.blocks.size());
  w.Sinv.resize(w.blocks.size());
  w.R.resize(w.blocks.size());

  auto residuals = [&](VectorXd& r_p, VectorXd& r_d, double& pinf, double& dinf,
                       double& gap_rel, double& pobj, double& dobj) {
    r_p = w.b - w.A * w.y;
    pinf = w.me > 0 ? r_p.lpNorm<Eigen::Infinity>() : 0.0;
    for (std::size_t t = 0; t < w.blocks.size(); ++t) {
      w.R[t] = assemble_block(w.blocks[t], w.y) - w.S[t];
      pinf = std::max(pinf, w.R[t].lpNorm<Eigen::Infinity>());
    }
    r_d = w.c - w.A.transpose() * w.nu;
    for (std::size_t t = 0; t < w.blocks.size(); ++t)
      block_adjoint(w.blocks[t], w.X[t], r_d, -1.0);
    for (int i = 0; i < w.nb; ++i) r_d[w.box_idx[i]] -= w.lam[i] - w.mu[i];
    dinf = w.ny > 0 ? r_d.lpNorm<Eigen::Infinity>() : 0.0;
    pobj = w.c.dot(w.y);
    dobj = w.b.dot(w.nu) + w.lam.dot(w.lo) - w.mu.dot(w.hi);
    for (std::size_t t = 0; t < w.blocks.size(); ++t)
      dobj -= (w.blocks[t].constant.array() * w.X[t].array()).sum();
    gap_rel = std::fabs(pobj - dobj) / (1.0 + std::fabs(pobj) + std::fabs(dobj));
  };

  auto complementarity = [&]() {
    double s = 0.0;
    for (std::size_t t = 0; t < w.blocks.size(); ++t)
      s += (w.S[t].array() * w.X[t].array()).sum();
    for (int i = 0; i < w.nb; ++i) {
      w.p[i] = w.y[w.box_idx[i]] - w.lo[i];
      w.q[i] = w.hi[i] - w.y[w.box_idx[i]];
      s += w.lam[i] * w.p[i] + w.mu[i] * w.q[i];
    }
    return s / total_cone;
  };

  VectorXd r_p, r_d;
  double pinf = 0, dinf = 0, gap_rel = 0, pobj = 0, dobj = 0;
  double last_ap = 0.0, last_ad = 0.0;
  int iter = 0;
  double prev_pinf = std::numeric_limits<double>::infinity();
  int stall = 0;

  // best iterate so far, restored when the iteration later degrades
  struct Snapshot {
    bool valid = false;
    double merit = std::numeric_limits<double>::infinity();
    VectorXd y, nu, lam, mu;
    std::vector<MatrixXd> S, X;
    double pobj, dobj, pinf, dinf, gap;
  } snap;
  int no_progress = 0;
  auto merit_of = [&](double pi, double di, double ga) {
    return std::max(pi, di) + 0.1 * ga;
  };

  auto finish = [&](SolveStatus status) {
    if (snap.valid && (status == SolveStatus::max_iter || status == SolveStatus::near_optimal ||
                       !std::isfinite(merit_of(pinf, dinf, gap_rel))) &&
        snap.merit < merit_of(pinf, dinf, gap_rel)) {
      w.y = snap.y;
      w.S = snap.S;
      pobj = snap.pobj;
      dobj = snap.dobj;
      pinf = snap.pinf;
      dinf = snap.dinf;
      gap_rel = snap.gap;
      if (status != SolveStatus::infeasible && status != SolveStatus::unbounded)
        status = pinf <= 100 * st.tol_feas && dinf <= 100 * st.tol_feas &&
                         gap_rel <= 100 * st.tol_gap
                     ? SolveStatus::near_optimal
                     : SolveStatus::max_iter;
    }
    sol.status = status;
    sol.iterations = iter;
    sol.y.assign(w.y.data(), w.y.data() + w.ny);
    sol.block_matrices.clear();
    for (std::size_t t = 0; t < w.blocks.size(); ++t)
      sol.block_matrices.push_back(w.S[t] * w.blocks[t].scale);
    sol.objective_value = pobj * w.obj_scale + sdp.c0;
    sol.dual_objective = dobj * w.obj_scale + sdp.c0;
    sol.primal_residual = pinf;
    sol.dual_residual = dinf;
    sol.gap = gap_rel;
    return sol;
  };

  for (iter = 0; iter < st.max_iter; ++iter) {
    double mu_bar = complementarity();
    residuals(r_p, r_d, pinf, dinf, gap_rel, pobj, dobj);

    if (st.log) {
      (*st.log) << "iter " << iter << " pobj " << pobj * w.obj_scale + sdp.c0 << " dobj "
                << dobj * w.obj_scale + sdp.c0 << " gap " << gap_rel << " pinf " << pinf
                << " dinf " << dinf << " mu " << mu_bar << " steps " << last_ap << " "
                << last_ad << "\n";
    }
    if (!std::isfinite(pinf) || !std::isfinite(dinf) || !std::isfinite(mu_bar) ||
        !std::isfinite(pobj)) {
      pinf = prev_pinf;
      return finish(snap.valid ? SolveStatus::max_iter
                               : (prev_pinf > 1e-5 ? SolveStatus::infeasible
                                                   : SolveStatus::max_iter));
    }
    // a diverging dual with stuck primal residual certifies infeasibility
    double dual_mag = (w.nb > 0 ? w.lam.lpNorm<Eigen::Infinity>() +
                                      w.mu.lpNorm<Eigen::Infinity>()
                                : 0.0) +
                      (w.me > 0 ? w.nu.lpNorm<Eigen::Infinity>() : 0.0);
    if (dual_mag > 1e10 && pinf > 100 * st.tol_feas && !snap.valid)
      return finish(SolveStatus::infeasible);

    double merit = merit_of(pinf, dinf, gap_rel);
    if (merit < 0.95 * snap.merit) {
      snap.valid = true;
      snap.merit = merit;
      snap.y = w.y;
      snap.nu = w.nu;
      snap.lam = w.lam;
      snap.mu = w.mu;
      snap.S = w.S;
      snap.X = w.X;
      snap.pobj = pobj;
      snap.dobj = dobj;
      snap.pinf = pinf;
      snap.dinf = dinf;
      snap.gap = gap_rel;
      no_progress = 0;
    } else {
      ++no_progress;
    }
    // numerical wall: accuracy stopped improving or the dual side degraded
    if (no_progress > 10 || (snap.valid && dinf > 1e4 * (snap.dinf + 1e-12)) ||
        mu_bar < 1e-26)
      return finish(SolveStatus::max_iter);

    bool feas_ok = pinf <= st.tol_feas && dinf <= st.tol_feas;
    if (feas_ok && gap_rel <= st.tol_gap) {
      // confirm eigenvalue feasibility before declaring victory
      double min_eig = 0.0;
      for (std::size_t t = 0; t < w.blocks.size(); ++t) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(assemble_block(w.blocks[t], w.y));
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
      }
      if (min_eig >= -st.tol_psd) return finish(SolveStatus::optimal);
    }
    if (pobj * w.obj_scale < -1e13) return finish(SolveStatus::unbounded);
    if (pinf > prev_pinf * 0.999)
      ++stall;
    else
      stall = 0;
    prev_pinf = pinf;
    if (stall > 40 && mu_bar < 1e-10 && pinf > 1e-5) return finish(SolveStatus::infeasible);

    // NT scalings
    for (std::size_t t = 0; t < w.blocks.size(); ++t) {
      const MatrixXd& S = w.S[t];
      const MatrixXd& X = w.X[t];
      Eigen::LLT<MatrixXd> llt(S);
      if (llt.info() != Eigen::Success)
        return finish(SolveStatus::max_iter);
      MatrixXd L = llt.matrixL();
      MatrixXd Mm = L.transpose() * X * L;
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig((Mm + Mm.transpose()) * 0.5);
      VectorXd lam_q = eig.eigenvalues().cwiseMax(1e-300);
      MatrixXd Q = eig.eigenvectors();
      // Winv = L^-T Q diag(sqrt(lam)) Q^T L^-1
      MatrixXd Linv_t = L.transpose().triangularView<Eigen::Upper>().solve(
          MatrixXd::Identity(S.rows(), S.cols()));
      MatrixXd B = Linv_t * Q;
      w.Winv[t] = B * lam_q.cwiseSqrt().asDiagonal() * B.transpose();
      Eigen::LLT<MatrixXd> slt(S);
      w.Sinv[t] = slt.solve(MatrixXd::Identity(S.rows(), S.cols()));
    }

    VectorXd diag = VectorXd::Constant(w.ny, 1e-11);
    for (int i = 0; i < w.nb; ++i)
      diag[w.box_idx[i]] += w.lam[i] / std::max(w.p[i], 1e-300) +
                            w.mu[i] / std::max(w.q[i], 1e-300);
    kkt.fill(w, diag);
    if (!kkt.factorize()) return finish(SolveStatus::max_iter);

    auto newton = [&](double sigma_mu, const VectorXd* corr_lam, const VectorXd* corr_mu,
                      const std::vector<MatrixXd>* corr_S) -> Direction {
      Direction d;
      VectorXd rhs_y = -r_d;
      for (std::size_t t = 0; t < w.blocks.size(); ++t) {
        // target: sigma_mu * Sinv - X - Winv (R + corr) Winv
        MatrixXd T = sigma_mu * w.Sinv[t] - w.X[t] - w.Winv[t] * w.R[t] * w.Winv[t];
        if (corr_S) T -= (*corr_S)[t];
        block_adjoint(w.blocks[t], T, rhs_y, 1.0);
      }
      for (int i = 0; i < w.nb; ++i) {
        double cl = corr_lam ? (*corr_lam)[i] : 0.0;
        double cm = corr_mu ? (*corr_mu)[i] : 0.0;
        double gl = (sigma_mu - w.lam[i] * w.p[i] - cl) / std::max(w.p[i], 1e-300);
        double gm = (sigma_mu - w.mu[i] * w.q[i] - cm) / std::max(w.q[i], 1e-300);
        rhs_y[w.box_idx[i]] += gl - gm;
      }
      VectorXd rhs(w.ny + w.me);
      rhs.head(w.ny) = rhs_y;
      rhs.tail(w.me) = r_p;
      VectorXd sol_vec = kkt.solve(rhs);
      d.dy = sol_vec.head(w.ny);
      d.dnu = -sol_vec.tail(w.me);
      d.dS.resize(w.blocks.size());
      d.dX.resize(w.blocks.size());
      for (std::size_t t = 0; t < w.blocks.size(); ++t) {
        MatrixXd AdY = MatrixXd::Zero(w.blocks[t].dim, w.blocks[t].dim);
        for (const auto& e : w.blocks[t].var_entries) {
          double v = e.coeff * d.dy[e.y];
          AdY(e.row, e.col) += v;
          if (e.row != e.col) AdY(e.col, e.row) += v;
        }
        d.dS[t] = AdY + w.R[t];
        MatrixXd T = sigma_mu * w.Sinv[t] - w.X[t] - w.Winv[t] * (d.dS[t]) * w.Winv[t];
        if (corr_S) T -= (*corr_S)[t];
        d.dX[t] = (T + T.transpose()) * 0.5;
      }
      d.dlam = VectorXd::Zero(w.nb);
      d.dmu = VectorXd::Zero(w.nb);
      for (int i = 0; i < w.nb; ++i) {
        double cl = corr_lam ? (*corr_lam)[i] : 0.0;
        double cm = corr_mu ? (*corr_mu)[i] : 0.0;
        d.dlam[i] = (sigma_mu - w.lam[i] * w.p[i] - cl) / std::max(w.p[i], 1e-300) -
                    w.lam[i] / std::max(w.p[i], 1e-300) * d.dy[w.box_idx[i]];
        d.dmu[i] = (sigma_mu - w.mu[i] * w.q[i] - cm) / std::max(w.q[i], 1e-300) +
                   w.mu[i] / std::max(w.q[i], 1e-300) * d.dy[w.box_idx[i]];
      }
      return d;
    };

    auto step_lengths = [&](const Direction& d, double& ap, double& ad) {
      ap = ad = 1.0;
      for (std::size_t t = 0; t < w.blocks.size(); ++t) {
        ap = std::min(ap, 0.99 * max_step_psd(w.S[t], d.dS[t]));
        ad = std::min(ad, 0.99 * max_step_psd(w.X[t], d.dX[t]));
      }
      for (int i = 0; i < w.nb; ++i) {
        double dp = d.dy[w.box_idx[i]], dq = -d.dy[w.box_idx[i]];
        if (dp < 0) ap = std::min(ap, -0.99 * w.p[i] / dp);
        if (dq < 0) ap = std::min(ap, -0.99 * w.q[i] / dq);
        if (d.dlam[i] < 0) ad = std::min(ad, -0.99 * w.lam[i] / d.dlam[i]);
        if (d.dmu[i] < 0) ad = std::min(ad, -0.99 * w.mu[i] / d.dmu[i]);
      }
      ap = std::min(ap, 1.0);
      ad = std::min(ad, 1.0);
    };

    // predictor
    Direction aff = newton(0.0, nullptr, nullptr, nullptr);
    double ap_aff, ad_aff;
    step_lengths(aff, ap_aff, ad_aff);

    // complementarity after the affine step
    double mu_aff = 0.0;
    for (std::size_t t = 0; t < w.blocks.size(); ++t)
      mu_aff += ((w.S[t] + ap_aff * aff.dS[t]).array() *
                 (w.X[t] + ad_aff * aff.dX[t]).array())
                    .sum();
    for (int i = 0; i < w.nb; ++i) {
      mu_aff += (w.lam[i] + ad_aff * aff.dlam[i]) * (w.p[i] + ap_aff * aff.dy[w.box_idx[i]]);
      mu_aff += (w.mu[i] + ad_aff * aff.dmu[i]) * (w.q[i] - ap_aff * aff.dy[w.box_idx[i]]);
    }
    mu_aff = std::max(mu_aff / total_cone, 0.0);
    double sigma = mu_bar > 0 ? std::pow(mu_aff / mu_bar, 3.0) : 0.1;
    sigma = std::clamp(sigma, 1e-4, 0.9);

    // corrector with LP-style second-order terms on the box
    VectorXd corr_lam(w.nb), corr_mu(w.nb);
    for (int i = 0; i < w.nb; ++i) {
      corr_lam[i] = aff.dlam[i] * aff.dy[w.box_idx[i]];
      corr_mu[i] = -aff.dmu[i] * aff.dy[w.box_idx[i]];
    }
    Direction dir = newton(sigma * mu_bar, &corr_lam, &corr_mu, nullptr);
    double ap, ad;
    step_lengths(dir, ap, ad);

    if (ap < 1e-10 && ad < 1e-10) break;
    last_ap = ap;
    last_ad = ad;

    w.y += ap * dir.dy;
    w.nu += ad * dir.dnu;
    for (std::size_t t = 0; t < w.blocks.size(); ++t) {
      w.S[t] += ap * dir.dS[t];
      w.S[t] = (w.S[t] + w.S[t].transpose()) * 0.5;
      w.X[t] += ad * dir.dX[t];
      w.X[t] = (w.X[t] + w.X[t].transpose()) * 0.5;
    }
    w.lam += ad * dir.dlam;
    w.mu += ad * dir.dmu;
  }

  residuals(r_p, r_d, pinf, dinf, gap_rel, pobj, dobj);
  bool near = pinf <= 100 * st.tol_feas && dinf <= 100 * st.tol_feas &&
              gap_rel <= 100 * st.tol_gap;
  return finish(near ? SolveStatus::near_optimal : SolveStatus::max_iter);
}

VerifyReport verify(const SDPInstance& sdp, const ConicSolution& sol) {
  sdp.validate();
  VerifyReport rep;
  const std::vector<double>& y = sol.y;
  // residuals are measured relative to each row's / block's magnitude, the
  // same normalization the solver converges under
  for (const auto& row : sdp.equalities) {
    double v = -row.rhs;
    double rmax = std::fabs(row.rhs);
    for (auto [i, cv] : row.terms) {
      v += cv * y[i];
      rmax = std::max(rmax, std::fabs(cv));
    }
    rep.eq_residual = std::max(rep.eq_residual, std::fabs(v) / std::max(1.0, rmax));
  }
  rep.block_min_eig = std::numeric_limits<double>::infinity();
  for (const auto& blk : sdp.blocks) {
    MatrixXd M = MatrixXd::Zero(blk.dim, blk.dim);
    double bmax = 0.0;
    for (const auto& e : blk.entries) {
      double v = e.coeff * (e.y < 0 ? 1.0 : y[e.y]);
      bmax = std::max(bmax, std::fabs(e.coeff));
      M(e.row, e.col) += v;
      if (e.row != e.col) M(e.col, e.row) += v;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M);
    rep.block_min_eig =
        std::min(rep.block_min_eig, eig.eigenvalues().minCoeff() / std::max(1.0, bmax));
  }
  if (sdp.blocks.empty()) rep.block_min_eig = 0.0;
  for (std::size_t i = 0; i < sdp.box_index.size(); ++i) {
    double v = y[sdp.box_index[i]];
    rep.box_violation = std::max(rep.box_violation, sdp.box_lo[i] - v);
    rep.box_violation = std::max(rep.box_violation, v - sdp.box_hi[i]);
  }
  rep.box_violation = std::max(rep.box_violation, 0.0);
  double pobj = sdp.c0;
  for (int i = 0; i < sdp.ny; ++i) pobj += sdp.c[i] * y[i];
  rep.gap = std::fabs(pobj - sol.dual_objective) /
            (1.0 + std::fabs(pobj) + std::fabs(sol.dual_objective));
  return rep;
}

}  // namespace popde
