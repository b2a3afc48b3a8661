// Acceptance suite: one checkable criterion per section, each printing
// PASS/FAIL lines with the measured values. Run all or --criterion N.
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "popde/conic.hpp"
#include "popde/discretize.hpp"
#include "popde/entropy.hpp"
#include "popde/kernels.hpp"
#include "popde/pipeline.hpp"
#include "popde/problems.hpp"
#include "popde/refine.hpp"
#include "popde/relaxation.hpp"

using namespace popde;

namespace {

int g_failures = 0;

void check(int criterion, const std::string& what, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

RunConfig ode_config() {
  RunConfig cfg;
  cfg.problem = "linear_ode";
  cfg.nx = 2000;
  cfg.order = 1;
  cfg.refiner.tol_eq = 1e-8;  // evaluation round-off floor is ~3e-9 at this N
  cfg.weights = MomentWeights::trapezoid;
  return cfg;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const double e2 = std::exp(2.0);
  RunConfig cfg = ode_config();
  cfg.moments = 1;
  PipelineState st = run_full(cfg);
  const auto& m = st.report.unknowns[0].moments.values;
  double analytic0 = (e2 - 1.0) / 2.0;
  check(1, "pipeline m0 against the reference table value 3.1942",
        std::fabs(m[0] - 3.1942) <= 0.002, "m0 = " + fmt(m[0]));
  check(1, "pipeline m1 against the reference table value 1.0957",
        std::fabs(m[1] - 1.0957) <= 0.002, "m1 = " + fmt(m[1]));
  check(1, "independent analytic check m0 vs (e^2-1)/2",
        std::fabs(m[0] - analytic0) <= 0.003,
        "m0 = " + fmt(m[0]) + ", exact = " + fmt(analytic0));
}

void criterion2() {
  const double e2 = std::exp(2.0);
  MomentVector m;
  m.dims = 1;
  m.order = 1;
  m.index = MomentVector::make_index(1, 1);
  m.values = {(e2 - 1.0) / 2.0, (e2 - 3.0) / 4.0};
  EntropyEstimate e = maxent_fit(m);
  check(2, "family closure: v* within 1e-3 of (2, -2)",
        e.converged && std::fabs(e.v[0] - 2.0) <= 1e-3 && std::fabs(e.v[1] + 2.0) <= 1e-3,
        "v* = (" + fmt(e.v[0]) + ", " + fmt(e.v[1]) + ")");
}

void criterion3() {
  RunConfig cfg = ode_config();
  cfg.moments = 3;
  PipelineState st = run_sdpr(cfg);

  struct Row {
    int order;
    std::vector<double> vstar;
    double tol;
  };
  // reference coefficient tables for M = 1..3
  std::vector<Row> rows = {{1, {2.0043, -2.0135}, 0.02},
                           {2, {2.0042, -2.0083, -0.0083}, 0.05},
                           {3, {2.0040, -1.9922, -0.0938, 0.0851}, 0.05}};
  for (const auto& row : rows) {
    MomentVector m = discrete_moments(st.unit_solution, 0, row.order, cfg.weights);
    EntropyEstimate e = maxent_fit(m, cfg.maxent);
    bool ok = e.converged;
    std::string got = "(";
    for (std::size_t k = 0; k < row.vstar.size(); ++k) {
      ok = ok && std::fabs(e.v[k] - row.vstar[k]) <= row.tol;
      got += (k ? ", " : "") + fmt(e.v[k]);
    }
    got += ")";
    check(3, "v*(M=" + std::to_string(row.order) + ") within " + fmt(row.tol) +
              " of the reference row",
          ok, "v* = " + got);
    if (row.order == 1) {
      std::vector<double> ref(st.unit_grid.nodes());
      for (int i = 0; i < st.unit_grid.nx; ++i)
        ref[i] = st.solved_problem.analytic[0](st.unit_grid.x(i), 0.0);
      ErrorReport err = error_metrics(st.unit_grid, ref, e);
      check(3, "max pointwise error at M=1 equals 0.0242 +- 0.005",
            std::fabs(err.max_error - 0.0242) <= 0.005,
            "eps_max(1) = " + fmt(err.max_error));
    }
  }
}

void criterion4() {
  RunConfig cfg;
  cfg.problem = "linear_pde";
  cfg.nx = 50;
  cfg.ny = 50;
  cfg.order = 1;
  cfg.moments = 3;
  cfg.weights = MomentWeights::trapezoid;
  PipelineState st = run_full(cfg);
  const MomentVector& m = st.report.unknowns[0].moments;

  const double exact00 = (std::exp(1.0) - 1.0) * (std::exp(1.0) - 1.0);
  check(4, "m00 within 0.02 of the exact (e-1)^2",
        std::fabs(m.value(0, 0) - exact00) <= 0.02,
        "m00 = " + fmt(m.value(0, 0)) + ", exact = " + fmt(exact00));
  check(4, "m11 within 0.02 of the exact 1.0", std::fabs(m.value(1, 1) - 1.0) <= 0.02,
        "m11 = " + fmt(m.value(1, 1)));

  // reference [LB, UB] intervals, symmetric index pairs folded
  struct Interval {
    int i, j;
    double lb, ub;
  };
  std::vector<Interval> table = {{0, 0, 2.9235, 3.1707}, {1, 0, 1.6944, 1.7742},
                                 {1, 1, 0.9847, 1.0130}, {2, 0, 1.1123, 1.3088},
                                 {2, 1, 0.7151, 0.7458}, {3, 0, 0.8244, 1.0478}};
  bool all_in = true;
  std::string offender;
  for (int k = 0; k < m.count(); ++k) {
    auto [i, j] = m.index[k];
    int a = std::max(i, j), b = std::min(i, j);
    for (const auto& row : table)
      if (row.i == a && row.j == b) {
        if (m.values[k] < row.lb - 0.01 || m.values[k] > row.ub + 0.01) {
          all_in = false;
          offender = "m(" + std::to_string(i) + "," + std::to_string(j) +
                     ") = " + fmt(m.values[k]);
        }
      }
  }
  check(4, "every computed moment lies in the reference [LB, UB] widened by 0.01", all_in,
        all_in ? "all inside" : offender);
}

void criterion5() {
  RunConfig cfg;
  cfg.problem = "elliptic_bifur";
  cfg.nx = 13;
  cfg.ny = 13;
  cfg.order = 2;
  cfg.moments = 3;
  PipelineState st = run_full(cfg);

  double mx = 0.0, mn = 1.0;
  for (double v : st.solution.values[0]) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  check(5, "refined solution is nontrivial with max node value >= 0.5", mx >= 0.5,
        "max = " + fmt(mx));
  check(5, "solution respects the bounds [0, 1]", mn >= -1e-12 && mx <= 1.0 + 1e-12,
        "range = [" + fmt(mn) + ", " + fmt(mx) + "]");
  check(5, "discretized residual <= 1e-6", st.report.residual <= 1e-6,
        "residual = " + fmt(st.report.residual));
  check(5, "maxent at M=3 moment-matching residual <= 1e-6",
        st.report.unknowns[0].estimate.converged &&
            st.report.unknowns[0].moment_match_residual <= 1e-6,
        "match residual = " + fmt(st.report.unknowns[0].moment_match_residual));
}

void criterion6() {
  RunConfig cfg;
  cfg.problem = "prod_consumption";
  cfg.nx = 100;
  PipelineState st = run_sdpr(cfg);
  const Grid& g = st.grid;

  bool bang_early = true, bang_late = true;
  double sup = 0.0;
  double worst_early = 1.0, worst_late = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    double t = g.x(i);
    double xs = st.solution.at(0, i, 0), u = st.solution.at(1, i, 0);
    if (t <= 2.9) {
      bang_early = bang_early && u >= 0.95;
      worst_early = std::min(worst_early, u);
    }
    if (t >= 3.1) {
      bang_late = bang_late && u <= 0.05;
      worst_late = std::max(worst_late, u);
    }
    sup = std::max(sup, std::fabs(xs - 0.25 * std::exp(std::min(t, 3.0))));
  }
  check(6, "control at 1 before the switch window (u >= 0.95 for t <= 2.9)", bang_early,
        "min u = " + fmt(worst_early));
  check(6, "control at 0 after the switch window (u <= 0.05 for t >= 3.1)", bang_late,
        "max u = " + fmt(worst_late));
  check(6, "state within 0.02 sup-norm of the closed form 0.25 e^{min(t,3)}", sup <= 0.02,
        "sup = " + fmt(sup));
}

// fast tensor-grid minimizer used as the brute-force oracle: the innermost
// axis is evaluated as a lane through the simd kernels
double grid_minimum(const Polynomial& p, const std::vector<double>& lo,
                    const std::vector<double>& hi, int points_per_dim) {
  int nv = static_cast<int>(lo.size());
  std::vector<std::vector<double>> axis(nv);
  for (int v = 0; v < nv; ++v) {
    axis[v].resize(points_per_dim);
    for (int k = 0; k < points_per_dim; ++k)
      axis[v][k] = lo[v] + (hi[v] - lo[v]) * k / (points_per_dim - 1);
  }
  // power lanes of the innermost axis per exponent
  int max_e = 0;
  for (const auto& [m, c] : p.terms()) max_e = std::max(max_e, m.exponent(nv - 1));
  std::vector<std::vector<double>> pow_lane(max_e + 1,
                                            std::vector<double>(points_per_dim, 1.0));
  for (int e = 1; e <= max_e; ++e)
    for (int k = 0; k < points_per_dim; ++k)
      pow_lane[e][k] = pow_lane[e - 1][k] * axis[nv - 1][k];

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(nv - 1, 0);
  std::vector<double> lane(points_per_dim);
  for (;;) {
    std::fill(lane.begin(), lane.end(), 0.0);
    for (const auto& [m, c] : p.terms()) {
      double coeff = c;
      for (auto [v, e] : m.factors())
        if (v < nv - 1)
          for (int q = 0; q < e; ++q) coeff *= axis[v][idx[v]];
      kernels::axpy(lane.data(), coeff, pow_lane[m.exponent(nv - 1)].data(),
                    points_per_dim);
    }
    best = std::min(best, kernels::min_reduce(lane.data(), points_per_dim));
    int v = 0;
    while (v < nv - 1 && ++idx[v] == points_per_dim) idx[v++] = 0;
    if (nv == 1 || v == nv - 1) break;
  }
  return best;
}

void criterion7() {
  std::mt19937_64 rng(20240217);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<int> nv_d(1, 3), deg_d(0, 4), terms_d(3, 6);

  int done = 0, attempts = 0;
  bool all_bound = true, all_mono = true;
  while (done < 10 && attempts < 20) {
    ++attempts;
    int nv = nv_d(rng);
    POPInstance pop;
    pop.nvars = nv;
    pop.objective = Polynomial(nv);
    int terms = terms_d(rng);
    for (int t = 0; t < terms; ++t) {
      Monomial m;
      int deg = deg_d(rng);
      for (int k = 0; k < deg; ++k) m = m * Monomial::var(static_cast<int>(rng() % nv));
      pop.objective.add_term(m, coef(rng));
    }
    if (pop.objective.degree() == 0) continue;
    pop.lo.assign(nv, -1.0);
    pop.hi.assign(nv, 1.0);

    CliqueSet cs = csp_cliques(pop);
    int wmin = relaxation_order_min(pop);
    ConicSolution s1 = solve(build_relaxation(pop, cs, wmin, {0.0, 0}).sdp);
    ConicSolution s2 = solve(build_relaxation(pop, cs, wmin + 1, {0.0, 0}).sdp);
    if (s1.status != SolveStatus::optimal || s2.status != SolveStatus::optimal) continue;

    // brute-force oracle; total points capped near 1e7 for 2-3 variables
    int ppd = nv == 1 ? 10000 : (nv == 2 ? 3163 : 216);
    double gmin = grid_minimum(pop.objective, pop.lo, pop.hi, ppd);
    all_bound = all_bound && s1.objective_value <= gmin + 1e-6 &&
                s2.objective_value <= gmin + 1e-6;
    all_mono = all_mono && s1.objective_value <= s2.objective_value + 1e-6;
    ++done;
  }
  check(7, "10 random POPs solved at w_min and w_min+1", done >= 10,
        std::to_string(done) + " of " + std::to_string(attempts) + " attempts");
  check(7, "SDP optimum lower-bounds the brute-force grid minimum (+1e-6)", all_bound, "");
  check(7, "hierarchy is monotone in the relaxation order", all_mono, "");
}

void criterion8() {
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);

  // gradient versus central finite differences
  MomentVector probe;
  probe.dims = 1;
  probe.order = 3;
  probe.index = MomentVector::make_index(1, 3);
  probe.values = {1.3, 0.6, 0.38, 0.27};
  bool grad_ok = true;
  double worst_grad = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> v(probe.count());
    for (auto& c : v) c = coef(rng);
    DualState ds = maxent_dual_state(probe, v);
    for (int k = 0; k < probe.count(); ++k) {
      double h = 1e-6;
      std::vector<double> vp = v, vm = v;
      vp[k] += h;
      vm[k] -= h;
      double fd =
          (maxent_dual_state(probe, vp).objective - maxent_dual_state(probe, vm).objective) /
          (2 * h);
      double dev = std::fabs(fd - ds.gradient[k]) / std::max(1.0, std::fabs(ds.gradient[k]));
      worst_grad = std::max(worst_grad, dev);
      grad_ok = grad_ok && dev <= 1e-5;
    }
  }
  check(8, "dual gradient matches finite differences to 1e-5", grad_ok,
        "worst relative deviation = " + fmt(worst_grad));

  bool nsd_ok = true;
  double worst_eig = -1e300;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(probe.count());
    for (auto& c : v) c = coef(rng);
    DualState ds = maxent_dual_state(probe, v);
    Eigen::MatrixXd H(probe.count(), probe.count());
    for (int a = 0; a < probe.count(); ++a)
      for (int b = 0; b < probe.count(); ++b) H(a, b) = ds.hessian[a][b];
    double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
    worst_eig = std::max(worst_eig, top);
    nsd_ok = nsd_ok && top <= 1e-8;
  }
  check(8, "dual Hessian negative semidefinite at 20 random points", nsd_ok,
        "largest eigenvalue = " + fmt(worst_eig));

  bool match_ok = true;
  double worst_match = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    int order = 1 + static_cast<int>(rng() % 3);
    EntropyEstimate gen;
    gen.dims = 1;
    gen.order = order;
    gen.index = MomentVector::make_index(1, order);
    gen.v.resize(gen.index.size());
    for (auto& c : gen.v) c = 1.5 * coef(rng);
    MomentVector m = estimate_moments(gen, order);
    m.domain = {1, 0.0, 1.0};
    EntropyEstimate fit = maxent_fit(m);
    MomentVector back = estimate_moments(fit, order);
    for (int k = 0; k < m.count(); ++k)
      worst_match = std::max(worst_match, std::fabs(back.values[k] - m.values[k]));
    match_ok = match_ok && fit.converged;
  }
  match_ok = match_ok && worst_match <= 1e-6;
  check(8, "moment matching at the optimum <= 1e-6 on 10 feasible vectors", match_ok,
        "worst residual = " + fmt(worst_match));
}

void criterion9() {
  {
    RunConfig cfg;
    cfg.problem = "reaction_diffusion";
    cfg.nx = 40;
    cfg.order = 2;
    cfg.moments = 10;
    bool completed = false;
    std::size_t nflags = 0;
    std::string text;
    try {
      PipelineState st = run_full(cfg);
      text = report_text(st.report);
      nflags = st.report.flags.size();
      completed = !text.empty() && st.report.unknowns.size() == 2;
    } catch (const std::exception& e) {
      text = e.what();
    }
    check(9, "reaction-diffusion runs end-to-end at N=40, w=2 with a flagged report",
          completed, completed ? std::to_string(nflags) + " flags" : text);
  }
  {
    RunConfig cfg;
    cfg.problem = "double_integrator";
    cfg.nx = 30;
    cfg.order = 2;
    cfg.moments = 5;
    bool completed = false;
    std::size_t nflags = 0;
    std::string text;
    try {
      PipelineState st = run_full(cfg);
      text = report_text(st.report);
      nflags = st.report.flags.size();
      completed = !text.empty() && st.report.unknowns.size() == 3;
    } catch (const std::exception& e) {
      text = e.what();
    }
    check(9, "double integrator runs end-to-end at N=30, w=2 with a flagged report",
          completed, completed ? std::to_string(nflags) + " flags" : text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  for (int i = 1; i + 1 < argc + 1; ++i) {
    if (i < argc && std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      which = std::atoi(argv[i + 1]);
  }
  auto want = [&](int n) { return which == 0 || which == n; };

  if (want(1)) criterion1();
  if (want(2)) criterion2();
  if (want(3)) criterion3();
  if (want(4)) criterion4();
  if (want(5)) criterion5();
  if (want(6)) criterion6();
  if (want(7)) criterion7();
  if (want(8)) criterion8();
  if (want(9)) criterion9();

  if (g_failures == 0)
    std::printf("acceptance: all checks passed\n");
  else
    std::printf("acceptance: %d check(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
