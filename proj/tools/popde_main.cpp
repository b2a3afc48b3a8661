#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>

#include <CLI11.hpp>

#include "popde/errors.hpp"
#include "popde/pipeline.hpp"

using namespace popde;

namespace {

struct CliOptions {
  RunConfig cfg;
  std::string solution_file;
  bool verbose = false;
};

void add_common(CLI::App* sub, CliOptions& opt) {
  sub->add_option("-p,--problem", opt.cfg.problem,
                  "preset name or problem file path (see 'presets')");
  sub->add_option("--nx", opt.cfg.nx, "grid points along x (0: preset default)");
  sub->add_option("--ny", opt.cfg.ny, "grid points along y (0: preset default)");
  sub->add_option("-w,--order", opt.cfg.order, "relaxation order (0: preset default)");
  sub->add_option("-M,--moments", opt.cfg.moments, "moment bound (-1: preset default)");
  sub->add_option("--perturb", opt.cfg.perturb, "objective perturbation magnitude");
  sub->add_option("-o,--out", opt.cfg.out_dir, "output directory for result files");
  sub->add_option("--quad-points", opt.cfg.quad_points,
                  "quadrature points per axis for the entropy fit");
  sub->add_flag("--paper-scale", opt.cfg.paper_scale,
                "use the reference-table grids instead of desk-scale defaults");
  std::map<std::string, MomentWeights> wmap{{"trapezoid", MomentWeights::trapezoid},
                                            {"full_node", MomentWeights::full_node}};
  sub->add_option("--weights", opt.cfg.weights, "moment summation weights")
      ->transform(CLI::CheckedTransformer(wmap, CLI::ignore_case));
  sub->add_option("--clique-mode", opt.cfg.clique_mode, "auto|chordal|support|dense");
  sub->add_flag("--dump-instances", opt.cfg.dump_instances,
                "write the transcribed program (pop.txt) and the relaxation (sdp.txt) "
                "into the output directory");
  sub->add_option("--solver-max-iter", opt.cfg.solver.max_iter,
                  "interior-point iteration cap");
  sub->add_option("--tol-feas", opt.cfg.solver.tol_feas,
                  "interior-point feasibility tolerance");
  sub->add_option("--tol-gap", opt.cfg.solver.tol_gap, "interior-point gap tolerance");
  sub->add_option("--refine-tol", opt.cfg.refiner.tol_eq, "refinement equality tolerance");
  sub->add_option("--maxent-tol", opt.cfg.maxent.tol_grad, "entropy dual gradient tolerance");
  sub->add_flag("-v,--verbose", opt.verbose, "stream stage iteration logs to stderr");
}

int finish_run(const CliOptions& opt, PipelineState& st) {
  if (!opt.cfg.out_dir.empty()) {
    auto files = emit_outputs(st, opt.cfg.out_dir);
    for (const auto& f : files) std::cerr << "wrote " << f << "\n";
  }
  std::cout << report_text(st.report);
  return st.report.ok() ? 0 : 1;
}

int run_check() {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name.c_str());
    if (!ok) ++failures;
  };

  {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    bool ok = true;
    for (int t = 0; t < 20 && ok; ++t) {
      Polynomial p(2), q(2);
      for (int k = 0; k < 4; ++k) {
        p.add_term(Monomial::var(0, k % 3) * Monomial::var(1, k % 2), d(rng));
        q.add_term(Monomial::var(1, k % 3), d(rng));
      }
      std::vector<double> x{d(rng), d(rng)};
      double lhs = (p * q).evaluate(x), rhs = p.evaluate(x) * q.evaluate(x);
      ok = std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(rhs));
    }
    check("polynomial ring axioms on random inputs", ok);
  }
  {
    Polynomial dd = fd_second(3, 0, 1, 2, 0.25);
    double quad[] = {0.0, 0.0625, 0.25};  // x^2 at 0, .25, .5
    check("second-difference stencil exact on quadratics",
          std::fabs(dd.evaluate(quad) - 2.0) <= 1e-12);
  }
  {
    POPInstance pop;
    pop.nvars = 1;
    pop.objective = Polynomial::variable(1, 0);
    Polynomial h = Polynomial::variable(1, 0).pow(2) - Polynomial::constant(1, 1.0);
    pop.eq_constraints = {h};
    pop.ineq_constraints = {Polynomial::variable(1, 0)};
    pop.lo = {0.0};
    pop.hi = {2.0};
    CliqueSet cs = csp_cliques(pop);
    ConicSolution s1 = solve(build_relaxation(pop, cs, 1, {0.0, 0}).sdp);
    ConicSolution s2 = solve(build_relaxation(pop, cs, 2, {0.0, 0}).sdp);
    check("moment hierarchy for min x on {x^2=1, x>=0}: w=1 gives 1/2, w=2 gives 1",
          s1.status == SolveStatus::optimal && std::fabs(s1.objective_value - 0.5) <= 1e-5 &&
              s2.status == SolveStatus::optimal &&
              std::fabs(s2.objective_value - 1.0) <= 1e-5);
    check("hierarchy monotone in the relaxation order",
          s1.objective_value <= s2.objective_value + 1e-6);
  }
  {
    MomentVector m;
    m.dims = 1;
    m.order = 1;
    m.index = MomentVector::make_index(1, 1);
    const double e2 = std::exp(2.0);
    m.values = {(e2 - 1.0) / 2.0, (e2 - 3.0) / 4.0};
    EntropyEstimate e = maxent_fit(m);
    check("maxent recovers the exponential-family member exp(2-2x)",
          e.converged && std::fabs(e.v[0] - 2.0) <= 1e-3 && std::fabs(e.v[1] + 2.0) <= 1e-3);
  }
  {
    DiffProblem p = preset("elliptic_bifur");
    Grid g = Grid::make(p.domain, 6, 6);
    POPInstance pop = transcribe(p, g);
    std::vector<double> x(pop.nvars, 0.4);
    check("analytic constraint jacobian matches finite differences",
          constraint_jacobian_check(pop, x) <= 1e-5);
  }
  std::printf("%s\n", failures == 0 ? "all checks passed" : "checks FAILED");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse moment relaxations and smooth entropy estimates for polynomial "
               "ODE/PDE/optimal-control problems"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an ini-style config file");

  CliOptions opt;
  CLI::App* solve_cmd =
      app.add_subcommand("solve", "discretize, relax and polish a grid solution");
  add_common(solve_cmd, opt);
  CLI::App* smooth_cmd = app.add_subcommand(
      "smooth", "fit smooth entropy estimates from a stored grid solution");
  add_common(smooth_cmd, opt);
  smooth_cmd->add_option("--solution", opt.solution_file, "solution.csv from a previous run")
      ->required();
  CLI::App* full_cmd = app.add_subcommand("full", "solve followed by smooth");
  add_common(full_cmd, opt);
  CLI::App* presets_cmd = app.add_subcommand("presets", "list built-in benchmark problems");
  CLI::App* check_cmd =
      app.add_subcommand("check", "run the quick invariant suite on tiny instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets_cmd->parsed()) {
      for (const auto& n : preset_names()) std::printf("%s\n", n.c_str());
      return 0;
    }
    if (check_cmd->parsed()) return run_check();

    if (opt.verbose) {
      opt.cfg.solver.log = &std::cerr;
      opt.cfg.refiner.log = &std::cerr;
      opt.cfg.maxent.log = &std::cerr;
    }
    if (solve_cmd->parsed()) {
      PipelineState st = run_sdpr(opt.cfg);
      return finish_run(opt, st);
    }
    if (smooth_cmd->parsed()) {
      PipelineState st = load_solution_csv(opt.cfg, opt.solution_file);
      run_smooth(opt.cfg, st);
      return finish_run(opt, st);
    }
    PipelineState st = run_full(opt.cfg);
    return finish_run(opt, st);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
