#include "popde/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "popde/errors.hpp"

namespace popde {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct PresetDefaults {
  int nx, ny, w, m;
  int paper_nx, paper_ny, paper_w, paper_m;
  int refine_iters = 200;
  double refine_tol = 1e-9;
};

// Desk-scale defaults keep the full pipeline within minutes on one core;
// paper-scale switches to the grids the reference tables were computed at.
PresetDefaults preset_defaults(const std::string& name) {
  if (name == "linear_ode") return {2000, 1, 1, 3, 2000, 1, 1, 5, 400, 1e-8};
  if (name == "linear_pde") return {50, 50, 1, 3, 100, 100, 1, 3, 200};
  if (name == "elliptic_bifur") return {13, 13, 2, 3, 49, 49, 2, 3, 200};
  if (name == "reaction_diffusion") return {40, 1, 2, 10, 100, 1, 3, 10, 1000};
  if (name == "prod_consumption") return {100, 1, 1, 5, 100, 1, 1, 5, 2000};
  if (name == "double_integrator") return {30, 1, 2, 5, 50, 1, 3, 5, 4000};
  return {50, 1, 1, 3, 50, 1, 1, 3, 200};
}

CliqueOptions clique_options(const std::string& mode) {
  CliqueOptions opt;
  if (mode == "auto")
    opt.mode = CliqueOptions::Mode::auto_select;
  else if (mode == "chordal")
    opt.mode = CliqueOptions::Mode::chordal;
  else if (mode == "support")
    opt.mode = CliqueOptions::Mode::support;
  else if (mode == "dense")
    opt.mode = CliqueOptions::Mode::dense;
  else
    throw LookupError("unknown clique mode '" + mode + "'");
  return opt;
}

}  // namespace

bool RunReport::ok() const {
  if (!refine_converged) return false;
  for (const auto& u : unknowns) {
    if (u.skipped) return false;
    if (!u.estimate.index.empty() && !u.estimate.converged) return false;
  }
  return true;
}

DiffProblem resolve_problem(const std::string& name_or_path) {
  for (const auto& name : preset_names())
    if (name == name_or_path) return preset(name);
  if (std::filesystem::exists(name_or_path)) return load_problem_file(name_or_path);
  throw LookupError("'" + name_or_path +
                    "' is neither a preset name nor an existing problem file");
}

void apply_preset_defaults(RunConfig& cfg) {
  PresetDefaults d = preset_defaults(cfg.problem);
  if (cfg.nx == 0) cfg.nx = cfg.paper_scale ? d.paper_nx : d.nx;
  if (cfg.ny == 0) cfg.ny = cfg.paper_scale ? d.paper_ny : d.ny;
  if (cfg.order == 0) cfg.order = cfg.paper_scale ? d.paper_w : d.w;
  if (cfg.moments < 0) cfg.moments = cfg.paper_scale ? d.paper_m : d.m;
  if (cfg.quad_points > 0) cfg.maxent.points_per_dim = cfg.quad_points;
  if (cfg.refiner.max_iter == RefineSettings{}.max_iter)
    cfg.refiner.max_iter = d.refine_iters;
  if (cfg.refiner.tol_eq == RefineSettings{}.tol_eq) cfg.refiner.tol_eq = d.refine_tol;
}

PipelineState run_sdpr(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  apply_preset_defaults(cfg);

  PipelineState st;
  st.problem = resolve_problem(cfg.problem);
  RunReport& rep = st.report;
  rep.problem = cfg.problem;
  rep.order = cfg.order;
  rep.moments = cfg.moments;

  auto t_all = Clock::now();
  auto [shifted, shift_rep] = shift_to_nonnegative(st.problem);
  auto [scaled, scale_rep] = scale_domain_to_unit(shifted);
  st.solved_problem = scaled;
  st.shift = shift_rep;
  st.scale = scale_rep;

  int ny = st.problem.domain.dims == 2 ? cfg.ny : 1;
  rep.nx = cfg.nx;
  rep.ny = ny;
  st.grid = Grid::make(st.problem.domain, cfg.nx, ny);
  st.unit_grid = Grid::make(scaled.domain, cfg.nx, ny);
  rep.timings.push_back({"prepare", seconds_since(t_all)});

  // transcription
  auto t0 = Clock::now();
  POPInstance pop = transcribe(scaled, st.unit_grid);
  auto [red, prerep] = presolve_fixed(pop);
  rep.timings.push_back({"transcribe", seconds_since(t0)});
  if (cfg.dump_instances && !cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream pf(std::filesystem::path(cfg.out_dir) / "pop.txt");
    pf << pop.dump();
  }

  // cliques and relaxation
  t0 = Clock::now();
  CliqueSet cliques = csp_cliques(red, clique_options(cfg.clique_mode));
  rep.clique_mode = cliques.mode;
  rep.rip_certified = cliques.rip_certified;
  RelaxationOptions ropt;
  ropt.perturb = cfg.perturb;
  Relaxation rel = build_relaxation(red, cliques, cfg.order, ropt);
  rep.timings.push_back({"relax", seconds_since(t0)});
  if (cfg.dump_instances && !cfg.out_dir.empty()) {
    std::ofstream sf(std::filesystem::path(cfg.out_dir) / "sdp.txt");
    rel.sdp.write(sf);
  }

  // conic solve
  t0 = Clock::now();
  ConicSolution sol = solve(rel.sdp, cfg.solver);
  rep.timings.push_back({"solve", seconds_since(t0)});
  rep.solver_status = to_string(sol.status);
  rep.solver_iterations = sol.iterations;
  rep.sdp_objective = sol.objective_value;
  rep.sdp_bound = sol.dual_objective - rel.perturb_bound_correction;
  if (sol.status != SolveStatus::optimal)
    rep.flags.push_back("sdp solver stopped with status " + std::string(to_string(sol.status)));

  // extraction + local polish on the full transcription
  t0 = Clock::now();
  std::vector<double> x0 = prerep.expand(extract_point(sol.y, rel.index));
  RefineResult ref = refine(pop, x0, cfg.refiner);
  rep.timings.push_back({"refine", seconds_since(t0)});
  rep.refined_objective = ref.objective;
  rep.residual = ref.max_eq_violation;
  rep.refine_converged = ref.converged;
  if (!ref.converged)
    rep.flags.push_back("local refinement not converged (violation " +
                        std::to_string(ref.max_eq_violation) + ")");
  if (rep.sdp_bound > ref.objective + 1e-6)
    rep.flags.push_back("sandwich violated: bound exceeds refined objective");

  // unpack to grid functions; solution is reported in original coordinates
  int m = st.problem.unknowns;
  st.unit_solution = GridFunction::zeros(st.unit_grid, m);
  st.solution = GridFunction::zeros(st.grid, m);
  for (int j = 0; j < st.unit_grid.ny; ++j)
    for (int i = 0; i < st.unit_grid.nx; ++i)
      for (int k = 0; k < m; ++k) {
        double v = ref.x[pop_var_index(st.unit_grid, m, k, i, j)];
        st.unit_solution.at(k, i, j) = v;
        st.solution.at(k, i, j) = v + st.shift.shift[k];
      }
  for (std::size_t s = 0; s < st.problem.scalar_names.size(); ++s) {
    rep.scalar_names.push_back(st.problem.scalar_names[s]);
    st.scalars.push_back(ref.x[st.unit_grid.nodes() * m + s]);
    rep.scalar_values.push_back(st.scalars.back());
  }

  // inverse-map round trip: scaled coordinates must reproduce the original
  for (int i : {0, st.grid.nx - 1}) {
    double orig = st.grid.x(i);
    double back = st.scale.to_orig_x(st.unit_grid.x(i));
    if (std::fabs(orig - back) > 1e-12 * (1.0 + std::fabs(orig)))
      throw NumericError("inverse coordinate map failed the round trip");
  }
  rep.timings.push_back({"total_sdpr", seconds_since(t_all)});
  return st;
}

void run_smooth(const RunConfig& cfg_in, PipelineState& st) {
  RunConfig cfg = cfg_in;
  apply_preset_defaults(cfg);
  RunReport& rep = st.report;
  rep.moments = cfg.moments;

  for (int k = 0; k < st.problem.unknowns; ++k) {
    auto t0 = Clock::now();
    UnknownReport ur;
    ur.unknown = k;
    ur.shift = st.shift.shift[k];

    try {
      ur.moments = discrete_moments(st.unit_solution, k, cfg.moments, cfg.weights);
      ur.estimate = maxent_fit(ur.moments, cfg.maxent);
    } catch (const std::exception& e) {
      ur.skipped = true;
      rep.flags.push_back("entropy stage skipped for unknown " + std::to_string(k) + ": " +
                          e.what());
      rep.timings.push_back({"smooth_u" + std::to_string(k), seconds_since(t0)});
      rep.unknowns.push_back(std::move(ur));
      continue;
    }
    if (!ur.estimate.converged)
      rep.flags.push_back("maxent fit for unknown " + std::to_string(k) +
                          " not converged (grad " + std::to_string(ur.estimate.grad_norm) +
                          ")");

    MomentVector back = estimate_moments(ur.estimate, cfg.moments, cfg.maxent.points_per_dim);
    for (int q = 0; q < back.count(); ++q)
      ur.moment_match_residual = std::max(
          ur.moment_match_residual, std::fabs(back.values[q] - ur.moments.values[q]));

    ErrorReport grid_err =
        error_metrics(st.unit_grid, st.unit_solution.values[k], ur.estimate);
    ur.avg_error_grid = grid_err.avg_error;
    ur.max_error_grid = grid_err.max_error;

    if (k < static_cast<int>(st.solved_problem.analytic.size()) &&
        st.solved_problem.analytic[k]) {
      std::vector<double> ref(st.unit_grid.nodes());
      for (int j = 0; j < st.unit_grid.ny; ++j)
        for (int i = 0; i < st.unit_grid.nx; ++i)
          ref[st.unit_grid.node(i, j)] =
              st.solved_problem.analytic[k](st.unit_grid.x(i), st.unit_grid.y(j));
      ErrorReport an = error_metrics(st.unit_grid, ref, ur.estimate);
      ur.has_analytic = true;
      ur.avg_error_analytic = an.avg_error;
      ur.max_error_analytic = an.max_error;
    }
    rep.timings.push_back({"smooth_u" + std::to_string(k), seconds_since(t0)});
    rep.unknowns.push_back(std::move(ur));
  }
}

PipelineState run_full(const RunConfig& cfg) {
  PipelineState st = run_sdpr(cfg);
  run_smooth(cfg, st);
  return st;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
}

}  // namespace

std::string report_text(const RunReport& rep) {
  std::ostringstream os;
  os.precision(10);
  os << "problem: " << rep.problem << "\n";
  os << "grid: " << rep.nx << (rep.ny > 1 ? " x " + std::to_string(rep.ny) : "") << "\n";
  os << "relaxation order: " << rep.order << "\n";
  os << "cliques: " << rep.clique_mode
     << (rep.rip_certified ? " (running intersection certified)" : "") << "\n";
  os << "sdp solver: " << rep.solver_status << " in " << rep.solver_iterations
     << " iterations\n";
  os << "sdp lower bound: " << rep.sdp_bound << "\n";
  os << "refined objective: " << rep.refined_objective << "\n";
  os << "discretized residual: " << rep.residual << "\n";
  os << "refine converged: " << (rep.refine_converged ? "yes" : "no") << "\n";
  for (std::size_t s = 0; s < rep.scalar_names.size(); ++s)
    os << "scalar " << rep.scalar_names[s] << ": " << rep.scalar_values[s] << "\n";
  for (const auto& u : rep.unknowns) {
    os << "unknown u" << u.unknown << ": moments order " << u.moments.order << ", shift "
       << u.shift << "\n";
    os << "  maxent converged: " << (u.estimate.converged ? "yes" : "no") << " (grad "
       << u.estimate.grad_norm << ", " << u.estimate.iterations << " iterations)\n";
    os << "  moment match residual: " << u.moment_match_residual << "\n";
    os << "  v*:";
    for (double v : u.estimate.v) os << " " << v;
    os << "\n";
    os << "  avg/max error vs grid solution: " << u.avg_error_grid << " / "
       << u.max_error_grid << "\n";
    if (u.has_analytic)
      os << "  avg/max error vs analytic: " << u.avg_error_analytic << " / "
         << u.max_error_analytic << "\n";
  }
  for (const auto& f : rep.flags) os << "flag: " << f << "\n";
  for (const auto& t : rep.timings) os << "time " << t.stage << ": " << t.seconds << " s\n";
  os << "status: " << (rep.ok() ? "ok" : "flagged") << "\n";
  return os.str();
}

std::string report_json(const RunReport& rep) {
  nlohmann::json j;
  j["problem"] = rep.problem;
  j["nx"] = rep.nx;
  j["ny"] = rep.ny;
  j["order"] = rep.order;
  j["moments"] = rep.moments;
  j["clique_mode"] = rep.clique_mode;
  j["rip_certified"] = rep.rip_certified;
  j["solver_status"] = rep.solver_status;
  j["solver_iterations"] = rep.solver_iterations;
  j["sdp_bound"] = rep.sdp_bound;
  j["sdp_objective"] = rep.sdp_objective;
  j["refined_objective"] = rep.refined_objective;
  j["residual"] = rep.residual;
  j["refine_converged"] = rep.refine_converged;
  j["ok"] = rep.ok();
  for (std::size_t s = 0; s < rep.scalar_names.size(); ++s)
    j["scalars"][rep.scalar_names[s]] = rep.scalar_values[s];
  for (const auto& u : rep.unknowns) {
    nlohmann::json ju;
    ju["unknown"] = u.unknown;
    ju["shift"] = u.shift;
    ju["maxent_converged"] = u.estimate.converged;
    ju["maxent_grad_norm"] = u.estimate.grad_norm;
    ju["moment_match_residual"] = u.moment_match_residual;
    ju["moments"] = u.moments.values;
    ju["vstar"] = u.estimate.v;
    ju["avg_error_grid"] = u.avg_error_grid;
    ju["max_error_grid"] = u.max_error_grid;
    if (u.has_analytic) {
      ju["avg_error_analytic"] = u.avg_error_analytic;
      ju["max_error_analytic"] = u.max_error_analytic;
    }
    j["unknowns"].push_back(ju);
  }
  j["flags"] = rep.flags;
  nlohmann::json jt;
  for (const auto& t : rep.timings) jt[t.stage] = t.seconds;
  j["timings"] = jt;
  return j.dump(2) + "\n";
}

std::vector<std::string> emit_outputs(const PipelineState& st, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto path = [&](const std::string& name) { return (std::filesystem::path(dir) / name).string(); };

  // grid solution in original coordinates
  {
    std::ostringstream os;
    os.precision(17);
    os << "x";
    if (st.grid.domain.dims == 2) os << ",y";
    for (int k = 0; k < st.solution.unknowns(); ++k) os << ",u" << k;
    os << "\n";
    for (int j = 0; j < st.grid.ny; ++j)
      for (int i = 0; i < st.grid.nx; ++i) {
        os << st.grid.x(i);
        if (st.grid.domain.dims == 2) os << "," << st.grid.y(j);
        for (int k = 0; k < st.solution.unknowns(); ++k)
          os << "," << st.solution.at(k, i, j);
        os << "\n";
      }
    files.push_back(path("solution.csv"));
    write_file(files.back(), os.str());
  }

  for (const auto& u : st.report.unknowns) {
    std::string suffix = "_u" + std::to_string(u.unknown);
    {
      std::ostringstream os;
      os.precision(17);
      os << "i,j,value\n";
      for (int k = 0; k < u.moments.count(); ++k)
        os << u.moments.index[k].first << "," << u.moments.index[k].second << ","
           << u.moments.values[k] << "\n";
      files.push_back(path("moments" + suffix + ".csv"));
      write_file(files.back(), os.str());
    }
    {
      std::ostringstream os;
      os.precision(17);
      os << "i,j,value\n";
      for (std::size_t k = 0; k < u.estimate.v.size(); ++k)
        os << u.estimate.index[k].first << "," << u.estimate.index[k].second << ","
           << u.estimate.v[k] << "\n";
      files.push_back(path("vstar" + suffix + ".csv"));
      write_file(files.back(), os.str());
    }
    {
      // dense samples of the smooth estimate, mapped back to original
      // coordinates and units
      std::ostringstream os;
      os.precision(17);
      const int samples = 501;
      os << "x";
      if (u.estimate.dims == 2) os << ",y";
      os << ",value\n";
      int ny = u.estimate.dims == 2 ? samples : 1;
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < samples; ++i) {
          double s = static_cast<double>(i) / (samples - 1);
          double t = ny > 1 ? static_cast<double>(j) / (samples - 1) : 0.0;
          double expo = u.estimate.exponent(s, t);
          if (expo > u.estimate.eval_exponent_cap) expo = u.estimate.eval_exponent_cap;
          double val = std::exp(expo) + u.shift;
          os << st.scale.to_orig_x(s);
          if (u.estimate.dims == 2) os << "," << st.scale.to_orig_y(t);
          os << "," << val << "\n";
        }
      files.push_back(path("estimate" + suffix + ".csv"));
      write_file(files.back(), os.str());
    }
  }

  files.push_back(path("report.txt"));
  write_file(files.back(), report_text(st.report));
  files.push_back(path("summary.json"));
  write_file(files.back(), report_json(st.report));
  return files;
}

PipelineState load_solution_csv(const RunConfig& cfg_in, const std::string& path) {
  RunConfig cfg = cfg_in;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open solution file '" + path + "'");

  PipelineState st;
  st.problem = resolve_problem(cfg.problem);
  auto [shifted, shift_rep] = shift_to_nonnegative(st.problem);
  auto [scaled, scale_rep] = scale_domain_to_unit(shifted);
  st.solved_problem = scaled;
  st.shift = shift_rep;
  st.scale = scale_rep;
  st.report.problem = cfg.problem;

  std::string header;
  std::getline(in, header);
  int dims = st.problem.domain.dims;
  int m = st.problem.unknowns;

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != dims + m)
      throw IoError("solution file column count mismatch");
    rows.push_back(std::move(row));
  }
  int nx = 0;
  if (dims == 1) {
    nx = static_cast<int>(rows.size());
  } else {
    for (const auto& r : rows)
      if (r[1] == rows[0][1]) ++nx;
  }
  int ny = dims == 2 ? static_cast<int>(rows.size()) / std::max(nx, 1) : 1;
  if (nx < 3 || static_cast<int>(rows.size()) != nx * ny)
    throw IoError("solution file is not a row-major rectangular grid");

  st.grid = Grid::make(st.problem.domain, nx, ny);
  st.unit_grid = Grid::make(scaled.domain, nx, ny);
  st.report.nx = nx;
  st.report.ny = ny;
  st.solution = GridFunction::zeros(st.grid, m);
  st.unit_solution = GridFunction::zeros(st.unit_grid, m);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const auto& row = rows[j * nx + i];
      for (int k = 0; k < m; ++k) {
        st.solution.at(k, i, j) = row[dims + k];
        st.unit_solution.at(k, i, j) = row[dims + k] - st.shift.shift[k];
      }
    }
  st.solution.validate();
  st.report.refine_converged = true;  // provided externally
  st.report.solver_status = "loaded";
  return st;
}

}  // namespace popde
