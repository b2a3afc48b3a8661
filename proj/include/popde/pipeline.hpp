#pragma once

#include <string>
#include <vector>

#include "popde/conic.hpp"
#include "popde/discretize.hpp"
#include "popde/entropy.hpp"
#include "popde/refine.hpp"
#include "popde/relaxation.hpp"

namespace popde {

struct RunConfig {
  std::string problem = "linear_ode";  // preset name or problem file path
  int nx = 0, ny = 0;                  // 0: preset default
  int order = 0;                       // relaxation order w, 0: preset default
  int moments = -1;                    // moment bound M, -1: preset default
  double perturb = 1e-5;
  int quad_points = 0;                 // maxent quadrature, 0: module default
  MomentWeights weights = MomentWeights::trapezoid;
  bool paper_scale = false;
  std::string clique_mode = "auto";    // auto | chordal | support | dense
  std::string out_dir;
  bool dump_instances = false;  // write pop.txt / sdp.txt next to the results
  ConicSettings solver;
  RefineSettings refiner;
  MaxentSettings maxent;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct UnknownReport {
  int unknown = 0;
  bool skipped = false;  // entropy stage could not run (flagged)
  double shift = 0.0;    // u_original = u_tilde + shift
  MomentVector moments;
  EntropyEstimate estimate;
  double moment_match_residual = 0.0;
  double avg_error_grid = 0.0, max_error_grid = 0.0;
  bool has_analytic = false;
  double avg_error_analytic = 0.0, max_error_analytic = 0.0;
};

struct RunReport {
  std::string problem;
  int nx = 0, ny = 1, order = 1, moments = -1;
  std::string clique_mode;
  bool rip_certified = false;
  double sdp_bound = 0.0;      // valid lower bound for the solved POP
  double sdp_objective = 0.0;  // primal objective at the extracted moments
  std::string solver_status;
  int solver_iterations = 0;
  double refined_objective = 0.0;
  double residual = 0.0;  // max equality violation at the refined point
  bool refine_converged = false;
  std::vector<double> scalar_values;  // extra scalars (e.g. final time)
  std::vector<std::string> scalar_names;
  std::vector<UnknownReport> unknowns;
  std::vector<StageTiming> timings;
  std::vector<std::string> flags;

  bool ok() const;
};

// State threaded through the pipeline stages.
struct PipelineState {
  DiffProblem problem;         // as given (original coordinates)
  DiffProblem solved_problem;  // shifted and scaled to the unit box
  ShiftReport shift;
  ScaleReport scale;
  Grid grid;                   // original-domain grid
  Grid unit_grid;              // unit-domain grid (same node counts)
  GridFunction solution;       // original coordinates and units
  GridFunction unit_solution;  // shifted values on the unit grid
  std::vector<double> scalars;
  RunReport report;
};

DiffProblem resolve_problem(const std::string& name_or_path);

// Fills grid sizes / order / moment bound from the per-preset defaults table
// (desk scale, or the grids the tables were produced with when paper_scale).
void apply_preset_defaults(RunConfig& cfg);

// Method 1: transcribe, relax, solve, extract, polish.
PipelineState run_sdpr(const RunConfig& cfg);

// Method 2 steps 2..4 for every unknown, appended to the state's report.
void run_smooth(const RunConfig& cfg, PipelineState& state);

PipelineState run_full(const RunConfig& cfg);

// solution/moment/coefficient/estimate CSVs + text report + JSON summary.
std::vector<std::string> emit_outputs(const PipelineState& state, const std::string& dir);

std::string report_text(const RunReport& rep);
std::string report_json(const RunReport& rep);

// Reads a solution.csv produced by emit_outputs back into a state suitable
// for run_smooth.
PipelineState load_solution_csv(const RunConfig& cfg, const std::string& path);

}  // namespace popde
