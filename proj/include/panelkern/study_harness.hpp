#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "panelkern/curve_estimator.hpp"
#include "panelkern/simulator.hpp"

namespace panelkern {

struct StudyConfig {
  SimulationConfig sim;        // per-replication seeds derive from `seed` below
  KernelSpec spec;
  std::vector<double> grid;
  std::size_t replications = 200;
  std::uint64_t seed = 1;
  double level = 0.95;
  int threads = 1;             // parallelism across replications
  double min_convergence = 0.95;
  SolveControls controls;
};

// Per grid point, aggregated over the converged replications.
struct GridSummary {
  double t = 0.0;
  double truth_beta = 0.0;
  double mean_beta = 0.0;      // NaN if nothing converged here
  double bias = 0.0;           // mean_beta - truth_beta
  double ese = 0.0;            // sd of the estimates across replications
  double mean_se = 0.0;        // mean of the estimated standard errors
  double coverage = 0.0;       // fraction of intervals containing the truth
  double mean_mu0 = 0.0;
  double truth_mu0 = 0.0;
  double mu0_eval_time = 0.0;  // mean knot the baseline value was read from
  std::size_t converged_count = 0;
  std::size_t se_count = 0;    // replications with a finite interval here
};

struct StudyReport {
  std::vector<GridSummary> rows;
  std::size_t replications = 0;
  std::size_t failed_replications = 0;  // no grid point converged at all
  double convergence_rate = 0.0;        // converged fits / (replications * grid size)
  std::size_t n_subjects = 0;
  double bandwidth = 0.0;
  int degree = 1;
  std::string kernel;
  std::uint64_t seed = 0;
  double level = 0.95;
  double elapsed_seconds = 0.0;  // not written to CSV, so outputs stay reproducible
};

// Runs `replications` independent simulate-estimate cycles (replication r
// uses stream r of the study seed) and aggregates per grid point.  Results
// are identical for any thread count.  Throws LowConvergenceError when the
// overall convergence rate falls below min_convergence, and EstimationError
// when every replication fails outright.
StudyReport run_study(const StudyConfig& config);

// CSV: '#' meta lines (deterministic fields only), then one row per grid point.
void write_study_csv(const StudyReport& report, std::ostream& out);
std::string study_csv_string(const StudyReport& report);

struct AnalysisResult {
  CurveEstimate curve;
  // Fit of the constant-coefficient model (no kernel localization) with its
  // sandwich standard error, for comparison against the curve.
  double constant_beta = 0.0;
  double constant_se = 0.0;
  int constant_iterations = 0;
  bool constant_converged = false;
};

// estimate_curve plus the constant-coefficient fit on the same data.
AnalysisResult analyze(const PanelDataset& dataset, const KernelSpec& spec,
                       const std::vector<double>& grid, const CurveOptions& options = {});

// Equally spaced points on [0, tau] including both ends.
std::vector<double> make_grid(double tau, std::size_t points);

}  // namespace panelkern
