#include "panelkern/study_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "panelkern/errors.hpp"
#include "panelkern/parallel.hpp"
#include "panelkern/rng.hpp"

namespace panelkern {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ReplicationOutcome {
  bool failed = false;
  CurveEstimate estimate;
};

}  // namespace

StudyReport run_study(const StudyConfig& config) {
  if (config.grid.empty()) throw std::invalid_argument("study grid must be nonempty");
  if (config.replications == 0) throw std::invalid_argument("need at least one replication");
  const auto start = std::chrono::steady_clock::now();

  const std::size_t n_grid = config.grid.size();
  std::vector<ReplicationOutcome> outcomes(config.replications);

  CurveOptions curve_options;
  curve_options.level = config.level;
  curve_options.threads = 1;  // parallelism lives at the replication level
  curve_options.controls = config.controls;

  parallel_for(config.replications, config.threads, [&](std::size_t r) {
    SimulationConfig sim = config.sim;
    sim.seed = mix64(config.seed ^ mix64(r));
    const PanelDataset dataset = generate(sim);
    try {
      outcomes[r].estimate = estimate_curve(dataset, config.spec, config.grid, curve_options);
    } catch (const EstimationError&) {
      outcomes[r].failed = true;
    }
  });

  StudyReport report;
  report.replications = config.replications;
  report.n_subjects = config.sim.n;
  report.bandwidth = config.spec.bandwidth;
  report.degree = config.spec.degree;
  report.kernel = kernel_family_name(config.spec.family);
  report.seed = config.seed;
  report.level = config.level;
  report.rows.resize(n_grid);

  std::size_t converged_fits = 0;
  for (const ReplicationOutcome& outcome : outcomes) {
    if (outcome.failed) ++report.failed_replications;
  }
  if (report.failed_replications == config.replications) {
    throw EstimationError("every study replication failed");
  }

  for (std::size_t g = 0; g < n_grid; ++g) {
    GridSummary& row = report.rows[g];
    row.t = config.grid[g];
    row.truth_beta = config.sim.truth.beta(row.t);
    row.truth_mu0 = config.sim.truth.mu0(row.t);

    double sum_beta = 0.0;
    double sum_sq = 0.0;
    double sum_se = 0.0;
    double sum_mu0 = 0.0;
    double sum_eval = 0.0;
    std::size_t mu0_count = 0;
    std::size_t covered = 0;
    for (const ReplicationOutcome& outcome : outcomes) {
      if (outcome.failed) continue;
      const CurveEstimate& est = outcome.estimate;
      if (std::isfinite(est.mu0_hat[g])) {
        sum_mu0 += est.mu0_hat[g];
        sum_eval += est.mu0_eval_time[g];
        ++mu0_count;
      }
      if (!est.converged[g]) continue;
      ++row.converged_count;
      sum_beta += est.beta_hat[g];
      sum_sq += est.beta_hat[g] * est.beta_hat[g];
      if (std::isfinite(est.se[g])) {
        ++row.se_count;
        sum_se += est.se[g];
        if (est.ci_lower[g] <= row.truth_beta && row.truth_beta <= est.ci_upper[g]) ++covered;
      }
    }
    converged_fits += row.converged_count;

    const double k = static_cast<double>(row.converged_count);
    row.mean_beta = row.converged_count > 0 ? sum_beta / k : kNaN;
    row.bias = row.mean_beta - row.truth_beta;
    row.ese = row.converged_count > 1
                  ? std::sqrt(std::max(sum_sq - k * row.mean_beta * row.mean_beta, 0.0) / (k - 1.0))
                  : kNaN;
    row.mean_se = row.se_count > 0 ? sum_se / static_cast<double>(row.se_count) : kNaN;
    row.coverage =
        row.se_count > 0 ? static_cast<double>(covered) / static_cast<double>(row.se_count) : kNaN;
    row.mean_mu0 = mu0_count > 0 ? sum_mu0 / static_cast<double>(mu0_count) : kNaN;
    row.mu0_eval_time = mu0_count > 0 ? sum_eval / static_cast<double>(mu0_count) : kNaN;
  }

  report.convergence_rate = static_cast<double>(converged_fits) /
                            (static_cast<double>(config.replications) * static_cast<double>(n_grid));
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report.convergence_rate < config.min_convergence) {
    throw LowConvergenceError(report.convergence_rate, config.min_convergence);
  }
  return report;
}

void write_study_csv(const StudyReport& report, std::ostream& out) {
  out << "# replications=" << report.replications << " n=" << report.n_subjects
      << " bandwidth=" << format_double(report.bandwidth) << " degree=" << report.degree
      << " kernel=" << report.kernel << " seed=" << report.seed
      << " level=" << format_double(report.level)
      << " convergence_rate=" << format_double(report.convergence_rate)
      << " failed_replications=" << report.failed_replications << '\n';
  out << "t,truth_beta,mean_beta,bias,ese,mean_se,coverage,mean_mu0,truth_mu0,"
         "mu0_eval_time,converged_count,se_count\n";
  for (const GridSummary& row : report.rows) {
    out << format_double(row.t) << ',' << format_double(row.truth_beta) << ','
        << format_double(row.mean_beta) << ',' << format_double(row.bias) << ','
        << format_double(row.ese) << ',' << format_double(row.mean_se) << ','
        << format_double(row.coverage) << ',' << format_double(row.mean_mu0) << ','
        << format_double(row.truth_mu0) << ',' << format_double(row.mu0_eval_time) << ','
        << row.converged_count << ',' << row.se_count << '\n';
  }
}

std::string study_csv_string(const StudyReport& report) {
  std::ostringstream out;
  write_study_csv(report, out);
  return out.str();
}

AnalysisResult analyze(const PanelDataset& dataset, const KernelSpec& spec,
                       const std::vector<double>& grid, const CurveOptions& options) {
  AnalysisResult result;
  result.curve = estimate_curve(dataset, spec, grid, options);

  // Constant-coefficient model: a degree-0 fit under a uniform kernel wide
  // enough to weight every visit equally.  The sandwich variance is free of
  // the artificial bandwidth (it cancels between the two matrices).
  KernelSpec flat;
  flat.family = KernelFamily::Uniform;
  flat.bandwidth = 2.0 * dataset.tau;
  flat.degree = 0;
  const LocalDesign design = build_design(dataset, 0.5 * dataset.tau, flat);
  const LocalFit fit = solve(design, options.controls);
  result.constant_beta = fit.beta(0);
  result.constant_iterations = fit.iterations;
  result.constant_converged = fit.converged;
  const BasisMat sigma = covariance(design, fit, options.controls.pivot_tolerance);
  result.constant_se = std::sqrt(std::max(sigma(0, 0), 0.0) /
                                 (static_cast<double>(dataset.subjects.size()) * flat.bandwidth));
  return result;
}

std::vector<double> make_grid(double tau, std::size_t points) {
  if (points < 2) throw std::invalid_argument("grid needs at least 2 points");
  std::vector<double> grid(points);
  for (std::size_t g = 0; g < points; ++g) {
    grid[g] = tau * static_cast<double>(g) / static_cast<double>(points - 1);
  }
  return grid;
}

}  // namespace panelkern
