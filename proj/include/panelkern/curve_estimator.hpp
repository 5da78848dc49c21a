#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "panelkern/local_fit.hpp"

namespace panelkern {

// Right-continuous step function, constant between knots; queries before the
// first knot return the first value (carried backward).
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> knots, std::vector<double> values);

  double operator()(double t) const;
  // The knot whose value a query at t returns.
  double knot_at(double t) const;
  bool empty() const { return knots_.empty(); }

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

// Ratio estimator of the baseline mean function at a visit time t:
//   sum_i I(C_i >= t) N_i(t) o_i(t) / sum_i I(C_i >= t) exp(beta_at(t) z_i) o_i(t)
// where o_i(t) indicates a visit exactly at t.  Throws NoVisitAtTimeError
// when no at-risk subject visits at t.
double baseline_at(const PanelDataset& dataset, const std::function<double(double)>& beta_at,
                   double t);

// Distinct visit times pooled over subjects still at risk at that time.
std::vector<double> pooled_visit_times(const PanelDataset& dataset);

// Baseline evaluated at every pooled visit time, as a step function.
StepFunction baseline_step(const PanelDataset& dataset,
                           const std::function<double(double)>& beta_at);

// Plug-in sandwich covariance of the rescaled coefficient vector at the
// design's target time.  Entry (0,0) divided by (n * h) estimates the
// variance of the fitted value; entry (r,r) divided by n * h^(2r+1) the
// variance of the r-th derivative estimate.  Throws SingularSigma1Error when
// the outer matrix cannot be inverted.
BasisMat covariance(const LocalDesign& design, const LocalFit& fit,
                    double pivot_tolerance = 1e-12);

// Two-sided normal confidence interval for the fitted value beta(t), without
// bias correction.
struct Interval {
  double lower;
  double upper;
};
Interval confidence_interval(double beta_value, const BasisMat& sigma, std::size_t n_subjects,
                             double bandwidth, double level);

// Asymptotically optimal global bandwidth for a degree-1 fit:
//   h = { nu0 * int s1(t)^-2 s2(t) w(t) dt / (mu2^2 * int b''(t)^2 w(t) dt) }^(1/5) * n^(-1/5)
// Throws DegenerateCurvatureError when the curvature integral vanishes.
double optimal_bandwidth(const std::function<double(double)>& sigma1,
                         const std::function<double(double)>& sigma2,
                         const std::function<double(double)>& beta_second_derivative,
                         const std::function<double(double)>& weight, double tau,
                         std::size_t n_subjects, const KernelSpec& spec);

struct CurveOptions {
  double level = 0.95;
  int threads = 1;      // > 1 fits grid points in parallel with cold starts
  SolveControls controls;
};

struct CurveEstimate {
  std::vector<double> grid;
  std::vector<double> beta_hat;    // NaN where the fit failed
  std::vector<double> se;          // NaN where unavailable
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  // derivative_hat[r-1][g] estimates the r-th derivative at grid[g].
  std::vector<std::vector<double>> derivative_hat;
  std::vector<std::size_t> effective_events;
  std::vector<bool> converged;
  std::vector<bool> boundary;      // window sticks out of [0, tau]
  // Baseline values at the grid, read from the pooled-visit-time step
  // function; mu0_eval_time records which knot each value came from.
  std::vector<double> mu0_hat;
  std::vector<double> mu0_eval_time;
  StepFunction mu0_step;
  std::size_t n_subjects = 0;
  double bandwidth = 0.0;
  int degree = 1;
  KernelFamily family = KernelFamily::Epanechnikov;
  double level = 0.95;
};

// Fits the curve on the grid (warm-starting each point at its left
// neighbour), builds the baseline step function from the fitted curve, and
// attaches sandwich standard errors and confidence intervals.  Points where
// the window is empty or carries no covariate contrast are flagged, not
// fatal; AllPointsFailedError is thrown when nothing converges.
CurveEstimate estimate_curve(const PanelDataset& dataset, const KernelSpec& spec,
                             const std::vector<double>& grid, const CurveOptions& options = {});

// Writes grid rows as
//   t,beta_hat,se,ci_lower,ci_upper,mu0_hat,effective_events,converged,boundary
// with 17 significant digits.
void write_curve_csv(const CurveEstimate& estimate, std::ostream& out);
std::string curve_csv_string(const CurveEstimate& estimate);

}  // namespace panelkern
