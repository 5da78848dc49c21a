#include "panelkern/curve_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include "panelkern/errors.hpp"
#include "panelkern/parallel.hpp"
#include "panelkern/stats.hpp"

namespace panelkern {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

StepFunction::StepFunction(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() != values_.size() || knots_.empty()) {
    throw std::invalid_argument("step function needs matching, nonempty knots and values");
  }
  if (!std::is_sorted(knots_.begin(), knots_.end())) {
    throw std::invalid_argument("step function knots must be sorted");
  }
}

double StepFunction::operator()(double t) const {
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

double StepFunction::knot_at(double t) const {
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return knots_.front();
  return knots_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

double baseline_at(const PanelDataset& dataset, const std::function<double(double)>& beta_at,
                   double t) {
  const double beta = beta_at(t);
  double numerator = 0.0;
  double denominator = 0.0;
  bool any = false;
  for (const Subject& s : dataset.subjects) {
    if (!at_risk(s, t) || !has_visit_at(s, t)) continue;
    any = true;
    numerator += static_cast<double>(count_at(s, t));
    denominator += std::exp(beta * s.covariate);
  }
  if (!any) throw NoVisitAtTimeError(t);
  return numerator / denominator;
}

std::vector<double> pooled_visit_times(const PanelDataset& dataset) {
  std::vector<double> times;
  for (const Subject& s : dataset.subjects) {
    for (const double u : s.visit_times) {
      if (at_risk(s, u)) times.push_back(u);
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

StepFunction baseline_step(const PanelDataset& dataset,
                           const std::function<double(double)>& beta_at) {
  const std::vector<double> times = pooled_visit_times(dataset);
  if (times.empty()) throw NoVisitAtTimeError(0.0);
  std::vector<double> values(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    values[k] = baseline_at(dataset, beta_at, times[k]);
  }
  return StepFunction(times, values);
}

BasisMat covariance(const LocalDesign& design, const LocalFit& fit, double pivot_tolerance) {
  const int d = design.degree + 1;
  const double n = static_cast<double>(design.n_subjects);
  const double h = design.bandwidth;
  const double t = design.target_time;

  // Per-slot quantities at the fitted coefficients: the exp-weighted
  // covariate mean and variance of the risk set, and the baseline ratio whose
  // denominator runs over the subjects actually visiting at the slot time,
  // evaluated with the fitted polynomial (so the plug-in transforms
  // consistently under covariate location shifts).
  const std::size_t n_slots = design.slots.size();
  std::vector<double> ratio(n_slots), variance(n_slots), log_mu0(n_slots), eta(n_slots);
  for (std::size_t s = 0; s < n_slots; ++s) {
    const RiskSlot& slot = design.slots[s];
    double e = 0.0;
    double power = 1.0;
    for (int r = 0; r < d; ++r) {
      e += fit.beta(r) * power;
      power *= (slot.time - t);
    }
    eta[s] = e;
    const detail::RiskSums sums = detail::risk_sums(design, slot, e);
    ratio[s] = sums.s1 / sums.s0;
    variance[s] = sums.s2 / sums.s0 - ratio[s] * ratio[s];
    double vshift = -std::numeric_limits<double>::infinity();
    for (const double z : slot.visitor_covariates) vshift = std::max(vshift, e * z);
    double v0 = 0.0;
    for (const double z : slot.visitor_covariates) v0 += std::exp(e * z - vshift);
    log_mu0[s] =
        slot.total_jump > 0.0 ? std::log(slot.total_jump) - std::log(v0) - vshift
                              : -std::numeric_limits<double>::infinity();
  }

  // Basis scaled by bandwidth powers, (1, (u-t)/h, ..., ((u-t)/h)^p).
  const auto scaled_basis = [&](double u) {
    BasisVec x(d);
    double power = 1.0;
    for (int r = 0; r < d; ++r) {
      x(r) = power;
      power *= (u - t) / h;
    }
    return x;
  };

  BasisMat outer = BasisMat::Zero(d, d);   // kernel-weighted curvature
  BasisMat middle = BasisMat::Zero(d, d);  // squared-kernel variance term
  for (const DesignEvent& e : design.events) {
    const BasisVec x = scaled_basis(e.time);
    const BasisMat xx = x * x.transpose();
    outer += (e.weight * e.jump * variance[e.slot]) * xx;
    const double centered = e.covariate - ratio[e.slot];
    const double mu0_factor = std::exp(2.0 * (log_mu0[e.slot] + eta[e.slot] * e.covariate));
    middle += (h * e.weight * e.weight * centered * centered * mu0_factor) * xx;
  }
  outer /= n;
  middle /= n;

  if (!detail::positive_definite(outer, pivot_tolerance)) throw SingularSigma1Error(t);
  const Eigen::LDLT<BasisMat> ldlt(outer);
  const BasisMat inv_outer = ldlt.solve(BasisMat::Identity(d, d));
  BasisMat sigma = inv_outer * middle * inv_outer;
  sigma = 0.5 * (sigma + sigma.transpose()).eval();  // exact symmetry
  return sigma;
}

Interval confidence_interval(double beta_value, const BasisMat& sigma, std::size_t n_subjects,
                             double bandwidth, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  if (!(bandwidth > 0.0) || n_subjects == 0) {
    throw std::invalid_argument("confidence_interval needs positive bandwidth and subjects");
  }
  const double variance = std::max(sigma(0, 0), 0.0);
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double halfwidth =
      z * std::sqrt(variance / (static_cast<double>(n_subjects) * bandwidth));
  return {beta_value - halfwidth, beta_value + halfwidth};
}

double optimal_bandwidth(const std::function<double(double)>& sigma1,
                         const std::function<double(double)>& sigma2,
                         const std::function<double(double)>& beta_second_derivative,
                         const std::function<double(double)>& weight, double tau,
                         std::size_t n_subjects, const KernelSpec& spec) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (n_subjects == 0) throw std::invalid_argument("need at least one subject");
  const KernelMoments m = moments(spec);

  const auto variance_integrand = [&](double t) {
    const double s1 = sigma1(t);
    return sigma2(t) * weight(t) / (s1 * s1);
  };
  const auto curvature_integrand = [&](double t) {
    const double b2 = beta_second_derivative(t);
    return b2 * b2 * weight(t);
  };
  const double variance_integral = adaptive_simpson(variance_integrand, 0.0, tau, 1e-10);
  const double curvature_integral = adaptive_simpson(curvature_integrand, 0.0, tau, 1e-10);
  if (!(curvature_integral > 0.0)) throw DegenerateCurvatureError();
  if (!(variance_integral > 0.0) || !std::isfinite(variance_integral)) {
    throw std::invalid_argument("variance integral must be positive and finite");
  }

  const double ratio = m.nu0 * variance_integral / (m.mu2 * m.mu2 * curvature_integral);
  return std::pow(ratio, 0.2) * std::pow(static_cast<double>(n_subjects), -0.2);
}

namespace {

// Piecewise-linear interpolation through the converged grid values, clamped
// to the nearest fitted value outside their range.
std::function<double(double)> interpolated_beta(const std::vector<double>& grid,
                                                const std::vector<double>& beta,
                                                const std::vector<bool>& converged) {
  auto times = std::make_shared<std::vector<double>>();
  auto values = std::make_shared<std::vector<double>>();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (converged[g]) {
      times->push_back(grid[g]);
      values->push_back(beta[g]);
    }
  }
  return [times, values](double t) {
    const auto& ts = *times;
    const auto& vs = *values;
    if (t <= ts.front()) return vs.front();
    if (t >= ts.back()) return vs.back();
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    const std::size_t lo = hi - 1;
    const double span = ts[hi] - ts[lo];
    const double frac = span > 0.0 ? (t - ts[lo]) / span : 0.0;
    return vs[lo] + frac * (vs[hi] - vs[lo]);
  };
}

}  // namespace

CurveEstimate estimate_curve(const PanelDataset& dataset, const KernelSpec& spec,
                             const std::vector<double>& grid, const CurveOptions& options) {
  require_valid(dataset);
  if (grid.empty()) throw std::invalid_argument("grid must be nonempty");
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw std::invalid_argument("grid must be sorted");
  }
  if (grid.front() < 0.0 || grid.back() > dataset.tau) {
    throw std::invalid_argument("grid must lie inside [0, tau]");
  }

  const std::size_t n_grid = grid.size();
  CurveEstimate est;
  est.grid = grid;
  est.beta_hat.assign(n_grid, kNaN);
  est.se.assign(n_grid, kNaN);
  est.ci_lower.assign(n_grid, kNaN);
  est.ci_upper.assign(n_grid, kNaN);
  est.derivative_hat.assign(static_cast<std::size_t>(spec.degree), std::vector<double>(n_grid, kNaN));
  est.effective_events.assign(n_grid, 0);
  est.converged.assign(n_grid, false);
  est.boundary.assign(n_grid, false);
  est.mu0_hat.assign(n_grid, kNaN);
  est.mu0_eval_time.assign(n_grid, kNaN);
  est.n_subjects = dataset.subjects.size();
  est.bandwidth = spec.bandwidth;
  est.degree = spec.degree;
  est.family = spec.family;
  est.level = options.level;

  std::vector<LocalFit> fits(n_grid);

  const auto fit_point = [&](std::size_t g, const BasisVec& init) -> bool {
    try {
      const LocalDesign design = build_design(dataset, grid[g], spec);
      LocalFit fit;
      try {
        fit = solve(design, init, options.controls);
      } catch (const NonFiniteError&) {
        // A wild warm start can overflow; a cold start is always finite.
        fit = solve(design, options.controls);
      }
      est.effective_events[g] = fit.effective_events;
      if (!fit.converged) return false;
      fits[g] = fit;
      return true;
    } catch (const EmptyWindowError&) {
      return false;
    } catch (const SingularHessianError&) {
      return false;
    }
  };

  if (options.threads > 1) {
    // Cold starts keep the result independent of the work distribution.
    parallel_for(n_grid, options.threads, [&](std::size_t g) {
      est.converged[g] = fit_point(g, BasisVec::Zero(spec.degree + 1));
    });
  } else {
    BasisVec warm = BasisVec::Zero(spec.degree + 1);
    bool have_warm = false;
    for (std::size_t g = 0; g < n_grid; ++g) {
      est.converged[g] =
          fit_point(g, have_warm ? warm : BasisVec::Zero(spec.degree + 1));
      if (est.converged[g]) {
        warm = fits[g].beta;
        have_warm = true;
      }
    }
  }

  if (std::none_of(est.converged.begin(), est.converged.end(), [](bool c) { return c; })) {
    throw AllPointsFailedError();
  }

  for (std::size_t g = 0; g < n_grid; ++g) {
    est.boundary[g] =
        grid[g] - spec.bandwidth < 0.0 || grid[g] + spec.bandwidth > dataset.tau;
    if (!est.converged[g]) continue;
    est.beta_hat[g] = fits[g].beta(0);
    for (int r = 1; r <= spec.degree; ++r) {
      est.derivative_hat[static_cast<std::size_t>(r - 1)][g] = fits[g].beta(r);
    }
  }

  const auto beta_at = interpolated_beta(grid, est.beta_hat, est.converged);
  est.mu0_step = baseline_step(dataset, beta_at);
  for (std::size_t g = 0; g < n_grid; ++g) {
    est.mu0_hat[g] = est.mu0_step(grid[g]);
    est.mu0_eval_time[g] = est.mu0_step.knot_at(grid[g]);
  }

  for (std::size_t g = 0; g < n_grid; ++g) {
    if (!est.converged[g]) continue;
    try {
      const LocalDesign design = build_design(dataset, grid[g], spec);
      const BasisMat sigma = covariance(design, fits[g], options.controls.pivot_tolerance);
      est.se[g] = std::sqrt(std::max(sigma(0, 0), 0.0) /
                            (static_cast<double>(est.n_subjects) * spec.bandwidth));
      const Interval ci = confidence_interval(est.beta_hat[g], sigma, est.n_subjects,
                                              spec.bandwidth, options.level);
      est.ci_lower[g] = ci.lower;
      est.ci_upper[g] = ci.upper;
    } catch (const SingularSigma1Error&) {
      // Leave the point's uncertainty columns as NaN.
    }
  }
  return est;
}

void write_curve_csv(const CurveEstimate& estimate, std::ostream& out) {
  out << "t,beta_hat,se,ci_lower,ci_upper,mu0_hat,effective_events,converged,boundary\n";
  for (std::size_t g = 0; g < estimate.grid.size(); ++g) {
    out << format_double(estimate.grid[g]) << ',' << format_double(estimate.beta_hat[g]) << ','
        << format_double(estimate.se[g]) << ',' << format_double(estimate.ci_lower[g]) << ','
        << format_double(estimate.ci_upper[g]) << ',' << format_double(estimate.mu0_hat[g])
        << ',' << estimate.effective_events[g] << ',' << (estimate.converged[g] ? 1 : 0) << ','
        << (estimate.boundary[g] ? 1 : 0) << '\n';
  }
}

std::string curve_csv_string(const CurveEstimate& estimate) {
  std::ostringstream out;
  write_curve_csv(estimate, out);
  return out.str();
}

}  // namespace panelkern
