#include "panelkern/local_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "panelkern/errors.hpp"

namespace panelkern {

BasisVec monomial_basis(double u, double t, int degree) {
  BasisVec m(degree + 1);
  double power = 1.0;
  for (int r = 0; r <= degree; ++r) {
    m(r) = power;
    power *= (u - t);
  }
  return m;
}

LocalDesign build_design(const PanelDataset& dataset, double t, const KernelSpec& spec) {
  if (!(spec.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (spec.degree < 0 || spec.degree >= kMaxBasis) {
    throw std::invalid_argument("degree must lie in [0, " + std::to_string(kMaxBasis - 1) + "]");
  }

  LocalDesign design;
  design.target_time = t;
  design.bandwidth = spec.bandwidth;
  design.degree = spec.degree;
  design.n_subjects = dataset.subjects.size();

  for (std::size_t i = 0; i < dataset.subjects.size(); ++i) {
    const Subject& s = dataset.subjects[i];
    for (std::size_t k = 0; k < s.visit_times.size(); ++k) {
      const double u = s.visit_times[k];
      if (!at_risk(s, u)) continue;
      const double w = localized_weight(spec, u, t);
      if (!(w > 0.0)) continue;
      DesignEvent e;
      e.subject = i;
      e.time = u;
      e.jump = static_cast<double>(s.cumulative_counts[k]);
      e.weight = w;
      e.covariate = s.covariate;
      e.slot = 0;
      design.events.push_back(e);
    }
  }
  if (design.events.empty()) throw EmptyWindowError(t);

  std::sort(design.events.begin(), design.events.end(),
            [](const DesignEvent& a, const DesignEvent& b) {
              return std::tie(a.time, a.subject) < std::tie(b.time, b.subject);
            });

  // Subjects sorted by decreasing censor time, so any risk set is a prefix.
  std::vector<double> censor_sorted(dataset.subjects.size());
  {
    const std::size_t n = dataset.subjects.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&dataset](std::size_t a, std::size_t b) {
      return dataset.subjects[a].censor_time > dataset.subjects[b].censor_time;
    });
    design.risk_covariates.resize(static_cast<Eigen::Index>(n));
    design.risk_covariates_sq.resize(static_cast<Eigen::Index>(n));
    design.prefix_max.resize(n + 1);
    design.prefix_min.resize(n + 1);
    design.prefix_max[0] = -std::numeric_limits<double>::infinity();
    design.prefix_min[0] = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dataset.subjects[order[i]].covariate;
      censor_sorted[i] = dataset.subjects[order[i]].censor_time;
      design.risk_covariates(static_cast<Eigen::Index>(i)) = z;
      design.risk_covariates_sq(static_cast<Eigen::Index>(i)) = z * z;
      design.prefix_max[i + 1] = std::max(design.prefix_max[i], z);
      design.prefix_min[i + 1] = std::min(design.prefix_min[i], z);
    }
  }

  // Events sharing a visit time share one risk slot.
  for (DesignEvent& e : design.events) {
    if (design.slots.empty() || design.slots.back().time != e.time) {
      const auto end = std::partition_point(censor_sorted.begin(), censor_sorted.end(),
                                            [&e](double c) { return c >= e.time; });
      const auto count = static_cast<std::size_t>(end - censor_sorted.begin());
      design.slots.push_back({e.time, 0.0, count, {}});
    }
    RiskSlot& slot = design.slots.back();
    slot.total_jump += e.jump;
    slot.visitor_covariates.push_back(e.covariate);
    e.slot = design.slots.size() - 1;
  }
  return design;
}

namespace detail {

RiskSums risk_sums(const LocalDesign& design, const RiskSlot& slot, double eta) {
  const auto count = static_cast<Eigen::Index>(slot.risk_count);
  const double shift =
      eta >= 0.0 ? eta * design.prefix_max[slot.risk_count] : eta * design.prefix_min[slot.risk_count];
  const auto z = design.risk_covariates.head(count);
  const auto z2 = design.risk_covariates_sq.head(count);
  const Eigen::ArrayXd e = (z * eta - shift).exp();
  return RiskSums{e.sum(), (z * e).sum(), (z2 * e).sum(), shift};
}

bool positive_definite(const BasisMat& m, double pivot_tolerance) {
  Eigen::LDLT<BasisMat> ldlt(m);
  if (ldlt.info() != Eigen::Success) return false;
  const auto d = ldlt.vectorD();
  double max_pivot = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) max_pivot = std::max(max_pivot, std::fabs(d(i)));
  if (!(max_pivot > 0.0) || !std::isfinite(max_pivot)) return false;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d(i) > pivot_tolerance * max_pivot)) return false;
  }
  return true;
}

}  // namespace detail

namespace {

// Linear predictor slope at one slot: eta(u) = beta' (1, u-t, ..., (u-t)^p),
// so a subject with covariate z contributes exponent z * eta(u).
double slot_eta(const LocalDesign& design, const RiskSlot& slot, const BasisVec& beta) {
  double eta = 0.0;
  double power = 1.0;
  for (int r = 0; r <= design.degree; ++r) {
    eta += beta(r) * power;
    power *= (slot.time - design.target_time);
  }
  return eta;
}

void check_finite(double eta_max_abs) {
  if (!std::isfinite(std::exp(eta_max_abs))) throw NonFiniteError(eta_max_abs);
}

}  // namespace

double loglik(const LocalDesign& design, const BasisVec& beta) {
  const double log_n = std::log(static_cast<double>(design.n_subjects));
  // Per-slot pieces reused by every event in the slot.
  std::vector<double> log_mean_exp(design.slots.size());
  std::vector<double> etas(design.slots.size());
  for (std::size_t s = 0; s < design.slots.size(); ++s) {
    const double eta = slot_eta(design, design.slots[s], beta);
    if (!std::isfinite(eta)) throw NonFiniteError(std::fabs(eta));
    const detail::RiskSums sums = detail::risk_sums(design, design.slots[s], eta);
    check_finite(sums.shift);
    etas[s] = eta;
    log_mean_exp[s] = std::log(sums.s0) + sums.shift - log_n;
  }
  double value = 0.0;
  for (const DesignEvent& e : design.events) {
    value += e.weight * e.jump * (e.covariate * etas[e.slot] - log_mean_exp[e.slot]);
  }
  value /= static_cast<double>(design.n_subjects);
  if (!std::isfinite(value)) throw NonFiniteError(std::fabs(value));
  return value;
}

BasisVec score(const LocalDesign& design, const BasisVec& beta) {
  const int d = design.degree + 1;
  // Each event contributes weight * jump * (z_i - ratio(u)) * basis(u) where
  // ratio is the exp-weighted mean covariate over the risk slot; collapse the
  // per-slot factor first, then expand through the basis.
  std::vector<double> slot_coeff(design.slots.size(), 0.0);
  std::vector<double> ratios(design.slots.size());
  for (std::size_t s = 0; s < design.slots.size(); ++s) {
    const double eta = slot_eta(design, design.slots[s], beta);
    if (!std::isfinite(eta)) throw NonFiniteError(std::fabs(eta));
    const detail::RiskSums sums = detail::risk_sums(design, design.slots[s], eta);
    check_finite(sums.shift);
    ratios[s] = sums.s1 / sums.s0;
  }
  for (const DesignEvent& e : design.events) {
    slot_coeff[e.slot] += e.weight * e.jump * (e.covariate - ratios[e.slot]);
  }
  BasisVec g = BasisVec::Zero(d);
  for (std::size_t s = 0; s < design.slots.size(); ++s) {
    if (slot_coeff[s] == 0.0) continue;
    const BasisVec basis =
        monomial_basis(design.slots[s].time, design.target_time, design.degree);
    g += slot_coeff[s] * basis;
  }
  g /= static_cast<double>(design.n_subjects);
  if (!g.allFinite()) throw NonFiniteError(g.cwiseAbs().maxCoeff());
  return g;
}

BasisMat hessian(const LocalDesign& design, const BasisVec& beta) {
  const int d = design.degree + 1;
  // The curvature at a slot is the exp-weighted covariate variance of its
  // risk set, so the hessian is negative semidefinite everywhere.
  std::vector<double> slot_mass(design.slots.size(), 0.0);
  std::vector<double> variances(design.slots.size());
  for (std::size_t s = 0; s < design.slots.size(); ++s) {
    const double eta = slot_eta(design, design.slots[s], beta);
    if (!std::isfinite(eta)) throw NonFiniteError(std::fabs(eta));
    const detail::RiskSums sums = detail::risk_sums(design, design.slots[s], eta);
    check_finite(sums.shift);
    const double mean = sums.s1 / sums.s0;
    variances[s] = sums.s2 / sums.s0 - mean * mean;
  }
  for (const DesignEvent& e : design.events) {
    slot_mass[e.slot] += e.weight * e.jump;
  }
  BasisMat h = BasisMat::Zero(d, d);
  for (std::size_t s = 0; s < design.slots.size(); ++s) {
    const double coeff = slot_mass[s] * variances[s];
    if (coeff == 0.0) continue;
    const BasisVec basis =
        monomial_basis(design.slots[s].time, design.target_time, design.degree);
    h -= coeff * (basis * basis.transpose());
  }
  h /= static_cast<double>(design.n_subjects);
  if (!h.allFinite()) throw NonFiniteError(h.cwiseAbs().maxCoeff());
  return h;
}

namespace {

double loglik_or_neg_inf(const LocalDesign& design, const BasisVec& beta) {
  try {
    return loglik(design, beta);
  } catch (const NonFiniteError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

LocalFit solve(const LocalDesign& design, const BasisVec& init, const SolveControls& controls) {
  const int d = design.degree + 1;
  if (init.size() != d) throw std::invalid_argument("init has wrong dimension for this degree");

  LocalFit fit;
  fit.target_time = design.target_time;
  fit.effective_events = design.events.size();
  fit.beta = init;
  double current = loglik(design, fit.beta);

  for (int it = 0; it < controls.max_iterations; ++it) {
    const BasisVec g = score(design, fit.beta);
    const BasisMat h = hessian(design, fit.beta);
    const double g_norm = g.cwiseAbs().maxCoeff();
    const bool curved = detail::positive_definite(-h, controls.pivot_tolerance);

    if (g_norm <= controls.score_tolerance && curved) {
      fit.hessian = h;
      fit.loglik = current;
      fit.score_norm = g_norm;
      fit.iterations = it;
      fit.converged = true;
      return fit;
    }
    if (!curved) {
      if (it == 0) throw SingularHessianError(design.target_time);
      fit.hessian = h;
      fit.loglik = current;
      fit.score_norm = g_norm;
      fit.iterations = it;
      fit.converged = false;
      return fit;
    }

    const BasisVec direction = (-h).ldlt().solve(g);  // ascent direction
    // Near the optimum the quadratic gain of a full Newton step can drop
    // below the rounding noise of the weighted sums (large counts, many
    // events), so steps are accepted unless they measurably decrease the
    // objective; otherwise the search would stall one step short of the
    // score tolerance.
    const double slack = 1e-10 * (1.0 + std::fabs(current));
    double step = 1.0;
    double proposed = loglik_or_neg_inf(design, fit.beta + step * direction);
    int halvings = 0;
    while (proposed < current - slack && halvings < controls.max_step_halvings) {
      step *= 0.5;
      proposed = loglik_or_neg_inf(design, fit.beta + step * direction);
      ++halvings;
    }
    if (proposed < current - slack) {
      // No improving step exists at this scale; report the best iterate.
      fit.hessian = h;
      fit.loglik = current;
      fit.score_norm = g_norm;
      fit.iterations = it;
      fit.converged = false;
      return fit;
    }
    fit.beta += step * direction;
    current = proposed;
  }

  const BasisVec g = score(design, fit.beta);
  const BasisMat h = hessian(design, fit.beta);
  fit.hessian = h;
  fit.loglik = current;
  fit.score_norm = g.cwiseAbs().maxCoeff();
  fit.iterations = controls.max_iterations;
  fit.converged = fit.score_norm <= controls.score_tolerance &&
                  detail::positive_definite(-h, controls.pivot_tolerance);
  return fit;
}

LocalFit solve(const LocalDesign& design, const SolveControls& controls) {
  return solve(design, BasisVec::Zero(design.degree + 1), controls);
}

LocalFit fit_at(const PanelDataset& dataset, double t, const KernelSpec& spec,
                const SolveControls& controls) {
  return solve(build_design(dataset, t, spec), controls);
}

}  // namespace panelkern
