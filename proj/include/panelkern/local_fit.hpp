#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "panelkern/kernels.hpp"
#include "panelkern/panel_data.hpp"

namespace panelkern {

// Coefficient vectors and matrices of a degree-p fit have p+1 entries.
// Dynamic size with a compile-time cap keeps them off the heap.
inline constexpr int kMaxBasis = 4;  // degree <= 3
using BasisVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxBasis, 1>;
using BasisMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxBasis, kMaxBasis>;

// One visit inside the window: the count observed there enters the local
// likelihood as a jump of that size.
struct DesignEvent {
  std::size_t subject;   // index into the dataset
  double time;
  double jump;           // cumulative count at this visit
  double weight;         // K_h(time - t), positive by construction
  double covariate;
  std::size_t slot;      // index into LocalDesign::slots
};

// One distinct event time.  The comparison set in the likelihood's log term
// is every subject still under observation there (C_j >= time), stored as a
// prefix length into the censor-ordered arrays of LocalDesign; the subject
// generating an event at this time is always a member.  total_jump and
// visitor_covariates describe the visits actually observed at this time and
// feed the baseline ratio, whose sums run over visitors only.
struct RiskSlot {
  double time;
  double total_jump;                       // sum of counts observed at this time
  std::size_t risk_count;                  // prefix length: subjects with C_j >= time
  std::vector<double> visitor_covariates;  // one entry per visit at this time
};

// Everything a fit at target time t needs, precomputed once.
struct LocalDesign {
  double target_time = 0.0;
  double bandwidth = 0.0;
  int degree = 1;
  std::size_t n_subjects = 0;       // of the full dataset, not the window
  std::vector<DesignEvent> events;  // ordered by (time, subject index)
  std::vector<RiskSlot> slots;      // ordered by time
  // Covariates sorted by decreasing censor time, so the risk set of any slot
  // is the prefix of length slot.risk_count.  prefix_max/min[k] bound the
  // first k covariates and give the overflow shift in O(1).
  Eigen::ArrayXd risk_covariates;
  Eigen::ArrayXd risk_covariates_sq;
  std::vector<double> prefix_max;
  std::vector<double> prefix_min;
};

// Collects the events with positive kernel weight around t and their risk
// slots.  Throws EmptyWindowError when nothing falls inside the window.
LocalDesign build_design(const PanelDataset& dataset, double t, const KernelSpec& spec);

// Local partial log-likelihood of the polynomial coefficients beta
// (beta[0] approximates the regression function at t, beta[r] its r-th
// derivative scaled by r!).  Each event contributes
//   weight * jump * (covariate * eta(u) - log mean_risk exp(covariate_j * eta(u)))
// with eta(u) the fitted polynomial at the event time.  Exponents are shifted
// by their maximum before exponentiating.  Throws NonFiniteError on overflow.
double loglik(const LocalDesign& design, const BasisVec& beta);

// Gradient and second derivative of loglik; the hessian is negative
// semidefinite for every beta.
BasisVec score(const LocalDesign& design, const BasisVec& beta);
BasisMat hessian(const LocalDesign& design, const BasisVec& beta);

struct SolveControls {
  int max_iterations = 50;
  double score_tolerance = 1e-8;   // max-norm of the score
  int max_step_halvings = 20;
  double pivot_tolerance = 1e-12;  // relative, for singularity detection
};

struct LocalFit {
  BasisVec beta;
  BasisMat hessian;
  double loglik = 0.0;
  double score_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t effective_events = 0;
  double target_time = 0.0;
};

// Newton-Raphson with step halving, started at init (zeros by default).
// converged means the score max-norm fell below tolerance with a negative
// definite hessian.  Hitting the iteration cap returns the best iterate with
// converged=false.  Throws SingularHessianError when the likelihood carries
// no curvature at the starting point.
LocalFit solve(const LocalDesign& design, const BasisVec& init, const SolveControls& controls = {});
LocalFit solve(const LocalDesign& design, const SolveControls& controls = {});

// build_design + solve in one call.
LocalFit fit_at(const PanelDataset& dataset, double t, const KernelSpec& spec,
                const SolveControls& controls = {});

// Polynomial basis (1, u-t, ..., (u-t)^p) used by the fit at t.
BasisVec monomial_basis(double u, double t, int degree);

namespace detail {

// Covariate power sums over one slot's risk set at linear predictor slope eta:
//   sums[k] = sum_j z_j^k exp(z_j * eta - shift),  k = 0, 1, 2
// with shift = max_j z_j * eta so the largest exponential is 1.
struct RiskSums {
  double s0, s1, s2;
  double shift;
};
RiskSums risk_sums(const LocalDesign& design, const RiskSlot& slot, double eta);

// True when the symmetric matrix is positive definite, using an LDLT
// factorization with the given relative pivot tolerance.
bool positive_definite(const BasisMat& m, double pivot_tolerance);

}  // namespace detail

}  // namespace panelkern
