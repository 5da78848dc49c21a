#pragma once

#include <cstdint>
#include <functional>

#include "panelkern/panel_data.hpp"

namespace panelkern {

// True curves: the counting process has mean mu0(t) * exp(beta(t) * z).
struct SimulationTruth {
  std::function<double(double)> mu0;
  std::function<double(double)> beta;
};

enum class CensoringMode {
  None,           // every subject observed through tau
  UniformHalfTau  // censor times drawn uniformly on (tau/2, tau)
};

struct SimulationConfig {
  std::size_t n = 300;
  int max_visits = 10;     // visits per subject drawn uniformly on {1..max_visits}
  double tau = 6.0;
  double gap_rate = 1.0;   // visit gaps are Exponential(gap_rate)
  // When positive, visit times are rounded to multiples of this value so
  // subjects share visit times (useful for exercising tie handling).  Counts
  // are drawn at the rounded times, so the model holds exactly on the
  // lattice.  Zero keeps the raw continuous times.
  double visit_lattice = 0.0;
  double covariate_lo = 0.0;
  double covariate_hi = 1.0;
  CensoringMode censoring = CensoringMode::None;
  SimulationTruth truth;
  std::uint64_t seed = 1;
};

// Draws one panel dataset.  Per subject: a visit budget uniform on
// {1..max_visits}, visit times as cumulative exponential gaps truncated at
// tau (optionally rounded to the lattice, duplicates merged), an optional
// censor time, a uniform covariate, and Poisson count increments between consecutive
// visits with means matching the mean-function increments (the first from
// zero).  Subjects left with no observable visit are redrawn within their
// own stream, so datasets are reproducible from (seed, subject index) alone.
// Throws NonMonotoneMeanFunctionError when the mean function decreases
// somewhere on the covariate range.
PanelDataset generate(const SimulationConfig& config);

// The two benchmark configurations:
//   1: mu0(t) = 2t^2 + 2,      beta(t) = sqrt(t)
//   2: mu0(t) = 2 + 2 sqrt(t), beta(t) = (Beta(t/12; 3,3) + Beta(t/12; 4,4)) / 2
// both on tau = 6 with n = 300, at most 10 visits, unit gap rate.
SimulationConfig builtin_setting(int which);

}  // namespace panelkern
