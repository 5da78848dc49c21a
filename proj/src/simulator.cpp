#include "panelkern/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "panelkern/errors.hpp"
#include "panelkern/rng.hpp"
#include "panelkern/stats.hpp"

namespace panelkern {

namespace {

void check_config(const SimulationConfig& config) {
  if (config.n < 2) throw std::invalid_argument("need at least 2 subjects");
  if (config.max_visits < 1) throw std::invalid_argument("max_visits must be at least 1");
  if (!(config.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(config.gap_rate > 0.0)) throw std::invalid_argument("gap_rate must be positive");
  if (!(config.visit_lattice >= 0.0) || config.visit_lattice >= config.tau) {
    throw std::invalid_argument("visit_lattice must lie in [0, tau)");
  }
  if (!(config.covariate_hi > config.covariate_lo)) {
    throw std::invalid_argument("covariate range must be nondegenerate");
  }
  if (!config.truth.mu0 || !config.truth.beta) {
    throw std::invalid_argument("simulation truth functions are not set");
  }
}

// The Poisson increments need a nondecreasing mean function.  log-mean is
// linear in z, so checking the covariate range endpoints covers the range.
void check_monotone_mean(const SimulationConfig& config) {
  constexpr int kGridPoints = 1024;
  const double z_values[2] = {config.covariate_lo, config.covariate_hi};
  for (const double z : z_values) {
    double previous = 0.0;
    for (int k = 0; k <= kGridPoints; ++k) {
      const double t = config.tau * static_cast<double>(k) / kGridPoints;
      const double mean = config.truth.mu0(t) * std::exp(config.truth.beta(t) * z);
      if (!std::isfinite(mean) || mean < 0.0) throw NonMonotoneMeanFunctionError(t, z);
      if (k > 0 && mean < previous * (1.0 - 1e-12) - 1e-12) {
        throw NonMonotoneMeanFunctionError(t, z);
      }
      previous = std::max(previous, mean);
    }
  }
}

double round_to_lattice(double t, double lattice, double tau) {
  if (lattice <= 0.0) return t;
  const double max_step = std::floor(tau / lattice + 1e-9);
  double step = std::round(t / lattice);
  step = std::clamp(step, 1.0, max_step);  // visits must stay in (0, tau]
  return step * lattice;
}

}  // namespace

PanelDataset generate(const SimulationConfig& config) {
  check_config(config);
  check_monotone_mean(config);

  PanelDataset dataset;
  dataset.tau = config.tau;
  dataset.subjects.resize(config.n);

  for (std::size_t i = 0; i < config.n; ++i) {
    SplitStream stream(config.seed, i);
    Subject subject;
    subject.id = "s" + std::to_string(i + 1);

    constexpr int kMaxRedraws = 1000;
    int attempt = 0;
    for (; attempt < kMaxRedraws; ++attempt) {
      const auto budget = static_cast<int>(stream.uniform_int(1, config.max_visits));
      std::vector<double> times;
      double t = 0.0;
      for (int v = 0; v < budget; ++v) {
        t += stream.exponential(config.gap_rate);
        if (t > config.tau) break;
        times.push_back(round_to_lattice(t, config.visit_lattice, config.tau));
      }
      std::sort(times.begin(), times.end());
      times.erase(std::unique(times.begin(), times.end()), times.end());

      const double covariate = stream.uniform(config.covariate_lo, config.covariate_hi);
      double censor = config.tau;
      if (config.censoring == CensoringMode::UniformHalfTau) {
        censor = stream.uniform(0.5 * config.tau, config.tau);
        while (!times.empty() && times.back() > censor) times.pop_back();
      }
      if (times.empty()) continue;  // no observable visit; redraw this subject

      subject.covariate = covariate;
      subject.censor_time = censor;
      subject.visit_times = std::move(times);
      break;
    }
    if (attempt == kMaxRedraws) {
      throw std::invalid_argument("subject redraw limit hit; visits cannot fit the horizon");
    }

    // Counts: independent Poisson increments matching the mean-function
    // increments between consecutive visits; the cumulative total at any
    // visit time T is then Poisson with mean mu0(T) exp(beta(T) z) exactly.
    long long total = 0;
    double previous_mean = 0.0;
    subject.cumulative_counts.reserve(subject.visit_times.size());
    for (const double time : subject.visit_times) {
      const double mean =
          config.truth.mu0(time) * std::exp(config.truth.beta(time) * subject.covariate);
      const double increment = std::max(mean - previous_mean, 0.0);
      total += stream.poisson(increment);
      subject.cumulative_counts.push_back(total);
      previous_mean = mean;
    }
    dataset.subjects[i] = std::move(subject);
  }
  return dataset;
}

SimulationConfig builtin_setting(int which) {
  SimulationConfig config;
  config.n = 300;
  config.max_visits = 10;
  config.tau = 6.0;
  config.gap_rate = 1.0;
  if (which == 1) {
    config.truth.mu0 = [](double t) { return 2.0 * t * t + 2.0; };
    config.truth.beta = [](double t) { return std::sqrt(std::max(t, 0.0)); };
  } else if (which == 2) {
    config.truth.mu0 = [](double t) { return 2.0 + 2.0 * std::sqrt(std::max(t, 0.0)); };
    config.truth.beta = [](double t) {
      const double x = t / 12.0;
      return 0.5 * (beta_pdf(x, 3.0, 3.0) + beta_pdf(x, 4.0, 4.0));
    };
  } else {
    throw std::invalid_argument("setting must be 1 or 2");
  }
  return config;
}

}  // namespace panelkern
