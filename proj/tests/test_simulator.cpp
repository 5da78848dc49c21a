#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "panelkern/errors.hpp"
#include "panelkern/panel_data.hpp"
#include "panelkern/simulator.hpp"
#include "panelkern/stats.hpp"

using namespace panelkern;

namespace {

SimulationConfig flat_effect_config(std::size_t n, std::uint64_t seed) {
  SimulationConfig config;
  config.n = n;
  config.seed = seed;
  config.truth.mu0 = [](double t) { return 2.0 * t * t + 2.0; };
  config.truth.beta = [](double) { return 0.0; };
  return config;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("builtin settings carry the advertised curves") {
  const SimulationConfig one = builtin_setting(1);
  CHECK(one.truth.mu0(4.0) == doctest::Approx(34.0).epsilon(1e-15));
  CHECK(one.truth.beta(4.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(one.n == 300);
  CHECK(one.max_visits == 10);
  CHECK(one.tau == 6.0);
  CHECK(one.gap_rate == 1.0);
  CHECK(one.visit_lattice == 0.0);
  CHECK(one.covariate_lo == 0.0);
  CHECK(one.covariate_hi == 1.0);
  CHECK(one.censoring == CensoringMode::None);

  const SimulationConfig two = builtin_setting(2);
  CHECK(two.truth.mu0(4.0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(two.truth.beta(0.0) == doctest::Approx(0.0));
  // At t = 6 the scaled argument is 1/2, where the two shape components are
  // 30/16 and 140/64.
  const double want = 0.5 * (30.0 / 16.0 + 140.0 / 64.0);
  CHECK(two.truth.beta(6.0) == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(builtin_setting(0), std::invalid_argument);
  CHECK_THROWS_AS(builtin_setting(3), std::invalid_argument);
}

TEST_CASE("generation is reproducible and seed-sensitive") {
  SimulationConfig config = builtin_setting(1);
  config.n = 40;
  config.seed = 9;
  const std::string first = emit_csv_string(generate(config));
  const std::string second = emit_csv_string(generate(config));
  CHECK(first == second);
  config.seed = 10;
  CHECK(emit_csv_string(generate(config)) != first);
}

TEST_CASE("generated datasets pass validation in every mode") {
  for (int setting : {1, 2}) {
    for (const CensoringMode mode : {CensoringMode::None, CensoringMode::UniformHalfTau}) {
      for (const double lattice : {0.0, 0.06}) {
        SimulationConfig config = builtin_setting(setting);
        config.n = 50;
        config.seed = 3;
        config.censoring = mode;
        config.visit_lattice = lattice;
        const PanelDataset d = generate(config);
        CHECK(d.subjects.size() == 50);
        CHECK(d.tau == 6.0);
        CHECK(validate(d).empty());
      }
    }
  }
}

TEST_CASE("counts at a lattice time match the mean function") {
  // With a flat unit effect the count at the first visit is Poisson with mean
  // mu0 of that time; pinning visits to the integer lattice makes t = 1 reach
  // mu0(1) = 4 exactly.
  SimulationConfig config = flat_effect_config(20000, 5);
  config.visit_lattice = 1.0;
  const PanelDataset d = generate(config);
  double sum = 0.0;
  double m = 0.0;
  for (const Subject& s : d.subjects) {
    if (s.visit_times.front() == 1.0) {
      sum += static_cast<double>(s.cumulative_counts.front());
      m += 1.0;
    }
  }
  REQUIRE(m > 5000);
  const double mean = sum / m;
  CHECK(std::fabs(mean - 4.0) <= 3.0 * 2.0 / std::sqrt(m));
}

TEST_CASE("count increments between lattice visits are Poisson") {
  SimulationConfig config = flat_effect_config(10000, 6);
  config.visit_lattice = 1.0;
  const PanelDataset d = generate(config);
  std::vector<double> increments;
  for (const Subject& s : d.subjects) {
    for (std::size_t k = 0; k + 1 < s.visit_times.size(); ++k) {
      if (s.visit_times[k] == 1.0 && s.visit_times[k + 1] == 2.0) {
        increments.push_back(
            static_cast<double>(s.cumulative_counts[k + 1] - s.cumulative_counts[k]));
      }
    }
  }
  const double m = static_cast<double>(increments.size());
  REQUIRE(m > 1000);
  double mean = 0.0;
  for (const double x : increments) mean += x;
  mean /= m;
  double var = 0.0;
  for (const double x : increments) var += (x - mean) * (x - mean);
  var /= m - 1.0;
  // Increment mean mu0(2) - mu0(1) = 6, and Poisson dispersion.
  const double lambda = 6.0;
  CHECK(std::fabs(mean - lambda) <= 3.0 * std::sqrt(lambda / m));
  CHECK(std::fabs(var / mean - 1.0) <= 3.0 * std::sqrt(2.0 / m + 1.0 / (m * lambda)));
}

TEST_CASE("first-visit counts track the covariate-scaled mean") {
  SimulationConfig config = builtin_setting(1);
  config.n = 50000;
  config.seed = 11;
  const PanelDataset d = generate(config);
  double count_sum = 0.0;
  double mean_sum = 0.0;
  double m = 0.0;
  for (const Subject& s : d.subjects) {
    const double t1 = s.visit_times.front();
    const double z = s.covariate;
    if (t1 < 1.8 || t1 > 2.2 || z < 0.4 || z > 0.6) continue;
    count_sum += static_cast<double>(s.cumulative_counts.front());
    mean_sum += (2.0 * t1 * t1 + 2.0) * std::exp(std::sqrt(t1) * z);
    m += 1.0;
  }
  REQUIRE(m > 300);
  // Conditional on times and covariates the selected counts are independent
  // Poissons, so their sum concentrates at the summed means.
  CHECK(std::fabs(count_sum - mean_sum) <= 3.0 * std::sqrt(mean_sum));
  const double center = 10.0 * std::exp(std::sqrt(2.0) * 0.5);
  CHECK(count_sum / m == doctest::Approx(center).epsilon(0.05));
}

TEST_CASE("a decreasing mean function is rejected") {
  SimulationConfig config;
  config.n = 20;
  config.truth.mu0 = [](double) { return 1.0; };
  config.truth.beta = [](double t) { return 1.0 / (t + 0.01); };
  try {
    generate(config);
    FAIL("expected NonMonotoneMeanFunctionError");
  } catch (const NonMonotoneMeanFunctionError& e) {
    CHECK(e.covariate == 1.0);  // only the upper covariate endpoint decreases
    CHECK(e.time > 0.0);
    CHECK(e.time <= 6.0);
  }

  SimulationConfig negative;
  negative.n = 20;
  negative.truth.mu0 = [](double) { return -1.0; };
  negative.truth.beta = [](double) { return 0.0; };
  CHECK_THROWS_AS(generate(negative), NonMonotoneMeanFunctionError);

  CHECK_NOTHROW(generate(flat_effect_config(20, 1)));
}

TEST_CASE("censoring modes shape the censor times") {
  SimulationConfig config = builtin_setting(1);
  config.n = 200;
  config.seed = 4;
  const PanelDataset none = generate(config);
  for (const Subject& s : none.subjects) CHECK(s.censor_time == 6.0);

  config.censoring = CensoringMode::UniformHalfTau;
  const PanelDataset censored = generate(config);
  bool any_below_tau = false;
  for (const Subject& s : censored.subjects) {
    CHECK(s.censor_time > 3.0);
    CHECK(s.censor_time < 6.0);
    any_below_tau |= s.censor_time < 5.0;
    for (const double u : s.visit_times) CHECK(u <= s.censor_time);
  }
  CHECK(any_below_tau);
}

TEST_CASE("lattice rounding lands on multiples inside the horizon") {
  SimulationConfig config = builtin_setting(2);
  config.n = 150;
  config.seed = 8;
  config.visit_lattice = 0.06;
  const PanelDataset d = generate(config);
  for (const Subject& s : d.subjects) {
    REQUIRE(!s.visit_times.empty());
    double prev = 0.0;
    for (const double u : s.visit_times) {
      CHECK(u > prev);
      CHECK(u <= 6.0);
      const double steps = u / 0.06;
      CHECK(std::fabs(steps - std::round(steps)) < 1e-9);
      prev = u;
    }
  }
}

TEST_CASE("visit budgets are honored") {
  SimulationConfig config = flat_effect_config(500, 12);
  config.max_visits = 3;
  for (const Subject& s : generate(config).subjects) {
    CHECK(!s.visit_times.empty());
    CHECK(s.visit_times.size() <= 3);
  }
  config.max_visits = 1;
  for (const Subject& s : generate(config).subjects) CHECK(s.visit_times.size() == 1);
}

TEST_CASE("configuration errors are rejected up front") {
  const SimulationConfig good = flat_effect_config(10, 1);
  CHECK_NOTHROW(generate(good));

  SimulationConfig c = good;
  c.n = 1;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = good;
  c.max_visits = 0;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = good;
  c.tau = 0.0;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = good;
  c.gap_rate = -1.0;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = good;
  c.visit_lattice = 6.0;  // must stay below tau
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = good;
  c.covariate_lo = 1.0;
  c.covariate_hi = 1.0;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = good;
  c.truth = SimulationTruth{};
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
}

}  // TEST_SUITE
