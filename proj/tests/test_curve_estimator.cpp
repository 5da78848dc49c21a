#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "panelkern/curve_estimator.hpp"
#include "panelkern/errors.hpp"
#include "panelkern/simulator.hpp"
#include "panelkern/stats.hpp"

#include "test_support.hpp"

using namespace panelkern;
using testsupport::random_dataset;

namespace {

KernelSpec epan(double h, int degree = 1) {
  KernelSpec spec;
  spec.family = KernelFamily::Epanechnikov;
  spec.bandwidth = h;
  spec.degree = degree;
  return spec;
}

Subject make_subject(std::string id, std::vector<double> times, std::vector<long long> counts,
                     double covariate, double censor) {
  Subject s;
  s.id = std::move(id);
  s.visit_times = std::move(times);
  s.cumulative_counts = std::move(counts);
  s.covariate = covariate;
  s.censor_time = censor;
  return s;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
  std::vector<double> grid(points);
  for (std::size_t g = 0; g < points; ++g) {
    grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(points - 1);
  }
  return grid;
}

double sample_sd(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

TEST_SUITE("curve_estimator") {

TEST_CASE("step function carries values to the right") {
  CHECK_THROWS_AS(StepFunction({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(StepFunction({1.0, 2.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(StepFunction({2.0, 1.0}, {1.0, 2.0}), std::invalid_argument);

  const StepFunction f({1.0, 2.0, 4.0}, {10.0, 20.0, 40.0});
  CHECK(f(0.5) == 10.0);  // before the first knot: carried backward
  CHECK(f(1.0) == 10.0);
  CHECK(f(1.9) == 10.0);
  CHECK(f(2.0) == 20.0);
  CHECK(f(3.9) == 20.0);
  CHECK(f(4.0) == 40.0);
  CHECK(f(100.0) == 40.0);
  CHECK(f.knot_at(0.5) == 1.0);
  CHECK(f.knot_at(3.0) == 2.0);
  CHECK(f.knot_at(4.2) == 4.0);
  CHECK(!f.empty());
  CHECK(StepFunction().empty());
}

TEST_CASE("baseline ratio reduces to a mean when covariates vanish") {
  PanelDataset d;
  d.tau = 4.0;
  d.subjects.push_back(make_subject("a", {2.0}, {3}, 0.0, 4.0));
  d.subjects.push_back(make_subject("b", {2.0}, {5}, 0.0, 4.0));
  const auto flat = [](double) { return 0.7; };
  CHECK(baseline_at(d, flat, 2.0) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("baseline ratio rescales a single visitor by its covariate") {
  PanelDataset d;
  d.tau = 4.0;
  d.subjects.push_back(make_subject("a", {2.0}, {6}, 1.0, 4.0));
  d.subjects.push_back(make_subject("b", {1.0}, {1}, 0.4, 4.0));
  CHECK(baseline_at(d, [](double) { return 0.0; }, 2.0) == doctest::Approx(6.0));
  CHECK(baseline_at(d, [](double) { return std::log(2.0); }, 2.0) ==
        doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("baseline ratio matches direct summation") {
  PanelDataset d;
  d.tau = 4.0;
  d.subjects.push_back(make_subject("a", {2.0}, {3}, 0.2, 4.0));
  d.subjects.push_back(make_subject("b", {2.0}, {7}, 1.4, 4.0));
  d.subjects.push_back(make_subject("c", {2.0}, {1}, -0.5, 4.0));
  const double beta = 0.3;
  const double want = (3.0 + 7.0 + 1.0) / (std::exp(beta * 0.2) + std::exp(beta * 1.4) +
                                           std::exp(beta * -0.5));
  CHECK(baseline_at(d, [&](double) { return beta; }, 2.0) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("baseline ratio respects censoring") {
  PanelDataset d;
  d.tau = 4.0;
  d.subjects.push_back(make_subject("a", {2.0}, {3}, 0.2, 4.0));
  d.subjects.push_back(make_subject("b", {2.0}, {7}, 1.4, 1.5));  // censored before 2
  const auto flat = [](double) { return 0.0; };
  CHECK(baseline_at(d, flat, 2.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(baseline_at(d, flat, 3.0), NoVisitAtTimeError);

  // A censor time equal to the visit time keeps the subject in.
  d.subjects[1].censor_time = 2.0;
  CHECK(baseline_at(d, flat, 2.0) == doctest::Approx(5.0));
}

TEST_CASE("pooled visit times are deduplicated and censor-aware") {
  PanelDataset d;
  d.tau = 6.0;
  d.subjects.push_back(make_subject("a", {1.0, 3.0}, {1, 2}, 0.1, 6.0));
  d.subjects.push_back(make_subject("b", {2.0, 3.0}, {0, 4}, 0.9, 6.0));
  d.subjects.push_back(make_subject("c", {5.0}, {1}, 0.5, 4.0));  // censored before its visit
  const std::vector<double> times = pooled_visit_times(d);
  REQUIRE(times.size() == 3);
  CHECK(times[0] == 1.0);
  CHECK(times[1] == 2.0);
  CHECK(times[2] == 3.0);

  const StepFunction mu0 = baseline_step(d, [](double) { return 0.0; });
  CHECK(mu0.knots() == times);
  for (const double u : times) {
    CHECK(mu0(u) == doctest::Approx(baseline_at(d, [](double) { return 0.0; }, u)));
  }
}

TEST_CASE("covariance needs observed jumps") {
  PanelDataset d;
  d.tau = 4.0;
  d.subjects.push_back(make_subject("a", {2.0}, {0}, 0.2, 4.0));
  d.subjects.push_back(make_subject("b", {2.1}, {0}, 1.1, 4.0));
  const LocalDesign design = build_design(d, 2.0, epan(0.5));
  LocalFit fit;
  fit.beta = BasisVec::Zero(2);
  CHECK_THROWS_AS(covariance(design, fit), SingularSigma1Error);
}

TEST_CASE("covariance is symmetric with nonnegative spectrum") {
  for (std::uint64_t seed : {61u, 62u, 63u}) {
    const PanelDataset d = random_dataset(seed, 25, 6);
    const LocalDesign design = build_design(d, 2.0, epan(1.0));
    const LocalFit fit = solve(design);
    REQUIRE(fit.converged);
    const BasisMat sigma = covariance(design, fit);
    CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver{Eigen::MatrixXd(sigma)};
    CHECK(solver.eigenvalues().minCoeff() >= -1e-10 * (1.0 + sigma.cwiseAbs().maxCoeff()));
    CHECK(sigma(0, 0) > 0.0);
  }
}

TEST_CASE("standard errors ignore covariate location shifts") {
  const PanelDataset d = random_dataset(64, 25, 6);
  PanelDataset shifted = d;
  for (Subject& s : shifted.subjects) s.covariate += 1.5;
  const KernelSpec spec = epan(1.0);
  const SolveControls tight{50, 1e-10, 20, 1e-12};

  const LocalDesign design = build_design(d, 2.0, spec);
  const LocalFit fit = solve(design, tight);
  const LocalDesign design_shifted = build_design(shifted, 2.0, spec);
  const LocalFit fit_shifted = solve(design_shifted, tight);
  REQUIRE(fit.converged);
  REQUIRE(fit_shifted.converged);
  const double s00 = covariance(design, fit)(0, 0);
  const double s00_shifted = covariance(design_shifted, fit_shifted)(0, 0);
  CHECK(s00 == doctest::Approx(s00_shifted).epsilon(1e-8));
}

TEST_CASE("confidence interval widths follow the plug-in formula") {
  BasisMat sigma = BasisMat::Zero(2, 2);
  sigma(0, 0) = 0.9;
  const Interval ci = confidence_interval(1.2, sigma, 150, 0.4, 0.95);
  const double halfwidth = normal_quantile(0.975) * std::sqrt(0.9 / (150.0 * 0.4));
  CHECK(ci.lower == doctest::Approx(1.2 - halfwidth).epsilon(1e-12));
  CHECK(ci.upper == doctest::Approx(1.2 + halfwidth).epsilon(1e-12));

  sigma(0, 0) = -1e-3;  // numerically negative variance collapses the interval
  const Interval point = confidence_interval(1.2, sigma, 150, 0.4, 0.95);
  CHECK(point.lower == 1.2);
  CHECK(point.upper == 1.2);

  CHECK_THROWS_AS(confidence_interval(1.2, sigma, 150, 0.4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(confidence_interval(1.2, sigma, 150, 0.4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(confidence_interval(1.2, sigma, 0, 0.4, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(confidence_interval(1.2, sigma, 150, 0.0, 0.95), std::invalid_argument);
}

TEST_CASE("optimal bandwidth has a closed form for flat inputs") {
  const auto one = [](double) { return 1.0; };
  KernelSpec spec = epan(1.0);
  const double h = optimal_bandwidth(one, one, one, one, 6.0, 1000, spec);
  const double want = std::pow(0.6 / (0.2 * 0.2), 0.2) * std::pow(1000.0, -0.2);
  CHECK(h == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("optimal bandwidth scales as the fifth root of sample size") {
  const auto s1 = [](double t) { return 1.0 + 0.1 * t; };
  const auto s2 = [](double t) { return 2.0 + t; };
  const auto curvature = [](double t) { return std::exp(-t); };
  const auto w = [](double) { return 1.0; };
  const KernelSpec spec = epan(1.0);
  const double h_n = optimal_bandwidth(s1, s2, curvature, w, 6.0, 400, spec);
  const double h_32n = optimal_bandwidth(s1, s2, curvature, w, 6.0, 32 * 400, spec);
  CHECK(h_n / h_32n == doctest::Approx(2.0).epsilon(1e-12));

  const auto flat = [](double) { return 0.0; };
  CHECK_THROWS_AS(optimal_bandwidth(s1, s2, flat, w, 6.0, 400, spec), DegenerateCurvatureError);
  CHECK_THROWS_AS(optimal_bandwidth(s1, s2, curvature, w, 0.0, 400, spec), std::invalid_argument);
  CHECK_THROWS_AS(optimal_bandwidth(s1, s2, curvature, w, 6.0, 0, spec), std::invalid_argument);
}

TEST_CASE("estimate_curve validates its inputs") {
  const PanelDataset d = random_dataset(71, 20, 6);
  const KernelSpec spec = epan(0.8);
  CHECK_THROWS_AS(estimate_curve(d, spec, {}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_curve(d, spec, {2.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_curve(d, spec, {-0.5, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_curve(d, spec, {2.0, 4.5}), std::invalid_argument);

  PanelDataset bad = d;
  for (Subject& s : bad.subjects) s.covariate = 1.0;
  CHECK_THROWS_AS(estimate_curve(bad, spec, {2.0}), ValidationError);
}

TEST_CASE("estimate_curve fills every column consistently") {
  const PanelDataset d = random_dataset(72, 30, 7);
  const std::vector<double> grid = linspace(1.0, 3.0, 9);
  const CurveEstimate est = estimate_curve(d, epan(0.8), grid);

  REQUIRE(est.grid == grid);
  REQUIRE(est.beta_hat.size() == grid.size());
  REQUIRE(est.se.size() == grid.size());
  REQUIRE(est.derivative_hat.size() == 1);
  REQUIRE(est.derivative_hat[0].size() == grid.size());
  CHECK(est.n_subjects == 30);
  CHECK(est.bandwidth == 0.8);
  CHECK(est.degree == 1);
  CHECK(est.level == 0.95);

  std::size_t converged = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CHECK(!est.boundary[g]);  // windows stay inside [0, 4] on this grid
    if (!est.converged[g]) continue;
    ++converged;
    CHECK(std::isfinite(est.beta_hat[g]));
    CHECK(est.effective_events[g] > 0);
    if (std::isfinite(est.se[g])) {
      CHECK(est.se[g] >= 0.0);
      CHECK(est.ci_lower[g] <= est.beta_hat[g]);
      CHECK(est.ci_upper[g] >= est.beta_hat[g]);
    }
  }
  CHECK(converged >= 7);

  // Baseline columns read off the attached step function.
  CHECK(est.mu0_step.knots() == pooled_visit_times(d));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CHECK(est.mu0_hat[g] == est.mu0_step(grid[g]));
    CHECK(est.mu0_eval_time[g] == est.mu0_step.knot_at(grid[g]));
  }

  const CurveEstimate wide = estimate_curve(d, epan(1.2), {0.5, 2.0, 3.8});
  CHECK(wide.boundary[0]);   // 0.5 - 1.2 < 0
  CHECK(!wide.boundary[1]);
  CHECK(wide.boundary[2]);   // 3.8 + 1.2 > 4
}

TEST_CASE("estimate_curve flags empty windows instead of failing") {
  PanelDataset d;
  d.tau = 4.0;
  SplitStream stream(5, 0);
  for (int i = 0; i < 20; ++i) {
    const double z = stream.uniform(0.0, 1.0);
    // Visits cluster near 1 and 3, leaving (1.7, 2.3) empty.
    const double u1 = stream.uniform(0.8, 1.2);
    const double u2 = stream.uniform(2.8, 3.2);
    d.subjects.push_back(make_subject("s" + std::to_string(i), {u1, u2},
                                      {static_cast<long long>(stream.uniform_int(0, 3)),
                                       static_cast<long long>(stream.uniform_int(3, 6))},
                                      z, 4.0));
  }
  const CurveEstimate est = estimate_curve(d, epan(0.3), {1.0, 2.0, 3.0});
  CHECK(est.converged[0]);
  CHECK(!est.converged[1]);
  CHECK(std::isnan(est.beta_hat[1]));
  CHECK(std::isnan(est.se[1]));
  CHECK(est.effective_events[1] == 0);
  CHECK(est.converged[2]);

  const std::string csv = curve_csv_string(est);
  CHECK(csv.rfind("t,beta_hat,se,ci_lower,ci_upper,mu0_hat,effective_events,converged,boundary\n",
                  0) == 0);
  std::size_t lines = 0;
  for (const char c : csv) lines += c == '\n';
  CHECK(lines == 4);
  CHECK(csv.find("nan") != std::string::npos);

  CHECK_THROWS_AS(estimate_curve(d, epan(0.01), {2.0}), AllPointsFailedError);
}

TEST_CASE("parallel estimation agrees with the sequential path") {
  const PanelDataset d = random_dataset(73, 40, 8);
  const std::vector<double> grid = linspace(0.8, 3.4, 14);
  CurveOptions seq;
  seq.threads = 1;
  CurveOptions par;
  par.threads = 2;
  const CurveEstimate a = estimate_curve(d, epan(0.9), grid, seq);
  const CurveEstimate b = estimate_curve(d, epan(0.9), grid, par);
  // The sequential path warm-starts at the left neighbour while the parallel
  // path cold-starts every point, so convergence flags may differ at hard
  // points; wherever both converge they must agree on the maximizer.
  std::size_t both = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!a.converged[g] || !b.converged[g]) continue;
    ++both;
    CHECK(a.beta_hat[g] == doctest::Approx(b.beta_hat[g]).epsilon(1e-6));
    CHECK(a.se[g] == doctest::Approx(b.se[g]).epsilon(1e-5));
  }
  CHECK(both >= 10);
}

TEST_CASE("narrower levels give narrower intervals") {
  const PanelDataset d = random_dataset(74, 30, 7);
  CurveOptions narrow;
  narrow.level = 0.8;
  const CurveEstimate wide = estimate_curve(d, epan(1.0), {2.0});
  const CurveEstimate tight = estimate_curve(d, epan(1.0), {2.0}, narrow);
  REQUIRE(wide.converged[0]);
  CHECK(tight.level == 0.8);
  CHECK(tight.ci_upper[0] - tight.ci_lower[0] < wide.ci_upper[0] - wide.ci_lower[0]);
}

TEST_CASE("a constant effect is recovered within sampling error") {
  SimulationConfig config;
  config.n = 400;
  config.seed = 17;
  config.truth.mu0 = [](double t) { return 2.0 * t * t + 2.0; };
  config.truth.beta = [](double) { return 0.5; };
  const PanelDataset d = generate(config);
  const CurveEstimate est = estimate_curve(d, epan(1.0), {3.0});
  REQUIRE(est.converged[0]);
  REQUIRE(std::isfinite(est.se[0]));
  CHECK(std::fabs(est.beta_hat[0] - 0.5) <= 3.0 * est.se[0]);
}

TEST_CASE("baseline noise shrinks like the square root of the sample size") {
  // With visits on a coarse lattice the number of visitors at each knot grows
  // linearly in n, so the baseline value at a fixed knot should have standard
  // deviation scaling like n^(-1/2).  Quadrupling n should halve it.
  const auto run = [](std::size_t n, std::uint64_t seed) {
    SimulationConfig config = builtin_setting(1);
    config.n = n;
    config.visit_lattice = 0.25;
    config.seed = seed;
    const PanelDataset d = generate(config);
    const CurveEstimate est = estimate_curve(d, epan(0.5), {2.75, 3.0, 3.25});
    return est.mu0_step(3.0);
  };
  const int reps = 60;
  std::vector<double> small(reps), large(reps);
  for (int r = 0; r < reps; ++r) {
    small[r] = run(300, 1000 + static_cast<std::uint64_t>(r));
    large[r] = run(1200, 2000 + static_cast<std::uint64_t>(r));
  }
  const double ratio = sample_sd(small) / sample_sd(large);
  CHECK(ratio > 1.4);
  CHECK(ratio < 2.6);
}

}  // TEST_SUITE
