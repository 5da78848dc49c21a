#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace panelkern {

// Input-side problems: malformed files, invariant violations, bad configs.
// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CsvParseError : public ValidationError {
 public:
  CsvParseError(std::size_t line_number, const std::string& message)
      : ValidationError("csv line " + std::to_string(line_number) + ": " + message),
        line(line_number) {}
  std::size_t line;
};

// Mean function mu0(t)*exp(beta(t)*z) must be nondecreasing in t over the
// covariate support, otherwise Poisson increments would have negative means.
class NonMonotoneMeanFunctionError : public ValidationError {
 public:
  NonMonotoneMeanFunctionError(double time, double covariate)
      : ValidationError("mean function decreases near t=" + std::to_string(time) +
                        " for covariate z=" + std::to_string(covariate)),
        time(time),
        covariate(covariate) {}
  double time;
  double covariate;
};

// Estimation-side failures. The CLI maps these to exit code 3.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No visit with positive kernel weight inside (t - h, t + h).
class EmptyWindowError : public EstimationError {
 public:
  explicit EmptyWindowError(double t)
      : EstimationError("no weighted events in the window around t=" + std::to_string(t)) {}
};

// No identifiable direction: every risk set in the window carries a single
// covariate value (or all jumps are zero), so the curvature vanishes.
class SingularHessianError : public EstimationError {
 public:
  explicit SingularHessianError(double t)
      : EstimationError("singular curvature at t=" + std::to_string(t) +
                        " (covariates carry no contrast within the window)") {}
};

class NonFiniteError : public EstimationError {
 public:
  explicit NonFiniteError(double exponent_magnitude)
      : EstimationError("non-finite value in likelihood evaluation; max |beta'z| = " +
                        std::to_string(exponent_magnitude)),
        exponent_magnitude(exponent_magnitude) {}
  double exponent_magnitude;
};

// Baseline ratio is undefined off the observed visit times.
class NoVisitAtTimeError : public EstimationError {
 public:
  explicit NoVisitAtTimeError(double t)
      : EstimationError("no at-risk subject has a visit at t=" + std::to_string(t)) {}
};

// Outer matrix of the sandwich is numerically singular.
class SingularSigma1Error : public EstimationError {
 public:
  explicit SingularSigma1Error(double t)
      : EstimationError("outer sandwich matrix singular at t=" + std::to_string(t)) {}
};

class AllPointsFailedError : public EstimationError {
 public:
  AllPointsFailedError() : EstimationError("no grid point produced a converged fit") {}
};

// The plug-in bandwidth is undefined when the curvature integral vanishes.
class DegenerateCurvatureError : public EstimationError {
 public:
  DegenerateCurvatureError()
      : EstimationError("second-derivative integral is zero; optimal bandwidth undefined") {}
};

class LowConvergenceError : public EstimationError {
 public:
  LowConvergenceError(double rate, double required)
      : EstimationError("study convergence rate " + std::to_string(rate) +
                        " fell below required " + std::to_string(required)),
        rate(rate) {}
  double rate;
};

}  // namespace panelkern
