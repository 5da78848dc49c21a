#pragma once

#include <functional>

namespace panelkern {

// Adaptive Simpson quadrature on [a, b] with absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 40);

// Inverse standard normal CDF (Wichura's AS 241, double precision).
// p must lie in (0, 1).
double normal_quantile(double p);

// Beta(a, b) density at x; zero outside [0, 1].
double beta_pdf(double x, double a, double b);

}  // namespace panelkern
