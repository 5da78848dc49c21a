#pragma once

#include <string>

#include <Eigen/Dense>

namespace panelkern {

enum class KernelFamily { Epanechnikov, Uniform, Triangular };

KernelFamily kernel_family_from_name(const std::string& name);
std::string kernel_family_name(KernelFamily family);

// Kernel, bandwidth and local polynomial degree used by one fit.
struct KernelSpec {
  KernelFamily family = KernelFamily::Epanechnikov;
  double bandwidth = 0.5;  // > 0
  int degree = 1;          // >= 0
};

// K(u) on the open support (-1, 1); zero at the edge and outside, so events
// at exactly bandwidth distance never enter a fit.
double kernel_value(const KernelSpec& spec, double u);

// K_h(u - t) = K((u - t) / h) / h.
double localized_weight(const KernelSpec& spec, double u, double t);

// Moment matrices entering the asymptotic bias and variance of a degree-p
// local polynomial fit:
//   omega1[j][k] = int u^{j+k} K(u) du          (j, k = 0..p)
//   omega2[j][k] = int u^{j+k} K(u)^2 du
//   b[j]        = int u^{p+1+j} K(u) du
// mu2 and nu0 are the scalar constants int u^2 K and int K^2.
struct KernelMoments {
  double mu2 = 0.0;
  double nu0 = 0.0;
  Eigen::MatrixXd omega1;
  Eigen::MatrixXd omega2;
  Eigen::VectorXd b;
};

// int u^r K(u) du and int u^r K(u)^2 du in closed form.
double kernel_raw_moment(KernelFamily family, int r);
double kernel_squared_moment(KernelFamily family, int r);

// Closed-form moments for the built-in families.
KernelMoments moments(const KernelSpec& spec);

// Same quantities by adaptive quadrature of kernel_value; the general path
// for families without closed forms, and the cross-check for those with.
KernelMoments moments_by_quadrature(const KernelSpec& spec, double tol = 1e-13);

}  // namespace panelkern
