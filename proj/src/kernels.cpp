#include "panelkern/kernels.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "panelkern/stats.hpp"

namespace panelkern {

KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "epanechnikov") return KernelFamily::Epanechnikov;
  if (name == "uniform") return KernelFamily::Uniform;
  if (name == "triangular") return KernelFamily::Triangular;
  throw std::invalid_argument("unknown kernel family: " + name);
}

std::string kernel_family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::Epanechnikov: return "epanechnikov";
    case KernelFamily::Uniform: return "uniform";
    case KernelFamily::Triangular: return "triangular";
  }
  throw std::invalid_argument("unknown kernel family");
}

double kernel_value(const KernelSpec& spec, double u) {
  const double a = std::fabs(u);
  if (a >= 1.0) return 0.0;
  switch (spec.family) {
    case KernelFamily::Epanechnikov: return 0.75 * (1.0 - u * u);
    case KernelFamily::Uniform: return 0.5;
    case KernelFamily::Triangular: return 1.0 - a;
  }
  return 0.0;
}

double localized_weight(const KernelSpec& spec, double u, double t) {
  if (!(spec.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  return kernel_value(spec, (u - t) / spec.bandwidth) / spec.bandwidth;
}

double kernel_raw_moment(KernelFamily family, int r) {
  if (r < 0) throw std::invalid_argument("moment order must be nonnegative");
  if (r % 2 == 1) return 0.0;  // symmetric support
  const double n1 = r + 1.0;
  switch (family) {
    case KernelFamily::Epanechnikov: return 1.5 * (1.0 / n1 - 1.0 / (r + 3.0));
    case KernelFamily::Uniform: return 1.0 / n1;
    case KernelFamily::Triangular: return 2.0 / (n1 * (r + 2.0));
  }
  throw std::invalid_argument("unknown kernel family");
}

double kernel_squared_moment(KernelFamily family, int r) {
  if (r < 0) throw std::invalid_argument("moment order must be nonnegative");
  if (r % 2 == 1) return 0.0;
  const double n1 = r + 1.0;
  switch (family) {
    case KernelFamily::Epanechnikov:
      return 1.125 * (1.0 / n1 - 2.0 / (r + 3.0) + 1.0 / (r + 5.0));
    case KernelFamily::Uniform: return 0.5 / n1;
    case KernelFamily::Triangular:
      return 2.0 * (1.0 / n1 - 2.0 / (r + 2.0) + 1.0 / (r + 3.0));
  }
  throw std::invalid_argument("unknown kernel family");
}

namespace {

KernelMoments assemble(const KernelSpec& spec, const std::function<double(int)>& raw,
                       const std::function<double(int)>& squared) {
  if (spec.degree < 0) throw std::invalid_argument("degree must be nonnegative");
  const int d = spec.degree + 1;
  KernelMoments m;
  m.mu2 = raw(2);
  m.nu0 = squared(0);
  m.omega1.resize(d, d);
  m.omega2.resize(d, d);
  m.b.resize(d);
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < d; ++k) {
      m.omega1(j, k) = raw(j + k);
      m.omega2(j, k) = squared(j + k);
    }
    m.b(j) = raw(spec.degree + 1 + j);
  }
  return m;
}

}  // namespace

KernelMoments moments(const KernelSpec& spec) {
  return assemble(
      spec, [&spec](int r) { return kernel_raw_moment(spec.family, r); },
      [&spec](int r) { return kernel_squared_moment(spec.family, r); });
}

KernelMoments moments_by_quadrature(const KernelSpec& spec, double tol) {
  const auto raw = [&spec, tol](int r) {
    return adaptive_simpson(
        [&spec, r](double u) { return std::pow(u, r) * kernel_value(spec, u); }, -1.0, 1.0, tol);
  };
  const auto squared = [&spec, tol](int r) {
    const auto f = [&spec, r](double u) {
      const double k = kernel_value(spec, u);
      return std::pow(u, r) * k * k;
    };
    return adaptive_simpson(f, -1.0, 1.0, tol);
  };
  return assemble(spec, raw, squared);
}

}  // namespace panelkern
