#include "panelkern/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace panelkern {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}

std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

SplitStream::SplitStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed) ^ (stream * 0xD1B54A32D192ED03ull + 0x8BB84B93962EABE1ull))) {}

std::uint64_t SplitStream::next_u64() {
  return mix64(key_ + counter_++ * kGolden);
}

double SplitStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t SplitStream::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  const std::uint64_t range = hi - lo + 1;
  if (range == 0) return next_u64();  // full 64-bit range
  const std::uint64_t limit = range * (~std::uint64_t{0} / range);
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return lo + draw % range;
}

double SplitStream::exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
  // 1 - uniform() lies in (2^-53, 1], so the log is finite.
  return -std::log(1.0 - uniform()) / rate;
}

long long SplitStream::poisson(double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be nonnegative");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    // Multiply uniforms until the product drops below exp(-mean).
    const double threshold = std::exp(-mean);
    long long k = 0;
    double product = uniform();
    while (product > threshold) {
      ++k;
      product *= uniform();
    }
    return k;
  }
  // PTRS transformed rejection (Hormann 1993).
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long long>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    const double log_accept = std::log(v * inv_alpha / (a / (us * us) + b));
    if (log_accept <= k * log_mean - mean - std::lgamma(k + 1.0)) {
      return static_cast<long long>(k);
    }
  }
}

}  // namespace panelkern
