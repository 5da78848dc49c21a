#pragma once

#include <cstdint>

namespace panelkern {

// Counter-based splittable random stream.  A stream is identified by
// (seed, stream index); draws are a pure function of that pair and the call
// counter, so per-subject and per-replication streams can be generated in
// any order (or in parallel) and still reproduce bit-identically.
//
// The generator is the splitmix64 finalizer applied to a keyed counter.
// Distribution samplers are implemented here rather than with
// std::<...>_distribution because the standard leaves those algorithms
// implementation-defined, which would tie reproducibility to the toolchain.
class SplitStream {
 public:
  SplitStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform on the integers {lo, ..., hi}, rejection-sampled (no modulo bias).
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate);

  // Poisson via inversion-by-multiplication for small means and the
  // transformed-rejection method of Hormann (PTRS) for large means.
  long long poisson(double mean);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stateless 64-bit mixing finalizer (splitmix64).  Used to derive stream
// keys, e.g. per-replication seeds in the study harness.
std::uint64_t mix64(std::uint64_t x);

}  // namespace panelkern
