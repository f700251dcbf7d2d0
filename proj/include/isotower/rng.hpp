#pragma once

#include <cstdint>
#include <random>

#include "isotower/types.hpp"

namespace isotower {

enum class Purpose : std::uint64_t {
  Sphere = 1,   // target vectors x_{n+1} in matrix mode
  Coeff = 2,    // update coefficients in coefficient mode
  Phase = 3,    // phase redraws for the martingale test
  Proxy = 4,    // Gaussian proxy sequences
  Sweep = 5,    // parameter sweeps
  Aux = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

// Stream id for a given dimension step and purpose.
std::uint64_t stream_id(std::uint64_t step, Purpose purpose);

// mt19937_64 keyed by splitmix64(seed, stream id); Gaussians by Box-Muller.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);
  RngStream(std::uint64_t seed, std::uint64_t step, Purpose purpose)
      : RngStream(seed, stream_id(step, purpose)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1]
  double normal();
  // Standard complex Gaussian, E|z|^2 = 1.
  Complex complex_normal();

  static const char* generator_name();

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace isotower
