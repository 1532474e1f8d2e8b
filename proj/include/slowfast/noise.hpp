#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace slowfast {

enum class Channel : std::uint64_t { kSlow = 1, kFast = 2, kInitial = 3 };

struct StreamId {
  std::uint64_t experiment = 0;
  std::uint64_t path = 0;
  std::uint64_t channel = 0;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

// Scalar Wiener increments dW_n ~ N(0, dt), reproducible from (seed, stream).
struct NoisePath {
  std::uint64_t seed = 0;
  StreamId stream;
  double dt = 0.0;
  std::vector<double> increments;
};

NoisePath make_noise(std::uint64_t seed, const StreamId& stream, double dt, std::size_t n_steps);

// Sums groups of `factor` consecutive increments: the same Brownian path at step factor*dt.
NoisePath coarsen(const NoisePath& fine, int factor);

}  // namespace slowfast
