#include "slowfast/noise.hpp"

#include <cmath>
#include <random>

#include "slowfast/error.hpp"
#include "slowfast/random.hpp"

namespace slowfast {

NoisePath make_noise(std::uint64_t seed, const StreamId& stream, double dt, std::size_t n_steps) {
  if (!(dt > 0.0)) throw_config("noise step dt must be > 0");
  NoisePath p;
  p.seed = seed;
  p.stream = stream;
  p.dt = dt;
  p.increments.resize(n_steps);
  Rng rng(derive_seed({seed, stream.experiment, stream.path, stream.channel}));
  std::normal_distribution<double> nd(0.0, std::sqrt(dt));
  for (auto& x : p.increments) x = nd(rng);
  return p;
}

NoisePath coarsen(const NoisePath& fine, int factor) {
  if (factor < 1) throw_config("coarsening factor must be >= 1");
  NoisePath p;
  p.seed = fine.seed;
  p.stream = fine.stream;
  p.dt = fine.dt * factor;
  p.increments.resize(fine.increments.size() / factor);
  for (std::size_t i = 0; i < p.increments.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < factor; ++j) s += fine.increments[i * factor + j];
    p.increments[i] = s;
  }
  return p;
}

}  // namespace slowfast
