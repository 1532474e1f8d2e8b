#pragma once

// The frozen fast equation (slow variable held fixed, eps = 1), its empirical
// ergodic properties, and estimation of the averaged drift
//   Fbar(u) = int F(u, v) mu^u(dv).

#include <atomic>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "slowfast/integrators.hpp"

namespace slowfast {

struct FrozenFastConfig {
  double dt = 0.1;
  double burn_in_multiplier = 8.0;  // burn-in = multiplier / lambda
  double horizon = 200.0;           // total simulated time per replica, burn-in included
  int n_replicas = 16;
  std::uint64_t seed_base = 0;

  double burn_in(double lambda) const { return burn_in_multiplier / lambda; }
  void validate(double lambda) const;
};

struct FbarEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double burn_in = 0.0;
  double horizon = 0.0;
  int n_replicas = 0;
  std::uint64_t u_fingerprint = 0;
  // Upper scale of the bias left by a finite burn-in under the e^{-lambda t}
  // mixing rate, with the unknown constant replaced by L_F (1 + |u|).
  double mixing_bias_scale = 0.0;
  std::uint64_t simulations = 0;  // replica trajectories actually run
  std::uint64_t params_fingerprint = 0;
};

std::string to_json(const FbarEstimate& e);

// Grid-tagged hash of the spectral coefficients rounded to 1e-8.
std::uint64_t field_fingerprint(const ComplexField& u);
// Hash of the model parameters and coupling coefficients.
std::uint64_t params_fingerprint(const Model& model);

// Stream layout of frozen-equation replicas.
StreamId frozen_stream(std::uint64_t key, std::uint64_t replica);

// Runs the frozen fast equation from v0 for t_end; returns v(t_end). The step
// is cfg.dt, shortened uniformly so that an integer number of steps hits t_end.
ComplexField solve_frozen_fast(const Model& model, const ComplexField& u_frozen, const ComplexField& v0, double t_end,
                               const FrozenFastConfig& cfg, std::uint64_t seed);

// Same trajectory, invoking observer(step_index, time, v) after every step (and at step 0).
void trace_frozen_fast(const Model& model, const ComplexField& u_frozen, const ComplexField& v0, int n_steps, double dt,
                       const NoisePath& w2, const std::function<void(int, double, const ComplexField&)>& observer);

FbarEstimate estimate_fbar(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg);
// Pilot run, then extra replicas until std_error <= tol (at most 1e6 replicas).
FbarEstimate estimate_fbar_to_tolerance(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg,
                                        double tol);

struct DissipativityCurve {
  std::vector<double> t;
  std::vector<double> mean_sq;  // E |v(t)|^2
  std::vector<double> se_sq;
  double plateau = 0.0;         // late-time mean of E|v|^2
  double plateau_se = 0.0;
  double initial_log_slope = 0.0;  // slope of log sqrt(E|v|^2) over the first 1/(2 lambda)
  bool dominated = false;          // E|v|^2 <= e^{-lambda t}|X|^2 + plateau + 3 se at every t
};

DissipativityCurve dissipativity_curve(const Model& model, const ComplexField& u, const ComplexField& X,
                                       const FrozenFastConfig& cfg, int n_paths, double t_end);

struct CoupledDistance {
  std::vector<double> t;
  std::vector<double> mean;  // E |v1(t) - v2(t)|^2
  std::vector<double> se;
};

// Synchronously coupled frozen trajectories: (u1, X) and (u2, Y) driven by the same W2.
CoupledDistance coupled_distance(const Model& model, const ComplexField& u1, const ComplexField& X,
                                 const ComplexField& u2, const ComplexField& Y, const FrozenFastConfig& cfg,
                                 int n_paths, const std::vector<double>& times);

struct SensitivityEstimate {
  double mean = 0.0;  // E |v^{u1,X}(t) - v^{u2,X}(t)|^2
  double se = 0.0;
  double ratio = 0.0;  // mean / |u1 - u2|^2 (0 when u1 == u2)
};

SensitivityEstimate sensitivity_in_u(const Model& model, const ComplexField& u1, const ComplexField& u2,
                                     const ComplexField& X, const FrozenFastConfig& cfg, double t, int n_paths);

// Ensemble estimate of E F(u, v^{u,X}(t)) at the requested times.
struct MixingCurve {
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> se;
};

MixingCurve mixing_curve(const Model& model, const ComplexField& u, const ComplexField& X, const FrozenFastConfig& cfg,
                         int n_paths, const std::vector<double>& times);

struct FbarProviderConfig {
  FrozenFastConfig frozen;
  double tolerance = 0.0;       // target std_error per estimate; 0 = use `frozen` as given
  double node_spacing = 0.05;   // |u| resolution of the norm-keyed cache
  std::size_t max_estimates = 4096;  // cost budget before a warning is raised
};

// Memoizing u -> Fbar(u). v-independent F short-circuits to F(u, .) with no
// simulation. Norm-invariant couplings are keyed by |u| on a grid of
// node_spacing and linearly interpolated between node estimates; every other
// coupling is keyed by field_fingerprint(u). Estimates depend only on their key
// and the seed, so results do not depend on query order or thread count.
class FbarProvider : public FbarSource {
 public:
  FbarProvider(Model model, FbarProviderConfig cfg);

  double value(const ComplexField& u) const override;
  FbarEstimate estimate(const ComplexField& u) const;

  // Lowering the tolerance invalidates coarser cached estimates.
  void request_tolerance(double tol);

  std::uint64_t simulations() const noexcept { return simulations_.load(); }
  std::size_t cache_size() const;
  bool budget_exceeded() const noexcept { return budget_exceeded_.load(); }
  const FbarProviderConfig& config() const noexcept { return cfg_; }

 private:
  struct Entry {
    std::shared_future<FbarEstimate> est;
    double tolerance;
  };
  FbarEstimate node_estimate(std::int64_t node) const;
  FbarEstimate keyed_estimate(std::uint64_t key, const ComplexField& u) const;
  FbarEstimate run_estimate(const ComplexField& u, std::uint64_t key) const;

  Model model_;
  FbarProviderConfig cfg_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, std::uint64_t>, Entry> cache_;
  mutable std::atomic<std::uint64_t> simulations_{0};
  mutable std::atomic<std::size_t> misses_{0};
  mutable std::atomic<bool> budget_exceeded_{false};
};

}  // namespace slowfast
