#pragma once

// One-step exponential integrators for the slow, fast, averaged and
// Khasminskii auxiliary equations, and whole-path drivers built on them.
//
// Slow step (Lawson form):  u+ = S_nu(dt)[u + dt (N(u) + F 1) + Sigma1 dW1 1]
// Fast step:                v+ = S_fast(dt)[v + (dt/eps) N(v)]
//                                + gain_G * G 1 + gain_W * Sigma2 dW2 1
// where 1 is the constant field. The constant-field forcing only excites the
// k = 0 mode, whose fast multiplier is the real -lambda/eps, so it is integrated
// exactly: gain_G = (1 - e^{-lambda dt/eps})/lambda and gain_W is the standard
// deviation ratio of the exact Ornstein-Uhlenbeck convolution.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "slowfast/error.hpp"
#include "slowfast/model.hpp"
#include "slowfast/noise.hpp"
#include "slowfast/spectral.hpp"

namespace slowfast {

enum class SchemeKind { kExponentialEuler, kLieSplitting };

std::string to_string(SchemeKind kind);
SchemeKind scheme_from_string(const std::string& name);

inline constexpr double kStiffnessCap = 0.1;

struct StepScheme {
  SchemeKind kind = SchemeKind::kExponentialEuler;
  double dt_slow = 1e-3;
  double dt_fast = 0.0;  // 0 selects the largest divisor of dt_slow within the stiffness cap

  // Fast steps per slow step at scale separation eps.
  int substeps(double eps) const;
  double fast_dt(double eps) const { return dt_slow / substeps(eps); }
  // Number of slow steps covering [0, T]; T must be a multiple of dt_slow.
  int slow_steps(double T) const;
};

class NumericalAbort : public Error {
 public:
  explicit NumericalAbort(const std::string& what) : Error(ErrorCode::kRuntime, what) {}
};

class SlowStepper {
 public:
  SlowStepper(GridPtr grid, const ModelParams& params, double nu, double dt, SchemeKind kind = SchemeKind::kExponentialEuler);

  ComplexField step(const ComplexField& u, double drift, double sigma, double dW) const;
  // Same step with the nonlinearity increment supplied by the caller.
  ComplexField step_with(const ComplexField& u, const ComplexField& nl, double drift, double sigma, double dW) const;

  double dt() const noexcept { return dt_; }
  const Propagator& propagator() const noexcept { return prop_; }

 private:
  GridPtr grid_;
  ModelParams params_;
  double dt_;
  SchemeKind kind_;
  Propagator prop_;
};

class FastStepper {
 public:
  FastStepper(GridPtr grid, const ModelParams& params, double eps, double dt, SchemeKind kind = SchemeKind::kExponentialEuler);

  ComplexField step(const ComplexField& v, double g, double sigma, double dW) const;

  double dt() const noexcept { return dt_; }
  double eps() const noexcept { return eps_; }
  double forcing_gain() const noexcept { return gain_g_; }
  double noise_gain() const noexcept { return gain_w_; }

 private:
  GridPtr grid_;
  ModelParams params_;
  double eps_, dt_;
  SchemeKind kind_;
  Propagator prop_;
  double gain_g_, gain_w_;
};

// Provider of the averaged drift u -> Fbar(u). Implementations must be thread safe.
class FbarSource {
 public:
  virtual ~FbarSource() = default;
  virtual double value(const ComplexField& u) const = 0;
};

// Single-step entry points; they build the steppers on every call.
ComplexField step_slow(const ComplexField& u, const ComplexField& v, double dt, double dW1, const ModelParams& params,
                       double nu, const CouplingSpec& spec);
ComplexField step_fast(const ComplexField& v, const ComplexField& u_input, double dt, double dW2,
                       const ModelParams& params, const CouplingSpec& spec);
ComplexField step_averaged(const ComplexField& u, double dt, double dW1, const ModelParams& params, double nu,
                           const CouplingSpec& spec, const FbarSource& fbar);

// State snapshots of one path at the requested slow-step indices.
struct PathRecord {
  std::vector<ComplexField> u;
  std::vector<ComplexField> v;  // empty for averaged paths
  double sup_u_h1sq = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

struct Model {
  GridPtr grid;
  ModelParams params;
  CouplingSpec spec;
  StepScheme scheme;
};

class CoupledIntegrator {
 public:
  CoupledIntegrator(const Model& model, double eps, double nu);

  int substeps() const noexcept { return m_; }
  int slow_steps() const noexcept { return n_steps_; }
  double dt_fast() const noexcept { return fast_.dt(); }

  // w1 needs slow_steps() increments at dt_slow, w2 slow_steps()*substeps() at dt_fast.
  PathRecord run(const ComplexField& u0, const ComplexField& v0, const NoisePath& w1, const NoisePath& w2,
                 const std::vector<int>& checkpoint_steps) const;

 private:
  Model model_;
  double eps_;
  int m_, n_steps_;
  SlowStepper slow_;
  FastStepper fast_;
};

class AveragedIntegrator {
 public:
  AveragedIntegrator(const Model& model, double nu, const FbarSource& fbar);

  int slow_steps() const noexcept { return n_steps_; }
  PathRecord run(const ComplexField& u0, const NoisePath& w1, const std::vector<int>& checkpoint_steps) const;

 private:
  Model model_;
  const FbarSource& fbar_;
  int n_steps_;
  SlowStepper slow_;
};

// Reference viscous path and its Khasminskii auxiliary companion driven by the
// same increments. err_u/err_v hold |u - u_hat|^2 and |v - v_hat|^2 at every slow step.
struct KhasminskiiRecord {
  PathRecord reference;
  PathRecord auxiliary;
  std::vector<double> err_u;
  std::vector<double> err_v;
  bool aborted = false;
  std::string diagnostic;
};

class KhasminskiiIntegrator {
 public:
  // block_steps: delta / dt_slow, a positive integer.
  KhasminskiiIntegrator(const Model& model, double eps, double nu, int block_steps);

  int substeps() const noexcept { return m_; }
  int slow_steps() const noexcept { return n_steps_; }

  KhasminskiiRecord run(const ComplexField& u0, const ComplexField& v0, const NoisePath& w1, const NoisePath& w2,
                        const std::vector<int>& checkpoint_steps) const;

 private:
  Model model_;
  double eps_;
  int m_, n_steps_, block_;
  SlowStepper slow_;
  FastStepper fast_;
};

// Converts a block length delta to a step count; throws when delta is not a multiple of dt_slow.
int block_steps_for(double delta, const StepScheme& scheme);

KhasminskiiRecord khasminskii_path(const Model& model, double eps, double nu, double delta, const ComplexField& u0,
                                   const ComplexField& v0, const NoisePath& w1, const NoisePath& w2,
                                   const std::vector<int>& checkpoint_steps);

}  // namespace slowfast
