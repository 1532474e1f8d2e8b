#include "slowfast/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slowfast {

std::string to_string(SchemeKind kind) {
  return kind == SchemeKind::kExponentialEuler ? "exponential_euler" : "lie_splitting";
}

SchemeKind scheme_from_string(const std::string& name) {
  if (name == "exponential_euler") return SchemeKind::kExponentialEuler;
  if (name == "lie_splitting") return SchemeKind::kLieSplitting;
  throw_config("unknown scheme '" + name + "' (expected exponential_euler or lie_splitting)");
}

namespace {

constexpr double kRatioTol = 1e-9;

int integer_ratio(double a, double b, const char* what) {
  const double r = a / b;
  const double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > kRatioTol * std::max(1.0, r)) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": " << a << " is not an integer multiple of " << b;
    throw_config(os.str());
  }
  return static_cast<int>(n);
}

void check_finite(const ComplexField& f, const char* what) {
  if (!f.all_finite()) throw NumericalAbort(std::string("non-finite state in ") + what + " step");
}

}  // namespace

int StepScheme::substeps(double eps) const {
  if (!(dt_slow > 0.0)) throw_config("dt_slow must be > 0");
  if (!(eps > 0.0)) throw_config("eps must be > 0");
  const double cap = std::min(dt_slow, kStiffnessCap * eps);
  if (dt_fast > 0.0) {
    if (dt_fast > cap * (1.0 + kRatioTol)) {
      std::ostringstream os;
      os.precision(17);
      os << "dt_fast = " << dt_fast << " violates dt_fast <= min(dt_slow, " << kStiffnessCap << " eps) = " << cap;
      throw_config(os.str());
    }
    return integer_ratio(dt_slow, dt_fast, "dt_slow / dt_fast");
  }
  return static_cast<int>(std::ceil(dt_slow / cap * (1.0 - kRatioTol)));
}

int StepScheme::slow_steps(double T) const { return integer_ratio(T, dt_slow, "T / dt_slow"); }

int block_steps_for(double delta, const StepScheme& scheme) {
  return integer_ratio(delta, scheme.dt_slow, "delta / dt_slow");
}

SlowStepper::SlowStepper(GridPtr grid, const ModelParams& params, double nu, double dt, SchemeKind kind)
    : grid_(grid), params_(params), dt_(dt), kind_(kind), prop_(grid, LinearSymbol::slow(params.alpha, nu), dt) {
  if (!(dt > 0.0)) throw_config("slow step must be > 0");
}

ComplexField SlowStepper::step_with(const ComplexField& u, const ComplexField& nl, double drift, double sigma,
                                    double dW) const {
  ComplexField w = u;
  auto c = w.coefficients();
  auto n = nl.coefficients();
  if (kind_ == SchemeKind::kExponentialEuler) {
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += dt_ * n[j];
    c[0] += dt_ * drift + sigma * dW;
    prop_.apply_inplace(w);
  } else {
    prop_.apply_inplace(w);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += dt_ * n[j];
    c[0] += dt_ * drift + sigma * dW;
  }
  check_finite(w, "slow");
  return w;
}

ComplexField SlowStepper::step(const ComplexField& u, double drift, double sigma, double dW) const {
  if (kind_ == SchemeKind::kExponentialEuler) return step_with(u, nonlinearity(u, params_.beta, params_.gamma), drift, sigma, dW);
  // Lie splitting: the explicit stage sees the linearly propagated state.
  ComplexField w = prop_.apply(u);
  const ComplexField nl = nonlinearity(w, params_.beta, params_.gamma);
  auto c = w.coefficients();
  auto n = nl.coefficients();
  for (std::size_t j = 0; j < c.size(); ++j) c[j] += dt_ * n[j];
  c[0] += dt_ * drift + sigma * dW;
  check_finite(w, "slow");
  return w;
}

FastStepper::FastStepper(GridPtr grid, const ModelParams& params, double eps, double dt, SchemeKind kind)
    : grid_(grid),
      params_(params),
      eps_(eps),
      dt_(dt),
      kind_(kind),
      prop_(grid, LinearSymbol::fast(params.rho, params.lambda, eps), dt) {
  if (!(dt > 0.0)) throw_config("fast step must be > 0");
  if (dt > kStiffnessCap * eps * (1.0 + kRatioTol)) {
    std::ostringstream os;
    os.precision(17);
    os << "fast step dt = " << dt << " exceeds the stiffness cap " << kStiffnessCap << " * eps = " << kStiffnessCap * eps;
    throw_config(os.str());
  }
  const double lam = params.lambda;
  const double z = lam * dt / eps;
  if (lam > 0.0) {
    gain_g_ = -std::expm1(-z) / lam;
    gain_w_ = std::sqrt(-std::expm1(-2.0 * z) / (2.0 * lam * dt));
  } else {
    gain_g_ = dt / eps;
    gain_w_ = 1.0 / std::sqrt(eps);
  }
}

ComplexField FastStepper::step(const ComplexField& v, double g, double sigma, double dW) const {
  const double h = dt_ / eps_;
  ComplexField w = v;
  if (kind_ == SchemeKind::kExponentialEuler) {
    const ComplexField nl = nonlinearity(v, params_.beta, params_.gamma);
    auto c = w.coefficients();
    auto n = nl.coefficients();
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += h * n[j];
    prop_.apply_inplace(w);
  } else {
    prop_.apply_inplace(w);
    const ComplexField nl = nonlinearity(w, params_.beta, params_.gamma);
    auto c = w.coefficients();
    auto n = nl.coefficients();
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += h * n[j];
  }
  w.coefficients()[0] += gain_g_ * g + gain_w_ * sigma * dW;
  check_finite(w, "fast");
  return w;
}

ComplexField step_slow(const ComplexField& u, const ComplexField& v, double dt, double dW1, const ModelParams& params,
                       double nu, const CouplingSpec& spec) {
  SlowStepper s(u.grid_ptr(), params, nu, dt);
  return s.step(u, spec.F(u, v), spec.Sigma1(u), dW1);
}

ComplexField step_fast(const ComplexField& v, const ComplexField& u_input, double dt, double dW2,
                       const ModelParams& params, const CouplingSpec& spec) {
  FastStepper s(v.grid_ptr(), params, params.eps, dt);
  return s.step(v, spec.G(u_input, v), spec.Sigma2(u_input, v), dW2);
}

ComplexField step_averaged(const ComplexField& u, double dt, double dW1, const ModelParams& params, double nu,
                           const CouplingSpec& spec, const FbarSource& fbar) {
  SlowStepper s(u.grid_ptr(), params, nu, dt);
  return s.step(u, fbar.value(u), spec.Sigma1(u), dW1);
}

namespace {

void require_increments(const NoisePath& w, std::size_t n, const char* name) {
  if (w.increments.size() < n) {
    std::ostringstream os;
    os << name << " has " << w.increments.size() << " increments, need " << n;
    throw_config(os.str());
  }
}

std::string abort_message(const std::exception& e, int step, double dt) {
  std::ostringstream os;
  os.precision(17);
  os << e.what() << " at slow step " << step << " (t = " << step * dt << ")";
  return os.str();
}

// Averages F over the fast substeps; v-independent couplings use a single
// evaluation so the value is bit-identical to F itself.
struct DriftAccumulator {
  bool single;
  double sum = 0.0;
  int count = 0;
  void add(double f) {
    if (single && count > 0) return;
    sum += f;
    ++count;
  }
  double value() const { return single ? sum : sum / count; }
};

}  // namespace

CoupledIntegrator::CoupledIntegrator(const Model& model, double eps, double nu)
    : model_(model),
      eps_(eps),
      m_(model.scheme.substeps(eps)),
      n_steps_(model.scheme.slow_steps(model.params.T)),
      slow_(model.grid, model.params, nu, model.scheme.dt_slow, model.scheme.kind),
      fast_(model.grid, model.params, eps, model.scheme.dt_slow / m_, model.scheme.kind) {}

PathRecord CoupledIntegrator::run(const ComplexField& u0, const ComplexField& v0, const NoisePath& w1,
                                  const NoisePath& w2, const std::vector<int>& checkpoint_steps) const {
  require_increments(w1, n_steps_, "W1");
  require_increments(w2, static_cast<std::size_t>(n_steps_) * m_, "W2");
  const auto& spec = model_.spec;
  PathRecord rec;
  ComplexField u = u0, v = v0;
  std::size_t next = 0;
  auto snapshot = [&](int n) {
    while (next < checkpoint_steps.size() && checkpoint_steps[next] == n) {
      rec.u.push_back(u);
      rec.v.push_back(v);
      ++next;
    }
  };
  rec.sup_u_h1sq = norm_h1_sq(u);
  snapshot(0);
  int n = 0;
  try {
    for (n = 0; n < n_steps_; ++n) {
      DriftAccumulator drift{spec.F_v_independent};
      for (int j = 0; j < m_; ++j) {
        drift.add(spec.F(u, v));
        v = fast_.step(v, spec.G(u, v), spec.Sigma2(u, v), w2.increments[static_cast<std::size_t>(n) * m_ + j]);
      }
      u = slow_.step(u, drift.value(), spec.Sigma1(u), w1.increments[n]);
      rec.sup_u_h1sq = std::max(rec.sup_u_h1sq, norm_h1_sq(u));
      snapshot(n + 1);
    }
  } catch (const NumericalAbort& e) {
    rec.aborted = true;
    rec.diagnostic = abort_message(e, n, model_.scheme.dt_slow);
  }
  return rec;
}

AveragedIntegrator::AveragedIntegrator(const Model& model, double nu, const FbarSource& fbar)
    : model_(model),
      fbar_(fbar),
      n_steps_(model.scheme.slow_steps(model.params.T)),
      slow_(model.grid, model.params, nu, model.scheme.dt_slow, model.scheme.kind) {}

PathRecord AveragedIntegrator::run(const ComplexField& u0, const NoisePath& w1,
                                   const std::vector<int>& checkpoint_steps) const {
  require_increments(w1, n_steps_, "W1");
  PathRecord rec;
  ComplexField u = u0;
  std::size_t next = 0;
  auto snapshot = [&](int n) {
    while (next < checkpoint_steps.size() && checkpoint_steps[next] == n) {
      rec.u.push_back(u);
      ++next;
    }
  };
  rec.sup_u_h1sq = norm_h1_sq(u);
  snapshot(0);
  int n = 0;
  try {
    for (n = 0; n < n_steps_; ++n) {
      u = slow_.step(u, fbar_.value(u), model_.spec.Sigma1(u), w1.increments[n]);
      rec.sup_u_h1sq = std::max(rec.sup_u_h1sq, norm_h1_sq(u));
      snapshot(n + 1);
    }
  } catch (const NumericalAbort& e) {
    rec.aborted = true;
    rec.diagnostic = abort_message(e, n, model_.scheme.dt_slow);
  }
  return rec;
}

KhasminskiiIntegrator::KhasminskiiIntegrator(const Model& model, double eps, double nu, int block_steps)
    : model_(model),
      eps_(eps),
      m_(model.scheme.substeps(eps)),
      n_steps_(model.scheme.slow_steps(model.params.T)),
      block_(block_steps),
      slow_(model.grid, model.params, nu, model.scheme.dt_slow, model.scheme.kind),
      fast_(model.grid, model.params, eps, model.scheme.dt_slow / m_, model.scheme.kind) {
  if (block_steps < 1 || block_steps > n_steps_) throw_config("Khasminskii block must satisfy dt_slow <= delta <= T");
}

KhasminskiiRecord KhasminskiiIntegrator::run(const ComplexField& u0, const ComplexField& v0, const NoisePath& w1,
                                             const NoisePath& w2, const std::vector<int>& checkpoint_steps) const {
  require_increments(w1, n_steps_, "W1");
  require_increments(w2, static_cast<std::size_t>(n_steps_) * m_, "W2");
  const auto& spec = model_.spec;
  const auto& p = model_.params;
  KhasminskiiRecord rec;
  rec.err_u.assign(n_steps_ + 1, 0.0);
  rec.err_v.assign(n_steps_ + 1, 0.0);

  ComplexField u = u0, v = v0, uh = u0, vh = v0;
  ComplexField u_block = u0;   // u^{eps,nu}(k delta), freezes the auxiliary fast drift
  ComplexField uh_block = u0;  // u_hat(t_s), freezes the auxiliary slow drift
  ComplexField nl_block = nonlinearity(u0, p.beta, p.gamma);

  std::size_t next = 0;
  auto snapshot = [&](int n) {
    while (next < checkpoint_steps.size() && checkpoint_steps[next] == n) {
      rec.reference.u.push_back(u);
      rec.reference.v.push_back(v);
      rec.auxiliary.u.push_back(uh);
      rec.auxiliary.v.push_back(vh);
      ++next;
    }
  };
  snapshot(0);
  int n = 0;
  try {
    for (n = 0; n < n_steps_; ++n) {
      if (n % block_ == 0) {
        vh = v;
        u_block = u;
        uh_block = uh;
        nl_block = nonlinearity(uh, p.beta, p.gamma);
      }
      DriftAccumulator drift{spec.F_v_independent}, drift_h{spec.F_v_independent};
      for (int j = 0; j < m_; ++j) {
        const double dW = w2.increments[static_cast<std::size_t>(n) * m_ + j];
        drift.add(spec.F(u, v));
        drift_h.add(spec.F(uh_block, vh));
        v = fast_.step(v, spec.G(u, v), spec.Sigma2(u, v), dW);
        vh = fast_.step(vh, spec.G(u_block, vh), spec.Sigma2(u_block, vh), dW);
      }
      const double dW1 = w1.increments[n];
      u = slow_.step(u, drift.value(), spec.Sigma1(u), dW1);
      uh = slow_.step_with(uh, nl_block, drift_h.value(), spec.Sigma1(uh), dW1);
      rec.err_u[n + 1] = distance_l2_sq(u, uh);
      rec.err_v[n + 1] = distance_l2_sq(v, vh);
      snapshot(n + 1);
    }
  } catch (const NumericalAbort& e) {
    rec.aborted = true;
    rec.diagnostic = abort_message(e, n, model_.scheme.dt_slow);
  }
  return rec;
}

KhasminskiiRecord khasminskii_path(const Model& model, double eps, double nu, double delta, const ComplexField& u0,
                                   const ComplexField& v0, const NoisePath& w1, const NoisePath& w2,
                                   const std::vector<int>& checkpoint_steps) {
  KhasminskiiIntegrator k(model, eps, nu, block_steps_for(delta, model.scheme));
  return k.run(u0, v0, w1, w2, checkpoint_steps);
}

}  // namespace slowfast
