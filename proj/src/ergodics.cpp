#include "slowfast/ergodics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/random.hpp"

namespace slowfast {

namespace {

constexpr std::uint64_t kFrozenExperiment = 0x46524f5a454eULL;  // "FROZEN"
constexpr double kMaxReplicas = 1e6;

int step_count(double t, double dt, const char* what) {
  const double r = t / dt;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-9 * std::max(1.0, r)) {
    std::ostringstream os;
    os.precision(17);
    os << what << " t = " << t << " is not a multiple of the frozen step " << dt;
    throw_config(os.str());
  }
  return static_cast<int>(n);
}

double mean_of(const std::vector<double>& x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double std_error_of(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double xi : x) s += (xi - m) * (xi - m);
  return std::sqrt(s / static_cast<double>(n - 1) / static_cast<double>(n));
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FastStepper frozen_stepper(const Model& model, double dt) {
  return FastStepper(model.grid, model.params, 1.0, dt, model.scheme.kind);
}

// Time averages of F(u, v) over the post-burn-in window, one per replica.
std::vector<double> replica_means(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg,
                                  std::uint64_t key, int first, int count) {
  const double lambda = model.params.lambda;
  const int n_total = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  const int n_burn = static_cast<int>(std::ceil(cfg.burn_in(lambda) / cfg.dt - 1e-9));
  const FastStepper stepper = frozen_stepper(model, cfg.dt);
  const auto& spec = model.spec;
  std::vector<double> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), [&](std::size_t r) {
    const NoisePath w = make_noise(cfg.seed_base, frozen_stream(key, static_cast<std::uint64_t>(first) + r), cfg.dt,
                                   static_cast<std::size_t>(n_total));
    ComplexField v(model.grid);
    double sum = 0.0;
    for (int k = 0; k < n_total; ++k) {
      if (k >= n_burn) sum += spec.F(u, v);
      v = stepper.step(v, spec.G(u, v), spec.Sigma2(u, v), w.increments[static_cast<std::size_t>(k)]);
    }
    out[r] = sum / static_cast<double>(n_total - n_burn);
  });
  return out;
}

FbarEstimate make_estimate(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg,
                           const std::vector<double>& means) {
  FbarEstimate e;
  e.value = mean_of(means);
  e.std_error = std_error_of(means);
  e.burn_in = cfg.burn_in(model.params.lambda);
  e.horizon = cfg.horizon;
  e.n_replicas = static_cast<int>(means.size());
  e.u_fingerprint = field_fingerprint(u);
  e.params_fingerprint = params_fingerprint(model);
  e.simulations = means.size();
  const double lam = model.params.lambda;
  const double r = norm_l2(u);
  e.mixing_bias_scale =
      model.spec.L_F * (1.0 + r * r) * std::exp(-lam * e.burn_in) / (lam * (cfg.horizon - e.burn_in));
  return e;
}

FbarEstimate exact_estimate(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg) {
  FbarEstimate e;
  e.value = model.spec.F(u, ComplexField(model.grid));
  e.burn_in = cfg.burn_in(model.params.lambda);
  e.horizon = cfg.horizon;
  e.n_replicas = 0;
  e.u_fingerprint = field_fingerprint(u);
  e.params_fingerprint = params_fingerprint(model);
  return e;
}

FbarEstimate estimate_keyed(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg, double tol,
                            std::uint64_t key) {
  cfg.validate(model.params.lambda);
  if (model.spec.F_v_independent) return exact_estimate(model, u, cfg);
  std::vector<double> means = replica_means(model, u, cfg, key, 0, cfg.n_replicas);
  if (tol > 0.0) {
    // Extend with fresh replicas until the pooled standard error meets tol.
    double se = std_error_of(means);
    while (se > tol && static_cast<double>(means.size()) < kMaxReplicas) {
      const double n = static_cast<double>(means.size());
      const double want = std::min(kMaxReplicas, std::max(n + 1.0, std::ceil(n * (se / tol) * (se / tol))));
      const int first = static_cast<int>(means.size());
      const std::vector<double> extra = replica_means(model, u, cfg, key, first, static_cast<int>(want) - first);
      means.insert(means.end(), extra.begin(), extra.end());
      se = std_error_of(means);
    }
  }
  return make_estimate(model, u, cfg, means);
}

template <class Acc>
void ensemble_trace(const Model& model, const ComplexField& u, const ComplexField& X, const FrozenFastConfig& cfg,
                    int n_paths, int n_steps, std::uint64_t key, Acc&& acc) {
  const FastStepper stepper = frozen_stepper(model, cfg.dt);
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
    const NoisePath w = make_noise(cfg.seed_base, frozen_stream(key, p), cfg.dt, static_cast<std::size_t>(n_steps));
    trace_frozen_fast(model, u, X, n_steps, cfg.dt, w,
                      [&](int k, double, const ComplexField& v) { acc(p, k, v); });
  });
}

}  // namespace

void FrozenFastConfig::validate(double lambda) const {
  if (!(dt > 0.0) || dt > kStiffnessCap * (1.0 + 1e-12)) throw_config("frozen fast dt must lie in (0, 0.1]");
  if (!(burn_in_multiplier >= 0.0)) throw_config("burn_in_multiplier must be >= 0");
  if (!(horizon > burn_in(lambda))) throw_config("frozen horizon must exceed the burn-in");
  if (n_replicas < 2) throw_config("n_replicas must be >= 2");
  const double n_total = std::round(horizon / dt);
  if (n_total <= std::ceil(burn_in(lambda) / dt - 1e-9)) throw_config("frozen horizon leaves no averaging window");
}

std::string to_json(const FbarEstimate& e) {
  nlohmann::ordered_json j;
  j["value"] = e.value;
  j["std_error"] = e.std_error;
  j["burn_in"] = e.burn_in;
  j["horizon"] = e.horizon;
  j["n_replicas"] = e.n_replicas;
  j["u_fingerprint"] = e.u_fingerprint;
  j["mixing_bias_scale"] = e.mixing_bias_scale;
  j["simulations"] = e.simulations;
  j["params_fingerprint"] = e.params_fingerprint;
  return j.dump(2);
}

std::uint64_t field_fingerprint(const ComplexField& u) {
  std::uint64_t h = derive_seed({static_cast<std::uint64_t>(u.grid().n_modes())});
  for (const cplx& c : u.coefficients()) {
    const auto re = static_cast<std::uint64_t>(std::llround(c.real() * 1e8));
    const auto im = static_cast<std::uint64_t>(std::llround(c.imag() * 1e8));
    h = derive_seed({h, re, im});
  }
  return h;
}

std::uint64_t params_fingerprint(const Model& model) {
  const auto& p = model.params;
  const auto& c = model.spec.coeffs;
  std::ostringstream os;
  os.precision(17);
  os << p.alpha << ' ' << p.rho << ' ' << p.beta << ' ' << p.gamma << ' ' << p.lambda << ' ' << p.eps << ' ' << p.nu
     << ' ' << p.T << ' ' << to_string(model.spec.level) << ' ' << c.a_F << ' ' << c.b_F << ' ' << c.c_F << ' '
     << c.a_G << ' ' << c.b_G << ' ' << c.c_G << ' ' << c.a_1 << ' ' << c.c_1 << ' ' << c.M << ' ' << c.c_2 << ' '
     << model.grid->n_modes() << ' ' << to_string(model.scheme.kind);
  return fnv1a(os.str());
}

StreamId frozen_stream(std::uint64_t key, std::uint64_t replica) {
  return StreamId{derive_seed({kFrozenExperiment, key}), replica, static_cast<std::uint64_t>(Channel::kFast)};
}

void trace_frozen_fast(const Model& model, const ComplexField& u_frozen, const ComplexField& v0, int n_steps, double dt,
                       const NoisePath& w2, const std::function<void(int, double, const ComplexField&)>& observer) {
  if (w2.increments.size() < static_cast<std::size_t>(n_steps)) throw_config("frozen noise path too short");
  const auto& spec = model.spec;
  ComplexField v = v0;
  if (observer) observer(0, 0.0, v);
  if (n_steps == 0) return;
  const FastStepper stepper = frozen_stepper(model, dt);
  for (int k = 0; k < n_steps; ++k) {
    v = stepper.step(v, spec.G(u_frozen, v), spec.Sigma2(u_frozen, v), w2.increments[static_cast<std::size_t>(k)]);
    if (observer) observer(k + 1, (k + 1) * dt, v);
  }
}

ComplexField solve_frozen_fast(const Model& model, const ComplexField& u_frozen, const ComplexField& v0, double t_end,
                               const FrozenFastConfig& cfg, std::uint64_t seed) {
  if (!(t_end >= 0.0)) throw_config("t_end must be >= 0");
  if (!(cfg.dt > 0.0) || cfg.dt > kStiffnessCap * (1.0 + 1e-12)) throw_config("frozen fast dt must lie in (0, 0.1]");
  if (t_end == 0.0) return v0;
  const int n = static_cast<int>(std::ceil(t_end / cfg.dt - 1e-9));
  const double dt = t_end / n;
  const NoisePath w = make_noise(seed, frozen_stream(0, 0), dt, static_cast<std::size_t>(n));
  ComplexField out = v0;
  trace_frozen_fast(model, u_frozen, v0, n, dt, w, [&](int k, double, const ComplexField& v) {
    if (k == n) out = v;
  });
  return out;
}

FbarEstimate estimate_fbar(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg) {
  return estimate_keyed(model, u, cfg, 0.0, field_fingerprint(u));
}

FbarEstimate estimate_fbar_to_tolerance(const Model& model, const ComplexField& u, const FrozenFastConfig& cfg,
                                        double tol) {
  if (!(tol > 0.0)) throw_config("tolerance must be > 0");
  return estimate_keyed(model, u, cfg, tol, field_fingerprint(u));
}

DissipativityCurve dissipativity_curve(const Model& model, const ComplexField& u, const ComplexField& X,
                                       const FrozenFastConfig& cfg, int n_paths, double t_end) {
  if (n_paths < 2) throw_config("n_paths must be >= 2");
  const int n_steps = step_count(t_end, cfg.dt, "dissipativity horizon");
  std::vector<std::vector<double>> sq(static_cast<std::size_t>(n_steps) + 1, std::vector<double>(n_paths));
  ensemble_trace(model, u, X, cfg, n_paths, n_steps, derive_seed({field_fingerprint(u), field_fingerprint(X), 1}),
                 [&](std::size_t p, int k, const ComplexField& v) { sq[k][p] = norm_l2_sq(v); });
  DissipativityCurve c;
  for (int k = 0; k <= n_steps; ++k) {
    c.t.push_back(k * cfg.dt);
    c.mean_sq.push_back(mean_of(sq[k]));
    c.se_sq.push_back(std_error_of(sq[k]));
  }
  const double lam = model.params.lambda;
  // Plateau: pooled mean over t >= burn-in.
  std::vector<double> late;
  for (int k = 0; k <= n_steps; ++k)
    if (c.t[k] >= cfg.burn_in(lam) - 1e-12) late.push_back(c.mean_sq[k]);
  if (late.empty()) late.push_back(c.mean_sq.back());
  c.plateau = mean_of(late);
  // Paths are shared across times, so the plateau error is the largest pointwise one.
  double se_max = 0.0;
  for (int k = 0; k <= n_steps; ++k)
    if (c.t[k] >= cfg.burn_in(lam) - 1e-12) se_max = std::max(se_max, c.se_sq[k]);
  c.plateau_se = se_max > 0.0 ? se_max : c.se_sq.back();

  const double x2 = norm_l2_sq(X);
  c.dominated = true;
  for (int k = 0; k <= n_steps; ++k) {
    const double bound = std::exp(-lam * c.t[k]) * x2 + c.plateau + 3.0 * (c.se_sq[k] + c.plateau_se) + 1e-14;
    if (c.mean_sq[k] > bound) c.dominated = false;
  }
  // Least-squares slope of log sqrt(E|v|^2) over t in [0, 1/(2 lambda)].
  std::vector<double> ts, ys;
  for (int k = 0; k <= n_steps; ++k) {
    if (c.t[k] > 0.5 / lam + 1e-12) break;
    if (c.mean_sq[k] > 0.0) {
      ts.push_back(c.t[k]);
      ys.push_back(0.5 * std::log(c.mean_sq[k]));
    }
  }
  if (ts.size() >= 2) {
    const double mt = mean_of(ts), my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      sxy += (ts[i] - mt) * (ys[i] - my);
      sxx += (ts[i] - mt) * (ts[i] - mt);
    }
    c.initial_log_slope = sxy / sxx;
  }
  return c;
}

CoupledDistance coupled_distance(const Model& model, const ComplexField& u1, const ComplexField& X,
                                 const ComplexField& u2, const ComplexField& Y, const FrozenFastConfig& cfg,
                                 int n_paths, const std::vector<double>& times) {
  if (n_paths < 2) throw_config("n_paths must be >= 2");
  if (times.empty()) throw_config("no evaluation times");
  std::vector<int> steps;
  for (double t : times) steps.push_back(step_count(t, cfg.dt, "evaluation"));
  const int n_steps = *std::max_element(steps.begin(), steps.end());
  const std::uint64_t key = derive_seed({field_fingerprint(X), field_fingerprint(Y), 2});
  const FastStepper stepper = frozen_stepper(model, cfg.dt);
  const auto& spec = model.spec;
  std::vector<std::vector<double>> d(steps.size(), std::vector<double>(n_paths));
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
    const NoisePath w = make_noise(cfg.seed_base, frozen_stream(key, p), cfg.dt, static_cast<std::size_t>(n_steps));
    ComplexField a = X, b = Y;
    for (int k = 0; k <= n_steps; ++k) {
      for (std::size_t i = 0; i < steps.size(); ++i)
        if (steps[i] == k) d[i][p] = distance_l2_sq(a, b);
      if (k == n_steps) break;
      const double dW = w.increments[static_cast<std::size_t>(k)];
      a = stepper.step(a, spec.G(u1, a), spec.Sigma2(u1, a), dW);
      b = stepper.step(b, spec.G(u2, b), spec.Sigma2(u2, b), dW);
    }
  });
  CoupledDistance out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out.t.push_back(times[i]);
    out.mean.push_back(mean_of(d[i]));
    out.se.push_back(std_error_of(d[i]));
  }
  return out;
}

SensitivityEstimate sensitivity_in_u(const Model& model, const ComplexField& u1, const ComplexField& u2,
                                     const ComplexField& X, const FrozenFastConfig& cfg, double t, int n_paths) {
  // The noise key depends on X only, so every (u1, u2) pair sees the same W2 paths.
  const CoupledDistance d = coupled_distance(model, u1, X, u2, X, cfg, n_paths, {t});
  SensitivityEstimate s;
  s.mean = d.mean[0];
  s.se = d.se[0];
  const double du = distance_l2_sq(u1, u2);
  s.ratio = du > 0.0 ? s.mean / du : 0.0;
  return s;
}

MixingCurve mixing_curve(const Model& model, const ComplexField& u, const ComplexField& X, const FrozenFastConfig& cfg,
                         int n_paths, const std::vector<double>& times) {
  if (n_paths < 2) throw_config("n_paths must be >= 2");
  if (times.empty()) throw_config("no evaluation times");
  std::vector<int> steps;
  for (double t : times) steps.push_back(step_count(t, cfg.dt, "evaluation"));
  const int n_steps = *std::max_element(steps.begin(), steps.end());
  std::vector<std::vector<double>> f(steps.size(), std::vector<double>(n_paths));
  ensemble_trace(model, u, X, cfg, n_paths, n_steps, derive_seed({field_fingerprint(u), field_fingerprint(X), 4}),
                 [&](std::size_t p, int k, const ComplexField& v) {
                   for (std::size_t i = 0; i < steps.size(); ++i)
                     if (steps[i] == k) f[i][p] = model.spec.F(u, v);
                 });
  MixingCurve out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out.t.push_back(times[i]);
    out.mean.push_back(mean_of(f[i]));
    out.se.push_back(std_error_of(f[i]));
  }
  return out;
}

FbarProvider::FbarProvider(Model model, FbarProviderConfig cfg) : model_(std::move(model)), cfg_(cfg) {
  if (!model_.spec.F_v_independent) cfg_.frozen.validate(model_.params.lambda);
  if (!(cfg_.node_spacing > 0.0)) throw_config("node_spacing must be > 0");
  if (cfg_.tolerance < 0.0) throw_config("tolerance must be >= 0");
}

void FbarProvider::request_tolerance(double tol) {
  if (!(tol > 0.0)) throw_config("tolerance must be > 0");
  std::lock_guard<std::mutex> lock(mu_);
  cfg_.tolerance = tol;
}

std::size_t FbarProvider::cache_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

FbarEstimate FbarProvider::run_estimate(const ComplexField& u, std::uint64_t key) const {
  double tol;
  {
    std::lock_guard<std::mutex> lock(mu_);
    tol = cfg_.tolerance;
  }
  FbarEstimate e = estimate_keyed(model_, u, cfg_.frozen, tol, key);
  simulations_.fetch_add(e.simulations);
  return e;
}

FbarEstimate FbarProvider::keyed_estimate(std::uint64_t key, const ComplexField& u) const {
  const int kind = model_.spec.norm_invariant ? 1 : 2;
  const auto map_key = std::make_pair(kind, key);
  std::promise<FbarEstimate> promise;
  std::shared_future<FbarEstimate> fut;
  bool compute = false;
  {
    std::lock_guard<std::mutex> lock(mu_);
    const double want = cfg_.tolerance > 0.0 ? cfg_.tolerance : std::numeric_limits<double>::infinity();
    auto it = cache_.find(map_key);
    if (it != cache_.end() && it->second.tolerance <= want) {
      fut = it->second.est;
    } else {
      fut = promise.get_future().share();
      cache_[map_key] = Entry{fut, want};
      compute = true;
      if (misses_.fetch_add(1) + 1 > cfg_.max_estimates) budget_exceeded_.store(true);
    }
  }
  if (compute) {
    try {
      promise.set_value(run_estimate(u, key));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

FbarEstimate FbarProvider::node_estimate(std::int64_t node) const {
  const double r = static_cast<double>(node) * cfg_.node_spacing;
  const ComplexField rep = ComplexField::constant(model_.grid, r / std::sqrt(kTwoPi));
  return keyed_estimate(derive_seed({0x4e4f4445ULL, static_cast<std::uint64_t>(node)}), rep);
}

FbarEstimate FbarProvider::estimate(const ComplexField& u) const {
  if (model_.spec.F_v_independent) return exact_estimate(model_, u, cfg_.frozen);
  if (!model_.spec.norm_invariant) return keyed_estimate(field_fingerprint(u), u);
  const double x = norm_l2(u) / cfg_.node_spacing;
  const double fl = std::floor(x);
  const auto i = static_cast<std::int64_t>(fl);
  const double w = x - fl;
  FbarEstimate lo = node_estimate(i);
  if (w == 0.0) return lo;
  const FbarEstimate hi = node_estimate(i + 1);
  lo.value = (1.0 - w) * lo.value + w * hi.value;
  lo.std_error = (1.0 - w) * lo.std_error + w * hi.std_error;
  lo.mixing_bias_scale = std::max(lo.mixing_bias_scale, hi.mixing_bias_scale);
  lo.n_replicas = std::min(lo.n_replicas, hi.n_replicas);
  lo.simulations += hi.simulations;
  lo.u_fingerprint = field_fingerprint(u);
  return lo;
}

double FbarProvider::value(const ComplexField& u) const { return estimate(u).value; }

}  // namespace slowfast
