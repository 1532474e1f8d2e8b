#include "slowfast/experiments.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "slowfast/config.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/random.hpp"

namespace slowfast {

namespace {

using ojson = nlohmann::ordered_json;

struct Moments {
  double mean = 0.0, se = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  const std::size_t n = x.size();
  if (n == 0) return m;
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  if (n > 1) {
    double s = 0.0;
    for (double xi : x) s += (xi - m.mean) * (xi - m.mean);
    m.se = std::sqrt(s / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return m;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

NoisePath slow_noise(const ExperimentConfig& cfg, std::size_t path, int n_steps) {
  return make_noise(cfg.seed_base, StreamId{kEnsembleStream, path, static_cast<std::uint64_t>(Channel::kSlow)},
                    cfg.scheme.dt_slow, static_cast<std::size_t>(n_steps));
}

NoisePath fast_noise(const ExperimentConfig& cfg, std::size_t path, std::size_t n_steps, double dt) {
  return make_noise(cfg.seed_base, StreamId{kEnsembleStream, path, static_cast<std::uint64_t>(Channel::kFast)}, dt,
                    n_steps);
}

Model model_for(const ExperimentConfig& cfg, double eps, double nu) {
  ExperimentConfig c = cfg;
  c.params.eps = eps;
  c.params.nu = nu;
  Model m = make_model(c);
  require_valid(m.params, m.spec);
  return m;
}

void check_aborts(const EnsembleStats& s, double max_fraction) {
  if (s.n_paths > 0 && static_cast<double>(s.aborts) > max_fraction * s.n_paths) {
    std::ostringstream os;
    os << s.kind << " ensemble: " << s.aborts << " of " << s.n_paths << " paths aborted (limit "
       << max_fraction * 100.0 << "%)";
    if (!s.diagnostics.empty()) os << "; first: " << s.diagnostics.front();
    throw_runtime(os.str());
  }
}

// Fills moments from the per-path snapshots.
void aggregate(EnsembleStats& s, bool has_v) {
  const std::size_t nc = s.t.size();
  s.mean_u_l2sq.assign(nc, 0.0);
  s.se_u_l2sq.assign(nc, 0.0);
  s.mean_u_h1sq.assign(nc, 0.0);
  s.se_u_h1sq.assign(nc, 0.0);
  s.mean_v_l2sq.assign(nc, 0.0);
  s.se_v_l2sq.assign(nc, 0.0);
  s.mean_u_l2_2p.assign(s.moment_powers.size(), std::vector<double>(nc, 0.0));
  s.se_u_l2_2p.assign(s.moment_powers.size(), std::vector<double>(nc, 0.0));
  s.aborts = 0;
  s.diagnostics.clear();
  std::vector<double> sup;
  for (std::size_t p = 0; p < s.paths.size(); ++p) {
    if (s.paths[p].aborted) {
      ++s.aborts;
      s.diagnostics.push_back("path " + std::to_string(p) + ": " + s.paths[p].diagnostic);
    } else {
      sup.push_back(s.paths[p].sup_u_h1sq);
    }
  }
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> l2, h1, v2;
    std::vector<std::vector<double>> pw(s.moment_powers.size());
    for (const auto& rec : s.paths) {
      if (rec.aborted) continue;
      const double a = norm_l2_sq(rec.u[c]);
      l2.push_back(a);
      h1.push_back(norm_h1_sq(rec.u[c]));
      if (has_v) v2.push_back(norm_l2_sq(rec.v[c]));
      for (std::size_t k = 0; k < s.moment_powers.size(); ++k) pw[k].push_back(std::pow(a, s.moment_powers[k]));
    }
    Moments m = moments(l2);
    s.mean_u_l2sq[c] = m.mean;
    s.se_u_l2sq[c] = m.se;
    m = moments(h1);
    s.mean_u_h1sq[c] = m.mean;
    s.se_u_h1sq[c] = m.se;
    m = moments(v2);
    s.mean_v_l2sq[c] = m.mean;
    s.se_v_l2sq[c] = m.se;
    for (std::size_t k = 0; k < s.moment_powers.size(); ++k) {
      m = moments(pw[k]);
      s.mean_u_l2_2p[k][c] = m.mean;
      s.se_u_l2_2p[k][c] = m.se;
    }
  }
  const Moments ms = moments(sup);
  s.mean_sup_u_h1sq = ms.mean;
  s.se_sup_u_h1sq = ms.se;
}

// Sorted unique step indices and, for each requested time, its position among them.
std::vector<int> unique_steps(const std::vector<int>& steps) {
  std::vector<int> u = steps;
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_runtime("cannot open '" + path.string() + "' for writing: " + std::strerror(errno));
  out << content;
  out.close();
  if (!out) throw_runtime("failed writing '" + path.string() + "'");
}

std::filesystem::path output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output.directory.empty() ? "." : cfg.output.directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw_runtime("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

ojson provenance(const ExperimentConfig& cfg) {
  const std::string canonical = config_to_json(cfg).dump();
  ojson p;
  p["seed_base"] = cfg.seed_base;
  p["config_hash"] = git_blob_hash(canonical);
  p["streams"] = {{"experiment", kEnsembleStream},
                  {"slow_channel", static_cast<std::uint64_t>(Channel::kSlow)},
                  {"fast_channel", static_cast<std::uint64_t>(Channel::kFast)}};
  p["rng"] = "mt19937_64 seeded by splitmix64(seed_base, experiment, path, channel)";
  return p;
}

OutputFiles write_outputs(const ExperimentConfig& cfg, const std::string& name, const std::string& csv,
                          const std::string& long_csv, const std::string& json) {
  const auto dir = output_dir(cfg);
  const std::string stem = cfg.output.prefix.empty() ? name : cfg.output.prefix + "_" + name;
  OutputFiles files;
  if (cfg.output.format == "csv" || cfg.output.format == "both") {
    const auto a = dir / (stem + ".csv");
    const auto b = dir / (stem + "_long.csv");
    write_file(a, csv);
    write_file(b, long_csv);
    files.paths.push_back(a.string());
    files.paths.push_back(b.string());
  }
  if (cfg.output.format == "json" || cfg.output.format == "both") {
    const auto c = dir / (stem + ".json");
    write_file(c, json);
    files.paths.push_back(c.string());
  }
  return files;
}

void require_sweep_values(const std::vector<double>& xs, const char* what) {
  if (xs.size() < 3) throw_config(std::string(what) + " sweep needs at least 3 values");
  for (double x : xs)
    if (!(x > 0.0)) throw_config(std::string(what) + " sweep values must be > 0");
}

void finish_fit(SweepResult& r) {
  r.fit = fit_loglog(r.x, r.error);
  r.residual_flag = r.fit.residual > 0.5;
  if (r.residual_flag) r.notes.push_back("log-log fit residual exceeds 0.5");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_paths < 2) throw_config("n_paths must be >= 2");
  if (n_modes < 4 || n_modes % 2 != 0) throw_config("n_modes must be even and >= 4");
  if (!(scheme.dt_slow > 0.0)) throw_config("dt_slow must be > 0");
  if (!(scheme.dt_fast >= 0.0)) throw_config("dt_fast must be >= 0");
  scheme.slow_steps(params.T);
  if (!checkpoints.empty()) {
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) throw_config("checkpoints must be sorted");
    if (std::abs(checkpoints.front()) > 1e-12 || std::abs(checkpoints.back() - params.T) > 1e-12)
      throw_config("checkpoints must include 0 and T");
  }
  for (double p : moment_powers)
    if (!(p > 0.0)) throw_config("moment powers must be > 0");
  if (!(max_abort_fraction >= 0.0 && max_abort_fraction <= 1.0)) throw_config("max_abort_fraction must lie in [0, 1]");
  if (!(fbar_tolerance >= 0.0)) throw_config("fbar tolerance must be >= 0");
  if (!(fbar_node_spacing > 0.0)) throw_config("fbar node spacing must be > 0");
  if (!(initial.u_norm >= 0.0) || !(initial.v_norm >= 0.0)) throw_config("initial norms must be >= 0");
  if (!std::isfinite(initial.u_decay)) throw_config("initial u_decay must be finite");
  if (output.format != "csv" && output.format != "json" && output.format != "both")
    throw_config("output format must be csv, json or both");
  frozen.validate(params.lambda);
  const CouplingSpec spec = default_couplings(level, coeffs);
  require_valid(params, spec);
}

Model make_model(const ExperimentConfig& cfg) {
  Model m;
  m.grid = make_grid(cfg.n_modes);
  m.params = cfg.params;
  m.spec = default_couplings(cfg.level, cfg.coeffs);
  m.scheme = cfg.scheme;
  return m;
}

std::vector<double> checkpoint_times(const ExperimentConfig& cfg) {
  if (!cfg.checkpoints.empty()) return cfg.checkpoints;
  std::vector<double> t(17);
  for (int i = 0; i < 17; ++i) t[i] = cfg.params.T * i / 16.0;
  return t;
}

std::vector<int> checkpoint_steps(const ExperimentConfig& cfg, const std::vector<double>& times) {
  const int n = cfg.scheme.slow_steps(cfg.params.T);
  std::vector<int> steps;
  for (double t : times) {
    if (t < -1e-12 || t > cfg.params.T * (1.0 + 1e-12)) throw_config("checkpoint outside [0, T]");
    steps.push_back(std::clamp(static_cast<int>(std::llround(t / cfg.scheme.dt_slow)), 0, n));
  }
  return steps;
}

ComplexField initial_u(const ExperimentConfig& cfg, const GridPtr& grid) {
  ComplexField u(grid);
  Rng rng(derive_seed({cfg.initial.u_phase_seed, static_cast<std::uint64_t>(grid->n_modes())}));
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  auto c = u.coefficients();
  for (int j = 0; j < grid->n_modes(); ++j) {
    const double ph = phase(rng);
    if (grid->is_nyquist(j)) continue;
    const double k = std::abs(grid->wavenumber(j));
    c[j] = std::polar(std::pow(1.0 + k, -0.5 * cfg.initial.u_decay), ph);
  }
  const double n = norm_l2(u);
  if (n > 0.0) u *= cfg.initial.u_norm / n;
  return u;
}

ComplexField initial_v(const ExperimentConfig& cfg, const GridPtr& grid) {
  return ComplexField::constant(grid, cfg.initial.v_norm / std::sqrt(kTwoPi));
}

std::shared_ptr<FbarProvider> make_fbar_provider(const ExperimentConfig& cfg) {
  FbarProviderConfig pc;
  pc.frozen = cfg.frozen;
  pc.frozen.seed_base = derive_seed({cfg.seed_base, cfg.frozen.seed_base});
  pc.tolerance = cfg.fbar_tolerance;
  pc.node_spacing = cfg.fbar_node_spacing;
  return std::make_shared<FbarProvider>(make_model(cfg), pc);
}

EnsembleStats run_coupled_ensemble(const ExperimentConfig& cfg, double eps, double nu) {
  return run_coupled_ensemble(cfg, eps, nu, checkpoint_times(cfg));
}

EnsembleStats run_coupled_ensemble(const ExperimentConfig& cfg, double eps, double nu,
                                   const std::vector<double>& times) {
  cfg.validate();
  const Model model = model_for(cfg, eps, nu);
  const CoupledIntegrator integ(model, eps, nu);
  EnsembleStats s;
  s.kind = "coupled";
  s.eps = eps;
  s.nu = nu;
  s.seed_base = cfg.seed_base;
  s.t = times;
  s.steps = checkpoint_steps(cfg, times);
  s.moment_powers = cfg.moment_powers;
  s.n_paths = cfg.n_paths;
  const std::vector<int> ordered = unique_steps(s.steps);
  const ComplexField u0 = initial_u(cfg, model.grid), v0 = initial_v(cfg, model.grid);
  const int n = integ.slow_steps();
  const std::size_t n_fast = static_cast<std::size_t>(n) * integ.substeps();
  std::vector<PathRecord> raw(cfg.n_paths);
  parallel_for(raw.size(), [&](std::size_t p) {
    raw[p] = integ.run(u0, v0, slow_noise(cfg, p, n), fast_noise(cfg, p, n_fast, integ.dt_fast()), ordered);
  });
  // Re-map snapshots onto the requested (possibly repeated) times.
  s.paths.resize(raw.size());
  for (std::size_t p = 0; p < raw.size(); ++p) {
    PathRecord& r = s.paths[p];
    r.aborted = raw[p].aborted;
    r.diagnostic = raw[p].diagnostic;
    r.sup_u_h1sq = raw[p].sup_u_h1sq;
    if (r.aborted) continue;
    for (int st : s.steps) {
      const auto idx = std::lower_bound(ordered.begin(), ordered.end(), st) - ordered.begin();
      r.u.push_back(raw[p].u[idx]);
      r.v.push_back(raw[p].v[idx]);
    }
  }
  aggregate(s, true);
  check_aborts(s, cfg.max_abort_fraction);
  return s;
}

namespace {

EnsembleStats averaged_impl(const ExperimentConfig& cfg, double nu, const FbarSource& fbar) {
  cfg.validate();
  const Model model = model_for(cfg, cfg.params.eps, nu);
  const AveragedIntegrator integ(model, nu, fbar);
  EnsembleStats s;
  s.kind = "averaged";
  s.eps = 0.0;
  s.nu = nu;
  s.seed_base = cfg.seed_base;
  s.t = checkpoint_times(cfg);
  s.steps = checkpoint_steps(cfg, s.t);
  s.moment_powers = cfg.moment_powers;
  s.n_paths = cfg.n_paths;
  const std::vector<int> ordered = unique_steps(s.steps);
  const ComplexField u0 = initial_u(cfg, model.grid);
  const int n = integ.slow_steps();
  std::vector<PathRecord> raw(cfg.n_paths);
  parallel_for(raw.size(), [&](std::size_t p) { raw[p] = integ.run(u0, slow_noise(cfg, p, n), ordered); });
  s.paths.resize(raw.size());
  for (std::size_t p = 0; p < raw.size(); ++p) {
    PathRecord& r = s.paths[p];
    r.aborted = raw[p].aborted;
    r.diagnostic = raw[p].diagnostic;
    r.sup_u_h1sq = raw[p].sup_u_h1sq;
    if (r.aborted) continue;
    for (int st : s.steps) {
      const auto idx = std::lower_bound(ordered.begin(), ordered.end(), st) - ordered.begin();
      r.u.push_back(raw[p].u[idx]);
    }
  }
  aggregate(s, false);
  check_aborts(s, cfg.max_abort_fraction);
  return s;
}

}  // namespace

EnsembleStats run_averaged_ensemble(const ExperimentConfig& cfg, double nu, const FbarSource& fbar) {
  return averaged_impl(cfg, nu, fbar);
}

EnsembleStats run_averaged_ensemble(const ExperimentConfig& cfg, double nu, const FbarProvider& fbar) {
  const std::uint64_t before = fbar.simulations();
  EnsembleStats s = averaged_impl(cfg, nu, fbar);
  s.fbar_simulations = fbar.simulations() - before;
  s.cost_warning = fbar.budget_exceeded();
  return s;
}

StrongError strong_error(const EnsembleStats& a, const EnsembleStats& b) {
  if (a.n_paths != b.n_paths || a.seed_base != b.seed_base || a.steps != b.steps ||
      a.paths.size() != b.paths.size())
    throw_config("strong_error: ensembles do not share streams, paths and checkpoints");
  StrongError e;
  e.t = a.t;
  for (std::size_t c = 0; c < a.t.size(); ++c) {
    std::vector<double> d;
    for (std::size_t p = 0; p < a.paths.size(); ++p) {
      if (a.paths[p].aborted || b.paths[p].aborted) continue;
      d.push_back(distance_l2_sq(a.paths[p].u[c], b.paths[p].u[c]));
    }
    const Moments m = moments(d);
    e.mean.push_back(m.mean);
    e.se.push_back(m.se);
  }
  for (std::size_t c = 0; c < e.mean.size(); ++c) {
    if (c == 0 || e.mean[c] > e.sup) {
      e.sup = e.mean[c];
      e.sup_se = e.se[c];
      e.sup_index = c;
    }
  }
  return e;
}

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  LogLogFit f;
  f.n_points = static_cast<int>(lx.size());
  if (lx.size() < 2) return f;
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

bool monotone_within(const std::vector<double>& y, const std::vector<double>& se, bool increasing,
                     std::size_t floor_from) {
  const std::size_t end = std::min(y.size(), floor_from);
  for (std::size_t i = 0; i + 1 < y.size() && i < end; ++i) {
    const double tol = 2.0 * std::hypot(se[i], se[i + 1]);
    if (increasing ? y[i + 1] < y[i] - tol : y[i + 1] > y[i] + tol) return false;
  }
  return true;
}

SweepResult viscosity_sweep(const ExperimentConfig& cfg, double eps, const std::vector<double>& nus) {
  require_sweep_values(nus, "viscosity");
  SweepResult r;
  r.kind = "nu";
  const EnsembleStats ref = run_coupled_ensemble(cfg, eps, 0.0);
  for (double nu : nus) {
    const StrongError e = strong_error(run_coupled_ensemble(cfg, eps, nu), ref);
    r.x.push_back(nu);
    r.error.push_back(e.sup);
    r.se.push_back(e.sup_se);
  }
  finish_fit(r);
  r.monotone = r.fit.slope > 0.0;
  return r;
}

SweepResult viscosity_sweep_averaged(const ExperimentConfig& cfg, const std::vector<double>& nus,
                                     const FbarSource& fbar) {
  require_sweep_values(nus, "viscosity");
  SweepResult r;
  r.kind = "nu_averaged";
  const EnsembleStats ref = run_averaged_ensemble(cfg, 0.0, fbar);
  for (double nu : nus) {
    const StrongError e = strong_error(run_averaged_ensemble(cfg, nu, fbar), ref);
    r.x.push_back(nu);
    r.error.push_back(e.sup);
    r.se.push_back(e.sup_se);
  }
  finish_fit(r);
  r.monotone = r.fit.slope > 0.0;
  return r;
}

SweepResult holder_study(const ExperimentConfig& cfg, double eps, double nu, const std::vector<double>& hs, double p,
                         double t0) {
  if (!(nu > 0.0)) throw_config("holder study requires nu > 0");
  if (!(p > 0.0)) throw_config("holder exponent p must be > 0");
  require_sweep_values(hs, "holder");
  std::vector<double> times{t0};
  for (double h : hs) {
    if (t0 + h > cfg.params.T * (1.0 + 1e-12)) throw_config("t0 + h exceeds T");
    times.push_back(t0 + h);
  }
  const EnsembleStats s = run_coupled_ensemble(cfg, eps, nu, times);
  SweepResult r;
  r.kind = "holder";
  for (std::size_t i = 0; i < hs.size(); ++i) {
    std::vector<double> d;
    for (const auto& rec : s.paths) {
      if (rec.aborted) continue;
      d.push_back(std::pow(distance_l2_sq(rec.u[i + 1], rec.u[0]), p));
    }
    const Moments m = moments(d);
    r.x.push_back(hs[i]);
    r.error.push_back(m.mean);
    r.se.push_back(m.se);
  }
  finish_fit(r);
  r.monotone = r.fit.slope >= p - 0.3;
  return r;
}

SweepResult khasminskii_study(const ExperimentConfig& cfg, double eps, double nu, const std::vector<double>& deltas) {
  cfg.validate();
  if (deltas.empty()) throw_config("khasminskii study needs delta values");
  const Model model = model_for(cfg, eps, nu);
  const int n = cfg.scheme.slow_steps(cfg.params.T);
  const int m = cfg.scheme.substeps(eps);
  const double dt_fast = cfg.scheme.dt_slow / m;
  const ComplexField u0 = initial_u(cfg, model.grid), v0 = initial_v(cfg, model.grid);

  struct Point {
    double error_u, se_u, error_v, se_v;
  };
  auto evaluate = [&](int block) {
    const KhasminskiiIntegrator integ(model, eps, nu, block);
    std::vector<KhasminskiiRecord> recs(cfg.n_paths);
    parallel_for(recs.size(), [&](std::size_t p) {
      recs[p] = integ.run(u0, v0, slow_noise(cfg, p, n), fast_noise(cfg, p, static_cast<std::size_t>(n) * m, dt_fast),
                          {});
    });
    std::vector<double> sup_u;
    int aborts = 0;
    for (const auto& rec : recs) {
      if (rec.aborted) {
        ++aborts;
        continue;
      }
      sup_u.push_back(*std::max_element(rec.err_u.begin(), rec.err_u.end()));
    }
    if (static_cast<double>(aborts) > cfg.max_abort_fraction * cfg.n_paths)
      throw_runtime("khasminskii ensemble: " + std::to_string(aborts) + " paths aborted");
    Point pt{};
    const Moments mu = moments(sup_u);
    pt.error_u = mu.mean;
    pt.se_u = mu.se;
    for (int k = 0; k <= n; ++k) {
      std::vector<double> ev;
      for (const auto& rec : recs)
        if (!rec.aborted) ev.push_back(rec.err_v[k]);
      const Moments mv = moments(ev);
      if (k == 0 || mv.mean > pt.error_v) {
        pt.error_v = mv.mean;
        pt.se_v = mv.se;
      }
    }
    return pt;
  };

  SweepResult r;
  r.kind = "khasminskii";
  for (double d : deltas) {
    const Point pt = evaluate(block_steps_for(d, cfg.scheme));
    r.x.push_back(d);
    r.error.push_back(pt.error_u);
    r.se.push_back(pt.se_u);
    r.error_v.push_back(pt.error_v);
    r.se_v.push_back(pt.se_v);
  }
  // Reference block length eps sqrt(-ln eps), rounded to the slow grid.
  const double star = eps * std::sqrt(-std::log(eps));
  const int star_steps = std::clamp(static_cast<int>(std::llround(star / cfg.scheme.dt_slow)), 1, n);
  const Point ps = evaluate(star_steps);
  r.reference_x = star_steps * cfg.scheme.dt_slow;
  r.reference_error = ps.error_u;
  r.reference_se = ps.se_u;
  r.reference_error_v = ps.error_v;
  r.reference_se_v = ps.se_v;

  std::vector<std::size_t> order(r.x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.x[a] < r.x[b]; });
  std::vector<double> eu, su, ev, sv;
  for (std::size_t i : order) {
    eu.push_back(r.error[i]);
    su.push_back(r.se[i]);
    ev.push_back(r.error_v[i]);
    sv.push_back(r.se_v[i]);
  }
  const bool mono = monotone_within(eu, su, true, eu.size()) && monotone_within(ev, sv, true, ev.size());
  const bool star_ok = r.reference_error < eu.back() && r.reference_error_v < ev.back();
  if (!mono) r.notes.push_back("errors not monotone in delta within 2 combined standard errors");
  if (!star_ok) r.notes.push_back("reference delta does not beat the largest delta");
  r.monotone = mono && star_ok;
  r.fit = fit_loglog(r.x, r.error);
  return r;
}

SweepResult eps_sweep(const ExperimentConfig& cfg, const std::vector<double>& eps_values, double nu,
                      const FbarSource& fbar) {
  require_sweep_values(eps_values, "eps");
  std::vector<double> eps = eps_values;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const EnsembleStats avg = run_averaged_ensemble(cfg, nu, fbar);
  SweepResult r;
  r.kind = "eps";
  for (double e : eps) {
    const StrongError se = strong_error(run_coupled_ensemble(cfg, e, nu), avg);
    r.x.push_back(e);
    r.error.push_back(se.sup);
    r.se.push_back(se.sup_se);
  }
  std::size_t floor_from = r.x.size();
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    if (r.error[i] <= 2.0 * r.se[i]) {
      floor_from = i;
      break;
    }
  }
  r.floor_x = floor_from < r.x.size() ? r.x[floor_from] : 0.0;
  r.monotone = monotone_within(r.error, r.se, false, floor_from);
  if (!r.monotone) r.notes.push_back("strong error not non-increasing in eps within 2 combined standard errors");
  r.fit = fit_loglog(r.x, r.error);
  return r;
}

std::string ensemble_csv(const EnsembleStats& s) {
  std::ostringstream os;
  os << "t,mean_u_l2sq,se_u_l2sq,mean_u_h1sq,se_u_h1sq,mean_v_l2sq,se_v_l2sq,aborts\n";
  for (std::size_t c = 0; c < s.t.size(); ++c) {
    os << fmt17(s.t[c]) << ',' << fmt17(s.mean_u_l2sq[c]) << ',' << fmt17(s.se_u_l2sq[c]) << ','
       << fmt17(s.mean_u_h1sq[c]) << ',' << fmt17(s.se_u_h1sq[c]) << ',' << fmt17(s.mean_v_l2sq[c]) << ','
       << fmt17(s.se_v_l2sq[c]) << ',' << s.aborts << '\n';
  }
  return os.str();
}

std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "x,error,se\n";
  for (std::size_t i = 0; i < r.x.size(); ++i)
    os << fmt17(r.x[i]) << ',' << fmt17(r.error[i]) << ',' << fmt17(r.se[i]) << '\n';
  return os.str();
}

namespace {

std::string ensemble_long_csv(const EnsembleStats& s) {
  std::ostringstream os;
  os << "series,t,value,se\n";
  auto series = [&](const std::string& name, const std::vector<double>& v, const std::vector<double>& e) {
    for (std::size_t c = 0; c < s.t.size(); ++c)
      os << name << ',' << fmt17(s.t[c]) << ',' << fmt17(v[c]) << ',' << fmt17(e[c]) << '\n';
  };
  series("u_l2sq", s.mean_u_l2sq, s.se_u_l2sq);
  series("u_h1sq", s.mean_u_h1sq, s.se_u_h1sq);
  if (s.kind == "coupled") series("v_l2sq", s.mean_v_l2sq, s.se_v_l2sq);
  for (std::size_t k = 0; k < s.moment_powers.size(); ++k)
    series("u_l2_2p_p" + fmt17(s.moment_powers[k]), s.mean_u_l2_2p[k], s.se_u_l2_2p[k]);
  return os.str();
}

std::string sweep_long_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "series,x,value,se\n";
  for (std::size_t i = 0; i < r.x.size(); ++i)
    os << "error," << fmt17(r.x[i]) << ',' << fmt17(r.error[i]) << ',' << fmt17(r.se[i]) << '\n';
  for (std::size_t i = 0; i < r.error_v.size(); ++i)
    os << "error_v," << fmt17(r.x[i]) << ',' << fmt17(r.error_v[i]) << ',' << fmt17(r.se_v[i]) << '\n';
  return os.str();
}

}  // namespace

std::string ensemble_json(const EnsembleStats& s, const ExperimentConfig& cfg) {
  ojson j;
  j["config"] = config_to_json(cfg);
  j["provenance"] = provenance(cfg);
  ojson r;
  r["kind"] = s.kind;
  r["eps"] = s.eps;
  r["nu"] = s.nu;
  r["n_paths"] = s.n_paths;
  r["aborts"] = s.aborts;
  r["diagnostics"] = s.diagnostics;
  r["t"] = s.t;
  r["mean_u_l2sq"] = s.mean_u_l2sq;
  r["se_u_l2sq"] = s.se_u_l2sq;
  r["mean_u_h1sq"] = s.mean_u_h1sq;
  r["se_u_h1sq"] = s.se_u_h1sq;
  r["mean_v_l2sq"] = s.mean_v_l2sq;
  r["se_v_l2sq"] = s.se_v_l2sq;
  r["moment_powers"] = s.moment_powers;
  r["mean_u_l2_2p"] = s.mean_u_l2_2p;
  r["se_u_l2_2p"] = s.se_u_l2_2p;
  r["mean_sup_u_h1sq"] = s.mean_sup_u_h1sq;
  r["se_sup_u_h1sq"] = s.se_sup_u_h1sq;
  r["fbar_simulations"] = s.fbar_simulations;
  r["cost_warning"] = s.cost_warning;
  j["results"] = r;
  return j.dump(2) + "\n";
}

std::string sweep_json(const SweepResult& s, const ExperimentConfig& cfg) {
  ojson j;
  j["config"] = config_to_json(cfg);
  j["provenance"] = provenance(cfg);
  ojson r;
  r["kind"] = s.kind;
  r["x"] = s.x;
  r["error"] = s.error;
  r["se"] = s.se;
  if (!s.error_v.empty()) {
    r["error_v"] = s.error_v;
    r["se_v"] = s.se_v;
    r["reference_delta"] = s.reference_x;
    r["reference_error"] = s.reference_error;
    r["reference_se"] = s.reference_se;
    r["reference_error_v"] = s.reference_error_v;
    r["reference_se_v"] = s.reference_se_v;
  }
  r["slope"] = s.fit.slope;
  r["intercept"] = s.fit.intercept;
  r["residual"] = s.fit.residual;
  r["residual_flag"] = s.residual_flag;
  r["monotone"] = s.monotone;
  if (s.kind == "eps") r["floor_x"] = s.floor_x;
  r["notes"] = s.notes;
  j["results"] = r;
  return j.dump(2) + "\n";
}

OutputFiles write_results(const EnsembleStats& stats, const ExperimentConfig& cfg, const std::string& name) {
  return write_outputs(cfg, name, ensemble_csv(stats), ensemble_long_csv(stats), ensemble_json(stats, cfg));
}

OutputFiles write_results(const SweepResult& sweep, const ExperimentConfig& cfg, const std::string& name) {
  return write_outputs(cfg, name, sweep_csv(sweep), sweep_long_csv(sweep), sweep_json(sweep, cfg));
}

std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, blob.data(), blob.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw_runtime("SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace slowfast
