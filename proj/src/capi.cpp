#include "slowfast/slowfast.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "slowfast/config.hpp"
#include "slowfast/experiments.hpp"
#include "slowfast/lemmas.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/random.hpp"

struct sf_config {
  slowfast::ExperimentConfig cfg;
};

namespace {

using ojson = nlohmann::ordered_json;

thread_local std::string t_last_error;

sf_status fail(sf_status code, const std::string& what) {
  t_last_error = what;
  return code;
}

template <class Fn>
sf_status guarded(Fn&& fn) {
  try {
    t_last_error.clear();
    return fn();
  } catch (const slowfast::Error& e) {
    return fail(static_cast<sf_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SF_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(SF_ERR_RUNTIME, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

slowfast::ComplexField read_field(const std::string& path, const slowfast::GridPtr& grid) {
  std::ifstream in(path);
  if (!in) slowfast::throw_config("cannot read field file '" + path + "'");
  std::vector<slowfast::cplx> c;
  std::string line;
  while (std::getline(in, line)) {
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    double re = 0.0, im = 0.0;
    if (!(ls >> re)) continue;
    if (!(ls >> im)) im = 0.0;
    c.emplace_back(re, im);
  }
  if (static_cast<int>(c.size()) != grid->n_modes())
    slowfast::throw_config("field file '" + path + "' has " + std::to_string(c.size()) + " coefficients, expected " +
                           std::to_string(grid->n_modes()));
  return slowfast::ComplexField(grid, std::move(c));
}

ojson files_json(const slowfast::OutputFiles& f) { return ojson(f.paths); }

}  // namespace

extern "C" {

const char* sf_version(void) { return "1.0.0"; }

const char* sf_last_error(void) { return t_last_error.c_str(); }

void sf_string_free(char* s) { std::free(s); }

void sf_set_threads(int n) { slowfast::set_max_threads(n); }

sf_status sf_config_default(sf_config** out) {
  if (!out) return fail(SF_ERR_CONFIG, "null output handle");
  return guarded([&] {
    *out = new sf_config{slowfast::default_config()};
    return SF_OK;
  });
}

sf_status sf_config_load(const char* path, sf_config** out) {
  if (!path || !out) return fail(SF_ERR_CONFIG, "null argument");
  return guarded([&] {
    *out = new sf_config{slowfast::load_config(path)};
    return SF_OK;
  });
}

sf_status sf_config_set(sf_config* cfg, const char* dotted_key, const char* value) {
  if (!cfg || !dotted_key || !value) return fail(SF_ERR_CONFIG, "null argument");
  return guarded([&] {
    slowfast::set_config_value(cfg->cfg, dotted_key, value);
    return SF_OK;
  });
}

sf_status sf_config_get_double(const sf_config* cfg, const char* dotted_key, double* value) {
  if (!cfg || !dotted_key || !value) return fail(SF_ERR_CONFIG, "null argument");
  return guarded([&] {
    const std::string key = dotted_key;
    const auto dot = key.find('.');
    const ojson j = slowfast::config_to_json(cfg->cfg);
    if (dot == std::string::npos || !j.contains(key.substr(0, dot)) ||
        !j[key.substr(0, dot)].contains(key.substr(dot + 1)))
      slowfast::throw_config("unknown config key '" + key + "'");
    const ojson& v = j[key.substr(0, dot)][key.substr(dot + 1)];
    if (!v.is_number()) slowfast::throw_config("config key '" + key + "' is not numeric");
    *value = v.get<double>();
    return SF_OK;
  });
}

sf_status sf_config_validate(const sf_config* cfg) {
  if (!cfg) return fail(SF_ERR_CONFIG, "null config");
  return guarded([&] {
    cfg->cfg.validate();
    return SF_OK;
  });
}

sf_status sf_config_to_json(const sf_config* cfg, char** json_out) {
  if (!cfg || !json_out) return fail(SF_ERR_CONFIG, "null argument");
  return guarded([&] {
    *json_out = dup_string(slowfast::config_to_json(cfg->cfg).dump(2));
    return SF_OK;
  });
}

void sf_config_free(sf_config* cfg) { delete cfg; }

sf_status sf_verify_lemmas(const sf_config* cfg, double beta, double gamma, uint64_t samples, uint64_t seed,
                           char** report_json) {
  if (!cfg || !report_json) return fail(SF_ERR_CONFIG, "null argument");
  *report_json = nullptr;
  return guarded([&] {
    if (samples == 0) slowfast::throw_config("samples must be >= 1");
    slowfast::ExperimentConfig c = cfg->cfg;
    c.params.beta = beta;
    c.params.gamma = gamma;
    slowfast::require_valid(c.params, slowfast::default_couplings(c.level, c.coeffs));
    ojson j;
    j["config"] = slowfast::config_to_json(c);
    j["beta"] = beta;
    j["gamma"] = gamma;
    j["samples"] = samples;
    j["seed"] = seed;
    ojson reports = ojson::array();
    std::uint64_t total = 0;
    for (slowfast::LemmaId id : slowfast::kAllLemmas) {
      const slowfast::LemmaReport r = slowfast::check_lemma(id, beta, gamma, samples, seed);
      total += r.violations;
      reports.push_back(ojson::parse(slowfast::to_json(r)));
    }
    j["lemmas"] = reports;
    j["violations"] = total;
    j["ok"] = total == 0;
    *report_json = dup_string(j.dump(2) + "\n");
    if (total > 0) return fail(SF_ERR_VERIFICATION, std::to_string(total) + " lemma violations");
    return SF_OK;
  });
}

sf_status sf_simulate(const sf_config* cfg, double eps, double nu, char** summary_json) {
  if (!cfg || !summary_json) return fail(SF_ERR_CONFIG, "null argument");
  *summary_json = nullptr;
  return guarded([&] {
    slowfast::ExperimentConfig c = cfg->cfg;
    c.params.eps = eps;
    c.params.nu = nu;
    c.validate();
    const slowfast::EnsembleStats s = slowfast::run_coupled_ensemble(c, eps, nu);
    const slowfast::OutputFiles files = slowfast::write_results(s, c, "simulate");
    ojson j;
    j["command"] = "simulate";
    j["eps"] = eps;
    j["nu"] = nu;
    j["n_paths"] = s.n_paths;
    j["aborts"] = s.aborts;
    j["files"] = files_json(files);
    *summary_json = dup_string(j.dump(2) + "\n");
    return SF_OK;
  });
}

sf_status sf_fbar(const sf_config* cfg, const char* u_path, double tol, char** estimate_json) {
  if (!cfg || !estimate_json) return fail(SF_ERR_CONFIG, "null argument");
  *estimate_json = nullptr;
  return guarded([&] {
    const slowfast::ExperimentConfig& c = cfg->cfg;
    c.validate();
    if (tol < 0.0) slowfast::throw_config("tol must be >= 0");
    slowfast::Model model = slowfast::make_model(c);
    const slowfast::ComplexField u = u_path ? read_field(u_path, model.grid) : slowfast::ComplexField(model.grid);
    slowfast::FrozenFastConfig fc = c.frozen;
    fc.seed_base = slowfast::derive_seed({c.seed_base, c.frozen.seed_base});
    const slowfast::FbarEstimate e =
        tol > 0.0 ? slowfast::estimate_fbar_to_tolerance(model, u, fc, tol) : slowfast::estimate_fbar(model, u, fc);
    ojson j;
    j["config"] = slowfast::config_to_json(c);
    j["tolerance"] = tol;
    j["estimate"] = ojson::parse(slowfast::to_json(e));
    *estimate_json = dup_string(j.dump(2) + "\n");
    return SF_OK;
  });
}

sf_status sf_sweep(const sf_config* cfg, const char* kind, const double* values, size_t n_values, char** result_json) {
  if (!cfg || !kind || !result_json || (n_values > 0 && !values)) return fail(SF_ERR_CONFIG, "null argument");
  *result_json = nullptr;
  return guarded([&] {
    const slowfast::ExperimentConfig& c = cfg->cfg;
    c.validate();
    const std::vector<double> xs(values, values + n_values);
    if (xs.size() < 3) slowfast::throw_config("a sweep needs at least 3 values");
    const std::string k = kind;
    slowfast::SweepResult r;
    if (k == "eps") {
      const auto provider = slowfast::make_fbar_provider(c);
      r = slowfast::eps_sweep(c, xs, c.params.nu, *provider);
    } else if (k == "nu") {
      r = slowfast::viscosity_sweep(c, c.params.eps, xs);
    } else if (k == "holder") {
      double h_max = 0.0;
      for (double h : xs) h_max = std::max(h_max, h);
      const double t0 = std::min(0.5 * c.params.T, c.params.T - h_max);
      r = slowfast::holder_study(c, c.params.eps, c.params.nu, xs, 1.0, t0);
    } else if (k == "khasminskii") {
      r = slowfast::khasminskii_study(c, c.params.eps, c.params.nu, xs);
    } else {
      slowfast::throw_config("unknown sweep kind '" + k + "' (expected eps, nu, holder or khasminskii)");
    }
    const slowfast::OutputFiles files = slowfast::write_results(r, c, "sweep_" + k);
    ojson j = ojson::parse(slowfast::sweep_json(r, c));
    j["files"] = files_json(files);
    *result_json = dup_string(j.dump(2) + "\n");
    return SF_OK;
  });
}

}  // extern "C"
