// Command-line front end; talks to the library only through the C API.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slowfast/slowfast.h"

namespace {

struct ConfigDeleter {
  void operator()(sf_config* c) const { sf_config_free(c); }
};
using ConfigPtr = std::unique_ptr<sf_config, ConfigDeleter>;

int report(sf_status st, char* json) {
  if (json) {
    std::fputs(json, stdout);
    sf_string_free(json);
  }
  if (st != SF_OK) std::fprintf(stderr, "error: %s\n", sf_last_error());
  return static_cast<int>(st);
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and experiment harness for slow-fast stochastic fractional Schroedinger systems"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string output_dir;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "YAML configuration file");
  app.add_option("--seed", seed, "seed for every random stream");
  app.add_option("--threads", threads, "worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("-o,--output-dir", output_dir, "output directory (default: $SLOWFAST_OUTPUT_DIR or .)");
  app.add_option("--set", overrides, "override section.key=value (repeatable)")->allow_extra_args(false)->take_all();

  auto* verify = app.add_subcommand("verify-lemmas", "check the pointwise nonlinearity inequalities");
  std::optional<double> beta, gamma;
  std::uint64_t samples = 10000;
  verify->add_option("--beta", beta, "nonlinearity power (default: config)");
  verify->add_option("--gamma", gamma, "nonlinearity phase (default: config)");
  verify->add_option("--samples", samples, "samples per lemma")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "run a coupled ensemble and write moments");
  std::optional<double> sim_eps, sim_nu;
  std::optional<int> paths;
  simulate->add_option("--eps", sim_eps, "scale separation (default: config)");
  simulate->add_option("--nu", sim_nu, "slow viscosity (default: config)");
  simulate->add_option("--paths", paths, "number of paths (default: config)");

  auto* fbar = app.add_subcommand("fbar", "estimate the averaged drift at a slow state");
  std::string u_from = "zero";
  double tol = 0.0;
  fbar->add_option("--u-from", u_from, "zero, or a file of spectral coefficients");
  fbar->add_option("--tol", tol, "target standard error (0 = fixed configuration)")->check(CLI::NonNegativeNumber);

  auto* sweep = app.add_subcommand("sweep", "convergence study over eps, nu, h or delta");
  std::string kind;
  std::vector<double> values;
  std::optional<double> sw_eps, sw_nu;
  std::optional<int> sw_paths;
  sweep->add_option("--kind", kind, "eps | nu | holder | khasminskii")
      ->required()
      ->check(CLI::IsMember({"eps", "nu", "holder", "khasminskii"}));
  sweep->add_option("--values", values, "sweep values")->required()->take_all();
  sweep->add_option("--eps", sw_eps, "scale separation for nu/holder/khasminskii sweeps");
  sweep->add_option("--nu", sw_nu, "viscosity for eps/holder/khasminskii sweeps");
  sweep->add_option("--paths", sw_paths, "number of paths (default: config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return SF_ERR_CONFIG;
  }

  sf_set_threads(threads);
  sf_config* raw = nullptr;
  sf_status st = config_path.empty() ? sf_config_default(&raw) : sf_config_load(config_path.c_str(), &raw);
  if (st != SF_OK) return report(st, nullptr);
  ConfigPtr cfg(raw);

  auto set = [&](const std::string& key, const std::string& value) {
    const sf_status s = sf_config_set(cfg.get(), key.c_str(), value.c_str());
    if (s != SF_OK) throw s;
  };
  try {
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects section.key=value, got '%s'\n", o.c_str());
        return SF_ERR_CONFIG;
      }
      set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (seed) set("ensemble.seed_base", std::to_string(*seed));
    if (!output_dir.empty()) set("output.directory", output_dir);
    if (paths) set("ensemble.n_paths", std::to_string(*paths));
    if (sw_paths) set("ensemble.n_paths", std::to_string(*sw_paths));
    if (sw_eps) set("params.eps", num(*sw_eps));
    if (sw_nu) set("params.nu", num(*sw_nu));
    if (sim_eps) set("params.eps", num(*sim_eps));
    if (sim_nu) set("params.nu", num(*sim_nu));
  } catch (sf_status s) {
    return report(s, nullptr);
  }

  st = sf_config_validate(cfg.get());
  if (st != SF_OK) return report(st, nullptr);

  // Effective values come from the merged configuration.
  auto field = [&](const char* key) {
    double v = 0.0;
    if (sf_config_get_double(cfg.get(), key, &v) != SF_OK) throw SF_ERR_RUNTIME;
    return v;
  };

  char* out = nullptr;
  try {
    if (verify->parsed()) {
      const double b = beta ? *beta : field("params.beta");
      const double g = gamma ? *gamma : field("params.gamma");
      st = sf_verify_lemmas(cfg.get(), b, g, samples, seed ? *seed : 0, &out);
    } else if (simulate->parsed()) {
      st = sf_simulate(cfg.get(), field("params.eps"), field("params.nu"), &out);
    } else if (fbar->parsed()) {
      st = sf_fbar(cfg.get(), u_from == "zero" ? nullptr : u_from.c_str(), tol, &out);
    } else {
      if (values.size() < 3) {
        std::fprintf(stderr, "error: --values needs at least 3 entries\n");
        return SF_ERR_CONFIG;
      }
      st = sf_sweep(cfg.get(), kind.c_str(), values.data(), values.size(), &out);
    }
  } catch (sf_status s) {
    return report(s, nullptr);
  }
  return report(st, out);
}
