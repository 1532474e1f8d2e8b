#pragma once

// Ensemble orchestration, strong error metrics and the convergence studies.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "slowfast/ergodics.hpp"
#include "slowfast/integrators.hpp"

namespace slowfast {

struct InitialCondition {
  double u_norm = 1.0;      // |u0|
  double u_decay = 2.5;     // |u0_k|^2 proportional to (1 + |k|)^{-u_decay}
  std::uint64_t u_phase_seed = 7;
  double v_norm = 0.1;      // v0 is the constant field of this norm
};

struct OutputConfig {
  std::string directory = ".";
  std::string prefix = "slowfast";
  std::string format = "both";  // csv | json | both
};

struct ExperimentConfig {
  ModelParams params;
  CouplingLevel level = CouplingLevel::kNormBased;
  CouplingCoefficients coeffs;
  int n_modes = 64;
  StepScheme scheme;
  int n_paths = 100;
  std::vector<double> checkpoints;  // empty selects 17 uniform points on [0, T]
  std::uint64_t seed_base = 20240601;
  std::vector<double> moment_powers{1.0, 2.0};  // p in E|u|^{2p}
  double max_abort_fraction = 0.01;
  InitialCondition initial;
  FrozenFastConfig frozen;
  double fbar_tolerance = 2e-3;
  double fbar_node_spacing = 0.05;
  OutputConfig output;

  void validate() const;
};

Model make_model(const ExperimentConfig& cfg);
std::vector<double> checkpoint_times(const ExperimentConfig& cfg);
std::vector<int> checkpoint_steps(const ExperimentConfig& cfg, const std::vector<double>& times);
ComplexField initial_u(const ExperimentConfig& cfg, const GridPtr& grid);
ComplexField initial_v(const ExperimentConfig& cfg, const GridPtr& grid);
std::shared_ptr<FbarProvider> make_fbar_provider(const ExperimentConfig& cfg);

inline constexpr std::uint64_t kEnsembleStream = 1;

struct EnsembleStats {
  std::string kind;  // coupled | averaged
  double eps = 0.0, nu = 0.0;
  std::uint64_t seed_base = 0;
  std::vector<double> t;
  std::vector<int> steps;
  std::vector<double> mean_u_l2sq, se_u_l2sq;
  std::vector<double> mean_u_h1sq, se_u_h1sq;
  std::vector<double> mean_v_l2sq, se_v_l2sq;  // zero for averaged ensembles
  std::vector<double> moment_powers;
  std::vector<std::vector<double>> mean_u_l2_2p, se_u_l2_2p;  // [power][checkpoint]
  double mean_sup_u_h1sq = 0.0, se_sup_u_h1sq = 0.0;
  int n_paths = 0;
  int aborts = 0;
  std::vector<std::string> diagnostics;
  std::vector<PathRecord> paths;  // snapshots at the checkpoints, indexed by path
  std::uint64_t fbar_simulations = 0;
  bool cost_warning = false;
};

EnsembleStats run_coupled_ensemble(const ExperimentConfig& cfg, double eps, double nu);
EnsembleStats run_coupled_ensemble(const ExperimentConfig& cfg, double eps, double nu,
                                   const std::vector<double>& times);
EnsembleStats run_averaged_ensemble(const ExperimentConfig& cfg, double nu, const FbarSource& fbar);
EnsembleStats run_averaged_ensemble(const ExperimentConfig& cfg, double nu, const FbarProvider& fbar);

struct StrongError {
  std::vector<double> t;
  std::vector<double> mean;  // E |u_a(t) - u_b(t)|^2
  std::vector<double> se;
  double sup = 0.0;
  double sup_se = 0.0;
  std::size_t sup_index = 0;
};

StrongError strong_error(const EnsembleStats& a, const EnsembleStats& b);

struct LogLogFit {
  double slope = 0.0, intercept = 0.0, residual = 0.0;  // residual: RMS of log residuals
  int n_points = 0;
};

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct SweepResult {
  std::string kind;  // eps | nu | nu_averaged | holder | khasminskii
  std::vector<double> x, error, se;
  std::vector<double> error_v, se_v;  // khasminskii fast-component errors
  LogLogFit fit;
  bool residual_flag = false;  // fit residual > 0.5
  bool monotone = false;       // trend asserted by the study holds
  double floor_x = 0.0;        // first x within 2 se of zero (eps sweep), 0 if none
  double reference_x = 0.0, reference_error = 0.0, reference_se = 0.0;  // khasminskii delta*
  double reference_error_v = 0.0, reference_se_v = 0.0;
  std::vector<std::string> notes;
};

SweepResult viscosity_sweep(const ExperimentConfig& cfg, double eps, const std::vector<double>& nus);
SweepResult viscosity_sweep_averaged(const ExperimentConfig& cfg, const std::vector<double>& nus,
                                     const FbarSource& fbar);
SweepResult holder_study(const ExperimentConfig& cfg, double eps, double nu, const std::vector<double>& hs, double p,
                         double t0);
SweepResult khasminskii_study(const ExperimentConfig& cfg, double eps, double nu, const std::vector<double>& deltas);
SweepResult eps_sweep(const ExperimentConfig& cfg, const std::vector<double>& eps_values, double nu,
                      const FbarSource& fbar);

// x_i vs y_i non-increasing (or non-decreasing) within 2 combined se, ignoring
// points from `floor_from` on.
bool monotone_within(const std::vector<double>& y, const std::vector<double>& se, bool increasing,
                     std::size_t floor_from);

// Files written by write_results.
struct OutputFiles {
  std::vector<std::string> paths;
};

OutputFiles write_results(const EnsembleStats& stats, const ExperimentConfig& cfg, const std::string& name);
OutputFiles write_results(const SweepResult& sweep, const ExperimentConfig& cfg, const std::string& name);

std::string ensemble_csv(const EnsembleStats& stats);
std::string sweep_csv(const SweepResult& sweep);
std::string ensemble_json(const EnsembleStats& stats, const ExperimentConfig& cfg);
std::string sweep_json(const SweepResult& sweep, const ExperimentConfig& cfg);

// git blob hash (SHA-1 of "blob <len>\0<content>"), hex encoded.
std::string git_blob_hash(const std::string& content);

}  // namespace slowfast
