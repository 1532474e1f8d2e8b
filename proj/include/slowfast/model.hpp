#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slowfast/spectral.hpp"

namespace slowfast {

struct ModelParams {
  double alpha = 0.75;  // slow dispersion order, in (1/2, 1)
  double rho = 0.75;    // fast dissipation order, in (1/2, 1)
  double beta = 3.0;    // nonlinearity power, > 1
  double gamma = 0.5;   // nonlinearity phase
  double lambda = 6.0;  // fast damping, > 0
  double eps = 0.01;    // scale separation, in (0, 1)
  double nu = 0.0;      // slow viscosity, >= 0
  double T = 1.0;       // horizon, > 0
};

// Admissible |gamma| for a given beta: 2 sqrt(beta) / (beta - 1).
double gamma_bound(double beta);

enum class CouplingLevel { kConstant, kNormBased, kSaturating };

std::string to_string(CouplingLevel level);
CouplingLevel coupling_level_from_string(const std::string& name);

// Coefficients of the built-in coupling families.
//   NormBased:  F = a_F |u| + b_F |v| + c_F,  G likewise,
//               Sigma1 = a_1 |u| + c_1,  Sigma2 = M tanh(|u|)
//   Saturating: every |.| above replaced by tanh(|.|)
//   Constant:   F = c_F, G = c_G, Sigma1 = c_1, Sigma2 = c_2
struct CouplingCoefficients {
  double a_F = 0.2, b_F = 1.0, c_F = 0.2;
  double a_G = 0.2, b_G = 0.2, c_G = 0.3;
  double a_1 = 0.2, c_1 = 0.2;
  double M = 0.5;
  double c_2 = 0.5;
};

using CouplingMap = std::function<double(const ComplexField& u, const ComplexField& v)>;
using NoiseMap = std::function<double(const ComplexField& u)>;

// Scalar couplings L^2 x L^2 -> R. Declared constants bound the L^2 norm of
// the spatially constant field value * 1, i.e. they include sqrt(2 pi).
struct CouplingSpec {
  CouplingLevel level = CouplingLevel::kNormBased;
  CouplingCoefficients coeffs;
  CouplingMap F, G, Sigma2;
  NoiseMap Sigma1;
  double L_F = 0.0, L_G = 0.0, L_Sigma1 = 0.0, L_Sigma2 = 0.0, M_Sigma2 = 0.0;

  // F(u, v) does not depend on v (then Fbar = F).
  bool F_v_independent = false;
  // G and Sigma2 do not depend on u (frozen fast dynamics identical for every u).
  bool fast_u_independent = false;
  // Every map depends on u only through |u|.
  bool norm_invariant = true;
};

CouplingSpec default_couplings(CouplingLevel level, const CouplingCoefficients& coeffs = {});

struct Violation {
  std::string assumption;
  std::string message;
  double margin;  // negative when violated
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::string summary() const;
};

// Checks parameter ranges and the structural assumptions against the coupling constants.
ValidationReport validate(const ModelParams& params, const CouplingSpec& spec);
// Throws a config error listing every violation.
void require_valid(const ModelParams& params, const CouplingSpec& spec);

// -(1 + i gamma) |z|^{beta-1} z
cplx nonlinearity_pointwise(cplx z, double beta, double gamma);
// |z|^{beta-1} z
cplx power_pointwise(cplx z, double beta);

// Pointwise nonlinearity evaluated on the 2x padded grid, truncated back to the band.
ComplexField nonlinearity(const ComplexField& u, double beta, double gamma);

}  // namespace slowfast
