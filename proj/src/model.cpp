#include "slowfast/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "slowfast/error.hpp"

namespace slowfast {

double gamma_bound(double beta) { return 2.0 * std::sqrt(beta) / (beta - 1.0); }

std::string to_string(CouplingLevel level) {
  switch (level) {
    case CouplingLevel::kConstant:
      return "constant";
    case CouplingLevel::kNormBased:
      return "norm_based";
    case CouplingLevel::kSaturating:
      return "saturating";
  }
  return "unknown";
}

CouplingLevel coupling_level_from_string(const std::string& name) {
  if (name == "constant") return CouplingLevel::kConstant;
  if (name == "norm_based") return CouplingLevel::kNormBased;
  if (name == "saturating") return CouplingLevel::kSaturating;
  throw_config("unknown coupling level '" + name + "' (expected constant, norm_based or saturating)");
}

CouplingSpec default_couplings(CouplingLevel level, const CouplingCoefficients& c) {
  CouplingSpec s;
  s.level = level;
  s.coeffs = c;
  const double root = std::sqrt(kTwoPi);
  auto amax = [](std::initializer_list<double> xs) {
    double m = 0.0;
    for (double x : xs) m = std::max(m, std::abs(x));
    return m;
  };

  switch (level) {
    case CouplingLevel::kConstant: {
      s.F = [v = c.c_F](const ComplexField&, const ComplexField&) { return v; };
      s.G = [v = c.c_G](const ComplexField&, const ComplexField&) { return v; };
      s.Sigma1 = [v = c.c_1](const ComplexField&) { return v; };
      s.Sigma2 = [v = c.c_2](const ComplexField&, const ComplexField&) { return v; };
      // Growth constants only; every Lipschitz quotient is zero.
      s.L_F = root * std::abs(c.c_F);
      s.L_G = root * std::abs(c.c_G);
      s.L_Sigma1 = root * std::abs(c.c_1);
      s.L_Sigma2 = 0.0;
      s.M_Sigma2 = root * std::abs(c.c_2);
      s.F_v_independent = true;
      s.fast_u_independent = true;
      break;
    }
    case CouplingLevel::kNormBased: {
      s.F = [c](const ComplexField& u, const ComplexField& v) { return c.a_F * norm_l2(u) + c.b_F * norm_l2(v) + c.c_F; };
      s.G = [c](const ComplexField& u, const ComplexField& v) { return c.a_G * norm_l2(u) + c.b_G * norm_l2(v) + c.c_G; };
      s.Sigma1 = [c](const ComplexField& u) { return c.a_1 * norm_l2(u) + c.c_1; };
      s.Sigma2 = [c](const ComplexField& u, const ComplexField&) { return c.M * std::tanh(norm_l2(u)); };
      break;
    }
    case CouplingLevel::kSaturating: {
      auto t = [](const ComplexField& f) { return std::tanh(norm_l2(f)); };
      s.F = [c, t](const ComplexField& u, const ComplexField& v) { return c.a_F * t(u) + c.b_F * t(v) + c.c_F; };
      s.G = [c, t](const ComplexField& u, const ComplexField& v) { return c.a_G * t(u) + c.b_G * t(v) + c.c_G; };
      s.Sigma1 = [c, t](const ComplexField& u) { return c.a_1 * t(u) + c.c_1; };
      s.Sigma2 = [c, t](const ComplexField& u, const ComplexField&) { return c.M * t(u); };
      break;
    }
  }
  if (level != CouplingLevel::kConstant) {
    s.L_F = root * amax({c.a_F, c.b_F, c.c_F});
    s.L_G = root * amax({c.a_G, c.b_G, c.c_G});
    s.L_Sigma1 = root * amax({c.a_1, c.c_1});
    s.L_Sigma2 = root * std::abs(c.M);
    s.M_Sigma2 = root * std::abs(c.M);
    s.F_v_independent = c.b_F == 0.0;
    s.fast_u_independent = c.a_G == 0.0 && c.M == 0.0;
  }
  s.norm_invariant = true;
  return s;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].assumption << ": " << violations[i].message;
  }
  return os.str();
}

ValidationReport validate(const ModelParams& p, const CouplingSpec& s) {
  ValidationReport r;
  auto check = [&](bool ok, const char* name, double margin, const std::string& msg) {
    if (!ok) r.violations.push_back({name, msg, margin});
  };
  auto open_interval = [&](double x, double lo, double hi, const char* name) {
    const double margin = std::min(x - lo, hi - x);
    std::ostringstream os;
    os.precision(17);
    os << name << " = " << x << " must lie in (" << lo << ", " << hi << ")";
    check(x > lo && x < hi, name, margin, os.str());
  };
  open_interval(p.alpha, 0.5, 1.0, "alpha");
  open_interval(p.rho, 0.5, 1.0, "rho");
  open_interval(p.eps, 0.0, 1.0, "eps");
  {
    std::ostringstream os;
    os << "beta = " << p.beta << " must exceed 1";
    check(p.beta > 1.0, "beta", p.beta - 1.0, os.str());
  }
  check(p.nu >= 0.0, "nu", p.nu, "nu must be >= 0");
  check(p.T > 0.0, "T", p.T, "T must be > 0");
  check(p.lambda > 0.0, "lambda", p.lambda, "lambda must be > 0");
  if (p.beta > 1.0) {
    const double bound = gamma_bound(p.beta);
    std::ostringstream os;
    os.precision(17);
    os << "|gamma| = " << std::abs(p.gamma) << " exceeds 2 sqrt(beta)/(beta-1) = " << bound;
    check(std::abs(p.gamma) <= bound, "gamma_bound", bound - std::abs(p.gamma), os.str());
  }
  {
    const double need = 3.0 * s.L_G + 2.0 * s.L_Sigma2 * s.L_Sigma2;
    std::ostringstream os;
    os.precision(17);
    os << "lambda = " << p.lambda << " must exceed 3 L_G + 2 L_Sigma2^2 = " << need;
    check(p.lambda > need, "lambda_dissipation", p.lambda - need, os.str());
  }
  for (auto [name, value] : {std::pair{"L_F", s.L_F}, {"L_G", s.L_G}, {"L_Sigma1", s.L_Sigma1},
                             {"L_Sigma2", s.L_Sigma2}, {"M_Sigma2", s.M_Sigma2}})
    check(value >= 0.0 && std::isfinite(value), name, value, std::string(name) + " must be finite and >= 0");
  return r;
}

void require_valid(const ModelParams& params, const CouplingSpec& spec) {
  const auto r = validate(params, spec);
  if (!r.ok()) throw_config("invalid configuration: " + r.summary());
}

namespace {

// |z|^{beta-1} with a fast path for odd integer beta.
inline double modulus_power(cplx z, double beta) {
  const double r2 = std::norm(z);
  const double half = 0.5 * (beta - 1.0);
  if (half == 1.0) return r2;
  if (half == 2.0) return r2 * r2;
  if (half == 3.0) return r2 * r2 * r2;
  if (r2 == 0.0) return 0.0;
  return std::pow(r2, half);
}

}  // namespace

cplx power_pointwise(cplx z, double beta) { return modulus_power(z, beta) * z; }

cplx nonlinearity_pointwise(cplx z, double beta, double gamma) {
  return -cplx(1.0, gamma) * (modulus_power(z, beta) * z);
}

ComplexField nonlinearity(const ComplexField& u, double beta, double gamma) {
  const auto& g = u.grid();
  std::vector<cplx> w(2 * g.n_modes());
  g.to_physical_padded(u.coefficients(), w);
  const cplx phase(-1.0, -gamma);
  for (auto& z : w) z = phase * (modulus_power(z, beta) * z);
  ComplexField out(u.grid_ptr());
  g.to_spectral_truncated(w, out.coefficients());
  return out;
}

}  // namespace slowfast
