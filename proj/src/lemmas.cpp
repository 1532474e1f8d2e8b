#include "slowfast/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"

#include "slowfast/error.hpp"
#include "slowfast/model.hpp"
#include "slowfast/random.hpp"

namespace slowfast {

std::string to_string(LemmaId id) {
  switch (id) {
    case LemmaId::kNonlinearLipschitz:
      return "nonlinear_lipschitz";
    case LemmaId::kPhaseBoundConjugate:
      return "phase_bound_conjugate";
    case LemmaId::kPhaseBound:
      return "phase_bound";
    case LemmaId::kMonotone:
      return "monotone";
    case LemmaId::kDissipative:
      return "dissipative";
    case LemmaId::kGradientDissipative:
      return "gradient_dissipative";
  }
  return "unknown";
}

LemmaId lemma_from_string(const std::string& name) {
  for (auto id : kAllLemmas)
    if (to_string(id) == name) return id;
  throw_config("unknown lemma id '" + name + "'");
}

LemmaSample evaluate_lemma(LemmaId id, cplx x, cplx y, double beta, double gamma) {
  const double ax = std::abs(x), ay = std::abs(y);
  const double pxb = ax == 0.0 ? 0.0 : std::pow(ax, beta - 1.0);
  const double pyb = ay == 0.0 ? 0.0 : std::pow(ay, beta - 1.0);
  const cplx d = x - y;
  const double scale = (pxb * ax + pyb * ay) * std::abs(d);
  const double k = std::abs(beta - 1.0) / (2.0 * std::sqrt(beta));

  LemmaSample s;
  s.scale = scale;
  switch (id) {
    case LemmaId::kNonlinearLipschitz: {
      s.lhs = std::abs(nonlinearity_pointwise(x, beta, gamma) - nonlinearity_pointwise(y, beta, gamma));
      s.rhs = beta * std::abs(cplx(1.0, gamma)) * (pxb + pyb) * std::abs(d);
      s.scale *= std::abs(cplx(1.0, gamma));
      break;
    }
    case LemmaId::kPhaseBoundConjugate: {
      const cplx p = d * (std::conj(x) * pxb - std::conj(y) * pyb);
      s.lhs = std::abs(p.imag());
      s.rhs = k * p.real();
      break;
    }
    case LemmaId::kPhaseBound: {
      const cplx q = (power_pointwise(x, beta) - power_pointwise(y, beta)) * std::conj(d);
      s.lhs = std::abs(q.imag());
      s.rhs = k * q.real();
      break;
    }
    case LemmaId::kMonotone: {
      const cplx q = (power_pointwise(x, beta) - power_pointwise(y, beta)) * std::conj(d);
      s.lhs = 0.0;
      s.rhs = q.real();
      break;
    }
    case LemmaId::kDissipative: {
      const cplx q = (nonlinearity_pointwise(x, beta, gamma) - nonlinearity_pointwise(y, beta, gamma)) * std::conj(d);
      s.lhs = q.real();
      s.rhs = 0.0;
      s.scale *= std::abs(cplx(1.0, gamma));
      break;
    }
    case LemmaId::kGradientDissipative:
      throw_config("gradient_dissipative is a field inequality; use evaluate_gradient_lemma");
  }
  return s;
}

LemmaSample evaluate_gradient_lemma(const ComplexField& u, double beta, double gamma) {
  const auto vals = u.physical();
  const auto dvals = derivative(u).physical();
  const cplx phase(-1.0, -gamma);
  double integral = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < vals.size(); ++j) {
    const cplx z = vals[j], w = dvals[j];
    const double r = std::abs(z);
    if (r == 0.0) continue;
    const double rb = std::pow(r, beta - 1.0);
    const cplx unit = z / r;
    // chain rule: (|z|^{b-1} z)_x = |z|^{b-1} z_x + (b-1)|z|^{b-1} unit Re(conj(unit) z_x)
    const cplx dn1 = rb * w + (beta - 1.0) * rb * unit * (std::conj(unit) * w).real();
    integral += (phase * dn1 * std::conj(w)).real();
    scale += beta * std::abs(phase) * rb * std::norm(w);
  }
  LemmaSample s;
  s.lhs = integral * u.grid().spacing();
  s.rhs = 0.0;
  s.scale = scale * u.grid().spacing();
  return s;
}

namespace {

cplx sample_disc(Rng& rng) {
  std::uniform_real_distribution<double> r2(0.0, 100.0), th(0.0, kTwoPi);
  return std::polar(std::sqrt(r2(rng)), th(rng));
}

ComplexField sample_band_field(const GridPtr& grid, Rng& rng, bool real_valued) {
  constexpr int kBand = 8;
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> amp(0.05, 4.0);
  ComplexField u(grid);
  const double a = amp(rng);
  for (int k = -kBand; k <= kBand; ++k) u.mode(k) = a * cplx(nd(rng), nd(rng)) / (1.0 + std::abs(k));
  if (real_valued) {
    for (int k = 1; k <= kBand; ++k) u.mode(-k) = std::conj(u.mode(k));
    u.mode(0) = u.mode(0).real();
  }
  return u;
}

}  // namespace

LemmaReport check_lemma(LemmaId id, double beta, double gamma, std::uint64_t n_samples, std::uint64_t seed) {
  if (!(beta > 1.0)) throw_config("lemma oracles require beta > 1");
  const bool needs_bound = id == LemmaId::kDissipative || id == LemmaId::kGradientDissipative;
  if (needs_bound && std::abs(gamma) > gamma_bound(beta))
    throw_config(to_string(id) + " requires |gamma| <= 2 sqrt(beta)/(beta-1)");

  LemmaReport rep;
  rep.lemma_id = id;
  rep.beta = beta;
  rep.gamma = gamma;
  rep.samples = n_samples;
  rep.seed = seed;
  rep.worst_margin = std::numeric_limits<double>::infinity();

  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(id)}));
  GridPtr grid = id == LemmaId::kGradientDissipative ? make_grid(32) : nullptr;
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    LemmaSample s;
    if (grid) {
      s = evaluate_gradient_lemma(sample_band_field(grid, rng, i % 2 == 0), beta, gamma);
    } else {
      const cplx x = sample_disc(rng);
      const cplx y = sample_disc(rng);
      s = evaluate_lemma(id, x, y, beta, gamma);
    }
    const double m = s.margin();
    rep.worst_margin = std::min(rep.worst_margin, m);
    if (!(m >= -kLemmaMarginTolerance)) ++rep.violations;
  }
  if (n_samples == 0) rep.worst_margin = 0.0;
  return rep;
}

std::string to_json(const LemmaReport& r) {
  nlohmann::ordered_json j;
  j["lemma_id"] = to_string(r.lemma_id);
  j["beta"] = r.beta;
  j["gamma"] = r.gamma;
  j["samples"] = r.samples;
  j["violations"] = r.violations;
  j["worst_margin"] = r.worst_margin;
  j["seed"] = r.seed;
  return j.dump();
}

}  // namespace slowfast
