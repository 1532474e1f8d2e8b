#pragma once

// Executable oracles for the pointwise inequalities satisfied by the
// nonlinearity N(z) = -(1 + i gamma)|z|^{beta-1} z and N1(z) = |z|^{beta-1} z.

#include <cstdint>
#include <string>
#include <vector>

#include "slowfast/spectral.hpp"

namespace slowfast {

enum class LemmaId {
  kNonlinearLipschitz,     // |N(x)-N(y)| <= beta|1+i gamma| (|x|^{b-1}+|y|^{b-1}) |x-y|
  kPhaseBoundConjugate,    // |Im (x-y)(conj x|x|^{b-1} - conj y|y|^{b-1})| <= k Re(...)
  kPhaseBound,             // |Im (N1(x)-N1(y)) conj(x-y)| <= k Re(...)
  kMonotone,               // Re (N1(x)-N1(y)) conj(x-y) >= 0
  kDissipative,            // Re (N(x)-N(y)) conj(x-y) <= 0, needs |gamma| <= bound
  kGradientDissipative,    // int Re (N(u))_x conj(u_x) <= 0, needs |gamma| <= bound
};

inline constexpr LemmaId kAllLemmas[] = {LemmaId::kNonlinearLipschitz, LemmaId::kPhaseBoundConjugate,
                                         LemmaId::kPhaseBound,         LemmaId::kMonotone,
                                         LemmaId::kDissipative,        LemmaId::kGradientDissipative};

std::string to_string(LemmaId id);
LemmaId lemma_from_string(const std::string& name);

// Both sides of "lhs <= rhs" and the rounding scale used to normalize margins.
struct LemmaSample {
  double lhs = 0.0;
  double rhs = 0.0;
  double scale = 0.0;
  double margin() const noexcept { return (rhs - lhs) / (1.0 + scale); }
};

LemmaSample evaluate_lemma(LemmaId id, cplx x, cplx y, double beta, double gamma);
LemmaSample evaluate_gradient_lemma(const ComplexField& u, double beta, double gamma);

struct LemmaReport {
  LemmaId lemma_id{};
  double beta = 0.0;
  double gamma = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t violations = 0;
  double worst_margin = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kLemmaMarginTolerance = 1e-12;

// Draws n_samples random pairs from the complex disc of radius 10 (uniform in
// |z|^2 and angle), or random band-limited fields for the gradient lemma.
LemmaReport check_lemma(LemmaId id, double beta, double gamma, std::uint64_t n_samples, std::uint64_t seed);

std::string to_json(const LemmaReport& r);

}  // namespace slowfast
