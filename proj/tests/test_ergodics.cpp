#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "slowfast/ergodics.hpp"
#include "slowfast/error.hpp"

using namespace slowfast;

namespace {

Model make_model(CouplingLevel level, const CouplingCoefficients& c = {}, double lambda = 6.0, int n = 32) {
  ModelParams p;
  p.lambda = lambda;
  return Model{make_grid(n), p, default_couplings(level, c), StepScheme{}};
}

ComplexField constant_with_norm(const GridPtr& g, double r) { return ComplexField::constant(g, r / std::sqrt(kTwoPi)); }

ComplexField random_field(const GridPtr& g, std::mt19937_64& rng, double norm) {
  std::normal_distribution<double> nd;
  ComplexField u(g);
  for (int k = -4; k <= 4; ++k) u.mode(k) = cplx(nd(rng), nd(rng)) / (1.0 + k * k);
  u *= norm / norm_l2(u);
  return u;
}

FrozenFastConfig fine_config(double lambda, int divisions, std::uint64_t seed = 77) {
  FrozenFastConfig c;
  c.dt = 1.0 / (divisions * lambda);
  c.seed_base = seed;
  return c;
}

bool identical(const ComplexField& a, const ComplexField& b) {
  for (int j = 0; j < a.size(); ++j)
    if (a.coefficients()[j] != b.coefficients()[j]) return false;
  return true;
}

}  // namespace

TEST_CASE("frozen config validation") {
  FrozenFastConfig c;
  CHECK_NOTHROW(c.validate(6.0));
  c.dt = 0.2;
  CHECK_THROWS_AS(c.validate(6.0), Error);
  c = FrozenFastConfig{};
  c.horizon = 1.0;
  CHECK_THROWS_AS(c.validate(6.0), Error);
  c = FrozenFastConfig{};
  c.n_replicas = 1;
  CHECK_THROWS_AS(c.validate(6.0), Error);
}

TEST_CASE("frozen solve with zero horizon returns the initial state") {
  const Model m = make_model(CouplingLevel::kNormBased);
  std::mt19937_64 rng(1);
  const ComplexField u = random_field(m.grid, rng, 1.0), v0 = random_field(m.grid, rng, 0.3);
  CHECK(identical(solve_frozen_fast(m, u, v0, 0.0, FrozenFastConfig{}, 5), v0));
  CHECK_THROWS_AS(solve_frozen_fast(m, u, v0, -1.0, FrozenFastConfig{}, 5), Error);
}

TEST_CASE("frozen linear decay of a single mode") {
  CouplingCoefficients c;
  c.c_G = 0.0;
  c.c_2 = 0.0;
  const Model m = make_model(CouplingLevel::kConstant, c);
  const int k = 2;
  const ComplexField v0 = ComplexField::single_mode(m.grid, k, 1e-7);
  const double rate = std::pow(k, 2 * m.params.rho) + m.params.lambda;
  for (double t : {0.05, 0.3, 1.0}) {
    const ComplexField v = solve_frozen_fast(m, ComplexField(m.grid), v0, t, FrozenFastConfig{}, 3);
    CHECK(norm_l2(v) == doctest::Approx(norm_l2(v0) * std::exp(-rate * t)).epsilon(1e-9));
  }
}

TEST_CASE("frozen solve is deterministic") {
  const Model m = make_model(CouplingLevel::kNormBased);
  std::mt19937_64 rng(2);
  const ComplexField u = random_field(m.grid, rng, 1.0);
  const ComplexField a = solve_frozen_fast(m, u, ComplexField(m.grid), 3.0, FrozenFastConfig{}, 8);
  const ComplexField b = solve_frozen_fast(m, u, ComplexField(m.grid), 3.0, FrozenFastConfig{}, 8);
  CHECK(identical(a, b));
  CHECK_FALSE(identical(a, solve_frozen_fast(m, u, ComplexField(m.grid), 3.0, FrozenFastConfig{}, 9)));
}

TEST_CASE("constant coupling: Fbar equals c_F exactly") {
  CouplingCoefficients c;
  c.c_F = 0.5;
  const Model m = make_model(CouplingLevel::kConstant, c);
  std::mt19937_64 rng(3);
  const FbarEstimate e = estimate_fbar(m, random_field(m.grid, rng, 2.0), FrozenFastConfig{});
  CHECK(e.value == 0.5);
  CHECK(e.std_error == 0.0);
  CHECK(e.simulations == 0);
  CHECK(e.horizon > e.burn_in);
}

TEST_CASE("Fbar estimate metadata and JSON") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const ComplexField u = constant_with_norm(m.grid, 1.0);
  FrozenFastConfig cfg;
  cfg.seed_base = 4;
  const FbarEstimate e = estimate_fbar(m, u, cfg);
  CHECK(e.n_replicas == 16);
  CHECK(e.simulations == 16);
  CHECK(e.std_error > 0.0);
  CHECK(e.burn_in == doctest::Approx(8.0 / 6.0));
  CHECK(e.u_fingerprint == field_fingerprint(u));
  CHECK(e.params_fingerprint == params_fingerprint(m));
  CHECK(e.mixing_bias_scale > 0.0);
  CHECK(e.mixing_bias_scale < 1e-4);
  const auto j = nlohmann::json::parse(to_json(e));
  for (const char* key : {"value", "std_error", "burn_in", "horizon", "n_replicas", "u_fingerprint",
                          "params_fingerprint"})
    CHECK(j.contains(key));
  const FbarEstimate again = estimate_fbar(m, u, cfg);
  CHECK(again.value == e.value);
}

TEST_CASE("fingerprints") {
  const auto g = make_grid(16);
  const ComplexField a = ComplexField::single_mode(g, 1, 0.3);
  ComplexField b = a;
  b.mode(1) += 1e-12;
  CHECK(field_fingerprint(a) == field_fingerprint(b));
  b.mode(1) += 1e-6;
  CHECK(field_fingerprint(a) != field_fingerprint(b));
  CHECK(field_fingerprint(ComplexField(make_grid(16))) != field_fingerprint(ComplexField(make_grid(32))));
  const Model m1 = make_model(CouplingLevel::kNormBased);
  const Model m2 = make_model(CouplingLevel::kNormBased, {}, 7.0);
  CHECK(params_fingerprint(m1) != params_fingerprint(m2));
}

TEST_CASE("Fbar with F = |v| decreases in lambda") {
  CouplingCoefficients c;
  c.a_F = 0.0;
  c.b_F = 1.0;
  c.c_F = 0.0;
  c.M = 0.3;
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {5.0, 10.0, 20.0}) {
    const Model m = make_model(CouplingLevel::kNormBased, c, lambda);
    REQUIRE(validate(m.params, m.spec).ok());
    const FbarEstimate e = estimate_fbar(m, constant_with_norm(m.grid, 1.0), fine_config(lambda, 10));
    INFO("lambda=", lambda, " Fbar=", e.value, " se=", e.std_error);
    CHECK(e.value < prev - 2.0 * e.std_error);
    prev = e.value;
  }
}

TEST_CASE("Fbar is Lipschitz over random pairs") {
  const Model m = make_model(CouplingLevel::kNormBased);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ud(0.0, 3.0);
  FrozenFastConfig cfg;
  cfg.seed_base = 6;
  double K = 0.0;
  for (int i = 0; i < 6; ++i) {
    const ComplexField u1 = random_field(m.grid, rng, ud(rng)), u2 = random_field(m.grid, rng, ud(rng));
    const double d = std::abs(estimate_fbar(m, u1, cfg).value - estimate_fbar(m, u2, cfg).value);
    K = std::max(K, d / norm_l2(u1 - u2));
  }
  CHECK(std::isfinite(K));
  CHECK(K < 10.0 * m.spec.L_F);
}

TEST_CASE("dissipativity curve from X = 0 rises to the plateau") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const double lam = m.params.lambda;
  const FrozenFastConfig cfg = fine_config(lam, 10);
  const DissipativityCurve c = dissipativity_curve(m, constant_with_norm(m.grid, 1.0), ComplexField(m.grid), cfg, 200,
                                                   40.0 / lam);
  CHECK(c.mean_sq.front() == 0.0);
  CHECK(c.plateau > 0.0);
  CHECK(c.mean_sq[10] < c.plateau);
  CHECK(c.dominated);
  CHECK_THROWS_AS(dissipativity_curve(m, ComplexField(m.grid), ComplexField(m.grid), cfg, 200, 0.123), Error);
}

TEST_CASE("dissipativity curve from a large X decays at rate lambda") {
  CouplingCoefficients c;
  c.a_F = c.b_F = c.c_F = 0.002;
  c.a_G = c.b_G = c.c_G = 0.002;
  c.M = 0.005;
  const Model m = make_model(CouplingLevel::kNormBased, c);
  const double lam = m.params.lambda;
  const DissipativityCurve d = dissipativity_curve(m, constant_with_norm(m.grid, 0.5),
                                                   constant_with_norm(m.grid, 0.5), fine_config(lam, 100), 50, 2.0);
  INFO("slope=", d.initial_log_slope);
  CHECK(d.initial_log_slope == doctest::Approx(-lam).epsilon(0.2));
  CHECK(d.dominated);
}

TEST_CASE("plateau does not depend on the initial condition") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const double lam = m.params.lambda;
  const FrozenFastConfig cfg = fine_config(lam, 10);
  const ComplexField u = constant_with_norm(m.grid, 1.0);
  const DissipativityCurve a = dissipativity_curve(m, u, ComplexField(m.grid), cfg, 200, 40.0 / lam);
  const DissipativityCurve b = dissipativity_curve(m, u, constant_with_norm(m.grid, 2.0), cfg, 200, 40.0 / lam);
  INFO("plateaus ", a.plateau, " +- ", a.plateau_se, " and ", b.plateau, " +- ", b.plateau_se);
  CHECK(std::abs(a.plateau - b.plateau) <= 2.0 * std::hypot(a.plateau_se, b.plateau_se));
  CHECK(b.dominated);
}

TEST_CASE("plateau grows at most quadratically in |u|") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const double lam = m.params.lambda;
  const FrozenFastConfig cfg = fine_config(lam, 10);
  std::vector<double> xs, ys;
  for (double r : {0.0, 1.0, 2.0, 4.0}) {
    const DissipativityCurve c = dissipativity_curve(m, constant_with_norm(m.grid, r), ComplexField(m.grid), cfg, 100,
                                                     40.0 / lam);
    REQUIRE(std::isfinite(c.plateau));
    xs.push_back(std::log(1.0 + r));
    ys.push_back(std::log(c.plateau));
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / 4, my = std::accumulate(ys.begin(), ys.end(), 0.0) / 4;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  INFO("exponent=", sxy / sxx);
  CHECK(sxy / sxx <= 2.3);
}

TEST_CASE("synchronous coupling contracts at rate lambda") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const double lam = m.params.lambda;
  const FrozenFastConfig cfg = fine_config(lam, 100);
  std::mt19937_64 rng(5);
  const ComplexField u = constant_with_norm(m.grid, 1.0);
  const ComplexField X = random_field(m.grid, rng, 1.0), Y = random_field(m.grid, rng, 0.5);
  const std::vector<double> ts{0.25 / lam, 0.5 / lam, 1.0 / lam, 0.25, 0.5, 1.0};
  const CoupledDistance d = coupled_distance(m, u, X, u, Y, cfg, 200, ts);
  const double d0 = distance_l2_sq(X, Y);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double rel = d.mean[i] > 0.0 ? d.se[i] / d.mean[i] : 0.0;
    INFO("t=", ts[i], " ratio=", d.mean[i] / d0, " bound=", std::exp(-lam * ts[i]));
    CHECK(d.mean[i] / d0 <= std::exp(-lam * ts[i]) * (1.0 + 3.0 * rel));
  }
}

TEST_CASE("sensitivity in u") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const FrozenFastConfig cfg = fine_config(m.params.lambda, 10);
  const ComplexField u = constant_with_norm(m.grid, 1.0);
  const ComplexField X(m.grid);
  const SensitivityEstimate same = sensitivity_in_u(m, u, u, X, cfg, 1.0, 50);
  CHECK(same.mean == 0.0);
  CHECK(same.ratio == 0.0);

  const SensitivityEstimate big = sensitivity_in_u(m, u, constant_with_norm(m.grid, 1.02), X, cfg, 1.0, 200);
  const SensitivityEstimate half = sensitivity_in_u(m, u, constant_with_norm(m.grid, 1.01), X, cfg, 1.0, 200);
  REQUIRE(half.mean > 0.0);
  const double q = big.mean / half.mean;
  const double q_se = q * std::hypot(big.se / big.mean, half.se / half.mean);
  INFO("ratio=", q, " se=", q_se);
  CHECK(std::abs(q - 4.0) <= 2.0 * q_se);
  CHECK(std::isfinite(big.ratio));

  // Bounded ratio over a geometric family.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double d : {0.4, 0.2, 0.1, 0.05}) {
    const SensitivityEstimate s = sensitivity_in_u(m, u, constant_with_norm(m.grid, 1.0 + d), X, cfg, 1.0, 100);
    lo = std::min(lo, s.ratio);
    hi = std::max(hi, s.ratio);
  }
  CHECK(hi / lo < 2.0);

  CouplingCoefficients c;
  const Model mc = make_model(CouplingLevel::kConstant, c);
  const SensitivityEstimate none =
      sensitivity_in_u(mc, u, constant_with_norm(mc.grid, 3.0), X, fine_config(mc.params.lambda, 10), 1.0, 20);
  CHECK(none.mean == 0.0);
}

TEST_CASE("mixing: ensemble drift approaches Fbar") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const double lam = m.params.lambda;
  const FrozenFastConfig cfg = fine_config(lam, 10);
  const ComplexField u = constant_with_norm(m.grid, 1.0);
  const FbarEstimate fbar = estimate_fbar(m, u, cfg);
  const MixingCurve mc =
      mixing_curve(m, u, constant_with_norm(m.grid, 2.0), cfg, 400, {0.0, 0.5 / lam, 1.0 / lam, 8.0 / lam, 12.0 / lam});
  std::vector<double> gap;
  for (double x : mc.mean) gap.push_back(std::abs(x - fbar.value));
  CHECK(gap[0] > gap[1]);
  CHECK(gap[1] > gap[2]);
  for (std::size_t i = 3; i < gap.size(); ++i) {
    INFO("t=", mc.t[i], " gap=", gap[i], " se=", mc.se[i], " fbar se=", fbar.std_error);
    CHECK(gap[i] <= 3.0 * std::hypot(fbar.std_error, mc.se[i]));
  }
}

TEST_CASE("doubling horizon or replicas shrinks the standard error by sqrt 2") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const ComplexField u = constant_with_norm(m.grid, 1.0);
  FrozenFastConfig base;
  base.seed_base = 21;
  base.n_replicas = 64;
  base.horizon = 100.0;
  FrozenFastConfig longer = base;
  longer.horizon = 2.0 * base.horizon - base.burn_in(m.params.lambda);
  FrozenFastConfig wider = base;
  wider.n_replicas = 128;
  const double se = estimate_fbar(m, u, base).std_error;
  const double se_h = estimate_fbar(m, u, longer).std_error;
  const double se_r = estimate_fbar(m, u, wider).std_error;
  INFO("se=", se, " horizon x2: ", se_h / se, " replicas x2: ", se_r / se);
  CHECK(se_h / se == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.3));
  CHECK(se_r / se == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.3));
}

TEST_CASE("tolerance mode extends replicas until the target is met") {
  const Model m = make_model(CouplingLevel::kNormBased);
  FrozenFastConfig cfg;
  cfg.seed_base = 22;
  cfg.horizon = 50.0;
  const ComplexField u = constant_with_norm(m.grid, 1.0);
  const FbarEstimate pilot = estimate_fbar(m, u, cfg);
  const double tol = 0.5 * pilot.std_error;
  const FbarEstimate e = estimate_fbar_to_tolerance(m, u, cfg, tol);
  CHECK(e.n_replicas > cfg.n_replicas);
  CHECK(e.std_error <= tol);
  CHECK_THROWS_AS(estimate_fbar_to_tolerance(m, u, cfg, 0.0), Error);
}

TEST_CASE("deviation from the averaged drift obeys the linear-growth bound") {
  const Model m = make_model(CouplingLevel::kNormBased);
  const double lam = m.params.lambda;
  const FrozenFastConfig cfg = fine_config(lam, 10);
  std::mt19937_64 rng(7);
  for (double r : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const ComplexField u = random_field(m.grid, rng, r + 1e-12);
    const double fbar = estimate_fbar(m, u, cfg).value;
    const DissipativityCurve c = dissipativity_curve(m, u, ComplexField(m.grid), cfg, 50, 20.0 / lam);
    const double c0 = m.spec.L_F * (2.0 + std::sqrt(c.plateau));
    const double C = 9.0 * c0 * c0;
    for (int i = 0; i < 20; ++i) {
      const ComplexField v = solve_frozen_fast(m, u, random_field(m.grid, rng, 3.0), 10.0 / lam * (i % 4), cfg, i);
      const double dev = m.spec.F(u, v) - fbar;
      CHECK(dev * dev <= C * (1.0 + norm_l2_sq(u) + norm_l2_sq(v)));
    }
  }
}

TEST_CASE("provider short-circuits v-independent drifts") {
  CouplingCoefficients c;
  c.c_F = 0.5;
  FbarProvider p(make_model(CouplingLevel::kConstant, c), FbarProviderConfig{});
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) CHECK(p.value(random_field(make_grid(32), rng, 1.0 + i)) == 0.5);
  CHECK(p.simulations() == 0);
  CHECK(p.cache_size() == 0);
}

TEST_CASE("norm-keyed provider caches node estimates") {
  FbarProviderConfig pc;
  pc.frozen.seed_base = 9;
  pc.frozen.horizon = 20.0;
  const Model m = make_model(CouplingLevel::kNormBased);
  FbarProvider p(m, pc);
  std::mt19937_64 rng(9);
  const ComplexField u = random_field(m.grid, rng, 0.73);
  const double a = p.value(u);
  const auto sims = p.simulations();
  CHECK(sims == 2 * 16);
  CHECK(p.cache_size() == 2);
  CHECK(p.value(u) == a);
  CHECK(p.simulations() == sims);
  // Same norm, different field: same value with no new simulation.
  const ComplexField w = random_field(m.grid, rng, 0.73);
  CHECK(p.value(w) == doctest::Approx(a).epsilon(1e-9));
  CHECK(p.simulations() == sims);
  // Interpolation between the nodes at 0.70 and 0.75.
  const double lo = p.value(constant_with_norm(m.grid, 0.70));
  const double hi = p.value(constant_with_norm(m.grid, 0.75));
  CHECK(a == doctest::Approx(0.4 * lo + 0.6 * hi).epsilon(1e-6));
  // Query order does not matter.
  FbarProvider q(m, pc);
  CHECK(q.value(constant_with_norm(m.grid, 0.75)) == hi);
  CHECK(q.value(u) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("field-keyed provider and tolerance refresh") {
  Model m = make_model(CouplingLevel::kNormBased);
  m.spec.norm_invariant = false;
  m.spec.F = [](const ComplexField& u, const ComplexField& v) { return u.mode(1).real() + norm_l2(v); };
  FbarProviderConfig pc;
  pc.frozen.seed_base = 10;
  pc.frozen.horizon = 20.0;
  pc.max_estimates = 2;
  FbarProvider p(m, pc);
  const ComplexField u1 = ComplexField::single_mode(m.grid, 1, 0.3);
  const ComplexField u2 = ComplexField::single_mode(m.grid, 1, -0.3);
  const FbarEstimate e1 = p.estimate(u1);
  CHECK(p.simulations() == 16);
  CHECK(p.estimate(u1).value == e1.value);
  CHECK(p.simulations() == 16);
  p.estimate(u2);
  CHECK(p.cache_size() == 2);
  CHECK_FALSE(p.budget_exceeded());
  p.request_tolerance(0.5 * e1.std_error);
  const FbarEstimate refined = p.estimate(u1);
  CHECK(refined.n_replicas > 16);
  CHECK(p.budget_exceeded());
  CHECK_THROWS_AS(p.request_tolerance(0.0), Error);
}
