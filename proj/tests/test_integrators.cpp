#include <cmath>
#include <random>

#include "doctest.h"
#include "slowfast/error.hpp"
#include "slowfast/integrators.hpp"

using namespace slowfast;

namespace {

CouplingSpec constant_spec(double c_F, double c_G, double c_1, double c_2) {
  CouplingCoefficients c;
  c.c_F = c_F;
  c.c_G = c_G;
  c.c_1 = c_1;
  c.c_2 = c_2;
  return default_couplings(CouplingLevel::kConstant, c);
}

ComplexField random_field(const GridPtr& g, std::mt19937_64& rng, double scale, int band = 5) {
  std::normal_distribution<double> nd(0.0, scale);
  ComplexField u(g);
  for (int k = -band; k <= band; ++k) u.mode(k) = cplx(nd(rng), nd(rng)) / (1.0 + k * k);
  return u;
}

double max_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (int j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a.coefficients()[j] - b.coefficients()[j]));
  return m;
}

bool identical(const ComplexField& a, const ComplexField& b) {
  for (int j = 0; j < a.size(); ++j)
    if (a.coefficients()[j] != b.coefficients()[j]) return false;
  return true;
}

struct ConstantFbar : FbarSource {
  double c;
  explicit ConstantFbar(double c) : c(c) {}
  double value(const ComplexField&) const override { return c; }
};

Model make(int n, const ModelParams& p, const CouplingSpec& spec, double dt_slow = 1e-3) {
  StepScheme s;
  s.dt_slow = dt_slow;
  return Model{make_grid(n), p, spec, s};
}

}  // namespace

TEST_CASE("step scheme substeps respect the stiffness cap") {
  StepScheme s;
  s.dt_slow = 1e-3;
  CHECK(s.substeps(0.01) == 1);
  CHECK(s.substeps(1e-3) == 10);
  CHECK(s.substeps(3e-3) == 4);
  CHECK(s.fast_dt(1e-3) == doctest::Approx(1e-4));
  CHECK(s.slow_steps(1.0) == 1000);
  CHECK_THROWS_AS(s.slow_steps(1.0005), Error);
  s.dt_fast = 5e-4;
  CHECK_THROWS_AS(s.substeps(1e-3), Error);
  CHECK(s.substeps(0.01) == 2);
  s.dt_fast = 3e-4;
  CHECK_THROWS_AS(s.substeps(0.01), Error);
  CHECK_THROWS_AS(block_steps_for(2.5e-3, StepScheme{}), Error);
  CHECK(block_steps_for(0.25, StepScheme{}) == 250);
}

TEST_CASE("fast step rejects steps beyond the cap") {
  const auto g = make_grid(16);
  ModelParams p;
  p.eps = 0.01;
  CHECK_THROWS_AS(FastStepper(g, p, 0.01, 2e-3), Error);
  CHECK_THROWS_AS(step_fast(ComplexField(g), ComplexField(g), 1.0, 0.0, p, constant_spec(0, 0, 0, 0)), Error);
}

TEST_CASE("slow step is propagator plus nonlinearity increment") {
  const auto g = make_grid(32);
  ModelParams p;
  const auto spec = constant_spec(0, 0, 0, 0);
  for (double nu : {0.0, 0.05}) {
    const ComplexField u = ComplexField::single_mode(g, 2, 0.7);
    const double dt = 1e-3;
    ComplexField expect = u + dt * nonlinearity(u, p.beta, p.gamma);
    expect = apply_propagator(expect, dt, LinearSymbol::slow(p.alpha, nu));
    CHECK(max_diff(step_slow(u, ComplexField(g), dt, 0.3, p, nu, spec), expect) < 1e-15);
  }
}

TEST_CASE("slow step from zero with constant drift") {
  const auto g = make_grid(16);
  ModelParams p;
  const ComplexField u = step_slow(ComplexField(g), ComplexField(g), 1e-3, 0.5, p, 0.0, constant_spec(1.0, 0, 0, 0));
  const ComplexField expect = apply_propagator(ComplexField::constant(g, 1e-3), 1e-3, LinearSymbol::slow(p.alpha, 0.0));
  CHECK(max_diff(u, expect) == 0.0);
  CHECK(u.mode(0) == cplx(1e-3));
}

TEST_CASE("fast step with vanishing couplings uses the exact multiplier") {
  const auto g = make_grid(32);
  ModelParams p;
  p.eps = 0.05;
  const double dt = 1e-3;
  const int k = 3;
  const ComplexField v = ComplexField::single_mode(g, k, 0.4);
  const ComplexField out = step_fast(v, ComplexField(g), dt, 0.7, p, constant_spec(0, 0, 0, 0));
  const double a = std::pow(k, 2 * p.rho);
  const cplx mult = std::exp(dt * cplx(-a - p.lambda, -a) / p.eps);
  ComplexField expect = v + (dt / p.eps) * nonlinearity(v, p.beta, p.gamma);
  const ComplexField lin = apply_propagator(expect, dt, LinearSymbol::fast(p.rho, p.lambda, p.eps));
  CHECK(max_diff(out, lin) < 1e-15);
  CHECK(std::abs(lin.mode(k) - mult * expect.mode(k)) < 1e-15);
}

TEST_CASE("fast linear decay follows exp(-lambda t)") {
  const auto g = make_grid(16);
  ModelParams p;
  p.eps = 1.0;
  p.lambda = 10.0;
  const auto spec = constant_spec(0, 0, 0, 0);
  ComplexField v = ComplexField::constant(g, 1e-6);
  const double v0 = norm_l2(v);
  FastStepper f(g, p, 1.0, 0.01);
  for (int n = 1; n <= 100; ++n) {
    v = f.step(v, 0.0, 0.0, 0.0);
    if (n % 25 == 0) CHECK(norm_l2(v) == doctest::Approx(v0 * std::exp(-p.lambda * 0.01 * n)).epsilon(1e-9));
  }
}

TEST_CASE("fast forcing and noise gains integrate the constant mode exactly") {
  ModelParams p;
  const double eps = 0.01, dt = 1e-3;
  FastStepper f(make_grid(16), p, eps, dt);
  const double z = p.lambda * dt / eps;
  CHECK(f.forcing_gain() == doctest::Approx((1 - std::exp(-z)) / p.lambda).epsilon(1e-14));
  CHECK(f.noise_gain() == doctest::Approx(std::sqrt((1 - std::exp(-2 * z)) / (2 * p.lambda * dt))).epsilon(1e-14));
  // Small-step limit recovers the explicit (dt/eps) G and Sigma2 / sqrt(eps).
  FastStepper tiny(make_grid(16), p, eps, 1e-9);
  CHECK(tiny.forcing_gain() == doctest::Approx(1e-9 / eps).epsilon(1e-6));
  CHECK(tiny.noise_gain() == doctest::Approx(1.0 / std::sqrt(eps)).epsilon(1e-6));
  // Stationary variance of the constant mode: Sigma2^2 / (2 lambda) per unit of the 1-field.
  const auto g = make_grid(8);
  const double sigma = 0.5;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, std::sqrt(dt));
  FastStepper s(g, p, eps, dt);
  ComplexField v(g);
  double acc = 0.0;
  int count = 0;
  for (int n = 0; n < 200000; ++n) {
    v = s.step(v, 0.0, sigma, nd(rng));
    if (n > 1000) {
      acc += std::norm(v.mode(0));
      ++count;
    }
  }
  CHECK(acc / count == doctest::Approx(sigma * sigma / (2 * p.lambda)).epsilon(0.05));
}

TEST_CASE("linear exactness over many steps") {
  const auto g = make_grid(32);
  std::mt19937_64 rng(4);
  ModelParams p;
  p.eps = 0.05;
  const auto spec = constant_spec(0, 0, 0, 0);
  const ComplexField u0 = random_field(g, rng, 1e-8);
  const int n = 200;
  const double dt = 1e-3;
  for (double nu : {0.0, 0.1}) {
    SlowStepper s(g, p, nu, dt);
    ComplexField u = u0;
    for (int i = 0; i < n; ++i) u = s.step(u, 0.0, 0.0, 0.0);
    CHECK(max_diff(u, apply_propagator(u0, n * dt, LinearSymbol::slow(p.alpha, nu))) <= 1e-10 * norm_l2(u0));
    ConstantFbar zero(0.0);
    ComplexField w = u0;
    for (int i = 0; i < n; ++i) w = step_averaged(w, dt, 0.0, p, nu, spec, zero);
    CHECK(max_diff(w, u) == 0.0);
  }
  FastStepper f(g, p, p.eps, dt);
  ComplexField v = u0;
  for (int i = 0; i < n; ++i) v = f.step(v, 0.0, 0.0, 0.0);
  CHECK(max_diff(v, apply_propagator(u0, n * dt, LinearSymbol::fast(p.rho, p.lambda, p.eps))) <=
        1e-10 * norm_l2(u0));
}

TEST_CASE("no step increases the norm without sources") {
  const auto g = make_grid(32);
  std::mt19937_64 rng(5);
  ModelParams p;
  p.gamma = 0.0;
  p.eps = 0.01;
  const double dt = 1e-3;
  for (double nu : {0.0, 0.1}) {
    SlowStepper s(g, p, nu, dt);
    for (int i = 0; i < 200; ++i) {
      const ComplexField u = random_field(g, rng, i % 2 ? 0.5 : 2.0);
      CHECK(norm_l2(s.step(u, 0.0, 0.0, 0.0)) <= norm_l2(u) * (1 + 1e-10));
    }
  }
  // The explicit fast stage is contractive while (dt/eps) sup|v|^{beta-1} <= 2.
  FastStepper f(g, p, p.eps, 1e-3);
  const double h = 1e-3 / p.eps;
  int checked = 0;
  for (int i = 0; i < 400; ++i) {
    const ComplexField v = random_field(g, rng, i % 2 ? 0.5 : 2.0);
    double sup = 0.0;
    for (cplx x : v.physical()) sup = std::max(sup, std::abs(x));
    if (h * std::pow(sup, p.beta - 1.0) > 2.0) continue;
    ++checked;
    CHECK(norm_l2(f.step(v, 0.0, 0.0, 0.0)) <= norm_l2(v) * (1 + 1e-10));
  }
  CHECK(checked >= 100);
}

TEST_CASE("coupled runs are bit-identical on repetition") {
  ModelParams p;
  p.T = 0.05;
  const Model m = make(16, p, default_couplings(CouplingLevel::kNormBased));
  CoupledIntegrator integ(m, 0.01, 0.0);
  std::mt19937_64 rng(6);
  const ComplexField u0 = random_field(m.grid, rng, 0.3), v0 = random_field(m.grid, rng, 0.1);
  const NoisePath w1 = make_noise(1, {1, 0, 1}, 1e-3, integ.slow_steps());
  const NoisePath w2 = make_noise(1, {1, 0, 2}, integ.dt_fast(), integ.slow_steps() * integ.substeps());
  const PathRecord a = integ.run(u0, v0, w1, w2, {0, 25, 50});
  const PathRecord b = integ.run(u0, v0, w1, w2, {0, 25, 50});
  REQUIRE(a.u.size() == 3);
  REQUIRE(a.v.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(identical(a.u[i], b.u[i]));
    CHECK(identical(a.v[i], b.v[i]));
  }
  CHECK(identical(a.u[0], u0));
  CHECK(a.sup_u_h1sq == b.sup_u_h1sq);
  CHECK_FALSE(a.aborted);
}

TEST_CASE("missing increments are rejected") {
  ModelParams p;
  p.T = 0.01;
  const Model m = make(16, p, default_couplings(CouplingLevel::kNormBased));
  CoupledIntegrator integ(m, 0.01, 0.0);
  const NoisePath w1 = make_noise(1, {1, 0, 1}, 1e-3, 5);
  const NoisePath w2 = make_noise(1, {1, 0, 2}, 1e-3, 10);
  CHECK_THROWS_AS(integ.run(ComplexField(m.grid), ComplexField(m.grid), w1, w2, {}), Error);
}

TEST_CASE("constant couplings: averaged path equals coupled path") {
  ModelParams p;
  p.T = 0.2;
  const auto spec = constant_spec(0.5, 0.3, 0.2, 0.5);
  const Model m = make(32, p, spec);
  std::mt19937_64 rng(7);
  const ComplexField u0 = random_field(m.grid, rng, 0.3), v0 = random_field(m.grid, rng, 0.1);
  for (double eps : {0.1, 0.01, 1e-3}) {
    CoupledIntegrator c(m, eps, 0.0);
    ConstantFbar fbar(0.5);
    AveragedIntegrator a(m, 0.0, fbar);
    const NoisePath w1 = make_noise(9, {1, 3, 1}, 1e-3, c.slow_steps());
    const NoisePath w2 = make_noise(9, {1, 3, 2}, c.dt_fast(), c.slow_steps() * c.substeps());
    const PathRecord rc = c.run(u0, v0, w1, w2, {200});
    const PathRecord ra = a.run(u0, w1, {200});
    CHECK(identical(rc.u[0], ra.u[0]));
    CHECK(ra.v.empty());
  }
}

TEST_CASE("non-finite states abort the path with a diagnostic") {
  ModelParams p;
  p.T = 0.01;
  const Model m = make(16, p, constant_spec(0, 0, 0, 0));
  CoupledIntegrator c(m, 0.01, 0.0);
  const NoisePath w1 = make_noise(1, {1, 0, 1}, 1e-3, c.slow_steps());
  const NoisePath w2 = make_noise(1, {1, 0, 2}, c.dt_fast(), c.slow_steps() * c.substeps());
  const PathRecord r = c.run(ComplexField::constant(m.grid, 1e120), ComplexField(m.grid), w1, w2, {10});
  CHECK(r.aborted);
  CHECK(r.diagnostic.find("non-finite") != std::string::npos);
  CHECK(r.diagnostic.find("slow step 0") != std::string::npos);
}

TEST_CASE("deterministic self-convergence is first order") {
  ModelParams p;
  p.T = 0.5;
  const auto g = make_grid(32);
  std::mt19937_64 rng(8);
  const ComplexField u0 = random_field(g, rng, 0.5);
  auto run = [&](double dt) {
    SlowStepper s(g, p, 0.0, dt);
    ComplexField u = u0;
    const int n = static_cast<int>(std::lround(p.T / dt));
    for (int i = 0; i < n; ++i) u = s.step(u, 0.3, 0.0, 0.0);
    return u;
  };
  const ComplexField a = run(4e-3), b = run(2e-3), c = run(1e-3), d = run(5e-4);
  const double e1 = norm_l2(a - b), e2 = norm_l2(b - c), e3 = norm_l2(c - d);
  CHECK(std::log2(e1 / e2) >= 0.9);
  CHECK(std::log2(e2 / e3) >= 0.9);
}

TEST_CASE("noisy self-convergence is at least half order") {
  ModelParams p;
  p.T = 0.5;
  const auto g = make_grid(32);
  const auto spec = default_couplings(CouplingLevel::kNormBased);
  std::mt19937_64 rng(9);
  const ComplexField u0 = random_field(g, rng, 0.5);
  const double dt_ref = 2.5e-4;
  const int n_ref = static_cast<int>(std::lround(p.T / dt_ref));
  const int n_paths = 16;
  const std::vector<int> factors{16, 8, 4};
  std::vector<double> mse(factors.size(), 0.0);
  for (int path = 0; path < n_paths; ++path) {
    const NoisePath fine = make_noise(17, {1, static_cast<std::uint64_t>(path), 1}, dt_ref, n_ref);
    auto run = [&](const NoisePath& w) {
      SlowStepper s(g, p, 0.0, w.dt);
      ComplexField u = u0;
      for (double dW : w.increments) u = s.step(u, spec.F(u, u), spec.Sigma1(u), dW);
      return u;
    };
    const ComplexField ref = run(fine);
    for (std::size_t i = 0; i < factors.size(); ++i) mse[i] += distance_l2_sq(run(coarsen(fine, factors[i])), ref) / n_paths;
  }
  for (std::size_t i = 0; i + 1 < factors.size(); ++i) {
    const double order = 0.5 * std::log2(mse[i] / mse[i + 1]);
    INFO("order between dt factors ", factors[i], " and ", factors[i + 1], ": ", order);
    CHECK(order >= 0.5);
  }
}

TEST_CASE("Khasminskii block of one slow step reproduces the reference path") {
  ModelParams p;
  p.T = 0.05;
  const Model m = make(16, p, default_couplings(CouplingLevel::kNormBased));
  std::mt19937_64 rng(10);
  const ComplexField u0 = random_field(m.grid, rng, 0.5), v0 = random_field(m.grid, rng, 0.1);
  const double eps = 5e-3;
  KhasminskiiIntegrator k(m, eps, 0.01, 1);
  const NoisePath w1 = make_noise(3, {1, 0, 1}, 1e-3, k.slow_steps());
  const NoisePath w2 = make_noise(3, {1, 0, 2}, m.scheme.fast_dt(eps), k.slow_steps() * k.substeps());
  const KhasminskiiRecord r = k.run(u0, v0, w1, w2, {50});
  CHECK_FALSE(r.aborted);
  for (double e : r.err_u) CHECK(e == 0.0);
  for (double e : r.err_v) CHECK(e == 0.0);
  // The reference companion equals the plain coupled viscous path.
  CoupledIntegrator c(m, eps, 0.01);
  const PathRecord rc = c.run(u0, v0, w1, w2, {50});
  CHECK(identical(rc.u[0], r.reference.u[0]));
  CHECK(identical(rc.v[0], r.reference.v[0]));
}

TEST_CASE("Khasminskii single block freezes the fast drift at u0") {
  ModelParams p;
  p.T = 0.02;
  const Model m = make(16, p, default_couplings(CouplingLevel::kNormBased));
  std::mt19937_64 rng(11);
  const ComplexField u0 = random_field(m.grid, rng, 0.5), v0 = random_field(m.grid, rng, 0.1);
  const double eps = 0.01;
  const KhasminskiiRecord r = khasminskii_path(m, eps, 0.0, p.T, u0, v0, make_noise(4, {1, 0, 1}, 1e-3, 20),
                                               make_noise(4, {1, 0, 2}, 1e-3, 20), {20});
  FastStepper f(m.grid, p, eps, 1e-3);
  const NoisePath w2 = make_noise(4, {1, 0, 2}, 1e-3, 20);
  ComplexField v = v0;
  for (double dW : w2.increments) v = f.step(v, m.spec.G(u0, v), m.spec.Sigma2(u0, v), dW);
  CHECK(identical(v, r.auxiliary.v[0]));
  CHECK_THROWS_AS(KhasminskiiIntegrator(m, eps, 0.0, 21), Error);
}

TEST_CASE("Khasminskii error grows with the block length") {
  ModelParams p;
  p.T = 0.16;
  const Model m = make(16, p, default_couplings(CouplingLevel::kNormBased));
  const double eps = 0.02;
  const std::vector<double> deltas{0.01, 0.04, 0.16};
  std::vector<double> sup_u(deltas.size(), 0.0), sup_v(deltas.size(), 0.0);
  std::mt19937_64 rng(12);
  const int n_paths = 8;
  for (int path = 0; path < n_paths; ++path) {
    const ComplexField u0 = random_field(m.grid, rng, 0.5), v0 = random_field(m.grid, rng, 0.1);
    const NoisePath w1 = make_noise(5, {1, static_cast<std::uint64_t>(path), 1}, 1e-3, 160);
    const NoisePath w2 = make_noise(5, {1, static_cast<std::uint64_t>(path), 2}, 1e-3, 160);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const KhasminskiiRecord r = khasminskii_path(m, eps, 0.01, deltas[i], u0, v0, w1, w2, {});
      sup_u[i] += *std::max_element(r.err_u.begin(), r.err_u.end()) / n_paths;
      sup_v[i] += *std::max_element(r.err_v.begin(), r.err_v.end()) / n_paths;
    }
  }
  for (std::size_t i = 0; i + 1 < deltas.size(); ++i) {
    CHECK(sup_u[i] < sup_u[i + 1]);
    CHECK(sup_v[i] < sup_v[i + 1]);
  }
}
