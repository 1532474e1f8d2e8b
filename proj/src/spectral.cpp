#include "slowfast/spectral.hpp"

#include <fftw3.h>

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "slowfast/error.hpp"

namespace slowfast {
namespace {

// FFTW planning is not thread safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::atomic<std::uint64_t> g_next_grid_id{1};

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
fftw_complex* as_fftw(const cplx* p) { return reinterpret_cast<fftw_complex*>(const_cast<cplx*>(p)); }

void* plan(int n, int sign) {
  std::vector<cplx> in(n), out(n);
  return fftw_plan_dft_1d(n, as_fftw(in.data()), as_fftw(out.data()), sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
}

void run(void* p, const cplx* in, cplx* out) {
  fftw_execute_dft(static_cast<fftw_plan>(p), as_fftw(in), as_fftw(out));
}

}  // namespace

SpectralGrid::SpectralGrid(int n_modes) : n_(n_modes), id_(g_next_grid_id++) {
  k_.resize(n_);
  for (int j = 0; j < n_; ++j) k_[j] = wavenumber(j);
  std::lock_guard lock(planner_mutex());
  plan_fwd_ = plan(n_, FFTW_FORWARD);
  plan_bwd_ = plan(n_, FFTW_BACKWARD);
  plan_fwd2_ = plan(2 * n_, FFTW_FORWARD);
  plan_bwd2_ = plan(2 * n_, FFTW_BACKWARD);
}

SpectralGrid::~SpectralGrid() {
  std::lock_guard lock(planner_mutex());
  for (void* p : {plan_fwd_, plan_bwd_, plan_fwd2_, plan_bwd2_})
    if (p) fftw_destroy_plan(static_cast<fftw_plan>(p));
}

GridPtr make_grid(int n_modes) {
  if (n_modes < 4 || n_modes % 2 != 0)
    throw_config("n_modes must be an even integer >= 4, got " + std::to_string(n_modes));
  // Grids are immutable, so one instance per resolution is shared.
  static std::mutex mu;
  static std::map<int, std::weak_ptr<const SpectralGrid>> cache;
  std::lock_guard lock(mu);
  if (auto g = cache[n_modes].lock()) return g;
  GridPtr g(new SpectralGrid(n_modes));
  cache[n_modes] = g;
  return g;
}

int SpectralGrid::index_of(int k) const {
  if (k <= -n_ / 2 || k > n_ / 2) throw_config("wavenumber " + std::to_string(k) + " outside the grid band");
  return k >= 0 ? k : k + n_;
}

void SpectralGrid::to_physical(std::span<const cplx> coeffs, std::span<cplx> values) const {
  run(plan_bwd_, coeffs.data(), values.data());
}

void SpectralGrid::to_spectral(std::span<const cplx> values, std::span<cplx> coeffs) const {
  run(plan_fwd_, values.data(), coeffs.data());
  const double s = 1.0 / n_;
  for (auto& c : coeffs) c *= s;
}

void SpectralGrid::to_physical_padded(std::span<const cplx> coeffs, std::span<cplx> values2n) const {
  const int m = 2 * n_;
  std::vector<cplx> padded(m, cplx{});
  for (int j = 0; j < n_; ++j) {
    const int k = k_[j];
    padded[k >= 0 ? k : k + m] = coeffs[j];
  }
  run(plan_bwd2_, padded.data(), values2n.data());
}

void SpectralGrid::to_spectral_truncated(std::span<const cplx> values2n, std::span<cplx> coeffs) const {
  const int m = 2 * n_;
  std::vector<cplx> full(m);
  run(plan_fwd2_, values2n.data(), full.data());
  const double s = 1.0 / m;
  for (int j = 0; j < n_; ++j) {
    const int k = k_[j];
    coeffs[j] = full[k >= 0 ? k : k + m] * s;
  }
}

ComplexField::ComplexField(GridPtr grid) : grid_(std::move(grid)), c_(grid_->n_modes(), cplx{}) {}

ComplexField::ComplexField(GridPtr grid, std::vector<cplx> coefficients)
    : grid_(std::move(grid)), c_(std::move(coefficients)) {
  if (static_cast<int>(c_.size()) != grid_->n_modes())
    throw_config("coefficient vector length does not match grid size");
}

ComplexField ComplexField::from_physical(GridPtr grid, std::span<const cplx> values) {
  if (static_cast<int>(values.size()) != grid->n_modes()) throw_config("node vector length does not match grid size");
  ComplexField f(grid);
  grid->to_spectral(values, f.c_);
  return f;
}

ComplexField ComplexField::constant(GridPtr grid, cplx value) {
  ComplexField f(std::move(grid));
  f.c_[0] = value;
  return f;
}

ComplexField ComplexField::single_mode(GridPtr grid, int k, cplx amplitude) {
  ComplexField f(std::move(grid));
  f.mode(k) = amplitude;
  return f;
}

std::vector<cplx> ComplexField::physical() const {
  std::vector<cplx> v(c_.size());
  grid_->to_physical(c_, v);
  return v;
}

bool ComplexField::all_finite() const noexcept {
  for (const auto& c : c_)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
  return true;
}

void require_same_grid(const ComplexField& a, const ComplexField& b) {
  if (a.grid().n_modes() != b.grid().n_modes()) throw_config("field grid mismatch");
}

ComplexField& ComplexField::operator+=(const ComplexField& o) {
  require_same_grid(*this, o);
  for (std::size_t j = 0; j < c_.size(); ++j) c_[j] += o.c_[j];
  return *this;
}

ComplexField& ComplexField::operator-=(const ComplexField& o) {
  require_same_grid(*this, o);
  for (std::size_t j = 0; j < c_.size(); ++j) c_[j] -= o.c_[j];
  return *this;
}

ComplexField& ComplexField::operator*=(cplx s) {
  for (auto& c : c_) c *= s;
  return *this;
}

ComplexField frac_laplacian(const ComplexField& u, double a) {
  if (!(a > 0.0 && a <= 1.0)) throw_config("fractional exponent must lie in (0, 1]");
  ComplexField out = u;
  auto c = out.coefficients();
  const auto& g = u.grid();
  for (int j = 0; j < g.n_modes(); ++j) {
    const int k = g.wavenumber(j);
    c[j] *= k == 0 ? 0.0 : std::pow(std::abs(k), 2.0 * a);
  }
  return out;
}

ComplexField derivative(const ComplexField& u) {
  ComplexField out = u;
  auto c = out.coefficients();
  const auto& g = u.grid();
  for (int j = 0; j < g.n_modes(); ++j) c[j] *= g.is_nyquist(j) ? cplx{} : cplx(0.0, g.wavenumber(j));
  return out;
}

ComplexField second_derivative(const ComplexField& u) {
  ComplexField out = u;
  auto c = out.coefficients();
  const auto& g = u.grid();
  for (int j = 0; j < g.n_modes(); ++j) {
    const double k = g.wavenumber(j);
    c[j] *= -k * k;
  }
  return out;
}

double norm_l2_sq(const ComplexField& u) {
  double s = 0.0;
  for (const auto& c : u.coefficients()) s += std::norm(c);
  return kTwoPi * s;
}

double norm_l2(const ComplexField& u) { return std::sqrt(norm_l2_sq(u)); }

double norm_h1_sq(const ComplexField& u) {
  const auto& g = u.grid();
  auto c = u.coefficients();
  double s = 0.0;
  for (int j = 0; j < g.n_modes(); ++j) {
    const double k = g.is_nyquist(j) ? 0.0 : g.wavenumber(j);
    s += (1.0 + k * k) * std::norm(c[j]);
  }
  return kTwoPi * s;
}

double norm_h1(const ComplexField& u) { return std::sqrt(norm_h1_sq(u)); }

double norm_lp(const ComplexField& u, double p) {
  if (!(p > 1.0)) throw_config("norm_lp requires p > 1");
  const auto v = u.physical();
  double s = 0.0;
  for (const auto& x : v) s += std::pow(std::abs(x), p);
  return std::pow(s * u.grid().spacing(), 1.0 / p);
}

double inner_l2(const ComplexField& u, const ComplexField& v) {
  require_same_grid(u, v);
  auto a = u.coefficients();
  auto b = v.coefficients();
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] * std::conj(b[j])).real();
  return kTwoPi * s;
}

double distance_l2_sq(const ComplexField& u, const ComplexField& v) {
  require_same_grid(u, v);
  auto a = u.coefficients();
  auto b = v.coefficients();
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::norm(a[j] - b[j]);
  return kTwoPi * s;
}

LinearSymbol LinearSymbol::slow(double alpha, double nu) {
  LinearSymbol s;
  s.kind = nu > 0.0 ? SymbolKind::kSlowViscous : SymbolKind::kSlowFree;
  s.exponent = alpha;
  s.nu = nu;
  return s;
}

LinearSymbol LinearSymbol::fast(double rho, double lambda, double eps) {
  LinearSymbol s;
  s.kind = SymbolKind::kFastDissipative;
  s.exponent = rho;
  s.lambda = lambda;
  s.eps = eps;
  return s;
}

void LinearSymbol::validate() const {
  if (!(exponent > 0.0 && exponent <= 1.0)) throw_config("symbol exponent must lie in (0, 1]");
  if (!(nu >= 0.0)) throw_config("viscosity must be >= 0");
  if (!(lambda >= 0.0)) throw_config("lambda must be >= 0");
  if (!(eps > 0.0 && eps <= 1.0)) throw_config("eps must lie in (0, 1]");
}

cplx LinearSymbol::multiplier(int k) const {
  const double ak = std::abs(k);
  const double frac = k == 0 ? 0.0 : std::pow(ak, 2.0 * exponent);
  switch (kind) {
    case SymbolKind::kSlowFree:
      return {0.0, -frac};
    case SymbolKind::kSlowViscous:
    case SymbolKind::kAveragedViscous:
      return {-nu * ak * ak, -frac};
    case SymbolKind::kFastDissipative:
      // Dissipative sign: (1+i)(-Delta)^rho enters as -(1+i)|k|^{2 rho}.
      return cplx(-frac - lambda, -frac) / eps;
  }
  return {};
}

Propagator::Propagator(GridPtr grid, const LinearSymbol& symbol, double t) : grid_(std::move(grid)), t_(t) {
  if (!(t >= 0.0)) throw_config("propagator time must be >= 0");
  symbol.validate();
  f_.resize(grid_->n_modes());
  for (int j = 0; j < grid_->n_modes(); ++j) f_[j] = t == 0.0 ? cplx(1.0) : std::exp(t * symbol.multiplier(grid_->wavenumber(j)));
}

void Propagator::apply_inplace(ComplexField& u) const {
  if (u.grid().n_modes() != grid_->n_modes()) throw_config("field grid mismatch");
  auto c = u.coefficients();
  for (std::size_t j = 0; j < f_.size(); ++j) c[j] *= f_[j];
}

ComplexField Propagator::apply(const ComplexField& u) const {
  ComplexField out = u;
  apply_inplace(out);
  return out;
}

ComplexField apply_propagator(const ComplexField& u, double t, const LinearSymbol& symbol) {
  return Propagator(u.grid_ptr(), symbol, t).apply(u);
}

}  // namespace slowfast
