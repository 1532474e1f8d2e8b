#pragma once

// Fourier pseudo-spectral discretization of the torus R/2piZ.
//
// Coefficients are stored in FFT order (k = 0, 1, ..., n/2, -n/2+1, ..., -1)
// and are the true Fourier coefficients of the 2pi-periodic function:
//   u(x_j) = sum_k c_k exp(i k x_j),  x_j = 2 pi j / n.

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace slowfast {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

class SpectralGrid;
using GridPtr = std::shared_ptr<const SpectralGrid>;

class SpectralGrid {
 public:
  ~SpectralGrid();
  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  int n_modes() const noexcept { return n_; }
  std::uint64_t id() const noexcept { return id_; }
  double spacing() const noexcept { return kTwoPi / n_; }
  double length() const noexcept { return kTwoPi; }

  // Wavenumber stored at FFT index j.
  int wavenumber(int j) const noexcept { return j <= n_ / 2 ? j : j - n_; }
  // FFT index of wavenumber k in -n/2+1..n/2.
  int index_of(int k) const;
  const std::vector<int>& wavenumbers() const noexcept { return k_; }
  double node(int j) const noexcept { return kTwoPi * j / n_; }
  bool is_nyquist(int j) const noexcept { return j == n_ / 2; }

  // coefficients -> node values (exact synthesis, no scaling).
  void to_physical(std::span<const cplx> coeffs, std::span<cplx> values) const;
  // node values -> coefficients (carries the 1/n factor).
  void to_spectral(std::span<const cplx> values, std::span<cplx> coeffs) const;

  // Zero-padded synthesis on 2n nodes; the Nyquist coefficient is placed at +n/2.
  void to_physical_padded(std::span<const cplx> coeffs, std::span<cplx> values2n) const;
  // Analysis on 2n nodes followed by truncation to the n-mode band.
  void to_spectral_truncated(std::span<const cplx> values2n, std::span<cplx> coeffs) const;

 private:
  friend GridPtr make_grid(int n_modes);
  explicit SpectralGrid(int n_modes);

  int n_;
  std::uint64_t id_;
  std::vector<int> k_;
  void* plan_fwd_ = nullptr;
  void* plan_bwd_ = nullptr;
  void* plan_fwd2_ = nullptr;
  void* plan_bwd2_ = nullptr;
};

// Rejects odd n_modes and n_modes < 4.
GridPtr make_grid(int n_modes);

class ComplexField {
 public:
  explicit ComplexField(GridPtr grid);
  ComplexField(GridPtr grid, std::vector<cplx> coefficients);

  static ComplexField from_physical(GridPtr grid, std::span<const cplx> values);
  static ComplexField constant(GridPtr grid, cplx value);
  static ComplexField single_mode(GridPtr grid, int k, cplx amplitude = 1.0);

  const SpectralGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  int size() const noexcept { return static_cast<int>(c_.size()); }

  std::span<const cplx> coefficients() const noexcept { return c_; }
  std::span<cplx> coefficients() noexcept { return c_; }
  cplx mode(int k) const { return c_[grid_->index_of(k)]; }
  cplx& mode(int k) { return c_[grid_->index_of(k)]; }

  std::vector<cplx> physical() const;
  bool all_finite() const noexcept;

  ComplexField& operator+=(const ComplexField& o);
  ComplexField& operator-=(const ComplexField& o);
  ComplexField& operator*=(cplx s);

  friend ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
  friend ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
  friend ComplexField operator*(cplx s, ComplexField a) { return a *= s; }

 private:
  GridPtr grid_;
  std::vector<cplx> c_;
};

// Throws a config error when the two fields live on different grids.
void require_same_grid(const ComplexField& a, const ComplexField& b);

// (-Delta)^a: multiplies mode k by |k|^{2a}; a in (0, 1].
ComplexField frac_laplacian(const ComplexField& u, double a);
// d/dx with the Nyquist mode zeroed.
ComplexField derivative(const ComplexField& u);
// d^2/dx^2 as the multiplier -k^2 on every mode.
ComplexField second_derivative(const ComplexField& u);

double norm_l2(const ComplexField& u);
double norm_l2_sq(const ComplexField& u);
double norm_h1(const ComplexField& u);
double norm_h1_sq(const ComplexField& u);
double norm_lp(const ComplexField& u, double p);
// Re of the L^2 pairing: Re int u conj(v) dx.
double inner_l2(const ComplexField& u, const ComplexField& v);
// L^2 norm of the difference, without allocating.
double distance_l2_sq(const ComplexField& u, const ComplexField& v);

enum class SymbolKind { kSlowFree, kSlowViscous, kFastDissipative, kAveragedViscous };

// Linear generator of one of the semigroups, as a per-mode multiplier m(k).
struct LinearSymbol {
  SymbolKind kind = SymbolKind::kSlowFree;
  double exponent = 0.75;  // alpha for slow symbols, rho for the fast one
  double nu = 0.0;
  double lambda = 0.0;
  double eps = 1.0;

  static LinearSymbol slow(double alpha, double nu);
  static LinearSymbol fast(double rho, double lambda, double eps);

  cplx multiplier(int k) const;
  void validate() const;
};

// Precomputed exp(t m(k)) for a fixed step t.
class Propagator {
 public:
  Propagator(GridPtr grid, const LinearSymbol& symbol, double t);

  ComplexField apply(const ComplexField& u) const;
  void apply_inplace(ComplexField& u) const;
  std::span<const cplx> factors() const noexcept { return f_; }
  double time() const noexcept { return t_; }

 private:
  GridPtr grid_;
  double t_;
  std::vector<cplx> f_;
};

ComplexField apply_propagator(const ComplexField& u, double t, const LinearSymbol& symbol);

}  // namespace slowfast
