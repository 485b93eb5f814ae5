#pragma once

// Periodic grids, discrete Fourier calculus and the free Schrodinger group.
//
// Fourier convention (fixed here, used by every oracle in the test suite):
//   grid points      x_j = -L + j*h,  h = 2L/N,  j = 0..N-1 (per axis)
//   lattice freqs    xi_k = k/(2L),   k = -N/2..N/2-1 (stored in FFT order)
//   transform        U_k = sum_j u_j exp(-2 pi i k j / N)   (unnormalized)
// so that U_k approximates exp(...)/h * \hat u(xi_k) with \hat u(xi) = int u e^{-2 pi i x xi} dx.
// The free group i u_t - Laplace(u) = 0 acts as \hat u(xi) -> exp(4 pi^2 i |xi|^2 t) \hat u(xi).

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpnls {

using cplx = std::complex<double>;

/// Thrown when a field holds NaN/Inf or otherwise violates its invariants.
class InvalidStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown for arguments outside an operation's domain (p < 1, grid mismatch, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GridSpec {
 public:
  GridSpec(int dimension, std::size_t points, double half_width);

  int dimension() const { return dim_; }
  std::size_t points() const { return n_; }
  double half_width() const { return half_width_; }
  double mesh() const { return 2.0 * half_width_ / static_cast<double>(n_); }
  /// Volume element h^d.
  double cell_volume() const;
  /// N^d.
  std::size_t size() const;

  /// Coordinate of index j along one axis.
  double coordinate(std::size_t j) const { return -half_width_ + static_cast<double>(j) * mesh(); }
  /// Lattice frequency xi_k of FFT-ordered index k along one axis.
  double frequency(std::size_t k) const;

  /// Squared distance from the origin of the flat grid point `flat`.
  double radius_squared(std::size_t flat) const;
  /// Squared frequency |xi|^2 of the flat FFT-ordered index `flat`.
  double frequency_squared(std::size_t flat) const;

  /// True iff the flat point lies in the first or last cell of some axis.
  bool on_boundary(std::size_t flat) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int dim_;
  std::size_t n_;
  double half_width_;
};

class ComplexField {
 public:
  explicit ComplexField(GridSpec grid);
  ComplexField(GridSpec grid, std::vector<cplx> values);

  const GridSpec& grid() const { return grid_; }
  std::span<const cplx> values() const { return values_; }
  std::span<cplx> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  cplx operator[](std::size_t i) const { return values_[i]; }
  cplx& operator[](std::size_t i) { return values_[i]; }

  bool is_finite() const;
  /// Throws InvalidStateError if any entry is NaN/Inf.
  void require_finite(const char* where) const;

  friend bool operator==(const ComplexField&, const ComplexField&) = default;

 private:
  GridSpec grid_;
  std::vector<cplx> values_;
};

/// A diagonal operator in frequency space, stored in FFT order.
class FourierMultiplier {
 public:
  FourierMultiplier(GridSpec grid, std::vector<cplx> symbol);

  const GridSpec& grid() const { return grid_; }
  std::span<const cplx> symbol() const { return symbol_; }

  /// Symbol exp(4 pi^2 i |xi|^2 t) of the free group at time t.
  static FourierMultiplier free_group(const GridSpec& grid, double t);
  /// Sobolev weight (1 + |2 pi xi|^2)^{s/2}.
  static FourierMultiplier sobolev_weight(const GridSpec& grid, double s);

  ComplexField apply(const ComplexField& u) const;

 private:
  GridSpec grid_;
  std::vector<cplx> symbol_;
};

// In-place transforms on raw storage of a grid's size. Thread-safe; plans are
// created once per grid shape and shared.
void forward_transform(const GridSpec& grid, std::span<cplx> data);
/// Inverse transform including the 1/N^d normalization.
void inverse_transform(const GridSpec& grid, std::span<cplx> data);

ComplexField to_fourier(const ComplexField& u);
ComplexField from_fourier(const ComplexField& spectrum);

/// T(t)u; t may be negative.
ComplexField free_propagate(const ComplexField& u, double t);

/// Riemann-sum L^p norm; p = infinity gives the max modulus.
double lp_norm(const ComplexField& u, double p);

/// Spectral H^s norm, normalized so that s = 0 reproduces lp_norm(u, 2).
double sobolev_norm(const ComplexField& u, double s);

/// Spectral partial derivatives (multiplier 2 pi i xi_j), one field per axis.
/// The Nyquist mode is dropped.
std::vector<ComplexField> gradient_field(const ComplexField& u);

/// Relative L^2 distance |a - b| / |b|; |a - b| when b vanishes.
double relative_l2_distance(const ComplexField& a, const ComplexField& b);

/// Fraction of the total mass in the outermost cell layer of the box.
double boundary_mass_fraction(const ComplexField& u);

// Binary field format: 32-byte header ("JNLSFLD1", u32 dimension, u32 N,
// f64 half-width, 8 zero bytes) then N^d (re, im) pairs, all little-endian.
void write_field(const ComplexField& u, const std::filesystem::path& path);
ComplexField read_field(const std::filesystem::path& path);

}  // namespace jumpnls
