#pragma once

// Levy noise: mark functions, intensity measures, compound-Poisson sampling,
// compensator quadrature, integrability constants and coefficient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jumpnls/spectral.hpp"

namespace jumpnls {

/// A real mark z(x) sampled on a grid, with cached sup-norms.
class MarkFunction {
 public:
  MarkFunction(GridSpec grid, std::vector<double> samples);

  /// amp * exp(-|x - center|^2 / (2 width^2)).
  static MarkFunction gaussian_bump(const GridSpec& grid, double amp, const std::vector<double>& center,
                                    double width);
  /// Real part of a stored field; the imaginary part must vanish.
  static MarkFunction from_field(const ComplexField& field);

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

  double sup_norm() const { return sup_; }
  double gradient_sup_norm() const { return grad_sup_; }
  /// sup_x |x| |z(x)|.
  double weighted_sup_norm() const { return weighted_sup_; }
  /// max(sup|z|, sup|grad z|), the W^1_inf norm.
  double w1inf_norm() const { return std::max(sup_, grad_sup_); }

 private:
  GridSpec grid_;
  std::vector<double> values_;
  double sup_ = 0.0;
  double grad_sup_ = 0.0;
  double weighted_sup_ = 0.0;
};

using MarkPtr = std::shared_ptr<const MarkFunction>;

/// Amplitude density scale * a^{-exponent} on (lower, upper]. exponent = 0 is uniform.
class AmplitudeDensity {
 public:
  AmplitudeDensity(double scale, double exponent, double lower, double upper);

  double scale() const { return scale_; }
  double exponent() const { return exponent_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }

  double operator()(double a) const;
  /// Integral of the density is finite.
  bool integrable() const;
  /// Closed-form int a^k density(a) da; +inf when divergent.
  double moment(double k) const;
  /// Amplitude with CDF value q in [0, 1); requires integrable().
  double quantile(double q) const;

  AmplitudeDensity with_lower(double lower) const { return {scale_, exponent_, lower, upper_}; }

 private:
  double scale_;
  double exponent_;
  double lower_;
  double upper_;
};

struct Atom {
  double rate = 0.0;
  MarkPtr mark;
};

/// Marks a * base with intensity density(a) da.
struct AmplitudeFamily {
  MarkPtr base;
  AmplitudeDensity density;
};

/// Levy measure as a sum of atoms and amplitude families.
class LevyMeasure {
 public:
  LevyMeasure() = default;
  LevyMeasure(std::vector<Atom> atoms, std::vector<AmplitudeFamily> families);

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<AmplitudeFamily>& families() const { return families_; }
  bool empty() const { return atoms_.empty() && families_.empty(); }
  bool finite_activity() const;

  /// Sum of two measures.
  friend LevyMeasure concatenate(const LevyMeasure& a, const LevyMeasure& b);

 private:
  std::vector<Atom> atoms_;
  std::vector<AmplitudeFamily> families_;
};

/// Small-jump cutoff in the mark sup-norm.
struct TruncationSpec {
  double epsilon = 0.0;
};

/// Removes all marks with |z|_inf <= epsilon.
LevyMeasure restrict(const LevyMeasure& nu, TruncationSpec trunc);

/// Jumps per unit time. Throws DomainError for infinite activity.
double total_rate(const LevyMeasure& nu);

struct Jump {
  double time = 0.0;
  MarkPtr profile;
  double amplitude = 1.0;

  double sup_norm() const { return std::abs(amplitude) * profile->sup_norm(); }
  /// Mark values amplitude * profile(x).
  std::vector<double> values() const;
};

struct CompoundPoissonPath {
  double horizon = 0.0;
  std::vector<Jump> jumps;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
};

/// Seed of substream k of a root seed (splitmix64 mixing of both).
std::uint64_t substream_seed(std::uint64_t root, std::uint64_t k);

/// Reproducible generator; draws do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

/// Compound-Poisson sampler for a finite-activity measure.
class PoissonSampler {
 public:
  explicit PoissonSampler(LevyMeasure nu);

  double rate() const { return rate_; }
  CompoundPoissonPath sample(double horizon, std::uint64_t seed) const;

 private:
  LevyMeasure nu_;
  std::vector<double> cumulative_;
  double rate_ = 0.0;
};

CompoundPoissonPath sample_path(const LevyMeasure& nu, double horizon, std::uint64_t seed);

/// Keeps the jumps with |Y|_inf > epsilon.
CompoundPoissonPath filter_path(const CompoundPoissonPath& path, TruncationSpec trunc);

/// Samples at the finest cutoff and thins to `trunc`, so paths at different
/// cutoffs with the same seed are restrictions of one another.
CompoundPoissonPath sample_coupled_path(const LevyMeasure& nu, TruncationSpec finest, TruncationSpec trunc,
                                        double horizon, std::uint64_t seed);

/// Coefficients g, h of the multiplicative noise.
struct NoiseCoefficients {
  std::string name;
  std::function<cplx(double)> g;
  std::function<cplx(double)> h;
  std::function<cplx(double)> dg;  ///< optional; finite differences when empty
  std::function<cplx(double)> dh;
  double growth_g = 0.0;
  double growth_h = 0.0;

  /// Throws DomainError unless g(0) = h(0) = 0.
  void validate() const;
};

NoiseCoefficients zero_coefficients();
/// g = i(e^{i theta xi} - 1), h = i(cos(theta xi) - 1).
NoiseCoefficients phase_rotation(double theta);
/// g = sin xi, h = xi - (i/2) sin^2 xi.
NoiseCoefficients sine_mean();
/// g = c1 xi, h = c2 xi.
NoiseCoefficients linear_coefficients(double c1, double c2);

/// Registry lookup; unknown names or parameters throw DomainError.
NoiseCoefficients make_coefficients(const std::string& name, const std::map<std::string, double>& params);
std::vector<std::string> coefficient_names();

struct CompensatorFields {
  ComplexField z_nu;     ///< int g(z(x)) nu(dz)
  ComplexField h_drift;  ///< int h(z(x)) nu(dz)

  /// Complex potential V = h_drift - z_nu of the between-jump equation.
  ComplexField potential() const;
};

/// Thrown when quadrature does not settle before the node cap.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CompensatorFields compensator_fields(const LevyMeasure& nu, const NoiseCoefficients& coeffs, const GridSpec& grid);

struct LevyConstants {
  double c0 = 0.0;  ///< int |z|_inf^2
  double c1 = 0.0;  ///< int |z|_{W^1_inf}^2
  double c2 = 0.0;  ///< int sup |x|^2 |z|^2
  double c3 = 0.0;  ///< int |z|_inf^4

  bool all_finite() const;
};

LevyConstants levy_constants(const LevyMeasure& nu);

struct HypothesisCheck {
  bool holds = true;
  double worst_xi = 0.0;
  double worst_violation = 0.0;
};

struct HypothesisReport {
  std::string coefficients;
  double xi_min = 0.0;
  double xi_max = 0.0;
  std::size_t samples = 0;
  HypothesisCheck growth;         ///< linear growth of g, h, g', h'
  HypothesisCheck mass_pathwise;  ///< Im g = Im h and |1 - i g| = 1
  HypothesisCheck mass_mean;      ///< 2 Im h + |g|^2 = 0
};

HypothesisReport check_hypotheses(const NoiseCoefficients& coeffs, double xi_min, double xi_max,
                                  std::size_t samples);

/// Symmetric interval covering every mark value the measure can produce.
std::pair<double, double> mark_value_range(const LevyMeasure& nu);

/// Composite Gauss-Legendre quadrature with panel doubling.
double integrate(const std::function<double(double)>& f, double lo, double hi);

}  // namespace jumpnls
