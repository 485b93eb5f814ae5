#pragma once

// Piecewise-deterministic solver: Strang split-step evolution between jumps,
// multiplicative jumps u -> u (1 - i g(Y)), glued at the compound-Poisson jump
// times, plus the Duhamel residual that checks a solved path.
//
// Between jumps the field solves
//   i u_t - Laplace(u) + lambda |u|^{alpha-1} u = V u,   V = int h(z) nu(dz) - int g(z) nu(dz),
// i.e. u_t = -i Laplace(u) + i lambda |u|^{alpha-1} u - i V u.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "jumpnls/noise.hpp"
#include "jumpnls/observables.hpp"
#include "jumpnls/spectral.hpp"

namespace jumpnls {

/// A run stopped because the state left the region where the periodic box is faithful.
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double lambda = 1.0;
  double alpha = 3.0;
  double horizon = 1.0;
  double dt = 1e-3;
  std::size_t record_stride = 1;
  TruncationSpec truncation;
  double boundary_threshold = 1e-8;
  /// Sobolev exponent of the secondary norm series.
  double gamma = 0.9;
  /// Permits lambda <= 0 and alpha < 1 (unit-test mode).
  bool test_mode = false;
  /// Keep full fields at every record and jump (needed by mild_residual).
  bool keep_fields = true;

  void validate() const;
};

ComplexField nonlinear_phase_step(const ComplexField& u, double lambda, double alpha, double dt);
ComplexField potential_step(const ComplexField& u, const ComplexField& potential, double dt);
ComplexField apply_jump(const ComplexField& u, std::span<const double> mark, const NoiseCoefficients& coeffs);
ComplexField apply_jump(const ComplexField& u, const MarkFunction& mark, const NoiseCoefficients& coeffs);

/// Strang stepper: half pointwise flow, exact free flow, half pointwise flow.
/// The pointwise part solves u' = i(lambda|u|^{alpha-1} - V)u exactly.
class SplitStepper {
 public:
  SplitStepper(ComplexField potential, double lambda, double alpha);

  /// One symmetric step of length dt (any sign) in place.
  void step(std::span<cplx> u, double dt);

  const GridSpec& grid() const { return potential_.grid(); }

 private:
  void pointwise(std::span<cplx> u, double tau) const;
  const std::vector<cplx>& linear_symbol(double dt);

  ComplexField potential_;
  double lambda_;
  double alpha_;
  bool real_potential_ = true;
  bool pointwise_active_ = true;
  double cached_dt_ = 0.0;
  std::vector<cplx> cached_symbol_;
  std::vector<cplx> scratch_symbol_;
};

/// Deterministic evolution over tau >= 0 with ceil(tau/dt) substeps, the last shortened.
ComplexField between_jump_evolve(const ComplexField& u, const ComplexField& potential, const SolverConfig& cfg,
                                 double tau);

struct JumpSnapshot {
  Jump jump;
  ComplexField pre;
  ComplexField post;
};

struct PathRecord {
  std::vector<double> times;
  ObservableSeries series;
  std::vector<ComplexField> fields;  ///< one per time when cfg.keep_fields
  CompoundPoissonPath path;
  std::vector<JumpSnapshot> snapshots;  ///< one per jump when cfg.keep_fields
  ComplexField initial;
  ComplexField terminal;
  double boundary_fraction_max = 0.0;
};

/// Solves one path of a finite-activity model by gluing deterministic pieces at the jumps.
PathRecord solve_path(const ComplexField& u0, const LevyMeasure& nu, const NoiseCoefficients& coeffs,
                      const CompoundPoissonPath& path, const SolverConfig& cfg);

/// Same, with the between-jump potential V already assembled for this measure.
PathRecord solve_path(const ComplexField& u0, const ComplexField& potential, const NoiseCoefficients& coeffs,
                      const CompoundPoissonPath& path, const SolverConfig& cfg);

/// Restricts nu to cfg.truncation, samples with coupling at `coupling` (defaults to
/// the same cutoff) and solves.
PathRecord solve_truncated(const ComplexField& u0, const LevyMeasure& nu, const NoiseCoefficients& coeffs,
                           std::uint64_t seed, const SolverConfig& cfg,
                           std::optional<TruncationSpec> coupling = std::nullopt);

enum class QuadratureRule { left_point, trapezoid };

/// Relative L^2 gap between the recorded u(t) and the Duhamel right-hand side
/// assembled from the record.
double mild_residual(const PathRecord& record, const LevyMeasure& nu, const NoiseCoefficients& coeffs,
                     const SolverConfig& cfg, double t, QuadratureRule rule = QuadratureRule::left_point);

/// Number of substeps ceil(tau/dt), ignoring roundoff slivers.
std::size_t substep_count(double tau, double dt);

/// CSV with columns t, mass, kinetic, potential, hamiltonian, virial, h1_norm, hgamma_norm.
void write_series_csv(const ObservableSeries& series, const std::filesystem::path& path);

}  // namespace jumpnls
