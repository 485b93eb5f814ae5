#pragma once

// Ensembles of independent paths and the dt / truncation convergence studies.
// Path k always uses substream_seed(root_seed, k); reductions run in path
// order, so results do not depend on the thread count.

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jumpnls/dynamics.hpp"

namespace jumpnls {

struct EnsembleConfig {
  ComplexField initial;
  LevyMeasure measure;
  NoiseCoefficients coefficients;
  SolverConfig solver;
  std::size_t paths = 1;
  std::uint64_t root_seed = 0;
  /// Strictly decreasing cutoffs for truncation studies.
  std::vector<double> truncation_levels;
  /// Strictly decreasing time steps for dt and residual studies.
  std::vector<double> dt_levels;
  bool coupled = true;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

/// Runs body(k) for k in [0, n) on a pool of workers; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

struct PathSummary {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool aborted = false;
  std::string message;
  std::size_t jumps = 0;
  std::vector<double> mass;  ///< at the ensemble's recorded times
  double sup_mass = 0.0;
  double sup_hamiltonian = 0.0;
  double sup_virial = 0.0;
  double terminal_mass = 0.0;
  double terminal_hamiltonian = 0.0;
  double max_relative_mass_drift = 0.0;
  double mass_slope = 0.0;  ///< least-squares slope of the mass series
};

struct MeanEstimate {
  double mean = 0.0;
  double variance = 0.0;
  double stderr_ = 0.0;
};

/// Sample mean, unbiased variance and sd/sqrt(n), summed in input order.
MeanEstimate estimate(const std::vector<double>& xs);

struct EnsembleSummary {
  std::size_t paths = 0;
  std::size_t completed = 0;
  bool partial = false;
  double initial_mass = 0.0;
  double rate = 0.0;            ///< jump intensity of the (restricted) measure
  double expected_jumps = 0.0;  ///< rate * horizon
  std::vector<double> times;
  std::vector<double> mean_mass;
  std::vector<double> var_mass;
  std::vector<double> stderr_mass;
  MeanEstimate sup_mass;
  MeanEstimate sup_hamiltonian;
  MeanEstimate sup_virial;
  MeanEstimate jump_count;
  MeanEstimate mass_slope;
  double max_relative_mass_drift = 0.0;
  std::vector<PathSummary> per_path;
};

EnsembleSummary run_ensemble(const EnsembleConfig& cfg);

/// |mean mass(t) - mass(u0)| <= sigmas * stderr(t) (+1e-12 relative floor) at every recorded t.
bool mean_mass_conserved(const EnsembleSummary& s, double sigmas = 3.0);
/// Mean least-squares slope of mass(t) is zero within sigmas * stderr (+ the same floor).
bool mean_mass_drift_unsigned(const EnsembleSummary& s, double sigmas = 3.0);
/// Ensemble mean jump count within sigmas * sqrt(rate T / M) of rate T.
bool jump_count_consistent(const EnsembleSummary& s, double sigmas = 3.0);

/// Jump-count statistics only (no PDE solves).
MeanEstimate sample_jump_counts(const LevyMeasure& nu, double horizon, std::size_t paths, std::uint64_t root_seed);

struct LevelStats {
  double level = 0.0;
  MeanEstimate sup_mass;
  MeanEstimate sup_hamiltonian;
  MeanEstimate sup_virial;
  MeanEstimate jumps;
  double max_relative_mass_drift = 0.0;
};

struct ConvergenceReport {
  std::string kind;
  std::vector<double> levels;
  std::vector<double> differences;  ///< one per consecutive pair of levels
  std::vector<double> difference_stderr;
  std::vector<double> orders;  ///< dt study only
  std::vector<LevelStats> level_stats;
  /// Truncation study: one cap per statistic over all levels (sup mass, sup H, sup virial).
  double cap_mass = 0.0;
  double cap_hamiltonian = 0.0;
  double cap_virial = 0.0;
  bool pass = false;
  std::string note;
};

/// Coupled cutoffs: D_j = mean_k sup_t |u_{eps_j}(t) - u_{eps_{j+1}}(t)|_{L^2}; pass iff D_j strictly decreases.
ConvergenceReport truncation_study(const EnsembleConfig& cfg);

/// Terminal differences between consecutive dt levels on shared noise paths; pass iff
/// every observed order lies in [1.6, 2.4] (or all differences are at roundoff level).
ConvergenceReport dt_study(const EnsembleConfig& cfg);

struct ResidualReport {
  std::vector<double> dt_levels;
  /// residuals[k][j]: path k at dt level j, evaluated at the horizon.
  std::vector<std::vector<double>> residuals;
  /// ratios[k][j] = residuals[k][j] / residuals[k][j+1].
  std::vector<std::vector<double>> ratios;
  std::vector<double> mean_residuals;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  bool pass = false;
};

/// Duhamel residual at the horizon for each path and dt level; pass iff every
/// consecutive ratio lies in [1.5, 2.5].
ResidualReport mild_residual_study(const EnsembleConfig& cfg, QuadratureRule rule = QuadratureRule::left_point);

nlohmann::json to_json(const EnsembleSummary& s);
nlohmann::json to_json(const ConvergenceReport& r);
nlohmann::json to_json(const ResidualReport& r);

}  // namespace jumpnls
