#pragma once

// Run configuration: a YAML file with sections grid, initial, solver, noise,
// coefficients, ensemble, dispersive, hypotheses, output and a top-level seed.
// Unknown keys are errors; every error carries file:line:column.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jumpnls/montecarlo.hpp"

namespace jumpnls {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProfileSpec {
  std::string kind = "gaussian";  ///< gaussian, sech or file
  double amplitude = 1.0;
  double width = 1.0;
  std::vector<double> center;  ///< empty means the origin
  std::filesystem::path file;
};

struct AtomSpec {
  double rate = 0.0;
  ProfileSpec mark;
};

struct FamilySpec {
  ProfileSpec base;
  double scale = 1.0;
  double exponent = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

struct RunConfig {
  std::filesystem::path source;

  std::uint64_t seed = 0;

  int dimension = 1;
  std::size_t points = 256;
  double half_width = 16.0;

  ProfileSpec initial;

  /// record_stride 0 means "subcommand default" (1 for single paths, 8 for ensembles).
  SolverConfig solver = [] {
    SolverConfig s;
    s.record_stride = 0;
    return s;
  }();

  std::vector<AtomSpec> atoms;
  std::vector<FamilySpec> families;

  std::string coefficient_name = "zero";
  std::map<std::string, double> coefficient_params;

  /// 0 means "subcommand default" (2000 for ensembles, 200 for the studies).
  std::size_t paths = 0;
  std::vector<double> truncation_levels;
  std::vector<double> dt_levels;
  bool coupled = true;
  std::size_t threads = 1;
  double sigmas = 3.0;
  std::string quadrature = "left-point";

  std::vector<double> dispersive_p;
  std::vector<double> dispersive_times;

  std::vector<std::string> require;  ///< growth, mass-pathwise, mass-mean
  std::size_t hypothesis_samples = 2001;

  std::filesystem::path output_directory;  ///< empty: runs/<config hash>
  std::vector<double> dump_times;

  GridSpec grid() const;
  ComplexField initial_field() const;
  LevyMeasure measure() const;
  NoiseCoefficients coefficients() const;
  EnsembleConfig ensemble() const;
};

/// Parses YAML text; relative file paths resolve against base_dir.
RunConfig parse_config(const std::string& text, const std::string& source_name,
                       const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Effective configuration with every default resolved; parsing it reproduces the run.
std::string emit_config(const RunConfig& cfg);

/// Field of a named profile on the grid.
ComplexField profile_field(const GridSpec& grid, const ProfileSpec& spec);

}  // namespace jumpnls
