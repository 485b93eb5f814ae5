#pragma once

#include <json.hpp>

#include <vector>

#include "jumpnls/spectral.hpp"

namespace jumpnls {

/// Strichartz admissibility: p in the dimension's range and 2/q = d/2 - d/p.
/// Infinite exponents are passed as +infinity.
bool is_admissible(double p, double q, int d);

struct DecayReport {
  double p = 2.0;
  int d = 1;
  double fitted_exponent = 0.0;
  double theoretical_exponent = 0.0;
  std::vector<double> times;   ///< times inside the fitting window
  std::vector<double> norms;   ///< |T(t) phi|_{L^p}
  std::vector<double> ratios;  ///< |T(t) phi|_{L^p} t^{d(1/2-1/p)} / |phi|_{L^{p'}}
  std::vector<double> dropped_times;  ///< rejected because the field filled too much of the box
};

/// Fraction of the box half-width needed to hold all but 1e-6 of the mass.
double box_occupancy(const ComplexField& u);

/// Measures |T(t) phi|_{L^p} over `times` and fits the log-log decay slope.
/// Times where the dispersed field occupies half the box or more are dropped.
DecayReport dispersive_decay_check(const ComplexField& phi, double p, const std::vector<double>& times,
                                   double boundary_threshold = 1e-8);

/// {p, d, fitted_exponent, theoretical_exponent, ratios, ...}; p = inf is written as "inf".
nlohmann::json to_json(const DecayReport& report);

/// Least-squares slope of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace jumpnls
