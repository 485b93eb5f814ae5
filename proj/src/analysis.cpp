#include "jumpnls/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jumpnls/dynamics.hpp"
#include "jumpnls/io.hpp"

namespace jumpnls {

namespace {

constexpr double admissible_tol = 1e-12;
constexpr double occupancy_limit = 0.5;
constexpr double occupancy_tail = 1e-6;

nlohmann::json exponent_json(double p) {
  if (std::isinf(p)) return "inf";
  return p;
}

}  // namespace

bool is_admissible(double p, double q, int d) {
  if (d < 1 || !(p >= 1.0) || !(q >= 1.0)) return false;
  bool in_range = false;
  if (d == 1) {
    in_range = p >= 2.0;
  } else if (d == 2) {
    in_range = p >= 2.0 && std::isfinite(p);
  } else {
    in_range = p >= 2.0 && p < 2.0 * d / (d - 2.0);
  }
  if (!in_range) return false;
  const double lhs = std::isinf(q) ? 0.0 : 2.0 / q;
  const double rhs = d / 2.0 - (std::isinf(p) ? 0.0 : d / p);
  return std::abs(lhs - rhs) <= admissible_tol;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("least_squares_slope: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("least_squares_slope: abscissae are all equal");
  return sxy / sxx;
}

double box_occupancy(const ComplexField& u) {
  const GridSpec& g = u.grid();
  const std::size_t n = g.points();
  // Mass per "shell" max(|i - center|, |j - center|) in index units.
  const std::size_t shells = n / 2 + 1;
  std::vector<double> shell(shells, 0.0);
  auto dist = [n](std::size_t j) {
    const auto c = static_cast<std::ptrdiff_t>(n / 2);
    return static_cast<std::size_t>(std::abs(static_cast<std::ptrdiff_t>(j) - c));
  };
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const std::size_t r = g.dimension() == 1 ? dist(i) : std::max(dist(i / n), dist(i % n));
    const double m = std::norm(u[i]);
    shell[r] += m;
    total += m;
  }
  if (total == 0.0) return 0.0;
  double inside = 0.0;
  for (std::size_t r = 0; r < shells; ++r) {
    inside += shell[r];
    if (inside >= (1.0 - occupancy_tail) * total)
      return std::min(1.0, static_cast<double>(r + 1) / static_cast<double>(n / 2));
  }
  return 1.0;
}

DecayReport dispersive_decay_check(const ComplexField& phi, double p, const std::vector<double>& times,
                                   double boundary_threshold) {
  if (!(p >= 2.0)) throw DomainError("dispersive_decay_check: p must be >= 2");
  if (times.empty()) throw DomainError("dispersive_decay_check: no times given");
  phi.require_finite("dispersive_decay_check");
  const int d = phi.grid().dimension();
  const double p_dual = std::isinf(p) ? 1.0 : p / (p - 1.0);
  const double decay = d * (0.5 - (std::isinf(p) ? 0.0 : 1.0 / p));

  DecayReport r;
  r.p = p;
  r.d = d;
  r.theoretical_exponent = -decay;
  const double dual_norm = lp_norm(phi, p_dual);
  if (dual_norm == 0.0) throw DomainError("dispersive_decay_check: zero initial data");

  for (double t : times) {
    if (!(t > 0.0)) throw DomainError("dispersive_decay_check: times must be positive");
    const ComplexField psi = free_propagate(phi, t);
    const double frac = boundary_mass_fraction(psi);
    if (frac > boundary_threshold)
      throw NumericalAbort("dispersive_decay_check: boundary mass fraction " + format_number(frac) +
                           " exceeds threshold at t=" + format_number(t));
    if (box_occupancy(psi) >= occupancy_limit) {
      r.dropped_times.push_back(t);
      continue;
    }
    const double norm = lp_norm(psi, p);
    r.times.push_back(t);
    r.norms.push_back(norm);
    r.ratios.push_back(norm * std::pow(t, decay) / dual_norm);
  }
  if (r.times.size() < 2) throw DomainError("dispersive_decay_check: fewer than two times inside the valid window");

  std::vector<double> lt;
  std::vector<double> ln;
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    lt.push_back(std::log(r.times[i]));
    ln.push_back(std::log(r.norms[i]));
  }
  r.fitted_exponent = least_squares_slope(lt, ln);
  return r;
}

nlohmann::json to_json(const DecayReport& report) {
  return {{"p", exponent_json(report.p)},
          {"d", report.d},
          {"fitted_exponent", report.fitted_exponent},
          {"theoretical_exponent", report.theoretical_exponent},
          {"times", report.times},
          {"norms", report.norms},
          {"ratios", report.ratios},
          {"dropped_times", report.dropped_times}};
}

}  // namespace jumpnls
