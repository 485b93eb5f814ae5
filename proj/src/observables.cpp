#include "jumpnls/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace jumpnls {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace

double mass(const ComplexField& u) {
  double sum = 0.0;
  for (cplx z : u.values()) sum += std::norm(z);
  return sum * u.grid().cell_volume();
}

double kinetic_energy(const ComplexField& u) {
  double sum = 0.0;
  for (const auto& d : gradient_field(u))
    for (cplx z : d.values()) sum += std::norm(z);
  return 0.5 * sum * u.grid().cell_volume();
}

double potential_energy(const ComplexField& u, double lambda, double alpha) {
  double sum = 0.0;
  for (cplx z : u.values()) sum += std::pow(std::abs(z), alpha + 1.0);
  return lambda / (alpha + 1.0) * sum * u.grid().cell_volume();
}

double hamiltonian(const ComplexField& u, double lambda, double alpha) {
  return kinetic_energy(u) + potential_energy(u, lambda, alpha);
}

double virial(const ComplexField& u) {
  const GridSpec& g = u.grid();
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) sum += g.radius_squared(i) * std::norm(u[i]);
  return sum * g.cell_volume();
}

ObservableSample observe(const ComplexField& u, double t, double lambda, double alpha, double gamma) {
  const GridSpec& g = u.grid();
  const double dv = g.cell_volume();
  ObservableSample s;
  s.t = t;
  s.mass = mass(u);
  s.potential = potential_energy(u, lambda, alpha);
  s.virial = virial(u);

  // Kinetic energy and Sobolev norms through Parseval on one spectrum. The
  // Nyquist modes are excluded from the kinetic sum to match gradient_field.
  ComplexField spec = to_fourier(u);
  const std::size_t n = g.points();
  const double norm = dv / static_cast<double>(g.size());
  double kin = 0.0;
  double h1 = 0.0;
  double hg = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double a2 = std::norm(spec[i]);
    const double w = two_pi * two_pi * g.frequency_squared(i);
    double grad2 = 0.0;
    if (g.dimension() == 1) {
      if (i != n / 2) grad2 = w;
    } else {
      const double kx = g.frequency(i / n);
      const double ky = g.frequency(i % n);
      if (i / n != n / 2) grad2 += two_pi * two_pi * kx * kx;
      if (i % n != n / 2) grad2 += two_pi * two_pi * ky * ky;
    }
    kin += grad2 * a2;
    h1 += (1.0 + w) * a2;
    hg += std::pow(1.0 + w, gamma) * a2;
  }
  s.kinetic = 0.5 * kin * norm;
  s.hamiltonian = s.kinetic + s.potential;
  s.h1_norm = std::sqrt(h1 * norm);
  s.hgamma_norm = std::sqrt(hg * norm);
  return s;
}

void ObservableSeries::push(const ObservableSample& s) {
  if (samples_.empty()) {
    sup_mass_ = s.mass;
    sup_hamiltonian_ = s.hamiltonian;
    sup_virial_ = s.virial;
  } else {
    sup_mass_ = std::max(sup_mass_, s.mass);
    sup_hamiltonian_ = std::max(sup_hamiltonian_, s.hamiltonian);
    sup_virial_ = std::max(sup_virial_, s.virial);
  }
  samples_.push_back(s);
}

std::vector<double> ObservableSeries::times() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.t);
  return out;
}

std::vector<double> ObservableSeries::mass() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.mass);
  return out;
}

std::vector<double> ObservableSeries::hamiltonian() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.hamiltonian);
  return out;
}

std::vector<double> ObservableSeries::virial() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.virial);
  return out;
}

}  // namespace jumpnls
