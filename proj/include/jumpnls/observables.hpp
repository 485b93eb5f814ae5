#pragma once

#include <vector>

#include "jumpnls/spectral.hpp"

namespace jumpnls {

/// Mass: integral of |u|^2.
double mass(const ComplexField& u);

/// Kinetic part 1/2 int |grad u|^2 of the Hamiltonian.
double kinetic_energy(const ComplexField& u);

/// Potential part lambda/(alpha+1) int |u|^{alpha+1}.
double potential_energy(const ComplexField& u, double lambda, double alpha);

/// Hamiltonian H(u) = kinetic + potential, sign convention as in the defocusing model.
double hamiltonian(const ComplexField& u, double lambda, double alpha);

/// Second moment int |x|^2 |u|^2 in box coordinates centered at the origin.
double virial(const ComplexField& u);

/// One row of observables at a single time.
struct ObservableSample {
  double t = 0.0;
  double mass = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double hamiltonian = 0.0;
  double virial = 0.0;
  double h1_norm = 0.0;
  double hgamma_norm = 0.0;
};

/// All observables in one pass (a single forward transform).
ObservableSample observe(const ComplexField& u, double t, double lambda, double alpha, double gamma);

class ObservableSeries {
 public:
  void push(const ObservableSample& s);

  const std::vector<ObservableSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  std::vector<double> times() const;
  std::vector<double> mass() const;
  std::vector<double> hamiltonian() const;
  std::vector<double> virial() const;

  double sup_mass() const { return sup_mass_; }
  double sup_hamiltonian() const { return sup_hamiltonian_; }
  double sup_virial() const { return sup_virial_; }

 private:
  std::vector<ObservableSample> samples_;
  double sup_mass_ = 0.0;
  double sup_hamiltonian_ = 0.0;
  double sup_virial_ = 0.0;
};

}  // namespace jumpnls
