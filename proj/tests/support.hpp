#pragma once

#include <cmath>
#include <complex>
#include <functional>

#include "jumpnls/spectral.hpp"

namespace testing {

using jumpnls::ComplexField;
using jumpnls::GridSpec;
using jumpnls::cplx;

inline ComplexField sample(const GridSpec& g, const std::function<cplx(double)>& f) {
  ComplexField u(g);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = f(g.coordinate(i));
  return u;
}

inline ComplexField sample2(const GridSpec& g, const std::function<cplx(double, double)>& f) {
  ComplexField u(g);
  const std::size_t n = g.points();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = f(g.coordinate(i / n), g.coordinate(i % n));
  return u;
}

inline ComplexField gaussian(const GridSpec& g, double width = 1.0) {
  return sample(g, [width](double x) { return cplx(std::exp(-x * x / (2.0 * width * width))); });
}

inline double sup_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing
