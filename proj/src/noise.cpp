#include "jumpnls/noise.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <limits>
#include <numeric>

namespace jumpnls {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Composite 8-point Gauss-Legendre, panels doubled until the relative change
// drops below 1e-10; at the 2^14-node cap a change above 1e-8 is an error.
constexpr std::size_t gl_order = 8;
constexpr std::size_t max_nodes = std::size_t{1} << 14;
constexpr double settle_tol = 1e-10;
constexpr double cap_tol = 1e-8;

template <class Visit>
void gauss_legendre_nodes(double lo, double hi, std::size_t panels, Visit&& visit) {
  using rule = boost::math::quadrature::gauss<double, gl_order>;
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  const double width = (hi - lo) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double c = lo + (static_cast<double>(p) + 0.5) * width;
    const double r = 0.5 * width;
    for (std::size_t i = 0; i < x.size(); ++i) {
      visit(c + r * x[i], r * w[i]);
      if (x[i] != 0.0) visit(c - r * x[i], r * w[i]);
    }
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

cplx derivative(const std::function<cplx(double)>& exact, const std::function<cplx(double)>& f, double xi) {
  if (exact) return exact(xi);
  const double step = 1e-6 * std::max(1.0, std::abs(xi));
  return (f(xi + step) - f(xi - step)) / (2.0 * step);
}

void note(HypothesisCheck& check, double xi, double violation, double tol) {
  if (violation > check.worst_violation) {
    check.worst_violation = violation;
    check.worst_xi = xi;
  }
  if (violation > tol) check.holds = false;
}

}  // namespace

// ---------------------------------------------------------------- marks

MarkFunction::MarkFunction(GridSpec grid, std::vector<double> samples) : grid_(grid), values_(std::move(samples)) {
  if (values_.size() != grid_.size()) throw DomainError("MarkFunction: sample count must equal N^d");
  std::vector<cplx> as_complex(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw InvalidStateError("MarkFunction: non-finite sample");
    as_complex[i] = values_[i];
    sup_ = std::max(sup_, std::abs(values_[i]));
    weighted_sup_ = std::max(weighted_sup_, std::sqrt(grid_.radius_squared(i)) * std::abs(values_[i]));
  }
  const auto grad = gradient_field(ComplexField(grid_, std::move(as_complex)));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double g2 = 0.0;
    for (const auto& d : grad) g2 += d[i].real() * d[i].real();
    grad_sup_ = std::max(grad_sup_, std::sqrt(g2));
  }
}

MarkFunction MarkFunction::gaussian_bump(const GridSpec& grid, double amp, const std::vector<double>& center,
                                         double width) {
  if (static_cast<int>(center.size()) != grid.dimension())
    throw DomainError("gaussian_bump: center must have one entry per dimension");
  if (!(width > 0.0)) throw DomainError("gaussian_bump: width must be positive");
  const std::size_t n = grid.points();
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double r2 = 0.0;
    if (grid.dimension() == 1) {
      const double dx = grid.coordinate(i) - center[0];
      r2 = dx * dx;
    } else {
      const double dx = grid.coordinate(i / n) - center[0];
      const double dy = grid.coordinate(i % n) - center[1];
      r2 = dx * dx + dy * dy;
    }
    v[i] = amp * std::exp(-r2 / (2.0 * width * width));
  }
  return {grid, std::move(v)};
}

MarkFunction MarkFunction::from_field(const ComplexField& field) {
  std::vector<double> v(field.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (field[i].imag() != 0.0) throw DomainError("MarkFunction::from_field: mark fields must be real");
    v[i] = field[i].real();
  }
  return {field.grid(), std::move(v)};
}

std::vector<double> Jump::values() const {
  std::vector<double> v = profile->values();
  for (double& x : v) x *= amplitude;
  return v;
}

// ---------------------------------------------------------------- measures

AmplitudeDensity::AmplitudeDensity(double scale, double exponent, double lower, double upper)
    : scale_(scale), exponent_(exponent), lower_(lower), upper_(upper) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("AmplitudeDensity: scale must be >= 0");
  if (!std::isfinite(exponent)) throw DomainError("AmplitudeDensity: exponent must be finite");
  if (!(lower >= 0.0) || !(upper > lower) || !std::isfinite(upper))
    throw DomainError("AmplitudeDensity: need 0 <= lower < upper < inf");
}

double AmplitudeDensity::operator()(double a) const {
  if (a <= lower_ || a > upper_) return 0.0;
  return scale_ * std::pow(a, -exponent_);
}

bool AmplitudeDensity::integrable() const { return scale_ == 0.0 || lower_ > 0.0 || exponent_ < 1.0; }

double AmplitudeDensity::moment(double k) const {
  if (scale_ == 0.0) return 0.0;
  const double p = k - exponent_ + 1.0;
  if (p == 0.0) return lower_ > 0.0 ? scale_ * (std::log(upper_) - std::log(lower_)) : inf;
  if (lower_ == 0.0 && p < 0.0) return inf;
  return scale_ * (std::pow(upper_, p) - std::pow(lower_, p)) / p;
}

double AmplitudeDensity::quantile(double q) const {
  if (!integrable()) throw DomainError("AmplitudeDensity::quantile: density is not integrable");
  const double p = 1.0 - exponent_;
  if (p == 0.0) return lower_ * std::pow(upper_ / lower_, q);
  const double lo = std::pow(lower_, p);
  const double hi = std::pow(upper_, p);
  return std::pow(lo + q * (hi - lo), 1.0 / p);
}

LevyMeasure::LevyMeasure(std::vector<Atom> atoms, std::vector<AmplitudeFamily> families)
    : atoms_(std::move(atoms)), families_(std::move(families)) {
  for (const auto& a : atoms_) {
    if (!(a.rate > 0.0) || !std::isfinite(a.rate)) throw DomainError("LevyMeasure: atom weights must be positive");
    if (!a.mark) throw DomainError("LevyMeasure: atom without mark");
  }
  for (const auto& f : families_)
    if (!f.base) throw DomainError("LevyMeasure: amplitude family without base profile");
}

bool LevyMeasure::finite_activity() const {
  return std::all_of(families_.begin(), families_.end(), [](const auto& f) { return f.density.integrable(); });
}

LevyMeasure concatenate(const LevyMeasure& a, const LevyMeasure& b) {
  auto atoms = a.atoms_;
  atoms.insert(atoms.end(), b.atoms_.begin(), b.atoms_.end());
  auto families = a.families_;
  families.insert(families.end(), b.families_.begin(), b.families_.end());
  return {std::move(atoms), std::move(families)};
}

LevyMeasure restrict(const LevyMeasure& nu, TruncationSpec trunc) {
  if (!(trunc.epsilon >= 0.0)) throw DomainError("restrict: epsilon must be >= 0");
  std::vector<Atom> atoms;
  for (const auto& a : nu.atoms())
    if (a.mark->sup_norm() > trunc.epsilon) atoms.push_back(a);
  std::vector<AmplitudeFamily> families;
  for (const auto& f : nu.families()) {
    const double s = f.base->sup_norm();
    if (s == 0.0) continue;
    const double lower = std::max(f.density.lower(), trunc.epsilon / s);
    if (lower >= f.density.upper()) continue;
    families.push_back({f.base, lower == f.density.lower() ? f.density : f.density.with_lower(lower)});
  }
  return {std::move(atoms), std::move(families)};
}

double integrate(const std::function<double(double)>& f, double lo, double hi) {
  double previous = 0.0;
  double change = inf;
  for (std::size_t panels = 1; panels * gl_order <= max_nodes; panels *= 2) {
    double sum = 0.0;
    gauss_legendre_nodes(lo, hi, panels, [&](double a, double w) { sum += w * f(a); });
    if (panels > 1) {
      change = std::abs(sum - previous) / std::max(std::abs(sum), std::numeric_limits<double>::min());
      if (change <= settle_tol || sum == previous) return sum;
    }
    previous = sum;
  }
  if (change <= cap_tol) return previous;
  throw QuadratureError("integrate: no convergence at 2^14 nodes (relative change " + std::to_string(change) + ")");
}

double total_rate(const LevyMeasure& nu) {
  if (!nu.finite_activity())
    throw DomainError("total_rate: infinite-activity measure; restrict to a positive cutoff first");
  double rate = 0.0;
  for (const auto& a : nu.atoms()) rate += a.rate;
  for (const auto& f : nu.families()) {
    const auto& d = f.density;
    rate += integrate([&d](double a) { return d(a); }, d.lower(), d.upper());
  }
  return rate;
}

// ---------------------------------------------------------------- sampling

std::uint64_t substream_seed(std::uint64_t root, std::uint64_t k) {
  return splitmix64(splitmix64(root) ^ splitmix64(k * 0xD1B54A32D192ED03ULL + 1));
}

PoissonSampler::PoissonSampler(LevyMeasure nu) : nu_(std::move(nu)) {
  if (!nu_.finite_activity())
    throw DomainError("sample_path: infinite-activity measure; restrict to a positive cutoff first");
  for (const auto& a : nu_.atoms()) {
    rate_ += a.rate;
    cumulative_.push_back(rate_);
  }
  for (const auto& f : nu_.families()) {
    rate_ += f.density.moment(0.0);
    cumulative_.push_back(rate_);
  }
}

CompoundPoissonPath PoissonSampler::sample(double horizon, std::uint64_t seed) const {
  if (!(horizon > 0.0)) throw DomainError("sample_path: horizon must be positive");
  CompoundPoissonPath path;
  path.horizon = horizon;
  path.seed = seed;
  if (rate_ == 0.0) return path;
  Rng rng(seed);
  const std::size_t n_atoms = nu_.atoms().size();
  double t = 0.0;
  for (;;) {
    t += rng.exponential(rate_);
    if (t > horizon) break;
    const double pick = rng.uniform() * rate_;
    auto idx = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), pick) -
                                        cumulative_.begin());
    idx = std::min(idx, cumulative_.size() - 1);
    if (idx < n_atoms) {
      path.jumps.push_back({t, nu_.atoms()[idx].mark, 1.0});
    } else {
      const auto& f = nu_.families()[idx - n_atoms];
      path.jumps.push_back({t, f.base, f.density.quantile(rng.uniform())});
    }
  }
  return path;
}

CompoundPoissonPath sample_path(const LevyMeasure& nu, double horizon, std::uint64_t seed) {
  return PoissonSampler(nu).sample(horizon, seed);
}

CompoundPoissonPath filter_path(const CompoundPoissonPath& path, TruncationSpec trunc) {
  CompoundPoissonPath out;
  out.horizon = path.horizon;
  out.seed = path.seed;
  out.epsilon = std::max(path.epsilon, trunc.epsilon);
  for (const auto& j : path.jumps)
    if (j.sup_norm() > trunc.epsilon) out.jumps.push_back(j);
  return out;
}

CompoundPoissonPath sample_coupled_path(const LevyMeasure& nu, TruncationSpec finest, TruncationSpec trunc,
                                        double horizon, std::uint64_t seed) {
  if (trunc.epsilon < finest.epsilon)
    throw DomainError("sample_coupled_path: cutoff is finer than the coupling level");
  auto base = sample_path(restrict(nu, finest), horizon, seed);
  base.epsilon = finest.epsilon;
  return filter_path(base, trunc);
}

// ---------------------------------------------------------------- coefficients

void NoiseCoefficients::validate() const {
  if (!g || !h) throw DomainError("NoiseCoefficients '" + name + "': g and h must be set");
  if (g(0.0) != cplx{} || h(0.0) != cplx{})
    throw DomainError("NoiseCoefficients '" + name + "': g(0) and h(0) must vanish");
}

NoiseCoefficients zero_coefficients() {
  auto zero = [](double) { return cplx{}; };
  return {"zero", zero, zero, zero, zero, 0.0, 0.0};
}

NoiseCoefficients phase_rotation(double theta) {
  const cplx i(0.0, 1.0);
  NoiseCoefficients c;
  c.name = "phase-rotation";
  c.g = [=](double xi) { return i * (std::polar(1.0, theta * xi) - 1.0); };
  c.h = [=](double xi) { return i * (std::cos(theta * xi) - 1.0); };
  c.dg = [=](double xi) { return -theta * std::polar(1.0, theta * xi); };
  c.dh = [=](double xi) { return -i * theta * std::sin(theta * xi); };
  c.growth_g = std::abs(theta);
  c.growth_h = std::abs(theta);
  return c;
}

NoiseCoefficients sine_mean() {
  const cplx i(0.0, 1.0);
  NoiseCoefficients c;
  c.name = "sine-mean";
  c.g = [](double xi) { return cplx(std::sin(xi)); };
  c.h = [=](double xi) { return xi - 0.5 * i * std::sin(xi) * std::sin(xi); };
  c.dg = [](double xi) { return cplx(std::cos(xi)); };
  c.dh = [=](double xi) { return 1.0 - i * std::sin(xi) * std::cos(xi); };
  c.growth_g = 1.0;
  c.growth_h = std::sqrt(5.0) / 2.0;
  return c;
}

NoiseCoefficients linear_coefficients(double c1, double c2) {
  NoiseCoefficients c;
  c.name = "linear";
  c.g = [=](double xi) { return cplx(c1 * xi); };
  c.h = [=](double xi) { return cplx(c2 * xi); };
  c.dg = [=](double) { return cplx(c1); };
  c.dh = [=](double) { return cplx(c2); };
  c.growth_g = std::abs(c1);
  c.growth_h = std::abs(c2);
  return c;
}

std::vector<std::string> coefficient_names() { return {"zero", "phase-rotation", "sine-mean", "linear"}; }

NoiseCoefficients make_coefficients(const std::string& name, const std::map<std::string, double>& params) {
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : params) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
        throw DomainError("coefficients '" + name + "': unknown parameter '" + k + "'");
    }
  };
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  NoiseCoefficients c;
  if (name == "zero") {
    allow({});
    c = zero_coefficients();
  } else if (name == "phase-rotation") {
    allow({"theta"});
    c = phase_rotation(get("theta", 1.0));
  } else if (name == "sine-mean") {
    allow({});
    c = sine_mean();
  } else if (name == "linear") {
    allow({"c1", "c2"});
    c = linear_coefficients(get("c1", 1.0), get("c2", 1.0));
  } else {
    throw DomainError("unknown coefficient family '" + name + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- compensator

ComplexField CompensatorFields::potential() const {
  ComplexField v = h_drift;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= z_nu[i];
  return v;
}

CompensatorFields compensator_fields(const LevyMeasure& nu, const NoiseCoefficients& coeffs, const GridSpec& grid) {
  if (!nu.finite_activity())
    throw DomainError("compensator_fields: infinite-activity measure; restrict to a positive cutoff first");
  coeffs.validate();
  const std::size_t size = grid.size();
  std::vector<cplx> zg(size);
  std::vector<cplx> zh(size);
  for (const auto& a : nu.atoms()) {
    if (!(a.mark->grid() == grid)) throw DomainError("compensator_fields: mark grid mismatch");
    const auto& z = a.mark->values();
    for (std::size_t i = 0; i < size; ++i) {
      zg[i] += a.rate * coeffs.g(z[i]);
      zh[i] += a.rate * coeffs.h(z[i]);
    }
  }
  for (const auto& f : nu.families()) {
    if (!(f.base->grid() == grid)) throw DomainError("compensator_fields: mark grid mismatch");
    const auto& z = f.base->values();
    const auto& d = f.density;
    std::vector<cplx> prev_g;
    std::vector<cplx> prev_h;
    double change = inf;
    bool settled = false;
    for (std::size_t panels = 1; panels * gl_order <= max_nodes; panels *= 2) {
      std::vector<cplx> ig(size);
      std::vector<cplx> ih(size);
      gauss_legendre_nodes(d.lower(), d.upper(), panels, [&](double a, double w) {
        const double weight = w * d(a);
        for (std::size_t i = 0; i < size; ++i) {
          ig[i] += weight * coeffs.g(a * z[i]);
          ih[i] += weight * coeffs.h(a * z[i]);
        }
      });
      if (panels > 1) {
        double diff = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
          diff = std::max({diff, std::abs(ig[i] - prev_g[i]), std::abs(ih[i] - prev_h[i])});
          scale = std::max({scale, std::abs(ig[i]), std::abs(ih[i])});
        }
        change = scale > 0.0 ? diff / scale : diff;
        if (change <= settle_tol) {
          prev_g = std::move(ig);
          prev_h = std::move(ih);
          settled = true;
          break;
        }
      }
      prev_g = std::move(ig);
      prev_h = std::move(ih);
    }
    if (!settled && change > cap_tol)
      throw QuadratureError("compensator_fields: quadrature did not converge (relative change " +
                            std::to_string(change) + ")");
    for (std::size_t i = 0; i < size; ++i) {
      zg[i] += prev_g[i];
      zh[i] += prev_h[i];
    }
  }
  return {ComplexField(grid, std::move(zg)), ComplexField(grid, std::move(zh))};
}

// ---------------------------------------------------------------- constants

bool LevyConstants::all_finite() const {
  return std::isfinite(c0) && std::isfinite(c1) && std::isfinite(c2) && std::isfinite(c3);
}

LevyConstants levy_constants(const LevyMeasure& nu) {
  LevyConstants c;
  for (const auto& a : nu.atoms()) {
    const auto& z = *a.mark;
    c.c0 += a.rate * z.sup_norm() * z.sup_norm();
    c.c1 += a.rate * z.w1inf_norm() * z.w1inf_norm();
    c.c2 += a.rate * z.weighted_sup_norm() * z.weighted_sup_norm();
    c.c3 += a.rate * std::pow(z.sup_norm(), 4);
  }
  // Marks a*base scale every norm by a, so each constant is a moment of the density.
  for (const auto& f : nu.families()) {
    const auto& z = *f.base;
    const double m2 = f.density.moment(2.0);
    const double m4 = f.density.moment(4.0);
    c.c0 += m2 * z.sup_norm() * z.sup_norm();
    c.c1 += m2 * z.w1inf_norm() * z.w1inf_norm();
    c.c2 += m2 * z.weighted_sup_norm() * z.weighted_sup_norm();
    c.c3 += m4 * std::pow(z.sup_norm(), 4);
  }
  return c;
}

// ---------------------------------------------------------------- hypotheses

HypothesisReport check_hypotheses(const NoiseCoefficients& coeffs, double xi_min, double xi_max,
                                  std::size_t samples) {
  coeffs.validate();
  if (samples < 2 || !(xi_max > xi_min)) throw DomainError("check_hypotheses: need an interval and >= 2 samples");
  constexpr double tol = 1e-10;
  // Finite-difference derivatives carry ~1e-10 truncation error of their own.
  const double dg_tol = coeffs.dg ? tol : 1e-6;
  const double dh_tol = coeffs.dh ? tol : 1e-6;
  HypothesisReport r;
  r.coefficients = coeffs.name;
  r.xi_min = xi_min;
  r.xi_max = xi_max;
  r.samples = samples;
  for (std::size_t k = 0; k < samples; ++k) {
    const double xi = xi_min + (xi_max - xi_min) * static_cast<double>(k) / static_cast<double>(samples - 1);
    const cplx g = coeffs.g(xi);
    const cplx h = coeffs.h(xi);
    const cplx dg = derivative(coeffs.dg, coeffs.g, xi);
    const cplx dh = derivative(coeffs.dh, coeffs.h, xi);

    // |g|, |h| <= C|xi|; derivatives of linear growth, |g'| <= C(1 + |xi|).
    note(r.growth, xi, std::abs(g) - coeffs.growth_g * std::abs(xi), tol);
    note(r.growth, xi, std::abs(h) - coeffs.growth_h * std::abs(xi), tol);
    note(r.growth, xi, std::abs(dg) - coeffs.growth_g * (1.0 + std::abs(xi)), dg_tol);
    note(r.growth, xi, std::abs(dh) - coeffs.growth_h * (1.0 + std::abs(xi)), dh_tol);

    const cplx jump = 1.0 - cplx(0.0, 1.0) * g;
    note(r.mass_pathwise, xi, std::max(std::abs(g.imag() - h.imag()), std::abs(std::abs(jump) - 1.0)), tol);
    note(r.mass_mean, xi, std::abs(2.0 * h.imag() + std::norm(g)), tol);
  }
  return r;
}

std::pair<double, double> mark_value_range(const LevyMeasure& nu) {
  double m = 0.0;
  for (const auto& a : nu.atoms()) m = std::max(m, a.mark->sup_norm());
  for (const auto& f : nu.families()) m = std::max(m, f.density.upper() * f.base->sup_norm());
  return {-m, m};
}

}  // namespace jumpnls
