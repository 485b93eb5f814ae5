#include "jumpnls/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "jumpnls/io.hpp"

namespace jumpnls {

namespace {

constexpr double four_pi_sq = 4.0 * std::numbers::pi * std::numbers::pi;
constexpr double modulus_floor = 1e-300;
const cplx I(0.0, 1.0);

double nonlinear_weight(double modulus, double alpha) {
  if (alpha == 3.0) return modulus * modulus;
  if (alpha == 1.0) return 1.0;
  return std::pow(std::max(modulus, modulus_floor), alpha - 1.0);
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw DomainError(std::string(what) + ": grid mismatch");
}

void guard(const ComplexField& u, double t, double threshold, double& worst) {
  if (!u.is_finite()) {
    std::ostringstream msg;
    msg << "non-finite field at t=" << format_number(t);
    throw NumericalAbort(msg.str());
  }
  const double frac = boundary_mass_fraction(u);
  worst = std::max(worst, frac);
  if (frac > threshold) {
    std::ostringstream msg;
    msg << "boundary mass fraction " << format_number(frac) << " exceeds threshold " << format_number(threshold)
        << " at t=" << format_number(t) << " (enlarge the box or shorten the horizon)";
    throw NumericalAbort(msg.str());
  }
}

std::vector<cplx> duhamel_integrand(const ComplexField& u, const ComplexField& potential, double lambda,
                                    double alpha) {
  std::vector<cplx> f(u.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const cplx z = u[i];
    f[i] = I * lambda * nonlinear_weight(std::abs(z), alpha) * z - I * potential[i] * z;
  }
  return f;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(horizon > 0.0)) throw DomainError("solver: horizon must be positive");
  if (!(dt > 0.0) || dt > horizon) throw DomainError("solver: need 0 < dt <= horizon");
  if (record_stride == 0) throw DomainError("solver: record_stride must be >= 1");
  if (!(boundary_threshold > 0.0)) throw DomainError("solver: boundary_threshold must be positive");
  if (!std::isfinite(lambda) || !std::isfinite(alpha)) throw DomainError("solver: lambda and alpha must be finite");
  if (!test_mode) {
    if (!(lambda > 0.0)) throw DomainError("solver: lambda must be positive (defocusing); set test_mode to relax");
    if (!(alpha >= 1.0)) throw DomainError("solver: alpha must be >= 1; set test_mode to relax");
  }
}

std::size_t substep_count(double tau, double dt) {
  if (!(tau > 0.0)) return 0;
  const double q = tau / dt;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(q * (1.0 - 1e-12))));
}

ComplexField nonlinear_phase_step(const ComplexField& u, double lambda, double alpha, double dt) {
  ComplexField out = u;
  if (lambda == 0.0) return out;
  for (auto& z : out.values()) z *= std::polar(1.0, lambda * nonlinear_weight(std::abs(z), alpha) * dt);
  return out;
}

ComplexField potential_step(const ComplexField& u, const ComplexField& potential, double dt) {
  require_same_grid(u.grid(), potential.grid(), "potential_step");
  ComplexField out = u;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const cplx v = potential[i];
    if (v != cplx{}) out[i] *= std::exp(-I * v * dt);
  }
  return out;
}

ComplexField apply_jump(const ComplexField& u, std::span<const double> mark, const NoiseCoefficients& coeffs) {
  if (mark.size() != u.size()) throw DomainError("apply_jump: grid mismatch");
  ComplexField out = u;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 1.0 - I * coeffs.g(mark[i]);
  return out;
}

ComplexField apply_jump(const ComplexField& u, const MarkFunction& mark, const NoiseCoefficients& coeffs) {
  require_same_grid(u.grid(), mark.grid(), "apply_jump");
  return apply_jump(u, std::span<const double>(mark.values()), coeffs);
}

SplitStepper::SplitStepper(ComplexField potential, double lambda, double alpha)
    : potential_(std::move(potential)), lambda_(lambda), alpha_(alpha) {
  bool zero_potential = true;
  for (cplx v : potential_.values()) {
    if (v.imag() != 0.0) real_potential_ = false;
    if (v != cplx{}) zero_potential = false;
  }
  pointwise_active_ = lambda_ != 0.0 || !zero_potential;
}

void SplitStepper::pointwise(std::span<cplx> u, double tau) const {
  // Exact flow of u' = i(lambda w(|u|) - V) u: |u| evolves as e^{Im V t}, the
  // phase integrates lambda |u(s)|^{alpha-1} - Re V.
  const auto& v = potential_.values();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double vr = v[i].real();
    const double vi = v[i].imag();
    const double w = nonlinear_weight(std::abs(u[i]), alpha_);
    if (real_potential_ || vi == 0.0) {
      u[i] *= std::polar(1.0, (lambda_ * w - vr) * tau);
    } else {
      const double c = (alpha_ - 1.0) * vi;
      const double ct = c * tau;
      const double growth_integral = ct == 0.0 ? tau : std::expm1(ct) / c;
      u[i] *= std::polar(std::exp(vi * tau), lambda_ * w * growth_integral - vr * tau);
    }
  }
}

const std::vector<cplx>& SplitStepper::linear_symbol(double dt) {
  const GridSpec& g = grid();
  auto fill = [&](std::vector<cplx>& sym) {
    sym.resize(g.size());
    for (std::size_t i = 0; i < sym.size(); ++i) sym[i] = std::polar(1.0, four_pi_sq * g.frequency_squared(i) * dt);
  };
  if (dt == cached_dt_ && !cached_symbol_.empty()) return cached_symbol_;
  if (cached_symbol_.empty()) {
    cached_dt_ = dt;
    fill(cached_symbol_);
    return cached_symbol_;
  }
  fill(scratch_symbol_);
  return scratch_symbol_;
}

void SplitStepper::step(std::span<cplx> u, double dt) {
  if (u.size() != grid().size()) throw DomainError("SplitStepper::step: grid mismatch");
  if (pointwise_active_) pointwise(u, 0.5 * dt);
  forward_transform(grid(), u);
  const auto& sym = linear_symbol(dt);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] *= sym[i];
  inverse_transform(grid(), u);
  if (pointwise_active_) pointwise(u, 0.5 * dt);
}

ComplexField between_jump_evolve(const ComplexField& u, const ComplexField& potential, const SolverConfig& cfg,
                                 double tau) {
  if (!(tau >= 0.0)) throw DomainError("between_jump_evolve: duration must be >= 0");
  require_same_grid(u.grid(), potential.grid(), "between_jump_evolve");
  u.require_finite("between_jump_evolve");
  ComplexField out = u;
  const std::size_t n = substep_count(tau, cfg.dt);
  if (n == 0) return out;
  SplitStepper stepper(potential, cfg.lambda, cfg.alpha);
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = k + 1 < n ? cfg.dt : tau - static_cast<double>(n - 1) * cfg.dt;
    stepper.step(out.values(), h);
    guard(out, std::min(tau, static_cast<double>(k + 1) * cfg.dt), cfg.boundary_threshold, worst);
  }
  return out;
}

PathRecord solve_path(const ComplexField& u0, const LevyMeasure& nu, const NoiseCoefficients& coeffs,
                      const CompoundPoissonPath& path, const SolverConfig& cfg) {
  return solve_path(u0, compensator_fields(nu, coeffs, u0.grid()).potential(), coeffs, path, cfg);
}

PathRecord solve_path(const ComplexField& u0, const ComplexField& potential, const NoiseCoefficients& coeffs,
                      const CompoundPoissonPath& path, const SolverConfig& cfg) {
  cfg.validate();
  u0.require_finite("solve_path");
  require_same_grid(u0.grid(), potential.grid(), "solve_path");
  const double horizon = cfg.horizon;
  if (std::abs(path.horizon - horizon) > 1e-12 * std::max(1.0, horizon))
    throw DomainError("solve_path: path horizon differs from solver horizon");
  SplitStepper stepper(potential, cfg.lambda, cfg.alpha);

  PathRecord rec{.times = {}, .series = {}, .fields = {}, .path = path, .snapshots = {}, .initial = u0,
                 .terminal = u0, .boundary_fraction_max = 0.0};
  ComplexField u = u0;
  auto record = [&](double t) {
    rec.times.push_back(t);
    rec.series.push(observe(u, t, cfg.lambda, cfg.alpha, cfg.gamma));
    if (cfg.keep_fields) rec.fields.push_back(u);
  };

  guard(u, 0.0, cfg.boundary_threshold, rec.boundary_fraction_max);
  record(0.0);

  const std::size_t steps = substep_count(horizon, cfg.dt);
  auto grid_time = [&](std::size_t k) { return k == steps ? horizon : static_cast<double>(k) * cfg.dt; };
  std::size_t next_jump = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    double now = grid_time(k);
    const double end = grid_time(k + 1);
    // Steps are cut so that every jump lands exactly on a step boundary.
    while (next_jump < path.jumps.size() && path.jumps[next_jump].time <= end) {
      const Jump& jump = path.jumps[next_jump];
      if (jump.time > now) {
        stepper.step(u.values(), jump.time - now);
        guard(u, jump.time, cfg.boundary_threshold, rec.boundary_fraction_max);
        now = jump.time;
      }
      const auto mark = jump.values();
      ComplexField post = apply_jump(u, mark, coeffs);
      if (cfg.keep_fields) rec.snapshots.push_back({jump, u, post});
      u = std::move(post);
      guard(u, jump.time, cfg.boundary_threshold, rec.boundary_fraction_max);
      ++next_jump;
    }
    if (end > now) {
      stepper.step(u.values(), end - now);
      guard(u, end, cfg.boundary_threshold, rec.boundary_fraction_max);
    }
    if ((k + 1) % cfg.record_stride == 0 || k + 1 == steps) record(end);
  }
  rec.terminal = u;
  return rec;
}

PathRecord solve_truncated(const ComplexField& u0, const LevyMeasure& nu, const NoiseCoefficients& coeffs,
                           std::uint64_t seed, const SolverConfig& cfg, std::optional<TruncationSpec> coupling) {
  cfg.validate();
  const TruncationSpec finest = coupling.value_or(cfg.truncation);
  const LevyMeasure restricted = restrict(nu, cfg.truncation);
  const CompoundPoissonPath path = sample_coupled_path(nu, finest, cfg.truncation, cfg.horizon, seed);
  return solve_path(u0, restricted, coeffs, path, cfg);
}

double mild_residual(const PathRecord& record, const LevyMeasure& nu, const NoiseCoefficients& coeffs,
                     const SolverConfig& cfg, double t, QuadratureRule rule) {
  if (record.fields.size() != record.times.size())
    throw DomainError("mild_residual: record was produced without keep_fields");
  const double tol = 1e-12 * std::max(1.0, cfg.horizon);
  auto at = std::find_if(record.times.begin(), record.times.end(), [&](double s) { return std::abs(s - t) <= tol; });
  if (at == record.times.end()) throw DomainError("mild_residual: t is not a recorded time");
  const std::size_t last = static_cast<std::size_t>(at - record.times.begin());
  const double t_end = record.times[last];

  // Knots: recorded times and jump times up to t. `before`/`after` are the
  // one-sided limits of the cadlag path at the knot.
  struct Knot {
    double s;
    const ComplexField* before;
    const ComplexField* after;
  };
  std::vector<Knot> knots;
  std::size_t j = 0;
  const auto& snaps = record.snapshots;
  for (std::size_t r = 0; r <= last; ++r) {
    const double s = record.times[r];
    while (j < snaps.size() && snaps[j].jump.time < s) {
      knots.push_back({snaps[j].jump.time, &snaps[j].pre, &snaps[j].post});
      ++j;
    }
    if (j < snaps.size() && snaps[j].jump.time == s) {
      knots.push_back({s, &snaps[j].pre, &record.fields[r]});
      ++j;
    } else {
      knots.push_back({s, &record.fields[r], &record.fields[r]});
    }
  }

  const GridSpec& grid = record.initial.grid();
  const ComplexField potential = compensator_fields(nu, coeffs, grid).potential();
  std::vector<cplx> total(grid.size());

  auto accumulate = [&](std::vector<cplx> f, double s, double weight) {
    forward_transform(grid, f);
    const double lag = t_end - s;
    for (std::size_t i = 0; i < f.size(); ++i)
      total[i] += weight * std::polar(1.0, four_pi_sq * grid.frequency_squared(i) * lag) * f[i];
  };

  accumulate(std::vector<cplx>(record.initial.values().begin(), record.initial.values().end()), 0.0, 1.0);
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double width = knots[k + 1].s - knots[k].s;
    if (width <= 0.0) continue;
    if (rule == QuadratureRule::left_point) {
      accumulate(duhamel_integrand(*knots[k].after, potential, cfg.lambda, cfg.alpha), knots[k].s, width);
    } else {
      accumulate(duhamel_integrand(*knots[k].after, potential, cfg.lambda, cfg.alpha), knots[k].s, 0.5 * width);
      accumulate(duhamel_integrand(*knots[k + 1].before, potential, cfg.lambda, cfg.alpha), knots[k + 1].s,
                 0.5 * width);
    }
  }
  // Jump part of the compensated integral: -i g(Y_n) u(T_n-) at each T_n <= t.
  for (const auto& snap : snaps) {
    if (snap.jump.time > t_end) break;
    const auto mark = snap.jump.values();
    std::vector<cplx> f(grid.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = -I * coeffs.g(mark[i]) * snap.pre[i];
    accumulate(std::move(f), snap.jump.time, 1.0);
  }
  inverse_transform(grid, total);
  return relative_l2_distance(ComplexField(grid, std::move(total)), record.fields[last]);
}

void write_series_csv(const ObservableSeries& series, const std::filesystem::path& path) {
  std::string out = "t,mass,kinetic,potential,hamiltonian,virial,h1_norm,hgamma_norm\r\n";
  for (const auto& s : series.samples()) {
    for (double v : {s.t, s.mass, s.kinetic, s.potential, s.hamiltonian, s.virial, s.h1_norm}) {
      out += format_number(v);
      out += ',';
    }
    out += format_number(s.hgamma_norm);
    out += "\r\n";
  }
  write_text_file(path, out);
}

}  // namespace jumpnls
