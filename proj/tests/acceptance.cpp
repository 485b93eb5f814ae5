// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <string>

#include "jumpnls/analysis.hpp"
#include "jumpnls/config.hpp"
#include "jumpnls/io.hpp"
#include "jumpnls/montecarlo.hpp"

using namespace jumpnls;

namespace {

const std::filesystem::path configs = JUMPNLS_CONFIGS;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) { return format_number(x); }

RunConfig load(const std::string& name, std::size_t stride) {
  RunConfig c = load_config(configs / name);
  if (c.solver.record_stride == 0) c.solver.record_stride = stride;
  return c;
}

double relative_change(double a, double b) { return std::abs(a - b) / std::abs(a); }

Outcome pathwise_mass() {
  RunConfig c = load("pathwise.yaml", 1);
  c.paths = 100;
  const EnsembleSummary s = run_ensemble(c.ensemble());
  return {s.completed == 100 && s.max_relative_mass_drift <= 1e-10,
          "max relative drift " + num(s.max_relative_mass_drift) + " over " + std::to_string(s.completed) +
              " paths (tol 1e-10)"};
}

Outcome mean_mass() {
  RunConfig c = load("mean_mass.yaml", 8);
  c.paths = 2000;
  const EnsembleSummary s = run_ensemble(c.ensemble());
  const bool conserved = mean_mass_conserved(s, 3.0);
  const bool no_sign = mean_mass_drift_unsigned(s, 3.0);
  // Worst record relative to its allowed band, 3 stderr plus the roundoff floor.
  double worst = 0.0;
  std::size_t at = 0;
  for (std::size_t r = 0; r < s.times.size(); ++r) {
    const double band = 3.0 * s.stderr_mass[r] + 1e-12 * s.initial_mass;
    const double q = std::abs(s.mean_mass[r] - s.initial_mass) / band;
    if (q > worst) worst = q, at = r;
  }
  return {!s.partial && conserved && no_sign,
          "worst |mean - m0| / (3 stderr + 1e-12 m0) " + num(worst) + " at t=" + num(s.times[at]) + " (stderr " +
              num(s.stderr_mass[at]) + "), drift slope " + num(s.mass_slope.mean) + " +- " +
              num(s.mass_slope.stderr_) + " (3 sigma)"};
}

Outcome energy_virial() {
  RunConfig c = load("pathwise.yaml", 8);
  c.paths = 400;
  EnsembleConfig e = c.ensemble();
  const EnsembleSummary big = run_ensemble(e);
  std::vector<double> h_half, v_half;
  for (std::size_t k = 0; k < 200; ++k) {
    h_half.push_back(big.per_path[k].sup_hamiltonian);
    v_half.push_back(big.per_path[k].sup_virial);
  }
  const double h_m = estimate(h_half).mean;
  const double v_m = estimate(v_half).mean;
  e.paths = 200;
  e.solver.dt /= 2;
  const EnsembleSummary fine = run_ensemble(e);

  const double dh_dt = relative_change(h_m, fine.sup_hamiltonian.mean);
  const double dv_dt = relative_change(v_m, fine.sup_virial.mean);
  const double dh_m = relative_change(h_m, big.sup_hamiltonian.mean);
  const double dv_m = relative_change(v_m, big.sup_virial.mean);
  const bool finite = std::isfinite(h_m) && std::isfinite(v_m) && std::isfinite(big.sup_hamiltonian.mean) &&
                      std::isfinite(big.sup_virial.mean) && std::isfinite(fine.sup_hamiltonian.mean) &&
                      std::isfinite(fine.sup_virial.mean);
  const bool pass = finite && !big.partial && !fine.partial && dh_dt <= 0.05 && dv_dt <= 0.05 && dh_m <= 0.10 &&
                    dv_m <= 0.10;
  return {pass, "E sup H " + num(h_m) + ", E sup virial " + num(v_m) + "; dt/2 change " + num(dh_dt) + ", " +
                    num(dv_dt) + " (tol 0.05); 2M change " + num(dh_m) + ", " + num(dv_m) + " (tol 0.10)"};
}

Outcome dispersive() {
  const RunConfig c = load("dispersive.yaml", 1);
  const ComplexField phi = c.initial_field();
  const double inf = std::numeric_limits<double>::infinity();
  const DecayReport r_inf = dispersive_decay_check(phi, inf, c.dispersive_times);
  const DecayReport r_4 = dispersive_decay_check(phi, 4.0, c.dispersive_times);
  const DecayReport r_2 = dispersive_decay_check(phi, 2.0, c.dispersive_times);
  const auto [lo, hi] = std::minmax_element(r_2.ratios.begin(), r_2.ratios.end());
  const bool pass = std::abs(r_inf.fitted_exponent + 0.5) <= 0.05 * 0.5 &&
                    std::abs(r_4.fitted_exponent + 0.25) <= 0.05 * 0.25 && *hi - *lo <= 1e-11;
  return {pass, "p=inf slope " + num(r_inf.fitted_exponent) + ", p=4 slope " + num(r_4.fitted_exponent) +
                    ", p=2 ratio spread " + num(*hi - *lo)};
}

Outcome residual_halving() {
  RunConfig c = load("mild_residual.yaml", 1);
  c.paths = 20;
  const ResidualReport r = mild_residual_study(c.ensemble(), QuadratureRule::left_point);
  return {r.pass && r.residuals.size() == 20,
          "ratios in [" + num(r.ratio_min) + ", " + num(r.ratio_max) + "] over 20 paths (band [1.5, 2.5])"};
}

Outcome truncation() {
  RunConfig c = load("truncation.yaml", 8);
  c.paths = 200;
  const ConvergenceReport r = truncation_study(c.ensemble());
  std::string d;
  for (double x : r.differences) d += (d.empty() ? "" : ", ") + num(x);
  return {r.pass && r.differences.size() == 3, "D_j = [" + d + "] (strictly decreasing)"};
}

Outcome jump_statistics() {
  const RunConfig c = load("pathwise.yaml", 1);
  const LevyMeasure nu = c.measure();
  const double rho_t = total_rate(nu) * c.solver.horizon;
  const std::size_t m = 10000;
  const MeanEstimate e = sample_jump_counts(nu, c.solver.horizon, m, c.seed);
  const double band = 3.0 * std::sqrt(rho_t / static_cast<double>(m));
  return {std::abs(e.mean - rho_t) <= band,
          "mean count " + num(e.mean) + " vs rho T " + num(rho_t) + " (band " + num(band) + ")"};
}

Outcome classifier() {
  const RunConfig c = load("pathwise.yaml", 1);
  const auto [lo, hi] = mark_value_range(c.measure());
  struct Case {
    NoiseCoefficients coeffs;
    bool pathwise;
    bool mean;
  };
  const Case cases[] = {{make_coefficients("phase-rotation", {{"theta", 1.0}}), true, true},
                        {make_coefficients("sine-mean", {}), false, true},
                        {make_coefficients("linear", {{"c1", 1.0}, {"c2", 1.0}}), false, false}};
  bool pass = true;
  std::string detail;
  for (const auto& k : cases) {
    const HypothesisReport r = check_hypotheses(k.coeffs, lo, hi, 2001);
    pass = pass && r.mass_pathwise.holds == k.pathwise && r.mass_mean.holds == k.mean;
    detail += (detail.empty() ? "" : "; ") + k.coeffs.name + " (" + (r.mass_pathwise.holds ? "yes" : "no") + ", " +
              (r.mass_mean.holds ? "yes" : "no") + ")";
  }
  return {pass, detail};
}

Outcome strang_order() {
  const GridSpec g(1, 256, 16.0);
  ProfileSpec sech;
  sech.kind = "sech";
  const ComplexField u0 = profile_field(g, sech);
  const ComplexField zero(g);
  SolverConfig cfg;
  cfg.lambda = 1.0;
  cfg.alpha = 3.0;
  cfg.horizon = 1.0;
  const double dt = 0.02;
  auto evolve = [&](double step) {
    SolverConfig s = cfg;
    s.dt = step;
    return between_jump_evolve(u0, zero, s, cfg.horizon);
  };
  const ComplexField ref = evolve(dt / 8);
  const double e1 = relative_l2_distance(evolve(dt), ref);
  const double e2 = relative_l2_distance(evolve(dt / 2), ref);
  const double order = std::log2(e1 / e2);
  return {order >= 1.6 && order <= 2.4, "observed order " + num(order) + " (band [1.6, 2.4])"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"pathwise mass conservation", pathwise_mass},
      {"mean mass conservation", mean_mass},
      {"energy and virial bound proxies", energy_virial},
      {"dispersive decay", dispersive},
      {"mild-form residual", residual_halving},
      {"truncation convergence", truncation},
      {"jump statistics", jump_statistics},
      {"hypothesis classifier", classifier},
      {"deterministic solver order", strang_order},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
