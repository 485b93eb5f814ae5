// Command-line driver: one subcommand per study, a YAML config in, a run
// directory with the effective config, CSV series and JSON reports out.
//
// Exit codes: 0 success, 1 config error, 2 numerical abort, 3 failed check.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "jumpnls/analysis.hpp"
#include "jumpnls/config.hpp"
#include "jumpnls/io.hpp"
#include "jumpnls/montecarlo.hpp"

namespace fs = std::filesystem;
using namespace jumpnls;
using nlohmann::json;

namespace {

enum Exit { ok = 0, config_error = 1, numerical_abort = 2, check_failed = 3 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

struct Run {
  RunConfig cfg;
  fs::path dir;
};

Run prepare(const Options& opt, std::size_t default_paths, std::size_t default_stride) {
  Run run;
  run.cfg = load_config(opt.config);
  RunConfig& c = run.cfg;
  if (opt.seed) c.seed = *opt.seed;
  if (opt.threads) c.threads = *opt.threads;
  if (c.paths == 0) c.paths = default_paths;
  if (c.solver.record_stride == 0) c.solver.record_stride = default_stride;
  const std::string effective = emit_config(c);
  if (!opt.out.empty())
    run.dir = opt.out;
  else if (!c.output_directory.empty())
    run.dir = c.output_directory;
  else
    run.dir = fs::path("runs") / fnv1a_hex(effective);
  fs::create_directories(run.dir);
  write_text_file(run.dir / "config.yaml", effective);
  return run;
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json check_json(const HypothesisCheck& c) {
  return {{"holds", c.holds}, {"worst_xi", c.worst_xi}, {"worst_violation", c.worst_violation}};
}

std::string mark(bool b) { return b ? "pass" : "FAIL"; }

int cmd_simulate(const Options& opt) {
  Run run = prepare(opt, 1, 1);
  const RunConfig& c = run.cfg;
  SolverConfig solver = c.solver;
  solver.keep_fields = !c.dump_times.empty();
  const PathRecord rec = solve_truncated(c.initial_field(), c.measure(), c.coefficients(), c.seed, solver);
  write_series_csv(rec.series, run.dir / "series.csv");

  json dumps = json::array();
  for (double t : c.dump_times) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rec.times.size(); ++i)
      if (std::abs(rec.times[i] - t) < std::abs(rec.times[best] - t)) best = i;
    const std::string name = "field_t" + format_number(rec.times[best]) + ".bin";
    write_field(rec.fields[best], run.dir / name);
    dumps.push_back({{"requested", t}, {"time", rec.times[best]}, {"file", name}});
  }

  const double m0 = mass(c.initial_field());
  double drift = 0.0;
  for (const auto& s : rec.series.samples()) drift = std::max(drift, std::abs(s.mass - m0) / m0);
  json jumps = json::array();
  for (const auto& j : rec.path.jumps) jumps.push_back({{"time", j.time}, {"sup_norm", j.sup_norm()}});
  write_json(run.dir / "summary.json", {{"jumps", jumps},
                                        {"initial_mass", m0},
                                        {"max_relative_mass_drift", drift},
                                        {"sup_mass", rec.series.sup_mass()},
                                        {"sup_hamiltonian", rec.series.sup_hamiltonian()},
                                        {"sup_virial", rec.series.sup_virial()},
                                        {"boundary_fraction_max", rec.boundary_fraction_max},
                                        {"field_dumps", dumps}});
  std::cout << "simulate: " << rec.path.jumps.size() << " jumps, max relative mass drift "
            << format_number(drift) << "\nrun directory: " << run.dir.string() << "\n";
  return ok;
}

int cmd_ensemble(const Options& opt) {
  Run run = prepare(opt, 2000, 8);
  const RunConfig& c = run.cfg;
  const EnsembleConfig ec = c.ensemble();
  const EnsembleSummary s = run_ensemble(ec);
  const LevyMeasure restricted = restrict(ec.measure, ec.solver.truncation);
  const auto [lo, hi] = restricted.empty() ? std::pair{-1.0, 1.0} : mark_value_range(restricted);
  const HypothesisReport hyp = check_hypotheses(ec.coefficients, lo, hi, c.hypothesis_samples);

  json checks = json::object();
  bool pass = true;
  if (hyp.mass_mean.holds) {
    const bool conserved = mean_mass_conserved(s, c.sigmas);
    const bool unsigned_drift = mean_mass_drift_unsigned(s, c.sigmas);
    checks["mean_mass_conserved"] = conserved;
    checks["mean_mass_drift_unsigned"] = unsigned_drift;
    pass = pass && conserved && unsigned_drift;
  }
  if (hyp.mass_pathwise.holds) {
    const bool pathwise = s.max_relative_mass_drift <= 1e-10;
    checks["pathwise_mass_conserved"] = pathwise;
    pass = pass && pathwise;
  }
  checks["jump_count_consistent"] = jump_count_consistent(s, c.sigmas);

  json report = to_json(s);
  report["checks"] = checks;
  write_json(run.dir / "ensemble.json", report);

  std::ostringstream csv;
  csv << "t,mean_mass,var_mass,stderr_mass\r\n";
  for (std::size_t r = 0; r < s.times.size(); ++r)
    csv << format_number(s.times[r]) << ',' << format_number(s.mean_mass[r]) << ',' << format_number(s.var_mass[r])
        << ',' << format_number(s.stderr_mass[r]) << "\r\n";
  write_text_file(run.dir / "mean_mass.csv", csv.str());

  std::cout << "ensemble: " << s.completed << "/" << s.paths << " paths, checks " << checks.dump()
            << "\nrun directory: " << run.dir.string() << "\n";
  if (s.partial) return numerical_abort;
  return pass ? ok : check_failed;
}

int cmd_verify(const Options& opt) {
  Run run = prepare(opt, 1, 1);
  const RunConfig& c = run.cfg;
  const LevyMeasure nu = restrict(c.measure(), c.solver.truncation);
  const auto [lo, hi] = nu.empty() ? std::pair{-1.0, 1.0} : mark_value_range(nu);
  const HypothesisReport h = check_hypotheses(c.coefficients(), lo, hi, c.hypothesis_samples);
  const LevyConstants k = levy_constants(c.measure());

  bool pass = true;
  for (const auto& name : c.require) {
    if (name == "growth") pass = pass && h.growth.holds;
    if (name == "mass-pathwise") pass = pass && h.mass_pathwise.holds;
    if (name == "mass-mean") pass = pass && h.mass_mean.holds;
  }
  write_json(run.dir / "hypotheses.json",
             {{"coefficients", h.coefficients},
              {"xi_min", h.xi_min},
              {"xi_max", h.xi_max},
              {"samples", h.samples},
              {"growth", check_json(h.growth)},
              {"mass_pathwise", check_json(h.mass_pathwise)},
              {"mass_mean", check_json(h.mass_mean)},
              {"constants", {{"c0", k.c0}, {"c1", k.c1}, {"c2", k.c2}, {"c3", k.c3}, {"finite", k.all_finite()}}},
              {"required", c.require},
              {"pass", pass}});
  std::cout << "coefficients " << h.coefficients << " on [" << format_number(lo) << ", " << format_number(hi)
            << "]\n  growth: " << mark(h.growth.holds) << "\n  mass-pathwise: " << mark(h.mass_pathwise.holds)
            << "\n  mass-mean: " << mark(h.mass_mean.holds) << "\n  C0=" << format_number(k.c0)
            << " C1=" << format_number(k.c1) << " C2=" << format_number(k.c2) << " C3=" << format_number(k.c3)
            << "\nrun directory: " << run.dir.string() << "\n";
  return pass ? ok : check_failed;
}

int cmd_study(const Options& opt, bool truncation) {
  Run run = prepare(opt, 200, 8);
  const ConvergenceReport r = truncation ? truncation_study(run.cfg.ensemble()) : dt_study(run.cfg.ensemble());
  write_json(run.dir / (r.kind + "_study.json"), to_json(r));
  std::cout << r.kind << " study: differences " << json(r.differences).dump() << " -> " << mark(r.pass)
            << "\nrun directory: " << run.dir.string() << "\n";
  return r.pass ? ok : check_failed;
}

int cmd_dispersive(const Options& opt) {
  Run run = prepare(opt, 1, 1);
  const RunConfig& c = run.cfg;
  if (c.dispersive_times.empty()) throw ConfigError(c.source.string() + ": dispersive.times is required");
  const std::vector<double> ps = c.dispersive_p.empty() ? std::vector<double>{std::numeric_limits<double>::infinity()} : c.dispersive_p;
  const ComplexField phi = c.initial_field();
  json reports = json::array();
  bool pass = true;
  for (double p : ps) {
    const DecayReport d = dispersive_decay_check(phi, p, c.dispersive_times, c.solver.boundary_threshold);
    json j = to_json(d);
    bool ok_p = false;
    if (p == 2.0) {
      const auto [lo, hi] = std::minmax_element(d.ratios.begin(), d.ratios.end());
      ok_p = *hi - *lo <= 1e-11;
      j["ratio_spread"] = *hi - *lo;
    } else {
      ok_p = std::abs(d.fitted_exponent - d.theoretical_exponent) <= 0.05 * std::abs(d.theoretical_exponent);
    }
    j["pass"] = ok_p;
    pass = pass && ok_p;
    reports.push_back(j);
    std::cout << "p=" << format_number(p) << ": fitted " << format_number(d.fitted_exponent) << " vs "
              << format_number(d.theoretical_exponent) << " -> " << mark(ok_p) << "\n";
  }
  write_json(run.dir / "dispersive.json", {{"reports", reports}, {"pass", pass}});
  std::cout << "run directory: " << run.dir.string() << "\n";
  return pass ? ok : check_failed;
}

int cmd_mild_residual(const Options& opt) {
  Run run = prepare(opt, 20, 1);
  const QuadratureRule rule =
      run.cfg.quadrature == "trapezoid" ? QuadratureRule::trapezoid : QuadratureRule::left_point;
  const ResidualReport r = mild_residual_study(run.cfg.ensemble(), rule);
  write_json(run.dir / "mild_residual.json", to_json(r));
  std::cout << "mild residual: ratios in [" << format_number(r.ratio_min) << ", " << format_number(r.ratio_max)
            << "] -> " << mark(r.pass) << "\nrun directory: " << run.dir.string() << "\n";
  return r.pass ? ok : check_failed;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return numerical_abort;
  } catch (const QuadratureError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return numerical_abort;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-step solver and Monte Carlo studies for NLS with multiplicative jump noise"};
  app.require_subcommand(1);
  Options opt;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "YAML configuration file")->required();
    sub->add_option("--out", opt.out, "run directory (default: runs/<config hash>)");
    sub->add_option("--seed", opt.seed, "override the configured seed");
    sub->add_option("--threads", opt.threads, "worker threads (0 = hardware concurrency)");
    return sub;
  };
  auto* simulate = add("simulate", "solve one path and write its observable series");
  auto* ensemble = add("ensemble", "run an ensemble and test mass conservation");
  auto* verify = add("verify-hypotheses", "classify the noise coefficients");
  auto* trunc = add("truncation-study", "coupled small-jump cutoff study");
  auto* dt = add("dt-study", "time-step convergence on shared noise paths");
  auto* disp = add("dispersive-test", "decay rate of the free group");
  auto* mild = add("mild-residual", "Duhamel residual under dt refinement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  if (simulate->parsed()) return guarded([&] { return cmd_simulate(opt); });
  if (ensemble->parsed()) return guarded([&] { return cmd_ensemble(opt); });
  if (verify->parsed()) return guarded([&] { return cmd_verify(opt); });
  if (trunc->parsed()) return guarded([&] { return cmd_study(opt, true); });
  if (dt->parsed()) return guarded([&] { return cmd_study(opt, false); });
  if (disp->parsed()) return guarded([&] { return cmd_dispersive(opt); });
  if (mild->parsed()) return guarded([&] { return cmd_mild_residual(opt); });
  return config_error;
}
