#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <set>

#include "jumpnls/dynamics.hpp"
#include "jumpnls/io.hpp"
#include "support.hpp"

using namespace jumpnls;
using testing::gaussian;
using testing::sample;

namespace {

constexpr double pi = std::numbers::pi;
const GridSpec grid(1, 256, 16.0);

MarkPtr bump(double amp, double center = 0.0, double width = 1.0) {
  return std::make_shared<const MarkFunction>(MarkFunction::gaussian_bump(grid, amp, {center}, width));
}

MarkPtr constant_mark(double c) {
  return std::make_shared<const MarkFunction>(grid, std::vector<double>(grid.size(), c));
}

ComplexField sech(double amp = 1.0) {
  return sample(grid, [amp](double x) { return cplx(amp / std::cosh(x)); });
}

SolverConfig config(double lambda, double dt, double horizon = 1.0) {
  SolverConfig c;
  c.lambda = lambda;
  c.alpha = 3.0;
  c.dt = dt;
  c.horizon = horizon;
  c.test_mode = lambda <= 0.0;
  return c;
}

LevyMeasure three_atoms() {
  return LevyMeasure({{1.0, bump(0.5, 0.0, 2.0)}, {2.0, bump(0.8, 1.0, 1.5)}, {0.5, bump(-0.6, -1.0, 3.0)}}, {});
}

ComplexField laplacian(const ComplexField& u) {
  ComplexField s = to_fourier(u);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= -4.0 * pi * pi * u.grid().frequency_squared(i);
  return from_fourier(s);
}

}  // namespace

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.test_mode = true;
  CHECK_NOTHROW(c.validate());
  c.alpha = 0.5;
  CHECK_NOTHROW(c.validate());
  c.dt = 2.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("nonlinear phase step") {
  const ComplexField u = sample(grid, [](double x) { return cplx(std::exp(-x * x), 0.3 * std::sin(x) * std::exp(-x * x)); });
  SUBCASE("lambda = 0") { CHECK(nonlinear_phase_step(u, 0.0, 3.0, 0.1) == u); }
  SUBCASE("constant modulus") {
    const ComplexField one = sample(grid, [](double) { return cplx(1.0); });
    const ComplexField v = nonlinear_phase_step(one, 1.0, 3.0, 0.1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::abs(std::abs(v[i]) - 1.0) <= 1e-15);
      CHECK(std::abs(std::arg(v[i]) - 0.1) <= 1e-15);
    }
  }
  SUBCASE("L2 norm preserved") {
    const ComplexField v = nonlinear_phase_step(u, 2.0, 3.0, 0.37);
    CHECK(std::abs(lp_norm(v, 2) - lp_norm(u, 2)) <= 1e-14 * lp_norm(u, 2));
  }
  SUBCASE("sub-linear power at zeros") {
    ComplexField z = u;
    z[10] = 0.0;
    const ComplexField v = nonlinear_phase_step(z, 1.0, 0.5, 0.1);
    CHECK(v.is_finite());
    CHECK(v[10] == cplx(0.0));
  }
}

TEST_CASE("potential step") {
  const ComplexField u = gaussian(grid);
  SUBCASE("V = 0") { CHECK(potential_step(u, ComplexField(grid), 0.3) == u); }
  SUBCASE("real V preserves mass") {
    const ComplexField v = sample(grid, [](double x) { return cplx(std::sin(x) + 2.0); });
    CHECK(std::abs(mass(potential_step(u, v, 0.3)) / mass(u) - 1.0) <= 1e-14);
  }
  SUBCASE("pure damping") {
    const double c = 0.7;
    const double dt = 0.05;
    const ComplexField v = sample(grid, [c](double) { return cplx(0.0, -c); });
    CHECK(std::abs(mass(potential_step(u, v, dt)) / (mass(u) * std::exp(-2 * c * dt)) - 1.0) <= 1e-12);
  }
}

TEST_CASE("apply_jump") {
  const ComplexField u = sample(grid, [](double x) { return cplx(std::exp(-x * x / 2), 0.2 * x * std::exp(-x * x)); });
  SUBCASE("g = 0") { CHECK(apply_jump(u, *bump(0.9), zero_coefficients()) == u); }
  SUBCASE("phase rotation preserves mass") {
    for (double theta : {0.3, 1.0, 2.5}) {
      const ComplexField v = apply_jump(u, *bump(-1.7, 0.4, 0.8), phase_rotation(theta));
      CHECK(std::abs(mass(v) / mass(u) - 1.0) <= 1e-13);
    }
  }
  SUBCASE("linear g with constant mark") {
    const double c = 0.6;
    const ComplexField v = apply_jump(u, *constant_mark(c), linear_coefficients(1.0, 0.0));
    CHECK(std::abs(mass(v) / (mass(u) * (1 + c * c)) - 1.0) <= 1e-13);
  }
  SUBCASE("factor is 1 - i g") {
    const ComplexField v = apply_jump(u, *constant_mark(0.5), linear_coefficients(1.0, 0.0));
    CHECK(std::abs(v[100] - u[100] * cplx(1.0, -0.5)) < 1e-15);
  }
}

TEST_CASE("between_jump_evolve") {
  SUBCASE("free flow reduces to the free group") {
    const ComplexField u = gaussian(grid);
    const ComplexField v = between_jump_evolve(u, ComplexField(grid), config(0.0, 0.01), 0.73);
    CHECK(relative_l2_distance(v, free_propagate(u, 0.73)) <= 1e-11);
  }
  SUBCASE("tau = 0") {
    const ComplexField u = sech();
    CHECK(between_jump_evolve(u, ComplexField(grid), config(1.0, 0.01), 0.0) == u);
  }
  SUBCASE("Strang self-convergence") {
    const ComplexField u = sech();
    const ComplexField zero(grid);
    const double dt = 0.02;
    const ComplexField ref = between_jump_evolve(u, zero, config(1.0, dt / 8), 1.0);
    const double e1 = relative_l2_distance(between_jump_evolve(u, zero, config(1.0, dt), 1.0), ref);
    const double e2 = relative_l2_distance(between_jump_evolve(u, zero, config(1.0, dt / 2), 1.0), ref);
    CHECK(e1 / e2 >= 3.0);
    CHECK(e1 / e2 <= 5.0);
  }
  SUBCASE("boundary monitor") {
    SolverConfig c = config(1.0, 0.01);
    c.boundary_threshold = 1e-30;
    CHECK_THROWS_AS(between_jump_evolve(sech(), ComplexField(grid), c, 0.5), NumericalAbort);
  }
  SUBCASE("substep count ignores roundoff slivers") {
    CHECK(substep_count(1.0, 0.1) == 10);
    CHECK(substep_count(0.3, 0.1) == 3);
    CHECK(substep_count(0.35, 0.1) == 4);
    CHECK(substep_count(0.0, 0.1) == 0);
  }
}

TEST_CASE("sign audit against the drift") {
  // (one step - u0) / dt must match -i Lap u + i lambda |u|^{alpha-1} u - i V u up to O(dt).
  const ComplexField u = sample(grid, [](double x) { return cplx(std::exp(-x * x / 2), 0.3 * std::exp(-(x - 1) * (x - 1))); });
  const ComplexField v =
      sample(grid, [](double x) { return cplx(0.3 * std::exp(-x * x), -0.2 * std::exp(-x * x / 4)); });
  const double lambda = 1.5;
  const double alpha = 3.0;
  const ComplexField lap = laplacian(u);
  ComplexField rhs(grid);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    const cplx I(0.0, 1.0);
    rhs[i] = -I * lap[i] + I * lambda * std::pow(std::abs(u[i]), alpha - 1) * u[i] - I * v[i] * u[i];
  }
  auto defect = [&](double dt) {
    SolverConfig c = config(lambda, dt);
    ComplexField step = between_jump_evolve(u, v, c, dt);
    ComplexField diff(grid);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = (step[i] - u[i]) / dt;
    return relative_l2_distance(diff, rhs);
  };
  const double d1 = defect(1e-4);
  const double d2 = defect(1e-5);
  CHECK(d1 < 1e-2);
  CHECK(d1 / d2 == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("split stepper reverses with a real potential") {
  const ComplexField v = sample(grid, [](double x) { return cplx(0.5 * std::exp(-x * x)); });
  SplitStepper stepper(v, 1.0, 3.0);
  const ComplexField u = sech();
  ComplexField w = u;
  for (int k = 0; k < 10; ++k) stepper.step(w.values(), 0.01);
  for (int k = 0; k < 10; ++k) stepper.step(w.values(), -0.01);
  CHECK(relative_l2_distance(w, u) < 1e-12);
}

TEST_CASE("solve_path") {
  SUBCASE("empty path, free flow") {
    const ComplexField u0 = gaussian(grid);
    const SolverConfig c = config(0.0, 0.01);
    const CompoundPoissonPath path{.horizon = 1.0, .jumps = {}, .seed = 0, .epsilon = 0.0};
    const PathRecord rec = solve_path(u0, LevyMeasure(), zero_coefficients(), path, c);
    CHECK(relative_l2_distance(rec.terminal, free_propagate(u0, 1.0)) <= 1e-11);
    CHECK(rec.times.size() == 101);
    CHECK(rec.times.back() == 1.0);
  }
  SUBCASE("phase rotation conserves mass at every record") {
    const LevyMeasure nu = three_atoms();
    const auto coeffs = phase_rotation(1.0);
    const ComplexField u0 = gaussian(grid);
    const double m0 = mass(u0);
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
      const PathRecord rec = solve_truncated(u0, nu, coeffs, seed, config(1.0, 1e-3));
      for (const auto& s : rec.series.samples()) CHECK(std::abs(s.mass - m0) <= 1e-10 * m0);
    }
  }
  SUBCASE("single linear jump at T/2") {
    const double c = 0.4;
    const ComplexField u0 = gaussian(grid);
    const CompoundPoissonPath path{.horizon = 1.0, .jumps = {{0.5, constant_mark(c), 1.0}}, .seed = 0, .epsilon = 0.0};
    const PathRecord rec = solve_path(u0, ComplexField(grid), linear_coefficients(1.0, 0.0), path, config(0.0, 0.01));
    CHECK(std::abs(mass(rec.terminal) / (mass(u0) * (1 + c * c)) - 1.0) <= 1e-10);
    REQUIRE(rec.snapshots.size() == 1);
    CHECK(rec.snapshots[0].jump.time == 0.5);
  }
  SUBCASE("jump between grid points is applied at its own time") {
    // A jump of g = 0 at an off-grid time must not change the result.
    const ComplexField u0 = sech();
    const CompoundPoissonPath none{.horizon = 1.0, .jumps = {}, .seed = 0, .epsilon = 0.0};
    const CompoundPoissonPath one{.horizon = 1.0, .jumps = {{0.4567, bump(0.3), 1.0}}, .seed = 0, .epsilon = 0.0};
    const SolverConfig c = config(0.0, 0.01);
    const auto a = solve_path(u0, ComplexField(grid), zero_coefficients(), none, c);
    const auto b = solve_path(u0, ComplexField(grid), zero_coefficients(), one, c);
    CHECK(relative_l2_distance(a.terminal, b.terminal) < 1e-13);
    CHECK(a.times == b.times);
  }
  SUBCASE("record stride") {
    SolverConfig c = config(1.0, 0.01);
    c.record_stride = 8;
    const CompoundPoissonPath path{.horizon = 1.0, .jumps = {}, .seed = 0, .epsilon = 0.0};
    const auto rec = solve_path(sech(), ComplexField(grid), zero_coefficients(), path, c);
    CHECK(rec.times.size() == 1 + 12 + 1);
    CHECK(rec.times.back() == 1.0);
  }
}

TEST_CASE("solve_truncated") {
  const LevyMeasure nu = three_atoms();
  const auto coeffs = phase_rotation(1.0);
  const ComplexField u0 = gaussian(grid);
  SUBCASE("cutoff above every atom gives plain NLS") {
    SolverConfig c = config(1.0, 0.01);
    c.truncation = {1.0};
    const auto rec = solve_truncated(u0, nu, coeffs, 5, c);
    CHECK(rec.path.jumps.empty());
    const auto plain = between_jump_evolve(u0, ComplexField(grid), config(1.0, 0.01), 1.0);
    CHECK(relative_l2_distance(rec.terminal, plain) < 1e-14);
  }
  SUBCASE("same seed, same record") {
    const auto a = solve_truncated(u0, nu, coeffs, 77, config(1.0, 0.01));
    const auto b = solve_truncated(u0, nu, coeffs, 77, config(1.0, 0.01));
    CHECK(a.terminal == b.terminal);
    CHECK(a.series.mass() == b.series.mass());
    CHECK(a.path.jumps.size() == b.path.jumps.size());
  }
  SUBCASE("coupled cutoffs nest") {
    const LevyMeasure stable({}, {{bump(1.0, 0.0, 2.0), AmplitudeDensity(1.0, 1.5, 0.0, 1.0)}});
    SolverConfig coarse = config(1.0, 0.01);
    coarse.truncation = {0.2};
    SolverConfig fine = coarse;
    fine.truncation = {0.1};
    for (std::uint64_t seed : {3u, 4u}) {
      const auto a = solve_truncated(u0, stable, coeffs, seed, coarse, TruncationSpec{0.05});
      const auto b = solve_truncated(u0, stable, coeffs, seed, fine, TruncationSpec{0.05});
      std::set<double> fine_times;
      for (const auto& j : b.path.jumps) fine_times.insert(j.time);
      for (const auto& j : a.path.jumps) CHECK(fine_times.contains(j.time));
    }
  }
}

TEST_CASE("mild residual") {
  SUBCASE("t = 0") {
    const auto rec = solve_truncated(gaussian(grid), three_atoms(), phase_rotation(1.0), 3, config(1.0, 0.01));
    CHECK(mild_residual(rec, three_atoms(), phase_rotation(1.0), config(1.0, 0.01), 0.0) <= 1e-13);
  }
  SUBCASE("free flow") {
    const SolverConfig c = config(0.0, 0.01);
    const auto rec = solve_truncated(gaussian(grid), three_atoms(), zero_coefficients(), 3, c);
    for (double t : rec.times) CHECK(mild_residual(rec, three_atoms(), zero_coefficients(), c, t) <= 1e-11);
  }
  SUBCASE("first-order under dt halving") {
    const LevyMeasure nu = three_atoms();
    const auto coeffs = phase_rotation(1.0);
    for (std::uint64_t seed : {11u, 12u}) {
      const CompoundPoissonPath path = sample_path(nu, 1.0, seed);
      double prev = 0.0;
      for (double dt : {2e-3, 1e-3}) {
        const SolverConfig c = config(1.0, dt);
        const auto rec = solve_path(gaussian(grid), nu, coeffs, path, c);
        const double r = mild_residual(rec, nu, coeffs, c, 1.0);
        if (prev > 0.0) {
          CHECK(prev / r >= 1.5);
          CHECK(prev / r <= 2.5);
        }
        prev = r;
      }
    }
  }
  SUBCASE("needs stored fields") {
    SolverConfig c = config(1.0, 0.01);
    c.keep_fields = false;
    const auto rec = solve_truncated(gaussian(grid), three_atoms(), phase_rotation(1.0), 3, c);
    CHECK_THROWS_AS(mild_residual(rec, three_atoms(), phase_rotation(1.0), c, 1.0), DomainError);
  }
}

TEST_CASE("series CSV") {
  const auto rec = solve_truncated(gaussian(grid), three_atoms(), phase_rotation(1.0), 3, config(1.0, 0.1));
  const auto path = std::filesystem::temp_directory_path() / "jumpnls_series_test.csv";
  write_series_csv(rec.series, path);
  const std::string text = read_text_file(path);
  CHECK(text.rfind("t,mass,kinetic,potential,hamiltonian,virial,h1_norm,hgamma_norm\r\n", 0) == 0);
  std::size_t lines = 0;
  for (std::size_t pos = 0; (pos = text.find("\r\n", pos)) != std::string::npos; pos += 2) ++lines;
  CHECK(lines == rec.times.size() + 1);
  std::filesystem::remove(path);
}
