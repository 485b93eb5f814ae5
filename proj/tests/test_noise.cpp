#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <set>

#include "jumpnls/noise.hpp"
#include "support.hpp"

using namespace jumpnls;

namespace {

const GridSpec grid(1, 128, 8.0);

MarkPtr bump(double amp, double center = 0.0, double width = 1.0) {
  return std::make_shared<const MarkFunction>(MarkFunction::gaussian_bump(grid, amp, {center}, width));
}

MarkPtr constant_mark(double c) {
  return std::make_shared<const MarkFunction>(grid, std::vector<double>(grid.size(), c));
}

}  // namespace

TEST_CASE("mark norms") {
  const MarkPtr z = bump(-0.7, 1.0, 0.5);
  CHECK(z->sup_norm() == doctest::Approx(0.7).epsilon(1e-12));
  // sup |z'| of a Gaussian bump is amp / (width sqrt(e)).
  CHECK(z->gradient_sup_norm() == doctest::Approx(0.7 / (0.5 * std::sqrt(std::numbers::e))).epsilon(1e-3));
  CHECK(z->w1inf_norm() == std::max(z->sup_norm(), z->gradient_sup_norm()));
  CHECK_THROWS_AS(MarkFunction::gaussian_bump(grid, 1.0, {0.0, 0.0}, 1.0), DomainError);
  ComplexField f(grid);
  f[2] = cplx(0.0, 1.0);
  CHECK_THROWS_AS(MarkFunction::from_field(f), DomainError);
}

TEST_CASE("amplitude density") {
  const AmplitudeDensity stable(1.0, 1.5, 0.0, 1.0);
  CHECK_FALSE(stable.integrable());
  CHECK(std::isinf(stable.moment(0)));
  CHECK(stable.moment(2) == doctest::Approx(2.0 / 3.0));
  CHECK(stable.with_lower(0.25).integrable());
  CHECK(stable.with_lower(0.25).moment(0) == doctest::Approx(2.0 * (2.0 - 1.0)));

  const AmplitudeDensity d(0.5, 0.5, 0.1, 2.0);
  for (double k : {0.0, 1.0, 2.0, 4.0})
    CHECK(d.moment(k) == doctest::Approx(integrate([&](double a) { return std::pow(a, k) * d(a); }, 0.1, 2.0)));
  for (double q : {0.0, 0.3, 0.9}) {
    const double a = d.quantile(q);
    CHECK(integrate([&](double s) { return d(s); }, 0.1, a) / d.moment(0) == doctest::Approx(q));
  }
  CHECK_THROWS_AS(AmplitudeDensity(1.0, 0.0, 1.0, 0.5), DomainError);
}

TEST_CASE("restrict") {
  SUBCASE("atoms below the cutoff are dropped") {
    const LevyMeasure nu({{1.0, bump(0.5)}, {2.0, bump(0.05)}}, {});
    const LevyMeasure r = restrict(nu, {0.1});
    REQUIRE(r.atoms().size() == 1);
    CHECK(r.atoms()[0].rate == 1.0);
    CHECK(r.atoms()[0].mark == nu.atoms()[0].mark);
  }
  SUBCASE("epsilon = 0 keeps a finite model") {
    const LevyMeasure nu({{1.0, bump(0.5)}, {2.0, bump(0.05)}}, {{bump(1.0), AmplitudeDensity(1, 0, 0.2, 1)}});
    const LevyMeasure r = restrict(nu, {0.0});
    CHECK(r.atoms().size() == 2);
    REQUIRE(r.families().size() == 1);
    CHECK(r.families()[0].density.lower() == 0.2);
    CHECK(total_rate(r) == doctest::Approx(total_rate(nu)));
  }
  SUBCASE("uniform amplitude family") {
    const LevyMeasure nu({}, {{bump(1.0), AmplitudeDensity(1.0, 0.0, 0.0, 1.0)}});
    const LevyMeasure r = restrict(nu, {0.25});
    REQUIRE(r.families().size() == 1);
    CHECK(r.families()[0].density.lower() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.families()[0].density.upper() == 1.0);
    CHECK(total_rate(r) == doctest::Approx(0.75 * total_rate(nu)).epsilon(1e-10));
  }
  SUBCASE("family entirely below the cutoff") {
    const LevyMeasure nu({}, {{bump(0.1), AmplitudeDensity(1.0, 0.0, 0.0, 1.0)}});
    CHECK(restrict(nu, {0.2}).empty());
  }
}

TEST_CASE("total_rate") {
  CHECK(total_rate(LevyMeasure({{1.0, bump(0.3)}, {2.0, bump(0.4)}}, {})) == 3.0);
  CHECK(total_rate(LevyMeasure()) == 0.0);
  const LevyMeasure uniform({}, {{bump(1.0), AmplitudeDensity(1.0, 0.0, 0.0, 1.0)}});
  CHECK(std::abs(total_rate(uniform) - 1.0) <= 1e-10);
  const LevyMeasure stable({}, {{bump(1.0), AmplitudeDensity(1.0, 1.5, 0.0, 1.0)}});
  CHECK_FALSE(stable.finite_activity());
  CHECK_THROWS_AS(total_rate(stable), DomainError);
}

TEST_CASE("Gauss-Legendre integration") {
  CHECK(integrate([](double x) { return std::exp(x); }, 0.0, 1.0) == doctest::Approx(std::numbers::e - 1).epsilon(1e-14));
  CHECK(integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK_THROWS_AS(integrate([](double x) { return 1.0 / x; }, 0.0, 1.0), QuadratureError);
}

TEST_CASE("compound Poisson sampling") {
  SUBCASE("empty measure gives no jumps") {
    CHECK_THROWS_AS(LevyMeasure({{0.0, bump(0.5)}}, {}), DomainError);
    CHECK(sample_path(LevyMeasure(), 5.0, 11).jumps.empty());
  }
  SUBCASE("mean count rho T = 4") {
    const LevyMeasure nu({{1.5, bump(0.5)}, {0.5, bump(-0.2)}}, {});
    const double T = 2.0;
    const int M = 10000;
    double sum = 0.0;
    for (int k = 0; k < M; ++k) sum += static_cast<double>(sample_path(nu, T, substream_seed(99, k)).jumps.size());
    CHECK(std::abs(sum / M - 4.0) <= 3.0 * std::sqrt(4.0 / M));
  }
  SUBCASE("fixed seed is reproducible") {
    const LevyMeasure nu({{3.0, bump(0.5)}}, {{bump(1.0), AmplitudeDensity(1, 0.5, 0.1, 1)}});
    const auto a = sample_path(nu, 3.0, 12345);
    const auto b = sample_path(nu, 3.0, 12345);
    REQUIRE(a.jumps.size() == b.jumps.size());
    REQUIRE_FALSE(a.jumps.empty());
    for (std::size_t i = 0; i < a.jumps.size(); ++i) {
      CHECK(a.jumps[i].time == b.jumps[i].time);
      CHECK(a.jumps[i].amplitude == b.jumps[i].amplitude);
      CHECK(a.jumps[i].profile == b.jumps[i].profile);
    }
  }
  SUBCASE("jump times are sorted inside (0, T]") {
    const LevyMeasure nu({{20.0, bump(0.5)}}, {});
    const auto p = sample_path(nu, 1.0, 5);
    CHECK(std::is_sorted(p.jumps.begin(), p.jumps.end(), [](const Jump& a, const Jump& b) { return a.time < b.time; }));
    for (const auto& j : p.jumps) {
      CHECK(j.time > 0.0);
      CHECK(j.time <= 1.0);
    }
  }
  SUBCASE("amplitudes follow the density") {
    // Uniform on (0.5, 1]: mean amplitude 0.75.
    const LevyMeasure nu({}, {{bump(1.0), AmplitudeDensity(10.0, 0.0, 0.5, 1.0)}});
    double sum = 0.0;
    std::size_t n = 0;
    for (int k = 0; k < 200; ++k)
      for (const auto& j : sample_path(nu, 1.0, substream_seed(3, k)).jumps) {
        CHECK(j.amplitude > 0.5);
        CHECK(j.amplitude <= 1.0);
        sum += j.amplitude;
        ++n;
      }
    CHECK(sum / n == doctest::Approx(0.75).epsilon(0.02));
  }
}

TEST_CASE("coupled sampling restricts") {
  const LevyMeasure nu({{1.0, bump(0.9)}}, {{bump(1.0), AmplitudeDensity(1.0, 1.5, 0.0, 1.0)}});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto coarse = sample_coupled_path(nu, {0.05}, {0.2}, 1.0, seed);
    const auto fine = sample_coupled_path(nu, {0.05}, {0.1}, 1.0, seed);
    std::set<double> fine_times;
    for (const auto& j : fine.jumps) fine_times.insert(j.time);
    for (const auto& j : coarse.jumps) {
      CHECK(fine_times.contains(j.time));
      CHECK(j.sup_norm() > 0.2);
    }
    CHECK(coarse.jumps.size() <= fine.jumps.size());
    const auto filtered = filter_path(fine, {0.2});
    CHECK(filtered.jumps.size() == coarse.jumps.size());
  }
}

TEST_CASE("substream seeds differ") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(substream_seed(42, k));
  CHECK(seen.size() == 1000);
  CHECK(substream_seed(42, 0) != substream_seed(43, 0));
}

TEST_CASE("compensator fields") {
  SUBCASE("single atom") {
    const MarkPtr z = bump(0.7, 0.5, 1.2);
    const auto coeffs = phase_rotation(1.0);
    const auto c = compensator_fields(LevyMeasure({{2.0, z}}, {}), coeffs, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      worst = std::max(worst, std::abs(c.z_nu[i] - 2.0 * coeffs.g(z->values()[i])));
    CHECK(worst == 0.0);
  }
  SUBCASE("zero coefficients") {
    const auto c = compensator_fields(LevyMeasure({{2.0, bump(0.3)}}, {}), zero_coefficients(), grid);
    CHECK(lp_norm(c.z_nu, INFINITY) == 0.0);
    CHECK(lp_norm(c.h_drift, INFINITY) == 0.0);
  }
  SUBCASE("two atoms, linear g") {
    const MarkPtr z1 = bump(0.4, -1.0);
    const MarkPtr z2 = bump(-0.3, 2.0, 0.5);
    const auto c = compensator_fields(LevyMeasure({{1.5, z1}, {2.5, z2}}, {}), linear_coefficients(1.0, 0.0), grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      worst = std::max(worst, std::abs(c.z_nu[i] - (1.5 * z1->values()[i] + 2.5 * z2->values()[i])));
    CHECK(worst <= 1e-14);
  }
  SUBCASE("family against closed form") {
    // g = xi, density uniform on (0.2, 1]: int a z da = z (1 - 0.04) / 2.
    const MarkPtr z = bump(1.0);
    const auto c = compensator_fields(LevyMeasure({}, {{z, AmplitudeDensity(1.0, 0.0, 0.2, 1.0)}}),
                                      linear_coefficients(1.0, 0.0), grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      worst = std::max(worst, std::abs(c.z_nu[i] - 0.48 * z->values()[i]));
    CHECK(worst <= 1e-12);
  }
  SUBCASE("phase rotation gives a real potential") {
    const auto c = compensator_fields(LevyMeasure({{1.0, bump(0.8)}, {0.5, bump(-0.3, 1.0)}}, {}),
                                      phase_rotation(1.3), grid);
    const ComplexField v = c.potential();
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i].imag()) < 1e-15);
  }
}

TEST_CASE("Levy constants") {
  SUBCASE("single atom") {
    const auto k = levy_constants(LevyMeasure({{1.0, bump(0.6)}}, {}));
    CHECK(k.c0 == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(k.c3 == doctest::Approx(0.6 * 0.6 * 0.6 * 0.6).epsilon(1e-12));
  }
  SUBCASE("empty model") {
    const auto k = levy_constants(LevyMeasure());
    CHECK(k.c0 == 0.0);
    CHECK(k.c1 == 0.0);
    CHECK(k.c2 == 0.0);
    CHECK(k.c3 == 0.0);
  }
  SUBCASE("two atoms") {
    const auto k = levy_constants(LevyMeasure({{1.0, constant_mark(0.5)}, {2.0, constant_mark(0.1)}}, {}));
    CHECK(std::abs(k.c0 - 0.27) <= 1e-14);
  }
  SUBCASE("stable-like family has finite second moments") {
    const auto k = levy_constants(LevyMeasure({}, {{bump(1.0), AmplitudeDensity(1.0, 1.5, 0.0, 1.0)}}));
    CHECK(k.all_finite());
    CHECK(k.c0 == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  }
}

TEST_CASE("hypothesis classification") {
  auto check = [](const NoiseCoefficients& c, bool growth, bool pathwise, bool mean) {
    const auto r = check_hypotheses(c, -2.0, 2.0, 2001);
    CHECK(r.growth.holds == growth);
    CHECK(r.mass_pathwise.holds == pathwise);
    CHECK(r.mass_mean.holds == mean);
  };
  SUBCASE("phase rotation") { check(phase_rotation(1.0), true, true, true); }
  SUBCASE("sine-mean") { check(sine_mean(), true, false, true); }
  SUBCASE("linear") { check(linear_coefficients(1.0, 1.0), true, false, false); }
  SUBCASE("zero") { check(zero_coefficients(), true, true, true); }
  SUBCASE("growth violation is detected") {
    NoiseCoefficients c = linear_coefficients(1.0, 0.0);
    c.growth_g = 0.5;
    CHECK_FALSE(check_hypotheses(c, -2.0, 2.0, 101).growth.holds);
  }
}

TEST_CASE("coefficient registry") {
  CHECK(coefficient_names().size() == 4);
  CHECK(make_coefficients("phase-rotation", {{"theta", 2.0}}).growth_g == 2.0);
  CHECK(make_coefficients("linear", {{"c1", 1.0}, {"c2", -3.0}}).growth_h == 3.0);
  CHECK_THROWS_AS(make_coefficients("phase-rotation", {{"thetta", 1.0}}), DomainError);
  CHECK_THROWS_AS(make_coefficients("cubic", {}), DomainError);
  for (const auto& name : coefficient_names()) CHECK_NOTHROW(make_coefficients(name, {}).validate());
}

TEST_CASE("mark value range") {
  const LevyMeasure nu({{1.0, bump(0.4)}, {1.0, bump(-0.9)}}, {{bump(0.5), AmplitudeDensity(1.0, 0.0, 0.1, 1.2)}});
  const auto [lo, hi] = mark_value_range(nu);
  CHECK(hi == doctest::Approx(0.9));
  CHECK(lo == -hi);
}
