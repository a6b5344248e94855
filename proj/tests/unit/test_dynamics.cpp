#include <doctest.h>

#include <cmath>

#include "wnls/dynamics.hpp"
#include "wnls/gibbs.hpp"
#include "wnls/parallel.hpp"

using namespace wnls;

namespace {

SpectralField random_field(int N, std::uint64_t seed, double scale = 1.0) {
  auto rng = make_rng(seed, 0);
  SpectralField u(N);
  for (auto k : shell_modes(N)) u.set(k, scale * complex_gaussian(rng) / k.bracket());
  return u;
}

EvolutionConfig config(double t1, double dt, Scheme scheme = Scheme::ip_rk4) {
  EvolutionConfig c;
  c.scheme = scheme;
  c.dt = dt;
  c.t1 = t1;
  return c;
}

}  // namespace

TEST_CASE("truncated rhs") {
  const WickContext ctx = WickContext::make(1, 4);
  CHECK(sobolev_norm(rhs_truncated(SpectralField(4), ctx), 0) == 0.0);

  const Wavenumber k{1, -1};
  const cplx a{0.9, 0.4};
  const SpectralField f = rhs_truncated(SpectralField::single_mode(4, k, a), ctx);
  const cplx expect = cplx(0, -1) * (double(k.norm2()) + std::norm(a) - 2 * ctx.sigma_N) * a;
  CHECK(std::abs(f[k] - expect) < 1e-13);
  CHECK(sobolev_norm(f, 0) == doctest::Approx(std::abs(expect)).epsilon(1e-13));

  for (int r = 1; r <= 3; ++r) {
    const WickContext c = WickContext::make(r, 6);
    const SpectralField u = random_field(6, 30 + r);
    CHECK(std::abs(inner(u, rhs_truncated(u, c)).real()) < 1e-12 * sobolev_norm(u, 0));
  }
}

TEST_CASE("gauged rhs") {
  const WickContext ctx = WickContext::make(1, 4);
  CHECK(sobolev_norm(rhs_gauged(SpectralField(4), ctx, 0.0), 0) == 0.0);
  const SpectralField v = random_field(4, 40);
  const SpectralField g = rhs_gauged(v, ctx, 0.3);
  SpectralField ref = gauged_nonlinearity(v, ctx, 0.3, GaugedPath::direct);
  for (auto k : shell_modes(4)) ref.set(k, cplx(0, -1) * (double(k.norm2()) * v[k] + ref[k]));
  CHECK(max_abs_diff(g, ref) < 1e-13 * sobolev_norm(ref, 0));
  const WickContext ctx2 = WickContext::make(2, 6);
  const SpectralField w = random_field(6, 41);
  CHECK(std::abs(inner(w, rhs_gauged(w, ctx2, 0.5)).real()) < 1e-12 * sobolev_norm(w, 0));
}

TEST_CASE("linear evolution is exact") {
  const WickContext ctx = WickContext::make(1, 8);
  const SpectralField u = random_field(8, 42);
  for (Scheme s : {Scheme::ip_rk4, Scheme::ip_gauss4, Scheme::strang}) {
    EvolutionConfig c = config(0.7, 0.01, s);
    c.nonlinear = false;
    const Trajectory tr = evolve(u, ctx, c, false);
    CHECK(max_abs_diff(tr.states.back(), linear_flow(u, 0.7)) < 1e-12);
    CHECK(kinetic_energy(tr.states.back(), 8) == doctest::Approx(kinetic_energy(u, 8)).epsilon(1e-13));
  }
}

TEST_CASE("single zero mode closed form") {
  const WickContext ctx = WickContext::make(1, 1);
  const cplx a{1.2, -0.5};
  const SpectralField u = SpectralField::single_mode(1, {0, 0}, a);
  const cplx exact = a * std::exp(cplx(0, -(std::norm(a) - 2 * ctx.sigma_N)));
  for (Scheme s : {Scheme::ip_rk4, Scheme::ip_gauss4, Scheme::strang}) {
    const Trajectory tr = evolve(u, ctx, config(1.0, 1e-3, s), false);
    CHECK(std::abs(tr.states.back()[{0, 0}] - exact) < 1e-8);
  }
}

TEST_CASE("group law and time reversal") {
  const WickContext ctx = WickContext::make(1, 6);
  const SpectralField u = random_field(6, 43);
  const double dt = 1e-3;
  const SpectralField a = evolve(u, ctx, config(0.6, dt), false).states.back();
  const SpectralField half = evolve(u, ctx, config(0.25, dt), false).states.back();
  const SpectralField b = evolve(half, ctx, config(0.35, dt), false).states.back();
  CHECK(max_abs_diff(a, b) < 1e-7);

  EvolutionConfig back = config(-0.6, dt);
  const SpectralField c = evolve(a, ctx, back, false).states.back();
  CHECK(max_abs_diff(c, u) < 1e-7);
}

TEST_CASE("gauge transform") {
  const int N = 4;
  const WickContext ctx = WickContext::make(1, N);
  const SpectralField u0 = random_field(N, 44);
  EvolutionConfig c = config(0.5, default_dt(N) / 4);
  c.save_stride = 32;
  const Trajectory u = evolve(u0, ctx, c, false);
  const Trajectory v = gauge_forward(u, ctx);
  REQUIRE(v.size() == u.size());
  for (std::size_t j = 0; j < u.size(); ++j)
    for (auto k : shell_modes(N)) CHECK(std::abs(std::abs(v.states[j][k]) - std::abs(u.states[j][k])) < 1e-14);

  const Trajectory back = gauge_inverse(v, ctx);
  for (std::size_t j = 0; j < u.size(); ++j) CHECK(max_abs_diff(back.states[j], u.states[j]) < 1e-8);

  const Trajectory direct = evolve(u0, ctx, c, true);
  double err = 0;
  for (auto k : shell_modes(N))
    err = std::max(err, std::abs(direct.states.back()[k] - v.states.back()[k]));
  CHECK(err <= 1e-6);

  const Trajectory simpson = gauge_forward(u, ctx, PhaseSource::saved_grid);
  CHECK(max_abs_diff(simpson.states.back(), v.states.back()) < 1e-6);
}

TEST_CASE("conservation and order") {
  const int N = 6;
  const WickContext ctx = WickContext::make(1, N);
  const SpectralField u0 = random_field(N, 45);
  const double dt = default_dt(N);
  const ConservationReport a = conservation_report(evolve(u0, ctx, config(0.5, dt), false));
  const ConservationReport b = conservation_report(evolve(u0, ctx, config(0.5, dt / 2), false));
  // RK4 is not mass conserving; the Gauss scheme is.
  CHECK(a.max_mass_drift < 1e-6);
  CHECK(a.max_energy_drift < 1e-6);
  const double ratio = a.max_energy_drift / b.max_energy_drift;
  CHECK(ratio > 8);
  CHECK(ratio < 40);

  const ConservationReport g = conservation_report(evolve(u0, ctx, config(0.5, dt, Scheme::ip_gauss4), false));
  CHECK(g.max_mass_drift < 1e-12);
}

TEST_CASE("evolve_symmetric covers both directions") {
  const WickContext ctx = WickContext::make(1, 4);
  const SpectralField u0 = random_field(4, 46);
  const double dt = 1.0 / 256;
  const Trajectory tr = evolve_symmetric(u0, ctx, 0.25, dt, 4, true);
  CHECK(tr.times.front() == doctest::Approx(-0.25));
  CHECK(tr.times.back() == doctest::Approx(0.25));
  CHECK(tr.size() == 33);
  CHECK(max_abs_diff(tr.states[16], u0) == 0.0);
}

TEST_CASE("cumulative_simpson") {
  std::vector<double> f;
  const double h = 0.1;
  for (int j = 0; j <= 10; ++j) f.push_back(std::pow(j * h, 3));
  const auto F = cumulative_simpson(f, h);
  REQUIRE(F.size() == f.size());
  CHECK(F[0] == 0.0);
  CHECK(F[10] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(F[4] == doctest::Approx(std::pow(0.4, 4) / 4).epsilon(1e-12));
}

TEST_CASE("schemes") {
  CHECK(parse_scheme("ip-rk4") == Scheme::ip_rk4);
  CHECK(parse_scheme(scheme_name(Scheme::strang)) == Scheme::strang);
  CHECK_THROWS(parse_scheme("euler"));
  CHECK(default_dt(10) == doctest::Approx(1e-3));
}
