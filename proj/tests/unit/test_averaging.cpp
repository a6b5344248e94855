#include <doctest.h>

#include <cmath>

#include "wnls/averaging.hpp"
#include "wnls/gibbs.hpp"

using namespace wnls;

namespace {

double trajectory_sup(const Trajectory& t) {
  double s = 0;
  for (const auto& u : t.states) s = std::max(s, sobolev_norm(u, 0));
  return s;
}

Trajectory constant_mode(const std::vector<double>& times, int N, Wavenumber k) {
  Trajectory tr;
  tr.times = times;
  for (double t : times) tr.states.push_back(SpectralField::single_mode(N, k, std::exp(cplx(0, -k.norm2() * t))));
  return tr;
}

}  // namespace

TEST_CASE("scale set") {
  CHECK(in_scale_set(4, 0.5, 0.1));
  CHECK(in_scale_set(4, 2, 0.1));
  CHECK_FALSE(in_scale_set(4, 4, 0.1));
  CHECK_FALSE(in_scale_set(4, 0.25, 0.1));
  // 8^{0.9} = 6.50
  CHECK(scales_below(8, 0.1) == std::vector<double>{0.5, 1, 2, 4});
  CHECK(top_scale(32, 0.1) == 16);
  CHECK(top_scale(2, 0.1) == 1);
  CHECK(mass(project_scale(sample_gff(8, 1).field, 0.5)) == 0.0);
}

TEST_CASE("bump") {
  CHECK(bump(0.3) == 1.0);
  CHECK(bump(-1.0) == 1.0);
  CHECK(bump(2.0) == 0.0);
  CHECK(bump(1.5) > 0.0);
  CHECK(bump(1.5) < 1.0);
  CHECK(bump(1.2) > bump(1.7));
}

TEST_CASE("time grid") {
  const TimeGrid g = TimeGrid::for_cutoff(32);
  CHECK(g.frames_per_unit == 512);
  CHECK(g.dt <= default_dt(32));
  CHECK(g.dt * g.stride == doctest::Approx(1.0 / 512));
  CHECK(TimeGrid::for_cutoff(4).frames_per_unit == 128);
}

TEST_CASE("ladder decomposition at N = 4") {
  ScaleLadder lad(1, 4, 3);
  const int N = 4;

  SUBCASE("psi at L = 1/2 is the free flow of the band data") {
    const Trajectory& p = lad.psi(N, 0.5);
    const Trajectory ref = free_evolution(delta_band(lad.data(), N), p.times);
    CHECK(trajectory_sup(trajectory_difference(p, ref)) < 1e-12);
  }

  SUBCASE("H at L = 1/2 is diagonal on the band") {
    const KernelMatrix H = lad.H(N, 0.5);
    CHECK(H.columns.size() == band_modes(N).size());
    CHECK(H.columns.size() == 36);  // 4 <= |k|^2 <= 15
    double err = 0;
    for (std::size_t j = 0; j < H.columns.size(); ++j) {
      const Trajectory ref = constant_mode(H.column_traj[j].times, N, H.columns[j]);
      err = std::max(err, trajectory_sup(trajectory_difference(H.column_traj[j], ref)));
    }
    CHECK(err < 1e-12);
  }

  SUBCASE("kernel reconstructs psi") {
    const KernelMatrix H = lad.H(N, 1);
    const Trajectory& p = lad.psi(N, 1);
    double err = 0;
    for (std::size_t t = 0; t < p.size(); ++t) {
      SpectralField rec(N);
      for (std::size_t j = 0; j < H.columns.size(); ++j) rec.axpy(lad.data()[H.columns[j]], H.column_traj[j].states[t]);
      err = std::max(err, max_abs_diff(rec, p.states[t]));
    }
    CHECK(err < 1e-8);
  }

  SUBCASE("linear in the data") {
    auto g1 = sample_gff(N, 8).field, g2 = sample_gff(N, 9).field;
    const SpectralField d1 = delta_band(g1, N), d2 = delta_band(g2, N);
    const cplx a{0.4, 1.1};
    const auto out = lad.psi_probe(N, 2, {d1, d2, d1 + a * d2});
    double err = 0;
    for (std::size_t t = 0; t < out[0].size(); ++t)
      err = std::max(err, max_abs_diff(out[2].states[t], out[0].states[t] + a * out[1].states[t]));
    CHECK(err < 1e-8);
  }

  SUBCASE("telescoping and z_N(0) = 0") {
    Trajectory sum = lad.psi(N, 0.5);
    for (double L : {1.0, 2.0}) sum = trajectory_difference(sum, [&] {
      Trajectory neg = lad.zeta(N, L);
      for (auto& s : neg.states) s *= -1.0;
      return neg;
    }());
    CHECK(trajectory_sup(trajectory_difference(sum, lad.psi(N, 2))) < 1e-12);

    const Trajectory z = lad.z(N);
    std::size_t zero = 0;
    for (std::size_t i = 0; i < z.size(); ++i)
      if (std::abs(z.times[i]) < std::abs(z.times[zero])) zero = i;
    CHECK(z.times[zero] == 0.0);
    CHECK(sobolev_norm(z.states[zero], 0) < 1e-14);
  }

  SUBCASE("h at L = 1/2 is H") {
    const KernelMatrix a = lad.h(N, 0.5), b = lad.H(N, 0.5);
    CHECK(zb_norm(a, lad.grid(), 0.5) == doctest::Approx(zb_norm(b, lad.grid(), 0.5)));
  }
}

TEST_CASE("kernel norms of the diagonal kernel") {
  ScaleLadder lad(1, 4, 5);
  const KernelMatrix H = lad.H(4, 0.5);
  const TimeGrid& g = lad.grid();
  const double b = 0.55;
  // Every column twists back to the bare window.
  const Trajectory ones = constant_mode(H.column_traj[0].times, 1, {0, 0});
  const double profile = xsb_norm(ones, g, 0.0, b);
  CHECK(yb_norm(H, g, b) == doctest::Approx(profile).epsilon(1e-10));
  CHECK(zb_norm(H, g, b) == doctest::Approx(std::sqrt(double(H.columns.size())) * profile).epsilon(1e-10));
  const double p = yb_norm_power(H, g, b, 2, 50, 1);
  CHECK(p <= yb_norm(H, g, b) * (1 + 1e-12));
  CHECK(p == doctest::Approx(yb_norm(H, g, b)).epsilon(1e-6));
  CHECK(log_weighted_zb_norm(H, g, b, 0.0) == doctest::Approx(std::log(zb_norm(H, g, b))));

  KernelMatrix zero = kernel_difference(H, H);
  CHECK(zb_norm(zero, g, b) == 0.0);
  CHECK(yb_norm(zero, g, b) == 0.0);
}

TEST_CASE("X^{0,0} is the windowed space-time l2 norm") {
  ScaleLadder lad(1, 4, 6);
  const Trajectory& v = lad.v(4);
  const TimeGrid& g = lad.grid();
  const double dt = v.times[1] - v.times[0];
  double acc = 0;
  for (std::size_t j = 0; j + 1 < v.size(); ++j) acc += std::pow(g.window(v.times[j]), 2) * mass(v.states[j]);
  CHECK(xsb_norm(v, g, 0, 0) == doctest::Approx(std::sqrt(dt * acc)).epsilon(1e-12));
  const Trajectory zero = trajectory_difference(v, v);
  CHECK(xsb_norm(zero, g, 0.3, 0.5) == 0.0);
}

TEST_CASE("ols_slope") {
  CHECK(ols_slope({1, 2, 3, 4}, {3, 5, 7, 9}) == doctest::Approx(2.0));
  CHECK(ols_slope({0, 1, 0, 1}, {1, 0, 1, 0}) == doctest::Approx(-1.0));
}
