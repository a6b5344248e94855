#include <doctest.h>

#include <cmath>
#include <vector>

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

Estimate plain_mean(const std::vector<double>& x) {
  double s = 0, s2 = 0;
  for (double v : x) s += v;
  const double m = s / x.size();
  for (double v : x) s2 += (v - m) * (v - m);
  return {m, std::sqrt(s2 / (x.size() - 1) / x.size())};
}

std::vector<double> masses(const GibbsEnsemble& e) {
  std::vector<double> m;
  for (const auto& u : e.samples) m.push_back(mass(u));
  return m;
}

}  // namespace

TEST_CASE("free field moments") {
  const int N = 8, count = 10000;
  std::vector<double> m, star, re;
  for (int i = 0; i < count; ++i) {
    const GffSample s = sample_gff(N, 1000 + i);
    const MassStats st = mass_stats(s.field, N);
    m.push_back(st.m_N);
    star.push_back(st.m_N_star);
    re.push_back(s.field[{1, 2}].real());
  }
  const Estimate em = plain_mean(m);
  CHECK(std::abs(em.mean - sigma(N)) < 3 * em.se);
  const Estimate es = plain_mean(star);
  CHECK(std::abs(es.mean) < 3 * es.se);
  const Estimate er = plain_mean(re);
  CHECK(std::abs(er.mean) < 3 * er.se);
}

TEST_CASE("gff sample structure") {
  const GffSample s = sample_gff(6, 42);
  for (auto k : shell_modes(6)) CHECK(std::abs(s.field[k] * k.bracket() - s.gaussians[k]) < 1e-15);
  CHECK(max_abs_diff(sample_gff(6, 42).field, s.field) == 0.0);
  CHECK(max_abs_diff(gff_from_gaussians(s.gaussians), s.field) == 0.0);
}

TEST_CASE("potential energy closed forms") {
  const int N = 4;
  const WickContext ctx = WickContext::make(1, N);
  const double s = ctx.sigma_N;
  // W^4(0) = 2 sigma^2, divided by r + 1.
  CHECK(potential_energy(SpectralField(N), ctx) == doctest::Approx(s * s).epsilon(1e-14));

  const cplx a{0.8, -1.3};
  const double A = std::norm(a);
  const SpectralField single = SpectralField::single_mode(N, {1, 1}, a);
  CHECK(potential_energy(single, ctx) == doctest::Approx((A * A - 4 * s * A + 2 * s * s) / 2).epsilon(1e-13));
  CHECK(kinetic_energy(single, N) == doctest::Approx(2 * A).epsilon(1e-15));

  // r = 2 at u = 0: W^6(0) = -6 sigma^3, divided by 3.
  const WickContext ctx2 = WickContext::make(2, N);
  CHECK(potential_energy(SpectralField(N), ctx2) == doctest::Approx(-2 * std::pow(ctx2.sigma_N, 3)).epsilon(1e-14));
}

TEST_CASE("potential energy is real and the Hamiltonian is phase invariant") {
  for (int i = 0; i < 100; ++i) {
    const int r = 1 + i % 3;
    const WickContext ctx = WickContext::make(r, 6);
    const SpectralField u = random_field(6, 500 + i);
    double v = 0;
    CHECK_NOTHROW(v = potential_energy(u, ctx));
    CHECK(std::isfinite(v));
    const double h = hamiltonian(u, ctx);
    const double hr = hamiltonian(std::polar(1.0, 0.1 * i) * u, ctx);
    CHECK(hr == doctest::Approx(h).epsilon(1e-12));
  }
}

TEST_CASE("W^{2r+1} is the gradient of V") {
  // dV(u)[w] = 2 Re <w, W^{2r+1}(u)>
  for (int r = 1; r <= 3; ++r) {
    const WickContext ctx = WickContext::make(r, 4);
    const SpectralField u = random_field(4, 60 + r);
    const SpectralField w = random_field(4, 70 + r);
    const double h = 1e-5;
    const double fd =
        (potential_energy(u + cplx(h) * w, ctx) - potential_energy(u - cplx(h) * w, ctx)) / (2 * h);
    const double an = 2 * inner(w, wick_power(u, 2 * r + 1, ctx.sigma_N)).real();
    CHECK(fd == doctest::Approx(an).epsilon(1e-6));
  }
}

TEST_CASE("importance weights are finite") {
  const GibbsEnsemble e = sample_gibbs_importance(4, 1, 200, 3);
  CHECK(e.size() == 200);
  CHECK(e.sampler_tag == "importance");
  for (double w : e.log_weights) CHECK(std::isfinite(w));
  double sum = 0;
  for (double w : e.normalized_weights()) {
    CHECK(w > 0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(std::isfinite(e.log_Z));
  CHECK(e.ess >= 1.0);
  CHECK(e.ess <= 200.0);
}

TEST_CASE("pCN without the weight preserves the free field") {
  GibbsOptions opt;
  opt.weight_off = true;
  const GibbsEnsemble e = sample_gibbs_pcn(4, 1, 20000, 0.3, 5, opt);
  const Estimate m = ensemble_estimate(e, masses(e));
  CHECK(std::abs(m.mean - sigma(4)) < 3 * m.se);
  // Without a weight every proposal is accepted.
  CHECK(e.acceptance_rate == doctest::Approx(1.0));
}

TEST_CASE("HMC and pCN agree on the truncated Gibbs measure") {
  const int N = 4;
  const GibbsEnsemble h = sample_gibbs_hmc(N, 1, 600, 9);
  CHECK(h.sampler_tag == "hmc");
  CHECK(h.acceptance_rate > 0.5);
  const GibbsEnsemble p = sample_gibbs_pcn(N, 1, 60000, 0.1, 10);
  const Estimate mh = ensemble_estimate(h, masses(h));
  const Estimate mp = ensemble_estimate(p, masses(p));
  CHECK(std::abs(mh.mean - mp.mean) < 3 * std::hypot(mh.se, mp.se));
  const Estimate vh = ensemble_estimate(h, h.potential);
  const Estimate vp = ensemble_estimate(p, p.potential);
  CHECK(std::abs(vh.mean - vp.mean) < 3 * std::hypot(vh.se, vp.se));

  // The Wick-ordered quartic weight favours |u|^2 near 2 sigma, so the Gibbs
  // mass exceeds the free-field mean sigma_N.
  CHECK(mh.mean - 3 * mh.se > sigma(N));
}

TEST_CASE("HMC is independent of the worker count") {
  GibbsOptions one, three;
  one.workers = 1;
  three.workers = 3;
  const GibbsEnsemble a = sample_gibbs_hmc(4, 1, 12, 21, {}, one);
  const GibbsEnsemble b = sample_gibbs_hmc(4, 1, 12, 21, {}, three);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(max_abs_diff(a.samples[i], b.samples[i]) == 0.0);
}

TEST_CASE("estimators") {
  const std::vector<double> lw(4, 0.0), x{1, 2, 3, 4};
  const Estimate w = weighted_mean(lw, x);
  CHECK(w.mean == doctest::Approx(2.5));
  CHECK(effective_sample_size(lw) == doctest::Approx(4.0));
  const std::vector<double> skew{0.0, -1000.0, -1000.0};
  CHECK(effective_sample_size(skew) == doctest::Approx(1.0));
  std::vector<double> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = double(i % 10);
  CHECK(batch_mean(y).mean == doctest::Approx(4.5));
}
