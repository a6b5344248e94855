#include <doctest.h>

#include <cmath>
#include <map>
#include <utility>

#include "wnls/parallel.hpp"
#include "wnls/wick.hpp"

using namespace wnls;

namespace {

SpectralField random_field(int N, std::uint64_t seed, double scale = 1.0) {
  auto rng = make_rng(seed, 0);
  SpectralField u(N);
  for (auto k : shell_modes(N)) u.set(k, scale * complex_gaussian(rng) / k.bracket());
  return u;
}

using Coeffs = std::map<std::pair<int, int>, cplx>;

Coeffs coeffs_of(const SpectralField& u) {
  Coeffs c;
  for (auto k : shell_modes(u.cutoff())) c[{k.kx, k.ky}] = u[k];
  return c;
}

cplx get(const Coeffs& c, int kx, int ky) {
  const auto it = c.find({kx, ky});
  return it == c.end() ? cplx(0) : it->second;
}

// Full (unprojected) products by direct convolution.
Coeffs conv(const Coeffs& a, const Coeffs& b) {
  Coeffs out;
  for (const auto& [ka, va] : a)
    for (const auto& [kb, vb] : b) out[{ka.first + kb.first, ka.second + kb.second}] += va * vb;
  return out;
}

Coeffs conj_field(const Coeffs& a) {
  Coeffs out;
  for (const auto& [k, v] : a) out[{-k.first, -k.second}] = std::conj(v);
  return out;
}

double rel_err(const SpectralField& got, const Coeffs& ref) {
  double err = 0, scale = 0;
  for (auto k : shell_modes(got.cutoff())) {
    const cplx r = get(ref, k.kx, k.ky);
    err = std::max(err, std::abs(got[k] - r));
    scale = std::max(scale, std::abs(r));
  }
  return err / std::max(scale, 1e-300);
}

Coeffs add_scaled(Coeffs a, const Coeffs& b, cplx s) {
  for (const auto& [k, v] : b) a[k] += s * v;
  return a;
}

// [N_3(v)]_k = sum over k1 - k2 + k3 = k, k2 not in {k1, k3} of v v* v, minus |v_k|^2 v_k.
// With w in place of the first factor this is the slot-1 polarization.
SpectralField n3_oracle(const SpectralField& w, const SpectralField& v) {
  const int N = std::max(w.cutoff(), v.cutoff());
  const auto modes = shell_modes(N);
  SpectralField out(N);
  for (auto k : modes) {
    cplx s = 0;
    for (auto k1 : modes)
      for (auto k2 : modes) {
        const Wavenumber k3 = k - k1 + k2;
        if (k2 == k1 || k2 == k3) continue;
        s += w[k1] * std::conj(v[k2]) * v[k3];
      }
    out.set(k, s - w[k] * std::conj(v[k]) * v[k]);
  }
  return out;
}

}  // namespace

TEST_CASE("sigma") {
  CHECK(sigma(1) == 1.0);
  CHECK(sigma(2) == doctest::Approx(13.0 / 3.0).epsilon(1e-15));
  for (int N = 64; N <= 512; N *= 2) CHECK(sigma(2 * N) / sigma(N) < 1.4);
}

TEST_CASE("c_rl and the coefficient lists") {
  CHECK(c_rl(1, 0) == 2);
  CHECK(c_rl(1, 1) == 1);
  CHECK(c_rl(2, 0) == 6);
  CHECK(c_rl(2, 1) == 6);
  CHECK(c_rl(2, 2) == 1);
  CHECK(c_rl(3, 0) == 24);

  const double s = 1.7;
  const auto e2 = even_wick_coefficients(2, s);
  REQUIRE(e2.size() == 3);
  CHECK(e2[0] == doctest::Approx(2 * s * s));
  CHECK(e2[1] == doctest::Approx(-4 * s));
  CHECK(e2[2] == doctest::Approx(1.0));
  const auto o1 = odd_wick_coefficients(1, s);
  REQUIRE(o1.size() == 2);
  CHECK(o1[0] == doctest::Approx(-2 * s));
  CHECK(o1[1] == doctest::Approx(1.0));

  const double h = 1e-6;
  for (int p = 1; p <= 3; ++p) {
    const auto d = even_wick_coefficients_ds(p, s);
    const auto a = even_wick_coefficients(p, s + h), b = even_wick_coefficients(p, s - h);
    for (std::size_t j = 0; j < d.size(); ++j) CHECK(d[j] == doctest::Approx((a[j] - b[j]) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("low Wick powers against convolution sums") {
  const SpectralField u = random_field(4, 11);
  const double s = 2.3;
  const Coeffs c = coeffs_of(u);
  const Coeffs rho = conv(c, conj_field(c));
  Coeffs one;
  one[{0, 0}] = 1.0;

  CHECK(rel_err(wick_power(u, 2, s), add_scaled(rho, one, -s)) < 1e-12);
  CHECK(rel_err(wick_power(u, 3, s), add_scaled(conv(rho, c), c, -2 * s)) < 1e-12);
  const Coeffs w4 = add_scaled(add_scaled(conv(rho, rho), rho, -4 * s), one, 2 * s * s);
  CHECK(rel_err(wick_power(u, 4, s), w4) < 1e-12);
}

TEST_CASE("pair-free Wick powers") {
  const SpectralField v = random_field(4, 12);
  const double m = mass(v);
  const Coeffs c = coeffs_of(v);
  const Coeffs rho = conv(c, conj_field(c));
  Coeffs one;
  one[{0, 0}] = 1.0;
  CHECK(rel_err(wick_pairfree(v, 2), add_scaled(rho, one, -m)) < 1e-12);
  CHECK(std::abs(mean(wick_pairfree(v, 2))) < 1e-12 * m);
  CHECK(rel_err(wick_pairfree(v, 3), add_scaled(conv(rho, c), c, -2 * m)) < 1e-12);

  const SpectralField single = SpectralField::single_mode(4, {1, -1}, {0.6, -0.8});
  CHECK(sobolev_norm(wick_pairfree(single, 2), 0) < 1e-14);
}

TEST_CASE("script_N") {
  const SpectralField v = random_field(4, 13);
  CHECK(sobolev_norm(script_N(v, 0), 0) < 1e-13);

  const SpectralField n3 = script_N(v, 1);
  const SpectralField ref = n3_oracle(v, v);
  CHECK(max_abs_diff(n3, ref) < 1e-12 * sobolev_norm(ref, 0));
  CHECK(max_abs_diff(n3, wick_pairfree(v, 3)) < 1e-12 * sobolev_norm(ref, 0));

  // A(N_{2p+1}(v) conj v) = A(:|v|^{2p+2}:)
  for (int p = 1; p <= 3; ++p) {
    const cplx lhs = inner(v, script_N(v, p));
    const cplx rhs = mean(wick_pairfree(v, 2 * p + 2, 1));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(rhs));
  }
}

TEST_CASE("polarized script_N") {
  const SpectralField v = random_field(4, 14);
  const SpectralField w = random_field(4, 15);
  const SpectralField p = script_N_polarized(1, PolarizationSlot::at(1), w, v);
  const SpectralField ref = n3_oracle(w, v);
  CHECK(max_abs_diff(p, ref) < 1e-12 * sobolev_norm(ref, 0));

  // Two single modes at different frequencies.
  const SpectralField vs = SpectralField::single_mode(4, {1, 0}, {0.7, 0.2});
  const SpectralField ws = SpectralField::single_mode(4, {0, 1}, {-0.3, 0.5});
  const SpectralField ps = script_N_polarized(1, PolarizationSlot::at(1), ws, vs);
  const SpectralField rs = n3_oracle(ws, vs);
  CHECK(max_abs_diff(ps, rs) < 1e-14);

  // With w = v every slot gives back N(v).
  for (int l = 1; l <= 3; ++l)
    for (int slot = 1; slot <= 2 * l + 1; ++slot)
      CHECK(max_abs_diff(script_N_polarized(l, PolarizationSlot::at(slot), v, v), script_N(v, l)) <
            1e-10 * sobolev_norm(script_N(v, l), 0));

  const cplx a{0.3, -1.1}, b{2.0, 0.4};
  const SpectralField w2 = random_field(4, 16);
  for (int slot : {1, 2, 3}) {
    const auto s = PolarizationSlot::at(slot);
    const SpectralField lhs = script_N_polarized(1, s, a * w + b * w2, v);
    SpectralField rhs = script_N_polarized(1, s, w, v);
    const cplx ca = s.parity == Parity::holomorphic ? a : std::conj(a);
    const cplx cb = s.parity == Parity::holomorphic ? b : std::conj(b);
    rhs *= ca;
    rhs.axpy(cb, script_N_polarized(1, s, w2, v));
    CHECK(max_abs_diff(lhs, rhs) < 1e-10 * sobolev_norm(rhs, 0));
  }
}

TEST_CASE("gauged nonlinearity") {
  const SpectralField v = random_field(4, 17);
  const Coeffs c = coeffs_of(v);
  const Coeffs rho = conv(c, conj_field(c));
  const Coeffs ref = add_scaled(conv(rho, c), c, -2 * mass(v));
  const WickContext ctx1 = WickContext::make(1, 4);
  for (double m_star : {0.0, 1.3})
    for (auto path : {GaugedPath::direct, GaugedPath::expansion})
      CHECK(rel_err(gauged_nonlinearity(v, ctx1, m_star, path), ref) < 1e-12);

  const WickContext ctx2 = WickContext::make(2, 4);
  const double m_star = mass(v) - ctx2.sigma_N;
  const SpectralField d = gauged_nonlinearity(v, ctx2, m_star, GaugedPath::direct);
  const SpectralField e = gauged_nonlinearity(v, ctx2, m_star, GaugedPath::expansion);
  CHECK(max_abs_diff(d, e) <= 1e-10 * sobolev_norm(d, 0));
  CHECK_NOTHROW(gauged_nonlinearity(v, ctx2, m_star));

  const cplx phase = std::polar(1.0, 0.83);
  const SpectralField rot = gauged_nonlinearity(phase * v, ctx2, m_star);
  CHECK(max_abs_diff(rot, phase * d) <= 1e-12 * sobolev_norm(d, 0));
}

TEST_CASE("wick_mean matches the projected power") {
  const SpectralField u = random_field(8, 18);
  for (int n : {2, 4, 6}) {
    const double s = sigma(8);
    CHECK(wick_mean(u, n, s) == doctest::Approx(mean(wick_power(u, n, s, 1)).real()).epsilon(1e-12));
  }
}

TEST_CASE("RadialEvaluator moments") {
  const SpectralField u = random_field(4, 19);
  RadialEvaluator ev(4, 4, 5);
  ev.load(u);
  CHECK(ev.moment(0) == doctest::Approx(1.0));
  CHECK(ev.moment(1) == doctest::Approx(mass(u)).epsilon(1e-12));
  const double poly[] = {0.5, -2.0};
  SpectralField out(4);
  ev.apply(poly, 0.25, out);
  SpectralField ref = wick_power(u, 3, 0.0);
  ref *= -2.0;
  ref.axpy(0.75, u);
  CHECK(max_abs_diff(out, ref) < 1e-12 * sobolev_norm(ref, 0));
}

TEST_CASE("HolomorphicLinearization is the slot-1 operator") {
  const int r = 2;
  const SpectralField v = random_field(4, 20);
  const SpectralField w = random_field(4, 21);
  const double m_star = 0.7;
  HolomorphicLinearization lin(r, 4, 4, m_star);
  lin.load(v);
  SpectralField out(4);
  lin.apply(w, out);
  SpectralField ref(4);
  for (int l = 0; l <= r; ++l)
    ref.axpy(double((l + 1) * c_rl(r, l)) * std::pow(m_star, r - l),
             script_N_polarized(l, PolarizationSlot::at(1), w, v, 4));
  CHECK(max_abs_diff(out, ref) < 1e-10 * sobolev_norm(ref, 0));
}

TEST_CASE("parameter hierarchy") {
  const Params p = Params::from_delta(0.1);
  CHECK(p.hierarchy_ordered());
  CHECK(p.gamma == doctest::Approx(std::pow(0.1, 0.75)));
  CHECK(p.b == doctest::Approx(0.5 + 1e-4));
}
