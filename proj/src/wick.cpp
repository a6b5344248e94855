#include "wnls/wick.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wnls {

Params Params::from_delta(double delta, double eps, double theta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
  Params p;
  p.delta = delta;
  p.delta0 = std::pow(delta, 1.0 / 50.0);
  p.gamma = std::pow(delta, 0.75);
  p.gamma0 = std::pow(delta, 1.25);
  p.kappa = std::pow(delta, -4.0);
  const double d4 = std::pow(delta, 4.0);
  const double d6 = std::pow(delta, 6.0);
  p.b = 0.5 + d4;
  p.b1 = p.b + d4;
  p.b2 = p.b - d6;
  p.a0 = 2.0 * p.b - 10.0 * d6;
  p.eps = eps;
  p.theta = theta;
  return p;
}

bool Params::hierarchy_ordered() const {
  const double d4 = std::pow(delta, 4.0);
  const double d6 = std::pow(delta, 6.0);
  return delta0 > gamma && gamma > delta && delta > gamma0 && gamma0 > delta * gamma0 &&
         delta * gamma0 > d4 && d4 > d6 && d6 > 0.0;
}

std::int64_t factorial(int n) {
  if (n < 0 || n > 20) throw std::out_of_range("factorial argument");
  std::int64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

double sigma(int N) {
  if (N < 1) throw std::invalid_argument("sigma needs N >= 1");
  // Count lattice points per value of |k|^2, then add shells from the outside
  // in so that the small terms are accumulated first.
  const int top = N * N - 1;
  std::vector<long long> count(static_cast<std::size_t>(top) + 1, 0);
  const int R = support_radius(N);
  for (int kx = -R; kx <= R; ++kx)
    for (int ky = -R; ky <= R; ++ky) {
      const int n2 = kx * kx + ky * ky;
      if (n2 <= top) ++count[n2];
    }
  double s = 0.0;
  for (int n2 = top; n2 >= 0; --n2)
    if (count[n2]) s += static_cast<double>(count[n2]) / (n2 + 1.0);
  return s;
}

std::int64_t c_rl(int r, int l) {
  if (l < 0 || l > r) throw std::out_of_range("c_rl index");
  return binomial(r + 1, r - l) * (factorial(r) / factorial(l));
}

WickContext WickContext::make(int r, int N, double delta) { return make(r, N, Params::from_delta(delta)); }

WickContext WickContext::make(int r, int N, const Params& p) {
  if (r < 1) throw std::invalid_argument("r must be >= 1");
  WickContext ctx;
  ctx.r = r;
  ctx.N = N;
  ctx.sigma_N = sigma(N);
  for (int l = 0; l <= r; ++l) ctx.c.push_back(c_rl(r, l));
  ctx.params = p;
  return ctx;
}

namespace {

double ipow(double x, int e) {
  double y = 1.0;
  for (int i = 0; i < e; ++i) y *= x;
  return y;
}

double sign(int e) { return (e % 2 == 0) ? 1.0 : -1.0; }

// Integer parts of the two coefficient families.
std::int64_t even_int(int p, int j) { return binomial(p, j) * (factorial(p) / factorial(j)); }
std::int64_t odd_int(int p, int j) { return binomial(p + 1, p - j) * (factorial(p) / factorial(j)); }

}  // namespace

std::vector<double> even_wick_coefficients(int p, double s) {
  std::vector<double> c(p + 1);
  for (int j = 0; j <= p; ++j) c[j] = sign(p - j) * static_cast<double>(even_int(p, j)) * ipow(s, p - j);
  return c;
}

std::vector<double> odd_wick_coefficients(int p, double s) {
  std::vector<double> c(p + 1);
  for (int j = 0; j <= p; ++j) c[j] = sign(p - j) * static_cast<double>(odd_int(p, j)) * ipow(s, p - j);
  return c;
}

std::vector<double> even_wick_coefficients_ds(int p, double s) {
  std::vector<double> c(p + 1, 0.0);
  for (int j = 0; j < p; ++j)
    c[j] = sign(p - j) * static_cast<double>(even_int(p, j)) * (p - j) * ipow(s, p - j - 1);
  return c;
}

std::vector<double> odd_wick_coefficients_ds(int p, double s) {
  std::vector<double> c(p + 1, 0.0);
  for (int j = 0; j < p; ++j)
    c[j] = sign(p - j) * static_cast<double>(odd_int(p, j)) * (p - j) * ipow(s, p - j - 1);
  return c;
}

namespace {

double poly_at(std::span<const double> c, double x) {
  double y = 0.0;
  for (std::size_t j = c.size(); j-- > 0;) y = y * x + c[j];
  return y;
}

std::vector<double> grid_moments(const std::vector<double>& rho, int jmax) {
  std::vector<double> m(jmax + 1, 0.0);
  for (double x : rho) {
    double p = 1.0;
    for (int j = 0; j <= jmax; ++j) {
      m[j] += p;
      p *= x;
    }
  }
  const double inv = 1.0 / static_cast<double>(rho.size());
  for (double& v : m) v *= inv;
  return m;
}

}  // namespace

RadialEvaluator::RadialEvaluator(int N_in, int N_out, int degree) : N_in_(N_in), N_out_(N_out) {
  const int R = support_radius(N_in);
  const int jmax = std::max(1, (degree + 1) / 2);
  M_ = std::max(grid_size(degree * R, support_radius(N_out)), fft_friendly(2 * jmax * R + 1));
  const std::size_t n = static_cast<std::size_t>(M_) * M_;
  u_.resize(n);
  rho_.resize(n);
  work_.resize(n);
  moments_.assign(jmax + 1, 0.0);
}

void RadialEvaluator::load(const SpectralField& u) {
  if (u.cutoff() > N_in_) throw std::invalid_argument("field cutoff exceeds evaluator input cutoff");
  scatter_to_grid(u, M_, u_.data());
  Fft2d::get(M_).backward(u_.data());
  for (std::size_t i = 0; i < u_.size(); ++i) rho_[i] = std::norm(u_[i]);
  moments_ = grid_moments(rho_, max_moment());
}

void RadialEvaluator::apply(std::span<const double> poly, double extra, SpectralField& out) {
  if (out.cutoff() > N_out_) throw std::invalid_argument("output cutoff exceeds evaluator output cutoff");
  for (std::size_t i = 0; i < u_.size(); ++i) work_[i] = (poly_at(poly, rho_[i]) + extra) * u_[i];
  Fft2d::get(M_).forward(work_.data());
  gather_from_grid(work_.data(), M_, out);
}

double RadialEvaluator::mean_of(std::span<const double> poly) const {
  if (static_cast<int>(poly.size()) - 1 > max_moment()) throw std::out_of_range("moment order not available");
  double s = 0.0;
  for (std::size_t j = 0; j < poly.size(); ++j) s += poly[j] * moments_[j];
  return s;
}

namespace {

// Pointwise polynomial in rho (even case) read back at out_cutoff.
SpectralField even_on_grid(const SpectralField& u, std::span<const double> poly, int out_cutoff) {
  const int R = support_radius(u.cutoff());
  const int degree = 2 * (static_cast<int>(poly.size()) - 1);
  const int M = std::max(grid_size(degree * R, support_radius(out_cutoff)), fft_friendly(2 * R + 1));
  std::vector<cplx> g(static_cast<std::size_t>(M) * M);
  scatter_to_grid(u, M, g.data());
  const Fft2d& fft = Fft2d::get(M);
  fft.backward(g.data());
  for (auto& x : g) x = poly_at(poly, std::norm(x));
  fft.forward(g.data());
  SpectralField out(out_cutoff);
  gather_from_grid(g.data(), M, out);
  return out;
}

SpectralField odd_on_grid(const SpectralField& u, std::span<const double> poly, double extra, int out_cutoff) {
  const int degree = 2 * (static_cast<int>(poly.size()) - 1) + 1;
  RadialEvaluator ev(u.cutoff(), out_cutoff, degree);
  ev.load(u);
  SpectralField out(out_cutoff);
  ev.apply(poly, extra, out);
  return out;
}

}  // namespace

SpectralField wick_power(const SpectralField& u, int n, double sig, int out_cutoff) {
  if (n < 0) throw std::invalid_argument("wick_power degree must be >= 0");
  if (out_cutoff == 0) out_cutoff = u.cutoff();
  const int p = n / 2;
  if (n % 2 == 0) return even_on_grid(u, even_wick_coefficients(p, sig), out_cutoff);
  return odd_on_grid(u, odd_wick_coefficients(p, sig), 0.0, out_cutoff);
}

SpectralField wick_pairfree(const SpectralField& v, int n, int out_cutoff) {
  return wick_power(v, n, mass(v), out_cutoff);
}

double wick_mean(const SpectralField& u, int n, double sig) {
  if (n % 2 != 0) throw std::invalid_argument("wick_mean needs an even degree");
  RadialEvaluator ev(u.cutoff(), u.cutoff(), n);
  ev.load(u);
  return ev.mean_of(even_wick_coefficients(n / 2, sig));
}

SpectralField script_N(const SpectralField& v, int l, int out_cutoff) {
  if (l < 0) throw std::invalid_argument("script_N needs l >= 0");
  if (out_cutoff == 0) out_cutoff = v.cutoff();
  const double m = mass(v);
  RadialEvaluator ev(v.cutoff(), out_cutoff, 2 * l + 1);
  ev.load(v);
  const double a_even = ev.mean_of(even_wick_coefficients(l, m));
  SpectralField out(out_cutoff);
  ev.apply(odd_wick_coefficients(l, m), -(l + 1) * a_even, out);
  return out;
}

PolarizationSlot PolarizationSlot::at(int index) {
  if (index < 1) throw std::invalid_argument("slot index is 1-based");
  return {index, index % 2 == 1 ? Parity::holomorphic : Parity::antiholomorphic};
}

SpectralField script_N_polarized(int l, PolarizationSlot slot, const SpectralField& w, const SpectralField& v,
                                 int out_cutoff) {
  if (l < 0) throw std::invalid_argument("script_N_polarized needs l >= 0");
  if (slot.index < 1 || slot.index > 2 * l + 1) throw std::invalid_argument("slot index out of range");
  const Parity implied = slot.index % 2 == 1 ? Parity::holomorphic : Parity::antiholomorphic;
  if (slot.parity != implied)
    throw std::invalid_argument("slot parity conflicts with slot index " + std::to_string(slot.index));
  if (out_cutoff == 0) out_cutoff = std::max(w.cutoff(), v.cutoff());

  const int Rv = support_radius(v.cutoff());
  const int Rw = support_radius(w.cutoff());
  const int M = std::max({grid_size(Rw + 2 * l * Rv, support_radius(out_cutoff)), fft_friendly(2 * (l + 1) * Rv + 1),
                          fft_friendly(2 * Rw + 1)});
  const std::size_t n = static_cast<std::size_t>(M) * M;
  std::vector<cplx> vg(n), wg(n), out(n);
  scatter_to_grid(v, M, vg.data());
  scatter_to_grid(w, M, wg.data());
  const Fft2d& fft = Fft2d::get(M);
  fft.backward(vg.data());
  fft.backward(wg.data());

  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) rho[i] = std::norm(vg[i]);
  const std::vector<double> mom = grid_moments(rho, std::max(l, 1));
  const double m = mom[1];
  const auto a = odd_wick_coefficients(l, m);
  const auto da = odd_wick_coefficients_ds(l, m);
  const auto b = even_wick_coefficients(l, m);
  const auto db = even_wick_coefficients_ds(l, m);
  const double inv = 1.0 / static_cast<double>(n);

  // mu[j] = A(rho^{j-1} * (w conj v)) in the holomorphic direction, or
  // A(rho^{j-1} * (v conj w)) in the antiholomorphic one.
  const bool hol = slot.parity == Parity::holomorphic;
  std::vector<cplx> mu(l + 1, 0.0);
  cplx dm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx d = hol ? wg[i] * std::conj(vg[i]) : vg[i] * std::conj(wg[i]);
    dm += d;
    double p = 1.0;
    for (int j = 1; j <= l; ++j) {
      mu[j] += p * d;
      p *= rho[i];
    }
  }
  dm *= inv;
  for (auto& x : mu) x *= inv;

  double S = 0.0;
  cplx dS = 0.0;
  for (int j = 0; j <= l; ++j) {
    S += b[j] * mom[j];
    dS += dm * db[j] * mom[j];
    if (j >= 1) dS += b[j] * static_cast<double>(j) * mu[j];
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double x = rho[i];
    cplx val;
    if (hol) {
      double fw = 0.0, gv = 0.0, p = 1.0;
      for (int j = 0; j <= l; ++j) {
        fw += a[j] * (j + 1) * p;
        gv += da[j] * p;
        p *= x;
      }
      val = fw * wg[i] + dm * gv * vg[i] - static_cast<double>(l + 1) * (S * wg[i] + dS * vg[i]);
      val /= static_cast<double>(l + 1);
    } else {
      double gv = 0.0, hv = 0.0, p = 1.0;
      for (int j = 0; j <= l; ++j) {
        gv += da[j] * p;
        if (j + 1 <= l) hv += a[j + 1] * (j + 1) * p;
        p *= x;
      }
      val = dm * gv * vg[i] + hv * vg[i] * vg[i] * std::conj(wg[i]) - static_cast<double>(l + 1) * dS * vg[i];
      val /= static_cast<double>(l);
    }
    out[i] = val;
  }
  fft.forward(out.data());
  SpectralField res(out_cutoff);
  gather_from_grid(out.data(), M, res);
  return res;
}

SpectralField gauged_nonlinearity(const SpectralField& v, const WickContext& ctx, double m_star, GaugedPath path) {
  if (!std::isfinite(m_star)) throw std::invalid_argument("m_star must be finite");
  const SpectralField pv = project(v, ctx.N);
  const int r = ctx.r;

  auto direct = [&] {
    RadialEvaluator ev(pv.cutoff(), pv.cutoff(), 2 * r + 1);
    ev.load(pv);
    const double aw = ev.mean_of(even_wick_coefficients(r, ctx.sigma_N));
    SpectralField out(pv.cutoff());
    ev.apply(odd_wick_coefficients(r, ctx.sigma_N), -(r + 1) * aw, out);
    return out;
  };
  auto expansion = [&] {
    SpectralField out(pv.cutoff());
    for (int l = 0; l <= r; ++l) {
      const double w = static_cast<double>(ctx.c[l]) * ipow(m_star, r - l);
      out.axpy(w, script_N(pv, l));
    }
    return out;
  };

  if (path == GaugedPath::direct) return direct();
  if (path == GaugedPath::expansion) return expansion();
  SpectralField a = direct();
  SpectralField b = expansion();
  double scale = 1.0;
  for (const cplx& c : a.data()) scale = std::max(scale, std::abs(c));
  const double diff = max_abs_diff(a, b);
  if (diff > 1e-9 * scale)
    throw ConsistencyError("gauged nonlinearity paths disagree: " + std::to_string(diff / scale));
  return a;
}

HolomorphicLinearization::HolomorphicLinearization(int r, int N_w, int N_v, double m_star)
    : r_(r), N_w_(N_w), N_v_(N_v), m_star_(m_star) {
  const int Rw = support_radius(N_w);
  const int Rv = support_radius(N_v);
  M_ = std::max(grid_size(Rw + 2 * r * Rv, Rw), fft_friendly(2 * (r + 1) * Rv + 1));
  const std::size_t n = static_cast<std::size_t>(M_) * M_;
  v_.resize(n);
  F_.resize(n);
  G_.resize(n);
  rho_.resize(n);
  work_.resize(n);
  e_.assign(r + 1, 0.0);
}

void HolomorphicLinearization::load(const SpectralField& v) {
  if (v.cutoff() > N_v_) throw std::invalid_argument("v cutoff exceeds linearization cutoff");
  scatter_to_grid(v, M_, v_.data());
  Fft2d::get(M_).backward(v_.data());
  for (std::size_t i = 0; i < v_.size(); ++i) rho_[i] = std::norm(v_[i]);
  const std::vector<double> mom = grid_moments(rho_, std::max(r_, 1));
  const double m = mom[1];

  std::vector<double> fpoly(r_ + 1, 0.0), gpoly(r_ + 1, 0.0);
  double fconst = 0.0;
  s1_ = 0.0;
  std::fill(e_.begin(), e_.end(), 0.0);
  for (int l = 0; l <= r_; ++l) {
    const double cl = static_cast<double>(c_rl(r_, l)) * ipow(m_star_, r_ - l);
    const auto a = odd_wick_coefficients(l, m);
    const auto da = odd_wick_coefficients_ds(l, m);
    const auto b = even_wick_coefficients(l, m);
    const auto db = even_wick_coefficients_ds(l, m);
    double S = 0.0, dSm = 0.0;
    for (int j = 0; j <= l; ++j) {
      S += b[j] * mom[j];
      dSm += db[j] * mom[j];
      fpoly[j] += cl * a[j] * (j + 1);
      gpoly[j] += cl * da[j];
      if (j >= 1) e_[j] += cl * (l + 1) * b[j] * j;
    }
    fconst -= cl * (l + 1) * S;
    s1_ += cl * (l + 1) * dSm;
  }
  for (std::size_t i = 0; i < v_.size(); ++i) {
    F_[i] = poly_at(fpoly, rho_[i]) + fconst;
    G_[i] = poly_at(gpoly, rho_[i]);
  }
}

void HolomorphicLinearization::apply(const SpectralField& w, SpectralField& out) {
  if (w.cutoff() > N_w_ || out.cutoff() > N_w_) throw std::invalid_argument("cutoff exceeds linearization cutoff");
  scatter_to_grid(w, M_, work_.data());
  const Fft2d& fft = Fft2d::get(M_);
  fft.backward(work_.data());
  const std::size_t n = work_.size();
  std::vector<cplx> mu(r_ + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx d = work_[i] * std::conj(v_[i]);
    double p = 1.0;
    for (int j = 1; j <= r_; ++j) {
      mu[j] += p * d;
      p *= rho_[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& x : mu) x *= inv;
  const cplx dm = mu[1];
  cplx c = -dm * s1_;
  for (int j = 1; j <= r_; ++j) c -= e_[j] * mu[j];
  for (std::size_t i = 0; i < n; ++i) work_[i] = F_[i] * work_[i] + (dm * G_[i] + c) * v_[i];
  fft.forward(work_.data());
  gather_from_grid(work_.data(), M_, out);
}

}  // namespace wnls
