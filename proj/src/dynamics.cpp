#include "wnls/dynamics.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>

#include "wnls/gibbs.hpp"

namespace wnls {

Scheme parse_scheme(const std::string& name) {
  if (name == "rk4-interaction-picture" || name == "ip-rk4" || name == "rk4") return Scheme::ip_rk4;
  if (name == "gauss4-interaction-picture" || name == "ip-gauss4" || name == "gauss4") return Scheme::ip_gauss4;
  if (name == "strang-split" || name == "strang") return Scheme::strang;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::ip_rk4: return "rk4-interaction-picture";
    case Scheme::ip_gauss4: return "gauss4-interaction-picture";
    case Scheme::strang: return "strang-split";
  }
  return "?";
}

double default_dt(int N) { return 0.1 / (static_cast<double>(N) * N); }

namespace {

double ipow(double x, int e) {
  double y = 1.0;
  for (int i = 0; i < e; ++i) y *= x;
  return y;
}

// Nonlinear part of the vector field, F(u) = Pi_N[P(rho) u + c u], together
// with A[W^{2r}(u)] for the gauge phase. The polynomial depends on the field
// only through its mass, which is read off the grid on every call.
class Nonlinearity {
 public:
  Nonlinearity(const WickContext& ctx, bool gauged, double m_star)
      : ctx_(ctx), gauged_(gauged), m_star_(m_star), ev_(ctx.N, ctx.N, 2 * ctx.r + 1) {}

  // Loads u and fills poly_/extra_; returns A[W^{2r}(u)].
  double prepare(const SpectralField& u) {
    ev_.load(u);
    const int r = ctx_.r;
    if (!gauged_) {
      poly_ = odd_wick_coefficients(r, ctx_.sigma_N);
      extra_ = 0.0;
    } else {
      const double m = ev_.moment(1);
      poly_.assign(r + 1, 0.0);
      extra_ = 0.0;
      for (int l = 0; l <= r; ++l) {
        const double cl = static_cast<double>(ctx_.c[l]) * ipow(m_star_, r - l);
        const auto a = odd_wick_coefficients(l, m);
        for (int j = 0; j <= l; ++j) poly_[j] += cl * a[j];
        extra_ -= cl * (l + 1) * ev_.mean_of(even_wick_coefficients(l, m));
      }
    }
    return ev_.mean_of(even_wick_coefficients(r, ctx_.sigma_N));
  }

  void apply(SpectralField& out) { ev_.apply(poly_, extra_ - shift_, out); }

  // Mean pointwise frequency of u, weighted by rho. Moving it into the
  // integrating factor leaves only the spread of frequencies to the stepper.
  double mean_frequency(const SpectralField& u) {
    prepare(u);
    const auto rho = ev_.rho();
    double num = 0.0, den = 0.0;
    for (double x : rho) {
      double p = 0.0;
      for (std::size_t j = poly_.size(); j-- > 0;) p = p * x + poly_[j];
      num += x * (p + extra_);
      den += x;
    }
    return den > 0.0 ? num / den : extra_ + (poly_.empty() ? 0.0 : poly_[0]);
  }
  void set_shift(double w) { shift_ = w; }

  // out = -i F(u); returns A[W^{2r}(u)]
  double operator()(const SpectralField& u, SpectralField& out) {
    const double a = prepare(u);
    apply(out);
    out *= cplx(0.0, -1.0);
    return a;
  }

  // Pointwise exp(-i h (P(rho) + c)) u, then projected. Exact for the
  // unprojected radial ODE, which conserves rho pointwise.
  void rotate(const SpectralField& u, double h, SpectralField& out) {
    prepare(u);
    const auto f = ev_.field();
    const auto rho = ev_.rho();
    const int M = ev_.grid();
    std::vector<cplx> g(f.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      double p = 0.0;
      for (std::size_t j = poly_.size(); j-- > 0;) p = p * rho[i] + poly_[j];
      g[i] = std::polar(1.0, -h * (p + extra_ - shift_)) * f[i];
    }
    Fft2d::get(M).forward(g.data());
    gather_from_grid(g.data(), M, out);
  }

  double wick_mean_only(const SpectralField& u) {
    ev_.load(u);
    return ev_.mean_of(even_wick_coefficients(ctx_.r, ctx_.sigma_N));
  }

 private:
  const WickContext& ctx_;
  bool gauged_;
  double m_star_;
  RadialEvaluator ev_;
  std::vector<double> poly_;
  double extra_ = 0.0;
  double shift_ = 0.0;
};

// Per-mode phase factors e^{-i (|k|^2 + w) h}.
std::vector<cplx> phases(const SpectralField& shape, double h, double w) {
  std::vector<cplx> e(shape.data().size(), 0.0);
  for (std::size_t i = 0; i < e.size(); ++i)
    e[i] = std::polar(1.0, -(static_cast<double>(shape.mode_at(i).norm2()) + w) * h);
  return e;
}

void mul(SpectralField& u, const std::vector<cplx>& e) {
  auto d = u.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= e[i];
}

using RealVec = std::vector<double>;

double dot(const RealVec& a, const RealVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
double norm2(const RealVec& a) { return std::sqrt(dot(a, a)); }

// Restarted GMRES for a real-linear operator given as a product routine.
// Returns the solution of A x = b to relative residual tol (x starts at 0).
template <class Op>
RealVec gmres(Op&& A, const RealVec& b, double tol, int restart, int max_iter) {
  const std::size_t n = b.size();
  RealVec x(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return x;
  int iters = 0;
  RealVec r = b;
  while (iters < max_iter) {
    const double beta = norm2(r);
    if (beta <= tol * bnorm) break;
    std::vector<RealVec> V{RealVec(n)};
    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    std::vector<std::vector<double>> H(restart + 1, std::vector<double>(restart, 0.0));
    std::vector<double> cs(restart), sn(restart), g(restart + 1, 0.0);
    g[0] = beta;
    int k = 0;
    for (; k < restart && iters < max_iter; ++k, ++iters) {
      RealVec w = A(V[k]);
      for (int j = 0; j <= k; ++j) {
        H[j][k] = dot(w, V[j]);
        for (std::size_t i = 0; i < n; ++i) w[i] -= H[j][k] * V[j][i];
      }
      H[k + 1][k] = norm2(w);
      for (int j = 0; j < k; ++j) {
        const double t = cs[j] * H[j][k] + sn[j] * H[j + 1][k];
        H[j + 1][k] = -sn[j] * H[j][k] + cs[j] * H[j + 1][k];
        H[j][k] = t;
      }
      const double den = std::hypot(H[k][k], H[k + 1][k]);
      cs[k] = H[k][k] / den;
      sn[k] = H[k + 1][k] / den;
      H[k][k] = den;
      g[k + 1] = -sn[k] * g[k];
      g[k] *= cs[k];
      const bool done = std::abs(g[k + 1]) <= tol * bnorm || H[k + 1][k] == 0.0;
      if (!done) {
        // H[k+1][k] was overwritten by the rotation; recompute the basis vector
        const double hn = norm2(w);
        V.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) V[k + 1][i] = w[i] / hn;
      } else {
        ++k;
        ++iters;
        break;
      }
    }
    std::vector<double> y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
      y[i] = s / H[i][i];
    }
    for (int j = 0; j < k; ++j)
      for (std::size_t i = 0; i < n; ++i) x[i] += y[j] * V[j][i];
    r = A(x);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  }
  return x;
}

// Two-stage Gauss collocation for y' = E(-s) F(E(s) y), y(0) = u_n, solved by
// Newton's method with matrix-free GMRES. The map is only real-linear in its
// argument, so everything is done on real vectors.
class GaussStepper {
 public:
  GaussStepper(Nonlinearity& nl, const SpectralField& shape, double h, double w0) : nl_(nl), h_(h) {
    const double r3 = std::sqrt(3.0) / 6.0;
    c_ = {0.5 - r3, 0.5 + r3};
    a_ = {{{0.25, 0.25 - r3}, {0.25 + r3, 0.25}}};
    for (int i = 0; i < 2; ++i) {
      fwd_[i] = phases(shape, c_[i] * h, w0);
      bwd_[i] = phases(shape, -c_[i] * h, w0);
    }
    full_ = phases(shape, h, w0);
    n_ = shape.data().size();
    tmp_ = SpectralField(shape.cutoff());
    out_ = SpectralField(shape.cutoff());
  }

  void step(SpectralField& u) {
    u_ = u;
    // predictor: stage values from the slope at the left end
    RealVec Z(4 * n_);
    {
      nl_(u_, out_);
      for (int i = 0; i < 2; ++i) pack(out_, Z, i, h_ * c_[i]);
    }
    const double scale = std::max(1.0, std::sqrt(mass(u_)));
    RealVec R = residual(Z);
    int it = 0;
    for (; it < 30; ++it) {
      const double rn = norm2(R);
      if (rn <= 1e-13 * scale) break;
      const double zn = norm2(Z);
      auto jv = [&](const RealVec& v) {
        const double vn = norm2(v);
        const double eps = 1e-8 * (1.0 + zn) / (vn > 0.0 ? vn : 1.0);
        RealVec zp(Z);
        for (std::size_t i = 0; i < zp.size(); ++i) zp[i] += eps * v[i];
        RealVec rp = residual(zp);
        for (std::size_t i = 0; i < rp.size(); ++i) rp[i] = (rp[i] - R[i]) / eps;
        return rp;
      };
      RealVec mr(R);
      for (double& x : mr) x = -x;
      const RealVec d = gmres(jv, mr, 1e-6, 60, 600);
      for (std::size_t i = 0; i < Z.size(); ++i) Z[i] += d[i];
      R = residual(Z);
    }
    if (norm2(R) > 1e-10 * scale) throw NumericalAbort("Gauss stage equations did not converge");
    // y_{n+1} = u_n + h sum_i b_i G_i, and sum_i b_i G_i follows from the stages:
    // Z = h A G, so h G = A^{-1} Z.
    const double det = a_[0][0] * a_[1][1] - a_[0][1] * a_[1][0];
    SpectralField z1 = unpack(Z, 0), z2 = unpack(Z, 1);
    // h (G1 + G2)/2 with h G = A^{-1} Z
    const double w1 = 0.5 * (a_[1][1] - a_[1][0]) / det;
    const double w2 = 0.5 * (a_[0][0] - a_[0][1]) / det;
    u.axpy(w1, z1);
    u.axpy(w2, z2);
    auto d = u.data();
    for (std::size_t i = 0; i < n_; ++i) d[i] *= full_[i];
  }

 private:
  void pack(const SpectralField& f, RealVec& v, int stage, double s) const {
    auto d = f.data();
    for (std::size_t i = 0; i < n_; ++i) {
      v[(stage * n_ + i) * 2] = s * d[i].real();
      v[(stage * n_ + i) * 2 + 1] = s * d[i].imag();
    }
  }
  SpectralField unpack(const RealVec& v, int stage) const {
    SpectralField f(u_.cutoff());
    auto d = f.data();
    for (std::size_t i = 0; i < n_; ++i) d[i] = {v[(stage * n_ + i) * 2], v[(stage * n_ + i) * 2 + 1]};
    return f;
  }
  // G_j = E(-c_j h) F(E(c_j h)(u + Z_j))
  SpectralField stage_slope(const RealVec& Z, int j) {
    tmp_ = unpack(Z, j);
    tmp_ += u_;
    mul(tmp_, fwd_[j]);
    nl_(tmp_, out_);
    mul(out_, bwd_[j]);
    return out_;
  }
  RealVec residual(const RealVec& Z) {
    const SpectralField G0 = stage_slope(Z, 0);
    const SpectralField G1 = stage_slope(Z, 1);
    RealVec R(Z);
    auto g0 = G0.data();
    auto g1 = G1.data();
    for (int i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < n_; ++k) {
        const cplx s = h_ * (a_[i][0] * g0[k] + a_[i][1] * g1[k]);
        R[(i * n_ + k) * 2] -= s.real();
        R[(i * n_ + k) * 2 + 1] -= s.imag();
      }
    return R;
  }

  Nonlinearity& nl_;
  double h_;
  std::array<double, 2> c_;
  std::array<std::array<double, 2>, 2> a_;
  std::array<std::vector<cplx>, 2> fwd_, bwd_;
  std::vector<cplx> full_;
  std::size_t n_ = 0;
  SpectralField u_, tmp_, out_;
};

SpectralField rhs_impl(const SpectralField& u, const WickContext& ctx, bool gauged, double m_star) {
  if (u.cutoff() > ctx.N) throw std::invalid_argument("field cutoff exceeds context cutoff");
  const SpectralField pu = project(u, ctx.N);
  Nonlinearity nl(ctx, gauged, m_star);
  SpectralField out(ctx.N);
  nl(pu, out);
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += cplx(0.0, -1.0) * static_cast<double>(out.mode_at(i).norm2()) * pu.data()[i];
  return out;
}

}  // namespace

SpectralField rhs_truncated(const SpectralField& u, const WickContext& ctx) { return rhs_impl(u, ctx, false, 0.0); }

SpectralField rhs_gauged(const SpectralField& v, const WickContext& ctx, double m_star) {
  return rhs_impl(v, ctx, true, m_star);
}

std::vector<double> cumulative_simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> B(n, 0.0);
  if (n < 2) return B;
  if (n == 2) {
    B[1] = 0.5 * h * (f[0] + f[1]);
    return B;
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (i % 2 == 0) {
      B[i] = B[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
    } else if (i + 1 < n) {
      B[i] = B[i - 1] + h / 12.0 * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1]);
    } else {
      B[i] = B[i - 1] + h / 12.0 * (-f[i - 2] + 8.0 * f[i - 1] + 5.0 * f[i]);
    }
  }
  return B;
}

struct FieldStepper::Impl {
  Impl(const WickContext& ctx, Scheme scheme, bool gauged, double m_star, double h, const SpectralField& u0,
       bool nonlinear)
      : scheme(scheme), nonlinear(nonlinear), h(h), nl(ctx, gauged, m_star) {
    w0 = nonlinear ? nl.mean_frequency(u0) : 0.0;
    nl.set_shift(w0);
    E1 = phases(u0, 0.5 * h, w0);
    E2 = phases(u0, h, w0);
    if (scheme == Scheme::ip_gauss4 && nonlinear) gauss = std::make_unique<GaussStepper>(nl, u0, h, w0);
    const int N = u0.cutoff();
    k1 = k2 = k3 = k4 = tmp = Eu = SpectralField(N);
  }

  Scheme scheme;
  bool nonlinear;
  double h;
  double w0 = 0.0;
  Nonlinearity nl;
  std::vector<cplx> E1, E2;
  std::unique_ptr<GaussStepper> gauss;
  SpectralField k1, k2, k3, k4, tmp, Eu;
};

FieldStepper::FieldStepper(const WickContext& ctx, Scheme scheme, bool gauged, double m_star, double h,
                           const SpectralField& u0, bool nonlinear)
    : impl_(std::make_unique<Impl>(ctx, scheme, gauged, m_star, h, u0, nonlinear)) {}

FieldStepper::~FieldStepper() = default;

double FieldStepper::shift() const { return impl_->w0; }
const std::vector<cplx>& FieldStepper::half_phase() const { return impl_->E1; }
const std::vector<cplx>& FieldStepper::full_phase() const { return impl_->E2; }

double FieldStepper::wick_mean(const SpectralField& u) { return impl_->nonlinear ? impl_->nl.wick_mean_only(u) : 0.0; }

double FieldStepper::step(SpectralField& u, std::array<SpectralField, 4>* stages) {
  Impl& m = *impl_;
  const double h = m.h;
  if (stages && m.scheme != Scheme::ip_rk4) throw std::logic_error("stage values exist only for the RK4 scheme");
  if (!m.nonlinear) {
    if (stages) (*stages)[0] = u;
    mul(u, m.E2);
    if (stages) {
      (*stages)[1] = (*stages)[0];
      mul((*stages)[1], m.E1);
      (*stages)[2] = (*stages)[1];
      (*stages)[3] = u;
    }
    return 0.0;
  }
  if (m.scheme == Scheme::ip_rk4) {
    if (stages) (*stages)[0] = u;
    const double a = m.nl(u, m.k1);
    m.tmp = u;
    m.tmp.axpy(0.5 * h, m.k1);
    mul(m.tmp, m.E1);
    if (stages) (*stages)[1] = m.tmp;
    m.nl(m.tmp, m.k2);
    m.Eu = u;
    mul(m.Eu, m.E1);
    m.tmp = m.Eu;
    m.tmp.axpy(0.5 * h, m.k2);
    if (stages) (*stages)[2] = m.tmp;
    m.nl(m.tmp, m.k3);
    // u4 = E(Eu + h k3) with E the half-step factor
    m.tmp = m.Eu;
    m.tmp.axpy(h, m.k3);
    mul(m.tmp, m.E1);
    if (stages) (*stages)[3] = m.tmp;
    m.nl(m.tmp, m.k4);
    // u+ = E2 u + h/6 (E2 k1 + 2 E (k2 + k3) + k4)
    m.k2 += m.k3;
    mul(m.k2, m.E1);
    mul(m.k1, m.E2);
    mul(u, m.E2);
    m.k1.axpy(2.0, m.k2);
    m.k1 += m.k4;
    u.axpy(h / 6.0, m.k1);
    return a;
  }
  const double a = m.nl.wick_mean_only(u);
  if (m.scheme == Scheme::ip_gauss4) {
    m.gauss->step(u);
  } else {
    mul(u, m.E1);
    m.nl.rotate(u, h, m.tmp);
    u = m.tmp;
    mul(u, m.E1);
  }
  return a;
}

Trajectory evolve(const SpectralField& u0, const WickContext& ctx, const EvolutionConfig& cfg, bool gauged) {
  if (u0.cutoff() > ctx.N) throw std::invalid_argument("initial data cutoff exceeds context cutoff");
  if (cfg.save_stride < 1) throw std::invalid_argument("save_stride must be >= 1");
  const double span = cfg.t1 - cfg.t0;
  const double dt_abs = cfg.dt > 0.0 ? cfg.dt : default_dt(ctx.N);
  if (!(dt_abs > 0.0) || !std::isfinite(dt_abs)) throw std::invalid_argument("dt must be positive");
  const long steps = std::max(0L, std::lround(std::abs(span) / dt_abs));
  if (steps > 0 && std::abs(steps * dt_abs - std::abs(span)) > 1e-9 * std::max(1.0, std::abs(span)))
    throw std::invalid_argument("time span is not a multiple of dt");
  const double h = span >= 0.0 ? dt_abs : -dt_abs;

  SpectralField u = project(u0, ctx.N);
  Trajectory tr;
  tr.gauged = gauged;
  tr.r = ctx.r;
  tr.N = ctx.N;
  tr.dt = h;
  tr.m_star = mass(u) - ctx.sigma_N;

  const double norm0 = std::sqrt(mass(u));
  const double limit = cfg.blowup_factor * std::max(norm0, 1e-300);

  FieldStepper stepper(ctx, cfg.scheme, gauged, tr.m_star, h, u, cfg.nonlinear);
  std::vector<double> a(static_cast<std::size_t>(steps) + 1, 0.0);

  auto save = [&](long n) {
    tr.times.push_back(cfg.t0 + n * h);
    tr.states.push_back(u);
    tr.mass.push_back(mass(u));
    if (cfg.record_energy) tr.energy.push_back(hamiltonian(u, ctx));
  };

  save(0);
  for (long n = 0; n < steps; ++n) {
    a[n] = stepper.step(u);
    const double nrm = std::sqrt(mass(u));
    if (!std::isfinite(nrm) || nrm > limit)
      throw NumericalAbort("instability at t=" + std::to_string(cfg.t0 + (n + 1) * h) + ": norm " +
                           std::to_string(nrm) + " vs initial " + std::to_string(norm0));
    if ((n + 1) % cfg.save_stride == 0 || n + 1 == steps) save(n + 1);
  }
  a[steps] = stepper.wick_mean(u);

  const auto B = cumulative_simpson(a, h);
  for (double t : tr.times) {
    const long n = std::lround((t - cfg.t0) / h);
    tr.gauge_phase.push_back(steps == 0 ? 0.0 : B[n]);
  }
  return tr;
}

namespace {

void append_energy(Trajectory& dst, const Trajectory& src, std::size_t i) {
  if (!src.energy.empty()) dst.energy.push_back(src.energy[i]);
}

}  // namespace

Trajectory evolve_symmetric(const SpectralField& u0, const WickContext& ctx, double T, double dt, int save_stride,
                            bool gauged, bool nonlinear) {
  if (!(T > 0.0)) throw std::invalid_argument("T must be positive");
  EvolutionConfig cfg;
  cfg.dt = dt;
  cfg.save_stride = save_stride;
  cfg.nonlinear = nonlinear;
  cfg.t0 = 0.0;
  cfg.t1 = T;
  Trajectory fwd = evolve(u0, ctx, cfg, gauged);
  cfg.t1 = -T;
  Trajectory bwd = evolve(u0, ctx, cfg, gauged);

  Trajectory tr;
  tr.gauged = gauged;
  tr.r = fwd.r;
  tr.N = fwd.N;
  tr.dt = fwd.dt;
  tr.m_star = fwd.m_star;
  for (std::size_t i = bwd.size(); i-- > 1;) {
    tr.times.push_back(bwd.times[i]);
    tr.states.push_back(std::move(bwd.states[i]));
    tr.mass.push_back(bwd.mass[i]);
    tr.gauge_phase.push_back(bwd.gauge_phase[i]);
    append_energy(tr, bwd, i);
  }
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    tr.times.push_back(fwd.times[i]);
    tr.states.push_back(std::move(fwd.states[i]));
    tr.mass.push_back(fwd.mass[i]);
    tr.gauge_phase.push_back(fwd.gauge_phase[i]);
    append_energy(tr, fwd, i);
  }
  return tr;
}

namespace {

// B rebuilt from the saved frames; requires a uniform time grid through t = 0
// or through the first frame.
std::vector<double> phase_from_frames(const Trajectory& tr, const WickContext& ctx) {
  const std::size_t n = tr.size();
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = wick_mean(project(tr.states[i], ctx.N), 2 * ctx.r, ctx.sigma_N);
  if (n < 2) return std::vector<double>(n, 0.0);
  const double h = tr.times[1] - tr.times[0];
  auto B = cumulative_simpson(a, h);
  // Shift so that B vanishes where the integrator phase does (the frame with
  // zero recorded phase, or the first frame).
  std::size_t zero = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(tr.times[i]) < std::abs(tr.times[zero])) zero = i;
  const double off = B[zero];
  for (double& b : B) b -= off;
  return B;
}

Trajectory apply_gauge(const Trajectory& src, const WickContext& ctx, PhaseSource srcp, double sign, bool gauged) {
  if (src.size() == 0) throw std::invalid_argument("empty trajectory");
  std::vector<double> B = src.gauge_phase;
  Trajectory out = src;
  if (srcp == PhaseSource::saved_grid || B.size() != src.size()) {
    const auto Bs = phase_from_frames(src, ctx);
    if (B.size() == src.size()) {
      double diff = 0.0;
      for (std::size_t i = 0; i < B.size(); ++i) diff = std::max(diff, std::abs(B[i] - Bs[i]));
      if (diff > 1e-8) out.warnings.push_back("quadrature-resolution: saved-grid phase differs by " + std::to_string(diff));
    }
    B = Bs;
    out.gauge_phase = B;
  }
  for (std::size_t i = 0; i < src.size(); ++i) out.states[i] *= std::polar(1.0, sign * (ctx.r + 1) * B[i]);
  out.gauged = gauged;
  return out;
}

}  // namespace

Trajectory gauge_forward(const Trajectory& traj_u, const WickContext& ctx, PhaseSource src) {
  return apply_gauge(traj_u, ctx, src, +1.0, true);
}

Trajectory gauge_inverse(const Trajectory& traj_v, const WickContext& ctx, PhaseSource src) {
  return apply_gauge(traj_v, ctx, src, -1.0, false);
}

ConservationReport conservation_report(const Trajectory& traj) {
  ConservationReport rep;
  rep.times = traj.times;
  rep.mass = traj.mass;
  rep.energy = traj.energy;
  if (traj.size() == 0) return rep;
  auto drift = [](const std::vector<double>& x, std::vector<double>& d) {
    if (x.empty()) return 0.0;
    const double s = std::abs(x[0]) > 0.0 ? std::abs(x[0]) : 1.0;
    double mx = 0.0;
    for (double v : x) {
      d.push_back(std::abs(v - x[0]) / s);
      mx = std::max(mx, d.back());
    }
    return mx;
  };
  rep.max_mass_drift = drift(rep.mass, rep.mass_drift);
  rep.max_energy_drift = drift(rep.energy, rep.energy_drift);
  const double span = std::abs(traj.times.back() - traj.times.front());
  if (span > 0.0) {
    rep.mass_drift_rate = rep.max_mass_drift / span;
    rep.energy_drift_rate = rep.max_energy_drift / span;
  }
  return rep;
}

}  // namespace wnls
