#include "wnls/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wnls/gibbs.hpp"
#include "wnls/parallel.hpp"

namespace wnls {

bool in_scale_set(int N, double L, double delta) {
  if (L < 0.5 || N < 1) return false;
  return std::log2(L) < (1.0 - delta) * std::log2(static_cast<double>(N)) - 1e-12;
}

std::vector<double> scales_below(int N, double delta) {
  std::vector<double> out;
  for (double L = 0.5; in_scale_set(N, L, delta); L *= 2.0) out.push_back(L);
  return out;
}

double top_scale(int N, double delta) {
  const auto s = scales_below(N, delta);
  if (s.empty()) throw std::invalid_argument("no admissible scale below N=" + std::to_string(N));
  return s.back();
}

SpectralField project_scale(const SpectralField& u, double L) {
  if (L < 1.0) return SpectralField(1);
  return project(u, static_cast<int>(L));
}

double bump(double z) {
  const double a = std::abs(z);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  auto psi = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
  const double p = psi(2.0 - a);
  return p / (p + psi(a - 1.0));
}

TimeGrid TimeGrid::for_cutoff(int N, double tau) {
  TimeGrid g;
  g.tau = tau;
  int f = 128;
  while (2 * f < N * N) f *= 2;
  g.frames_per_unit = f;
  const double spacing = 1.0 / f;
  g.stride = static_cast<int>(std::ceil(spacing / default_dt(N) - 1e-12));
  g.dt = spacing / g.stride;
  return g;
}

namespace {

double bracket_lambda(double l) { return std::sqrt(1.0 + l * l); }

void check_uniform(const Trajectory& tr) {
  if (tr.size() < 3) throw std::invalid_argument("trajectory too short for a time transform");
  const double h = tr.times[1] - tr.times[0];
  for (std::size_t i = 1; i < tr.size(); ++i)
    if (std::abs(tr.times[i] - tr.times[i - 1] - h) > 1e-9 * std::abs(h))
      throw std::invalid_argument("trajectory-grid mismatch: times are not uniform");
}

}  // namespace

TwistedTransform twisted_transform(const Trajectory& tr, const TimeGrid& grid, int cutoff) {
  check_uniform(tr);
  const std::size_t n = tr.size() - 1;  // the last frame sits on the window edge
  const double dt = tr.times[1] - tr.times[0];
  const double t0 = tr.times[0];
  TwistedTransform tt;
  tt.modes = shell_modes(cutoff);
  tt.dlambda = 2.0 * kPi / (static_cast<double>(n) * dt);
  tt.lambda.resize(n);
  const long half = static_cast<long>(n / 2);
  for (std::size_t m = 0; m < n; ++m) tt.lambda[m] = tt.dlambda * (static_cast<long>(m) - half);
  tt.values.resize(static_cast<Eigen::Index>(tt.modes.size()), static_cast<Eigen::Index>(n));

  std::vector<double> win(n);
  for (std::size_t j = 0; j < n; ++j) win[j] = grid.window(tr.times[j]);
  const Fft1d& fft = Fft1d::get(static_cast<int>(n));
  std::vector<cplx> x(n);
  const double norm = dt / std::sqrt(2.0 * kPi);
  double total = 0.0, outer = 0.0;
  const double edge = 0.75 * tt.dlambda * half;
  for (std::size_t a = 0; a < tt.modes.size(); ++a) {
    const Wavenumber k = tt.modes[a];
    const double k2 = k.norm2();
    for (std::size_t j = 0; j < n; ++j) x[j] = win[j] * std::polar(1.0, k2 * tr.times[j]) * tr.states[j][k];
    fft.forward(x.data());
    for (std::size_t m = 0; m < n; ++m) {
      const long idx = (static_cast<long>(m) - half + static_cast<long>(n)) % static_cast<long>(n);
      const cplx v = norm * std::polar(1.0, -tt.lambda[m] * t0) * x[idx];
      tt.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(m)) = v;
      const double e = std::norm(v);
      total += e;
      if (std::abs(tt.lambda[m]) > edge) outer += e;
    }
  }
  tt.leakage = total > 0.0 ? outer / total : 0.0;
  return tt;
}

double xsb_norm(const TwistedTransform& tt, double s, double b) {
  double acc = 0.0;
  for (Eigen::Index a = 0; a < tt.values.rows(); ++a) {
    const double ws = std::pow(tt.modes[a].bracket2(), s);
    double row = 0.0;
    for (Eigen::Index m = 0; m < tt.values.cols(); ++m)
      row += std::pow(bracket_lambda(tt.lambda[m]), 2.0 * b) * std::norm(tt.values(a, m));
    acc += ws * row;
  }
  return std::sqrt(acc * tt.dlambda);
}

double xsb_norm(const Trajectory& tr, const TimeGrid& grid, double s, double b) {
  const int cutoff = tr.states.empty() ? 1 : tr.states.front().cutoff();
  return xsb_norm(twisted_transform(tr, grid, cutoff), s, b);
}

std::vector<double> KernelMatrix::times() const {
  return column_traj.empty() ? std::vector<double>{} : column_traj.front().times;
}

Trajectory trajectory_difference(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw std::invalid_argument("trajectory-grid mismatch: different frame counts");
  Trajectory d;
  d.r = a.r;
  d.N = std::max(a.N, b.N);
  d.dt = a.dt;
  d.gauged = a.gauged;
  d.times = a.times;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.times[i] - b.times[i]) > 1e-12) throw std::invalid_argument("trajectory-grid mismatch");
    const int c = std::max(a.states[i].cutoff(), b.states[i].cutoff());
    SpectralField x = embed(a.states[i], c);
    x -= embed(b.states[i], c);
    d.mass.push_back(mass(x));
    d.states.push_back(std::move(x));
  }
  return d;
}

Trajectory free_evolution(const SpectralField& u0, const std::vector<double>& times) {
  Trajectory tr;
  tr.N = u0.cutoff();
  tr.times = times;
  for (double t : times) {
    tr.states.push_back(linear_flow(u0, t));
    tr.mass.push_back(mass(u0));
  }
  return tr;
}

KernelMatrix kernel_difference(const KernelMatrix& a, const KernelMatrix& b) {
  if (a.N != b.N || a.columns != b.columns) throw std::invalid_argument("kernel shapes differ");
  KernelMatrix h;
  h.N = a.N;
  h.L = a.L;
  h.columns = a.columns;
  for (std::size_t c = 0; c < a.columns.size(); ++c)
    h.column_traj.push_back(trajectory_difference(a.column_traj[c], b.column_traj[c]));
  return h;
}

namespace {

// Rows (k, lambda) weighted by <lambda>^b sqrt(dlambda); one column per k*.
Eigen::MatrixXcd weighted_kernel(const KernelMatrix& h, const TimeGrid& grid, double b) {
  Eigen::MatrixXcd A;
  for (std::size_t c = 0; c < h.columns.size(); ++c) {
    const TwistedTransform tt = twisted_transform(h.column_traj[c], grid, h.N);
    const Eigen::Index nk = tt.values.rows(), nl = tt.values.cols();
    if (c == 0) A.resize(nk * nl, static_cast<Eigen::Index>(h.columns.size()));
    for (Eigen::Index m = 0; m < nl; ++m) {
      const double w = std::pow(bracket_lambda(tt.lambda[m]), b) * std::sqrt(tt.dlambda);
      for (Eigen::Index a = 0; a < nk; ++a) A(m * nk + a, static_cast<Eigen::Index>(c)) = w * tt.values(a, m);
    }
  }
  return A;
}

}  // namespace

double zb_norm(const KernelMatrix& h, const TimeGrid& grid, double b) {
  double acc = 0.0;
  for (const auto& col : h.column_traj) {
    const double x = xsb_norm(col, grid, 0.0, b);
    acc += x * x;
  }
  return std::sqrt(acc);
}

double yb_norm(const KernelMatrix& h, const TimeGrid& grid, double b) {
  if (h.columns.empty()) return 0.0;
  const Eigen::MatrixXcd A = weighted_kernel(h, grid, b);
  const Eigen::MatrixXcd G = A.adjoint() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double yb_norm_power(const KernelMatrix& h, const TimeGrid& grid, double b, int starts, int iters,
                     std::uint64_t seed) {
  if (h.columns.empty()) return 0.0;
  const Eigen::MatrixXcd A = weighted_kernel(h, grid, b);
  const Eigen::Index n = A.cols();
  double best = 0.0;
  for (int s = 0; s < starts; ++s) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(s));
    Eigen::VectorXcd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = complex_gaussian(rng);
    x.normalize();
    for (int it = 0; it < iters; ++it) {
      Eigen::VectorXcd y = A.adjoint() * (A * x);
      const double ny = y.norm();
      if (ny == 0.0) break;
      x = y / ny;
    }
    best = std::max(best, (A * x).norm());
  }
  return best;
}

double log_weighted_zb_norm(const KernelMatrix& h, const TimeGrid& grid, double b, double kappa) {
  std::vector<double> logs;
  for (std::size_t c = 0; c < h.columns.size(); ++c) {
    const TwistedTransform tt = twisted_transform(h.column_traj[c], grid, h.N);
    const Wavenumber ks = h.columns[c];
    for (Eigen::Index a = 0; a < tt.values.rows(); ++a) {
      double e = 0.0;
      for (Eigen::Index m = 0; m < tt.values.cols(); ++m)
        e += std::pow(bracket_lambda(tt.lambda[m]), 2.0 * b) * std::norm(tt.values(a, m));
      if (e <= 0.0) continue;
      const Wavenumber d = tt.modes[a] - ks;
      const double dist = std::sqrt(static_cast<double>(d.norm2()));
      logs.push_back(2.0 * kappa * std::log1p(dist / h.L) + std::log(e * tt.dlambda));
    }
  }
  if (logs.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  return 0.5 * (mx + std::log(s));
}

namespace {

std::vector<cplx> mode_phases(const SpectralField& shape, double h) {
  std::vector<cplx> e(shape.data().size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::polar(1.0, -static_cast<double>(shape.mode_at(i).norm2()) * h);
  return e;
}

void mul(SpectralField& u, const std::vector<cplx>& e) {
  auto d = u.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= e[i];
}

struct HalfSolve {
  std::vector<std::vector<SpectralField>> psi;  // [column][frame]
  std::vector<SpectralField> v;
};

// One direction (h > 0 forward, h < 0 backward) for a block of data.
HalfSolve solve_half(int N, double L, const SpectralField& f, double m_star_N, int r,
                     const std::vector<SpectralField>& data, const TimeGrid& grid, double h, bool keep_v) {
  const long steps = std::lround(grid.half_span() / std::abs(h));
  HalfSolve out;
  out.psi.resize(data.size());
  std::vector<SpectralField> psi;
  for (const auto& d : data) psi.push_back(d.cutoff() >= N ? project(d, N) : embed(d, N));
  for (std::size_t c = 0; c < psi.size(); ++c) out.psi[c].push_back(psi[c]);

  const SpectralField shape(N);
  const auto E1 = mode_phases(shape, 0.5 * h);
  const auto E2 = mode_phases(shape, h);

  if (L < 1.0) {
    for (long n = 0; n < steps; ++n) {
      for (auto& p : psi) mul(p, E2);
      if ((n + 1) % grid.stride == 0)
        for (std::size_t c = 0; c < psi.size(); ++c) out.psi[c].push_back(psi[c]);
    }
    return out;
  }

  const int Lc = static_cast<int>(L);
  const WickContext ctxL = WickContext::make(r, Lc);
  SpectralField v = project(f, Lc);
  const double m_star_L = mass(v) - ctxL.sigma_N;
  FieldStepper stepper(ctxL, Scheme::ip_rk4, true, m_star_L, h, v);
  HolomorphicLinearization lin(r, N, Lc, m_star_N);
  if (keep_v) out.v.push_back(v);

  std::array<SpectralField, 4> st;
  const std::size_t nc = psi.size();
  std::vector<SpectralField> K1(nc, shape), K2(nc, shape), K3(nc, shape), K4(nc, shape), Ep(nc, shape);
  SpectralField arg(N);
  const cplx mi(0.0, -1.0);
  for (long n = 0; n < steps; ++n) {
    stepper.step(v, &st);
    lin.load(st[0]);
    for (std::size_t c = 0; c < nc; ++c) {
      lin.apply(psi[c], K1[c]);
      K1[c] *= mi;
    }
    lin.load(st[1]);
    for (std::size_t c = 0; c < nc; ++c) {
      arg = psi[c];
      arg.axpy(0.5 * h, K1[c]);
      mul(arg, E1);
      lin.apply(arg, K2[c]);
      K2[c] *= mi;
    }
    lin.load(st[2]);
    for (std::size_t c = 0; c < nc; ++c) {
      Ep[c] = psi[c];
      mul(Ep[c], E1);
      arg = Ep[c];
      arg.axpy(0.5 * h, K2[c]);
      lin.apply(arg, K3[c]);
      K3[c] *= mi;
    }
    lin.load(st[3]);
    for (std::size_t c = 0; c < nc; ++c) {
      arg = Ep[c];
      arg.axpy(h, K3[c]);
      mul(arg, E1);
      lin.apply(arg, K4[c]);
      K4[c] *= mi;
      K2[c] += K3[c];
      mul(K2[c], E1);
      mul(K1[c], E2);
      mul(psi[c], E2);
      K1[c].axpy(2.0, K2[c]);
      K1[c] += K4[c];
      psi[c].axpy(h / 6.0, K1[c]);
    }
    if ((n + 1) % grid.stride == 0) {
      for (std::size_t c = 0; c < nc; ++c) out.psi[c].push_back(psi[c]);
      if (keep_v) out.v.push_back(v);
    }
  }
  return out;
}

Trajectory join_halves(std::vector<SpectralField>& bwd, std::vector<SpectralField>& fwd, double spacing) {
  Trajectory tr;
  const long nb = static_cast<long>(bwd.size()) - 1;
  for (long i = nb; i >= 1; --i) {
    tr.times.push_back(-i * spacing);
    tr.mass.push_back(mass(bwd[i]));
    tr.states.push_back(std::move(bwd[i]));
  }
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    tr.times.push_back(static_cast<double>(i) * spacing);
    tr.mass.push_back(mass(fwd[i]));
    tr.states.push_back(std::move(fwd[i]));
  }
  return tr;
}

}  // namespace

LinearSolve solve_linear(int N, double L, const SpectralField& f, double m_star_N, int r,
                         const std::vector<SpectralField>& data, const TimeGrid& grid, int workers) {
  if (L >= 1.0 && static_cast<int>(L) > N) throw std::invalid_argument("L exceeds N");
  const std::size_t nc = data.size();
  const int w = std::max(1, std::min<int>(workers > 0 ? workers : worker_count(), static_cast<int>(std::max<std::size_t>(nc, 1))));
  // Contiguous column blocks; each block recomputes v_L on its own, so the
  // result does not depend on the number of blocks.
  std::vector<std::size_t> cuts(w + 1);
  for (int b = 0; b <= w; ++b) cuts[b] = nc * b / w;
  std::vector<HalfSolve> fwd(w), bwd(w);
  parallel_for(
      static_cast<std::size_t>(w),
      [&](std::size_t b) {
        std::vector<SpectralField> block(data.begin() + cuts[b], data.begin() + cuts[b + 1]);
        fwd[b] = solve_half(N, L, f, m_star_N, r, block, grid, grid.dt, b == 0);
        bwd[b] = solve_half(N, L, f, m_star_N, r, block, grid, -grid.dt, b == 0);
      },
      w);

  const double spacing = grid.dt * grid.stride;
  LinearSolve res;
  for (int b = 0; b < w; ++b)
    for (std::size_t c = 0; c < fwd[b].psi.size(); ++c) {
      Trajectory t = join_halves(bwd[b].psi[c], fwd[b].psi[c], spacing);
      t.N = N;
      t.r = r;
      t.dt = grid.dt;
      t.gauged = true;
      res.psi.push_back(std::move(t));
    }
  if (L >= 1.0 && !fwd.empty() && !fwd[0].v.empty()) {
    res.v = join_halves(bwd[0].v, fwd[0].v, spacing);
    res.v.N = static_cast<int>(L);
    res.v.r = r;
    res.v.dt = grid.dt;
    res.v.gauged = true;
  }
  return res;
}

ScaleLadder::ScaleLadder(int r, int N_max, std::uint64_t seed, double delta, double tau)
    : ScaleLadder(r, sample_gff(N_max, seed).gaussians, delta, tau) {}

ScaleLadder::ScaleLadder(int r, const SpectralField& gaussians, double delta, double tau)
    : r_(r), N_max_(gaussians.cutoff()), delta_(delta), tau_(tau), g_(gaussians), f_(gff_from_gaussians(gaussians)) {
  grid_ = TimeGrid::for_cutoff(N_max_, tau);
}

double ScaleLadder::m_star(int N) const {
  if (N < 1) return 0.0;
  return mass(project(f_, N)) - sigma(N);
}

const Trajectory& ScaleLadder::v(int N) {
  if (N > N_max_) throw std::invalid_argument("scale above ladder cutoff");
  auto it = v_.find(N);
  if (it != v_.end()) return it->second;
  Trajectory tr;
  if (N < 1) {
    const long frames = std::lround(grid_.half_span() * grid_.frames_per_unit);
    for (long i = -frames; i <= frames; ++i) {
      tr.times.push_back(static_cast<double>(i) / grid_.frames_per_unit);
      tr.states.emplace_back(1);
      tr.mass.push_back(0.0);
      tr.gauge_phase.push_back(0.0);
    }
    tr.r = r_;
    tr.gauged = true;
  } else {
    const WickContext ctx = WickContext::make(r_, N, delta_);
    tr = evolve_symmetric(project(f_, N), ctx, grid_.half_span(), grid_.dt, grid_.stride, true);
  }
  return v_.emplace(N, std::move(tr)).first->second;
}

Trajectory ScaleLadder::y(int N) { return trajectory_difference(v(N), v(N / 2)); }

const Trajectory& ScaleLadder::psi(int N, double L) {
  const auto key = std::make_pair(N, L);
  auto it = psi_.find(key);
  if (it != psi_.end()) return it->second;
  if (!in_scale_set(N, L, delta_)) throw std::invalid_argument("(N, L) outside the scale set");
  LinearSolve s = solve_linear(N, L, f_, m_star(N), r_, {delta_band(f_, N)}, grid_, 1);
  if (L >= 1.0) {
    const Trajectory& vl = v(static_cast<int>(L));
    double diff = 0.0;
    for (std::size_t i = 0; i < vl.size(); ++i) diff = std::max(diff, max_abs_diff(vl.states[i], s.v.states[i]));
    if (diff > 1e-12) throw ConsistencyError("recomputed v_L differs from cached trajectory by " + std::to_string(diff));
  }
  return psi_.emplace(key, std::move(s.psi.front())).first->second;
}

std::vector<Trajectory> ScaleLadder::psi_probe(int N, double L, const std::vector<SpectralField>& data) {
  if (!in_scale_set(N, L, delta_)) throw std::invalid_argument("(N, L) outside the scale set");
  return solve_linear(N, L, f_, m_star(N), r_, data, grid_).psi;
}

KernelMatrix ScaleLadder::H(int N, double L) {
  if (!in_scale_set(N, L, delta_)) throw std::invalid_argument("(N, L) outside the scale set");
  KernelMatrix K;
  K.N = N;
  K.L = L;
  K.columns = band_modes(N);
  std::vector<SpectralField> data;
  for (Wavenumber k : K.columns) data.push_back(SpectralField::single_mode(N, k, 1.0));
  K.column_traj = solve_linear(N, L, f_, m_star(N), r_, data, grid_).psi;
  return K;
}

KernelMatrix ScaleLadder::h(int N, double L) {
  KernelMatrix a = H(N, L);
  if (L < 1.0) return a;
  KernelMatrix d = kernel_difference(a, H(N, L / 2));
  d.L = L;
  return d;
}

Trajectory ScaleLadder::zeta(int N, double L) {
  if (L < 1.0) throw std::invalid_argument("zeta_{N,L} needs L >= 1");
  return trajectory_difference(psi(N, L), psi(N, L / 2));
}

Trajectory ScaleLadder::z(int N) { return trajectory_difference(y(N), psi(N, top_scale(N, delta_))); }

Trajectory duhamel_I(const Trajectory& F, const TimeGrid& grid) {
  check_uniform(F);
  const std::size_t n = F.size();
  const double h = F.times[1] - F.times[0];
  std::size_t j0 = n;
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(F.times[j]) < 1e-12) j0 = j;
  if (j0 == n) throw std::invalid_argument("time grid must contain t = 0");
  const int c = F.states.front().cutoff();
  // G_j = e^{-i t_j Delta} chi(t_j) F_j, cumulative trapezoid C_j
  std::vector<SpectralField> C(n, SpectralField(c));
  SpectralField prev(c);
  for (std::size_t j = 0; j < n; ++j) {
    SpectralField g = linear_flow(F.states[j], -F.times[j]);
    g *= grid.window(F.times[j]);
    if (j > 0) {
      C[j] = C[j - 1];
      C[j].axpy(0.5 * h, prev);
      C[j].axpy(0.5 * h, g);
    }
    prev = std::move(g);
  }
  Trajectory out = F;
  for (std::size_t j = 0; j < n; ++j) {
    SpectralField d = C[j];
    d -= C[j0];
    out.states[j] = linear_flow(d, F.times[j]);
    out.states[j] *= grid.window(F.times[j]);
    out.mass[j] = mass(out.states[j]);
  }
  return out;
}

Trajectory duhamel_J(const Trajectory& F, const TimeGrid& grid) {
  check_uniform(F);
  const std::size_t n = F.size();
  const double h = F.times[1] - F.times[0];
  const int c = F.states.front().cutoff();
  std::vector<SpectralField> C(n, SpectralField(c));
  SpectralField prev(c);
  for (std::size_t j = 0; j < n; ++j) {
    SpectralField g = linear_flow(F.states[j], -F.times[j]);
    g *= grid.window(F.times[j]);
    if (j > 0) {
      C[j] = C[j - 1];
      C[j].axpy(0.5 * h, prev);
      C[j].axpy(0.5 * h, g);
    }
    prev = std::move(g);
  }
  const SpectralField& total = C[n - 1];
  Trajectory out = F;
  for (std::size_t j = 0; j < n; ++j) {
    // C_j - (total - C_j)
    SpectralField d = C[j];
    d *= 2.0;
    d -= total;
    out.states[j] = linear_flow(d, F.times[j]);
    out.states[j] *= grid.window(F.times[j]);
    out.mass[j] = mass(out.states[j]);
  }
  return out;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope needs two or more points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_slope: degenerate abscissae");
  return sxy / sxx;
}

namespace {

std::vector<SpectralField> phase_probes(int N, int count, std::uint64_t seed) {
  const auto band = band_modes(N);
  std::vector<SpectralField> out;
  for (int p = 0; p < count; ++p) {
    auto rng = make_rng(seed, 0x70726f62ULL + static_cast<std::uint64_t>(p));
    std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
    SpectralField w(N);
    for (Wavenumber k : band) w.set(k, std::polar(1.0, ang(rng)));
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

ScanReport apriori_scan(const ScanOptions& opt) {
  ScanReport rep;
  const Params P = Params::from_delta(opt.delta);
  const int N_max = *std::max_element(opt.N_list.begin(), opt.N_list.end());
  std::vector<double> zx, zy;
  std::map<int, std::map<double, std::vector<double>>> hz;  // N -> L -> log Z per seed

  for (std::uint64_t seed : opt.seeds) {
    ScaleLadder lad(opt.r, N_max, seed, opt.delta, opt.tau);
    const TimeGrid& grid = lad.grid();
    for (int N : opt.N_list) {
      const Trajectory z = lad.z(N);
      const double zn = xsb_norm(z, grid, 0.0, P.b);
      rep.rows.push_back({seed, N, top_scale(N, opt.delta), "z_Xb", zn, std::pow(N, -1.0 + P.gamma)});
      const Trajectory y = lad.y(N);
      const TwistedTransform ty = twisted_transform(y, grid, N);
      if (ty.leakage > 1e-4)
        rep.warnings.push_back("spectral leakage " + std::to_string(ty.leakage) + " in y_N at N=" + std::to_string(N));
      rep.rows.push_back({seed, N, 0.0, "y_Xb", xsb_norm(ty, 0.0, P.b), 0.0});
      zx.push_back(std::log(static_cast<double>(N)));
      zy.push_back(std::log(zn));
    }
    std::vector<int> kernel_N;
    for (int N : opt.N_list)
      if (N <= opt.full_kernel_max_N) kernel_N.push_back(N);
    for (int N : opt.L_scan_N)
      if (std::find(kernel_N.begin(), kernel_N.end(), N) == kernel_N.end()) kernel_N.push_back(N);
    for (int N : kernel_N) {
      const bool full = N <= opt.full_kernel_max_N;
      // Kernels are built on the time grid of their own cutoff, from the same
      // Gaussians restricted to the shell of N.
      ScaleLadder sub(opt.r, project(lad.gaussians(), N), opt.delta, opt.tau);
      const TimeGrid& kgrid = sub.grid();
      std::vector<Trajectory> prev_probe;
      for (double L : scales_below(N, opt.delta)) {
        const double zb_bound = std::pow(N, 0.5 + P.gamma0) / std::sqrt(L);
        const double yb_bound = std::pow(L, -P.delta0);
        double zb = 0.0;
        if (full) {
          const KernelMatrix hk = sub.h(N, L);
          zb = zb_norm(hk, kgrid, P.b);
          rep.rows.push_back({seed, N, L, "h_Zb", zb, zb_bound});
          rep.rows.push_back({seed, N, L, "h_Yb", yb_norm(hk, kgrid, P.b), yb_bound});
        } else {
          // E|h g|^2 = ||h||_Z^2 for independent unit-modulus random phases g.
          const auto probes = phase_probes(N, opt.probes, seed);
          std::vector<Trajectory> cur = sub.psi_probe(N, L, probes);
          double acc = 0.0, lower = 0.0;
          for (std::size_t p = 0; p < cur.size(); ++p) {
            const Trajectory hp = L < 1.0 ? cur[p] : trajectory_difference(cur[p], prev_probe[p]);
            const double x = xsb_norm(hp, kgrid, 0.0, P.b);
            acc += x * x;
            lower = std::max(lower, x / std::sqrt(mass(probes[p])));
          }
          zb = std::sqrt(acc / cur.size());
          rep.rows.push_back({seed, N, L, "h_Zb_probe", zb, zb_bound});
          rep.rows.push_back({seed, N, L, "h_Yb_lower", lower, yb_bound});
          prev_probe = std::move(cur);
        }
        hz[N][L].push_back(std::log(zb));
      }
    }
  }
  rep.fit.z_slope = ols_slope(zx, zy);
  rep.fit.z_slope_bound = -1.0 + P.gamma + 0.3;
  for (auto& [N, byL] : hz) {
    std::vector<double> lx, ly;
    for (auto& [L, vals] : byL) {
      if (L < 2.0) continue;
      lx.push_back(std::log(L));
      ly.push_back(std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size());
    }
    if (lx.size() >= 2) rep.fit.h_L_slope[N] = ols_slope(lx, ly);
  }
  return rep;
}

}  // namespace wnls
