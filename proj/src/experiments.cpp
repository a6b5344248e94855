#include "wnls/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "wnls/averaging.hpp"
#include "wnls/parallel.hpp"

namespace wnls {

double kolmogorov_q(double x) {
  if (x < 0.2) return 1.0;
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    s += (j % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& wa, const std::vector<double>& b,
                       const std::vector<double>& wb) {
  if (a.empty() || b.empty() || a.size() != wa.size() || b.size() != wb.size())
    throw std::invalid_argument("KS needs two non-empty weighted samples");
  auto prepare = [](const std::vector<double>& x, const std::vector<double>& w, double* n_eff) {
    std::vector<std::pair<double, double>> v(x.size());
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      v[i] = {x[i], w[i]};
      s += w[i];
      s2 += w[i] * w[i];
    }
    for (auto& p : v) p.second /= s;
    std::sort(v.begin(), v.end());
    *n_eff = s * s / s2;
    return v;
  };
  double na = 0, nb = 0;
  const auto A = prepare(a, wa, &na);
  const auto B = prepare(b, wb, &nb);
  double Fa = 0, Fb = 0, D = 0;
  std::size_t i = 0, j = 0;
  while (i < A.size() || j < B.size()) {
    const double x = j == B.size() || (i < A.size() && A[i].first <= B[j].first) ? A[i].first : B[j].first;
    while (i < A.size() && A[i].first == x) Fa += A[i++].second;
    while (j < B.size() && B[j].first == x) Fb += B[j++].second;
    D = std::max(D, std::abs(Fa - Fb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return {D, kolmogorov_q((en + 0.12 + 0.11 / en) * D)};
}

KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  return ks_two_sample(a, std::vector<double>(a.size(), 1.0), b, std::vector<double>(b.size(), 1.0));
}

namespace {

std::string mode_label(Wavenumber k) { return std::to_string(k.kx) + "_" + std::to_string(k.ky); }

double z_score(const Estimate& pre, const Estimate& post) {
  const double diff = post.mean - pre.mean;
  const double se = std::hypot(pre.se, post.se);
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  return diff / se;
}

// Frame spacing h = 1/frames_per_unit; each cutoff steps at h/ceil(h/dt_ref).
std::pair<double, int> matched_step(int N, int frames_per_unit) {
  const double h = 1.0 / frames_per_unit;
  const int stride = std::max(1, static_cast<int>(std::ceil(h / default_dt(N) - 1e-9)));
  return {h / stride, stride};
}

void check_window(double tau, int frames_per_unit) {
  if (!(tau > 0.0) || frames_per_unit < 1) throw std::invalid_argument("need tau > 0 and frames_per_unit >= 1");
  const double frames = tau * frames_per_unit;
  if (std::abs(frames - std::round(frames)) > 1e-9) throw std::invalid_argument("tau must be a multiple of the frame spacing");
}

void check_ladder(const std::vector<int>& N_list, std::size_t min_size) {
  if (N_list.size() < min_size) throw std::invalid_argument("cutoff list too short");
  for (std::size_t i = 0; i < N_list.size(); ++i)
    if (N_list[i] < 1 || (i && N_list[i] <= N_list[i - 1]))
      throw std::invalid_argument("cutoff list must be increasing and positive");
}

double sup_norm(const Trajectory& tr, double s) {
  double m = 0.0;
  for (const auto& u : tr.states) m = std::max(m, sobolev_norm(u, s));
  return m;
}

}  // namespace

InvarianceReport invariance_experiment(const InvarianceOptions& opt) {
  if (opt.N < 1 || opt.r < 1 || opt.count < 2) throw std::invalid_argument("invariance needs N, r >= 1 and count >= 2");
  if (!std::isfinite(opt.t) || opt.t < 0.0) throw std::invalid_argument("t must be finite and non-negative");
  if (opt.refine_count < 0 || opt.refine_count > opt.count) throw std::invalid_argument("refine_count out of range");

  GibbsOptions gopt;
  gopt.workers = opt.workers;
  GibbsEnsemble ens;
  if (opt.sampler == "hmc")
    ens = sample_gibbs_hmc(opt.N, opt.r, opt.count, opt.seed, opt.hmc, gopt);
  else if (opt.sampler == "importance")
    ens = sample_gibbs_importance(opt.N, opt.r, opt.count, opt.seed, gopt);
  else
    throw ConfigError("unknown sampler " + opt.sampler);
  if (ens.ess < opt.min_ess_fraction * opt.count)
    throw NumericalAbort("ESS-degenerate ensemble: effective size " + std::to_string(ens.ess) + " of " +
                         std::to_string(opt.count));

  InvarianceReport rep;
  rep.ess = ens.ess;
  rep.acceptance = ens.acceptance_rate;
  rep.warnings = ens.warnings;

  const WickContext ctx = WickContext::make(opt.r, opt.N);
  std::vector<Wavenumber> modes;
  for (auto k : opt.modes) {
    if (in_shell(k, opt.N))
      modes.push_back(k);
    else
      rep.warnings.push_back("mode " + mode_label(k) + " outside the shell, dropped");
  }

  auto& names = rep.table.names;
  names = {"m_N", "V_N", "K_N", "H_N"};
  for (int j = 1; j <= opt.r + 2; ++j) names.push_back("W" + std::to_string(2 * j) + "_mean");
  for (auto k : modes) names.push_back("abs2_u_" + mode_label(k));
  for (auto k : modes) names.push_back("re_u_" + mode_label(k));
  const std::size_t n_obs = names.size();
  const std::size_t h_index = 3;

  auto observe = [&](const SpectralField& u, std::size_t i, std::vector<std::vector<double>>& out) {
    const double V = potential_energy(u, ctx);
    const double K = kinetic_energy(u, opt.N);
    std::size_t c = 0;
    out[c++][i] = mass(project(u, opt.N));
    out[c++][i] = V;
    out[c++][i] = K;
    out[c++][i] = K + V;
    for (int j = 1; j <= opt.r + 2; ++j) out[c++][i] = wick_mean(u, 2 * j, ctx.sigma_N);
    for (auto k : modes) out[c++][i] = std::norm(u[k]);
    for (auto k : modes) out[c++][i] = u[k].real();
  };

  const double dt = opt.dt > 0.0 ? opt.dt : default_dt(opt.N);
  rep.dt = dt;
  auto push = [&](const SpectralField& u0, double step) {
    if (opt.t == 0.0) return u0;
    EvolutionConfig cfg;
    cfg.scheme = opt.scheme;
    cfg.dt = step;
    cfg.t1 = opt.t;
    cfg.save_stride = std::numeric_limits<int>::max();
    cfg.nonlinear = opt.nonlinear;
    cfg.record_energy = false;
    Trajectory tr = evolve(u0, ctx, cfg, opt.gauged);
    if (opt.gauged) tr = gauge_inverse(tr, ctx);
    return tr.states.back();
  };

  const std::size_t n = ens.size();
  rep.table.log_weights = ens.log_weights;
  rep.table.pre.assign(n_obs, std::vector<double>(n));
  rep.table.post.assign(n_obs, std::vector<double>(n));
  parallel_for(
      n,
      [&](std::size_t i) {
        observe(ens.samples[i], i, rep.table.pre);
        observe(push(ens.samples[i], dt), i, rep.table.post);
      },
      opt.workers);

  for (std::size_t c = 0; c < n_obs; ++c) {
    const Estimate a = ensemble_estimate(ens, rep.table.pre[c]);
    const Estimate b = ensemble_estimate(ens, rep.table.post[c]);
    ObservableRow row{names[c], a.mean, a.se, b.mean, b.se, z_score(a, b)};
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(row.z));
    rep.observables.push_back(row);
  }

  std::vector<double> w(n);
  const double mx = *std::max_element(ens.log_weights.begin(), ens.log_weights.end());
  for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(ens.log_weights[i] - mx);
  for (std::size_t c = 0; c < n_obs; ++c) {
    if (names[c] != "m_N" && names[c].rfind("re_u_", 0) != 0) continue;
    KsRow row{names[c], ks_two_sample(rep.table.pre[c], w, rep.table.post[c], w)};
    if (names[c] == "m_N") rep.ks_p_mass = row.ks.p;
    rep.min_ks_p = std::min(rep.min_ks_p, row.ks.p);
    rep.ks.push_back(row);
  }

  const std::size_t m = static_cast<std::size_t>(opt.refine_count);
  std::vector<double> half(m);
  parallel_for(
      m, [&](std::size_t i) { half[i] = hamiltonian(push(ens.samples[i], 0.5 * dt), ctx); }, opt.workers);
  for (std::size_t i = 0; i < m; ++i) {
    const double H0 = rep.table.pre[h_index][i];
    const double scale = std::max(1.0, std::abs(H0));
    rep.violation += std::abs(rep.table.post[h_index][i] - H0) / scale / m;
    rep.violation_half += std::abs(half[i] - H0) / scale / m;
  }
  rep.refinement_ratio = rep.violation_half > 0.0 ? rep.violation / rep.violation_half : 0.0;

  rep.z_pass = rep.max_abs_z <= opt.z_max;
  rep.ks_pass = rep.ks_p_mass > opt.ks_p_min;
  rep.refine_pass = rep.violation == 0.0 || rep.violation_half < rep.violation;
  return rep;
}

ConvergenceReport convergence_experiment(const ConvergenceOptions& opt) {
  check_ladder(opt.N_list, 3);
  check_window(opt.tau, opt.frames_per_unit);
  if (opt.seeds < 1 || opt.r < 1) throw std::invalid_argument("convergence needs seeds >= 1 and r >= 1");
  const int N_max = opt.N_list.back();
  const std::size_t L = opt.N_list.size();
  const std::size_t S = static_cast<std::size_t>(opt.seeds);

  std::vector<SpectralField> data(S);
  for (std::size_t s = 0; s < S; ++s) data[s] = sample_gff(N_max, derive_seed(opt.seed, s)).field;

  std::vector<Trajectory> v(S * L);
  parallel_for(
      S * L,
      [&](std::size_t task) {
        const std::size_t s = task / L, i = task % L;
        const int N = opt.N_list[i];
        const auto [dt, stride] = matched_step(N, opt.frames_per_unit);
        const WickContext ctx = WickContext::make(opt.r, N, opt.delta);
        v[task] = evolve_symmetric(project(data[s], N), ctx, opt.tau, dt, stride, true);
      },
      opt.workers);

  auto remainder = [](const Trajectory& tr) {
    const auto zero = std::min_element(tr.times.begin(), tr.times.end(),
                                       [](double a, double b) { return std::abs(a) < std::abs(b); });
    return trajectory_difference(tr, free_evolution(tr.states[zero - tr.times.begin()], tr.times));
  };

  ConvergenceReport rep;
  std::vector<double> xd, yd, xr, yr, yv, yrd;
  for (std::size_t s = 0; s < S; ++s) {
    Trajectory prev_rem;
    for (std::size_t i = 0; i < L; ++i) {
      const Trajectory& tr = v[s * L + i];
      const Trajectory rem = remainder(tr);
      ConvergenceRow row;
      row.seed = s;
      row.N = opt.N_list[i];
      if (i > 0) {
        row.N_prev = opt.N_list[i - 1];
        row.distance = sup_norm(trajectory_difference(tr, v[s * L + i - 1]), -opt.eps);
        row.remainder_distance = sup_norm(trajectory_difference(rem, prev_rem), opt.s_smooth);
        xd.push_back(std::log(row.N));
        yd.push_back(std::log(row.distance));
        yrd.push_back(std::log(row.remainder_distance));
      }
      row.remainder = sup_norm(rem, opt.s_smooth);
      prev_rem = rem;
      row.v_norm = sup_norm(tr, opt.s_smooth);
      xr.push_back(std::log(row.N));
      yr.push_back(std::log(row.remainder));
      yv.push_back(std::log(row.v_norm));
      rep.rows.push_back(row);
    }
  }
  rep.distance_slope = ols_slope(xd, yd);
  rep.remainder_slope = ols_slope(xr, yr);
  rep.remainder_distance_slope = ols_slope(xd, yrd);
  rep.v_norm_slope = ols_slope(xr, yv);
  rep.decay_pass = rep.distance_slope <= -opt.slope_margin;
  rep.smoothing_pass = rep.remainder_slope <= opt.remainder_slope_max && rep.v_norm_slope > rep.remainder_slope;
  return rep;
}

StabilityReport stability_experiment(const StabilityOptions& opt) {
  check_ladder(opt.N_list, 1);
  check_window(opt.tau, opt.frames_per_unit);
  if (opt.seeds < 1 || opt.r < 1 || !(opt.A >= 0.0)) throw std::invalid_argument("stability needs seeds, r >= 1, A >= 0");
  const Params params = Params::from_delta(opt.delta);
  const int N_max = opt.N_list.back();
  const std::size_t L = opt.N_list.size();
  const std::size_t S = static_cast<std::size_t>(opt.seeds);

  std::vector<SpectralField> data(S);
  for (std::size_t s = 0; s < S; ++s) data[s] = sample_gff(N_max, derive_seed(opt.seed, s)).field;

  StabilityReport rep;
  rep.growth_max = opt.growth_max;
  std::vector<Trajectory> v(S * L);
  rep.rows.resize(S * L);
  parallel_for(
      S * L,
      [&](std::size_t task) {
        const std::size_t s = task / L, i = task % L;
        const int N = opt.N_list[i];
        const auto [dt, stride] = matched_step(N, opt.frames_per_unit);
        const WickContext ctx = WickContext::make(opt.r, N, opt.delta);
        const SpectralField u0 = project(data[s], N);
        v[task] = evolve_symmetric(u0, ctx, opt.tau, dt, stride, true);

        auto rng = make_rng(derive_seed(opt.seed, s), static_cast<std::uint64_t>(N));
        SpectralField eta(N);
        for (auto k : shell_modes(N)) eta.set(k, complex_gaussian(rng));
        const double size = opt.A * std::pow(N, -1.0 + params.gamma);
        eta *= size / std::sqrt(mass(eta));
        const Trajectory w = evolve_symmetric(u0 + eta, ctx, opt.tau, dt, stride, true);

        StabilityRow& row = rep.rows[task];
        row.seed = s;
        row.N = N;
        row.initial = size;
        const Trajectory d = trajectory_difference(w, v[task]);
        for (double m : d.mass) row.max_distance = std::max(row.max_distance, std::sqrt(m));
        row.end_distance = std::sqrt(std::max(d.mass.front(), d.mass.back()));
        row.growth = size > 0.0 ? row.end_distance / size : 0.0;
      },
      opt.workers);
  for (const auto& row : rep.rows) rep.max_growth = std::max(rep.max_growth, row.growth);

  std::vector<double> x, y;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t i = 0; i + 1 < L; ++i) {
      const Trajectory& a = v[s * L + i];
      const Trajectory& b = v[s * L + i + 1];
      CommutatorRow row{s, opt.N_list[i], opt.N_list[i + 1], 0.0};
      for (std::size_t f = 0; f < a.size(); ++f) {
        SpectralField diff = a.states[f] - project(b.states[f], a.states[f].cutoff());
        row.distance = std::max(row.distance, std::sqrt(mass(diff)));
      }
      x.push_back(std::log(row.N));
      y.push_back(std::log(row.distance));
      rep.commutator.push_back(row);
    }
  }
  rep.commutator_slope = x.size() >= 2 ? ols_slope(x, y) : 0.0;
  return rep;
}

}  // namespace wnls
