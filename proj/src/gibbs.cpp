#include "wnls/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wnls/parallel.hpp"

namespace wnls {

SpectralField gff_from_gaussians(const SpectralField& g) {
  SpectralField f = g;
  auto d = f.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) d[i] /= f.mode_at(i).bracket();
  return f;
}

namespace {
SpectralField draw_gaussians(int N, std::mt19937_64& rng) {
  SpectralField g(N);
  for (Wavenumber k : shell_modes(N)) g.set(k, complex_gaussian(rng));
  return g;
}
}  // namespace

SpectralField draw_gff(int N, std::mt19937_64& rng) { return gff_from_gaussians(draw_gaussians(N, rng)); }

GffSample sample_gff(int N, std::uint64_t seed) {
  auto rng = make_rng(seed, 0);
  GffSample s;
  s.gaussians = draw_gaussians(N, rng);
  s.field = gff_from_gaussians(s.gaussians);
  s.seed = seed;
  s.N = N;
  return s;
}

MassStats mass_stats(const SpectralField& u, int N) {
  MassStats s;
  s.m_N = mass(project(u, N));
  s.m_N_star = s.m_N - sigma(N);
  // Pi_{1/2} is the zero projection, so m*_{1/2} = 0.
  const double half = N >= 2 ? mass(project(u, N / 2)) - sigma(N / 2) : 0.0;
  s.nu_N = s.m_N_star - half;
  return s;
}

double potential_energy(const SpectralField& u, const WickContext& ctx) {
  const SpectralField pu = project(u, ctx.N);
  const SpectralField w = wick_power(pu, 2 * ctx.r + 2, ctx.sigma_N, 1);
  const cplx a = mean(w);
  const double scale = std::max(1.0, std::abs(a.real()));
  if (!std::isfinite(a.real())) throw NumericalAbort("non-finite potential energy");
  if (std::abs(a.imag()) > 1e-10 * scale) throw ConsistencyError("potential energy has an imaginary part");
  return a.real() / (ctx.r + 1);
}

double kinetic_energy(const SpectralField& u, int N) {
  const SpectralField pu = project(u, N);
  double s = 0.0;
  auto d = pu.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) s += pu.mode_at(i).norm2() * std::norm(d[i]);
  return s;
}

double hamiltonian(const SpectralField& u, const WickContext& ctx) {
  return kinetic_energy(u, ctx.N) + potential_energy(u, ctx);
}

std::vector<double> GibbsEnsemble::normalized_weights() const {
  std::vector<double> w(log_weights.size());
  if (w.empty()) return w;
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] = std::exp(log_weights[i] - mx));
  for (double& x : w) x /= s;
  return w;
}

double effective_sample_size(std::span<const double> log_weights) {
  if (log_weights.empty()) return 0.0;
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  double s = 0.0, s2 = 0.0;
  for (double lw : log_weights) {
    const double w = std::exp(lw - mx);
    s += w;
    s2 += w * w;
  }
  return s * s / s2;
}

namespace {
double log_target(const SpectralField& u, const WickContext& ctx, const GibbsOptions& opt, double* V) {
  *V = potential_energy(u, ctx);
  double lw = opt.weight_off ? 0.0 : -*V;
  if (opt.mass_weight) lw -= mass(project(u, ctx.N));
  return lw;
}
}  // namespace

GibbsEnsemble sample_gibbs_importance(int N, int r, int count, std::uint64_t seed, const GibbsOptions& opt) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  const WickContext ctx = WickContext::make(r, N);
  GibbsEnsemble ens;
  ens.samples.resize(count);
  ens.log_weights.resize(count);
  ens.potential.resize(count);
  parallel_for(
      static_cast<std::size_t>(count),
      [&](std::size_t i) {
        GffSample s = sample_gff(N, derive_seed(seed, i));
        ens.log_weights[i] = log_target(s.field, ctx, opt, &ens.potential[i]);
        ens.samples[i] = std::move(s.field);
      },
      opt.workers);
  ens.seed = seed;
  ens.N = N;
  ens.r = r;
  ens.sampler_tag = "importance";
  ens.ess = effective_sample_size(ens.log_weights);
  const double mx = *std::max_element(ens.log_weights.begin(), ens.log_weights.end());
  double s = 0.0;
  for (double lw : ens.log_weights) s += std::exp(lw - mx);
  ens.log_Z = mx + std::log(s / count);
  if (ens.ess < 0.01 * count)
    ens.warnings.push_back("degenerate effective sample size " + std::to_string(ens.ess));
  return ens;
}

GibbsEnsemble sample_gibbs_pcn(int N, int r, int steps, double step_size, std::uint64_t seed,
                               const GibbsOptions& opt) {
  if (!(step_size > 0.0 && step_size <= 1.0)) throw std::invalid_argument("pCN step size must lie in (0,1]");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  const WickContext ctx = WickContext::make(r, N);
  auto rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double keep = std::sqrt(1.0 - step_size * step_size);

  GibbsEnsemble ens;
  SpectralField u = draw_gff(N, rng);
  double V = 0.0;
  double lt = log_target(u, ctx, opt, &V);
  long accepted = 0;
  for (int s = 0; s < steps; ++s) {
    SpectralField prop = keep * u;
    prop.axpy(step_size, draw_gff(N, rng));
    double Vp = 0.0;
    const double ltp = log_target(prop, ctx, opt, &Vp);
    if (std::log(unif(rng)) < ltp - lt) {
      u = std::move(prop);
      lt = ltp;
      V = Vp;
      ++accepted;
    }
    ens.samples.push_back(u);
    ens.potential.push_back(V);
    ens.log_weights.push_back(0.0);
  }
  ens.seed = seed;
  ens.N = N;
  ens.r = r;
  ens.sampler_tag = "pcn";
  ens.ess = static_cast<double>(steps);
  ens.acceptance_rate = static_cast<double>(accepted) / steps;
  return ens;
}

namespace {
// Gaussian part plus the sampled potential; the velocity enters with the same
// <k>^2 weights.
double hmc_energy(const SpectralField& u, const SpectralField& w, const WickContext& ctx, const GibbsOptions& opt) {
  double V = 0.0;
  double e = -log_target(u, ctx, opt, &V);
  for (std::size_t i = 0; i < u.data().size(); ++i) {
    const double b = u.mode_at(i).bracket2();
    e += b * (std::norm(u.data()[i]) + std::norm(w.data()[i]));
  }
  return e;
}

void hmc_kick(SpectralField& w, const SpectralField& u, const WickContext& ctx, const GibbsOptions& opt, double h) {
  if (!opt.weight_off) {
    const SpectralField grad = wick_power(u, 2 * ctx.r + 1, ctx.sigma_N, ctx.N);
    for (std::size_t i = 0; i < w.data().size(); ++i)
      w.data()[i] -= h * grad.data()[i] / double(w.mode_at(i).bracket2());
  }
  if (opt.mass_weight)
    for (std::size_t i = 0; i < w.data().size(); ++i) w.data()[i] -= h * u.data()[i] / double(w.mode_at(i).bracket2());
}
}  // namespace

GibbsEnsemble sample_gibbs_hmc(int N, int r, int count, std::uint64_t seed, const HmcOptions& hmc,
                               const GibbsOptions& opt) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  if (hmc.burn_in < 1 || hmc.leapfrog_steps < 1 || !(hmc.step_size > 0.0))
    throw std::invalid_argument("HMC needs burn_in, leapfrog_steps >= 1 and a positive step size");
  const WickContext ctx = WickContext::make(r, N);
  const double c = std::cos(hmc.step_size), s = std::sin(hmc.step_size);
  GibbsEnsemble ens;
  ens.samples.resize(count);
  ens.potential.resize(count);
  ens.log_weights.assign(count, 0.0);
  std::vector<long> accepted(count, 0);
  parallel_for(
      static_cast<std::size_t>(count),
      [&](std::size_t i) {
        auto rng = make_rng(seed, i);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        SpectralField u = draw_gff(N, rng);
        for (int it = 0; it < hmc.burn_in; ++it) {
          SpectralField w = draw_gff(N, rng);
          const double H0 = hmc_energy(u, w, ctx, opt);
          SpectralField q = u;
          for (int l = 0; l < hmc.leapfrog_steps; ++l) {
            hmc_kick(w, q, ctx, opt, 0.5 * hmc.step_size);
            SpectralField q1 = c * q;
            q1.axpy(s, w);
            w *= c;
            w.axpy(-s, q);
            q = std::move(q1);
            hmc_kick(w, q, ctx, opt, 0.5 * hmc.step_size);
          }
          const double H1 = hmc_energy(q, w, ctx, opt);
          if (!std::isfinite(H1)) continue;
          if (std::log(unif(rng)) < H0 - H1) {
            u = std::move(q);
            ++accepted[i];
          }
        }
        ens.potential[i] = potential_energy(u, ctx);
        ens.samples[i] = std::move(u);
      },
      opt.workers);
  ens.seed = seed;
  ens.N = N;
  ens.r = r;
  ens.sampler_tag = "hmc";
  ens.ess = static_cast<double>(count);
  ens.acceptance_rate =
      static_cast<double>(std::accumulate(accepted.begin(), accepted.end(), 0L)) / (double(count) * hmc.burn_in);
  if (ens.acceptance_rate < 0.3)
    ens.warnings.push_back("low HMC acceptance " + std::to_string(ens.acceptance_rate));
  return ens;
}

Estimate weighted_mean(std::span<const double> log_weights, std::span<const double> values) {
  if (log_weights.size() != values.size() || values.empty()) throw std::invalid_argument("weight/value mismatch");
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> w(values.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] = std::exp(log_weights[i] - mx));
  double mu = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mu += w[i] * values[i];
  mu /= s;
  double v = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) v += w[i] * w[i] * (values[i] - mu) * (values[i] - mu);
  return {mu, std::sqrt(v) / s};
}

Estimate batch_mean(std::span<const double> values, int batches) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("batch_mean needs at least two values");
  if (batches <= 0) batches = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / batches;
  if (size == 0) throw std::invalid_argument("too many batches");
  std::vector<double> means(batches);
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < size; ++i) s += values[b * size + i];
    means[b] = s / size;
  }
  // Mean over every value; the batches only set the error bar.
  const double all = std::accumulate(values.begin(), values.end(), 0.0) / n;
  const double mu = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double v = 0.0;
  for (double m : means) v += (m - mu) * (m - mu);
  v /= (batches - 1);
  return {all, std::sqrt(v / batches)};
}

Estimate ensemble_estimate(const GibbsEnsemble& ens, std::span<const double> values) {
  if (ens.sampler_tag == "pcn") return batch_mean(values);
  return weighted_mean(ens.log_weights, values);
}

}  // namespace wnls
