#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wnls/spectral.hpp"
#include "wnls/wick.hpp"

namespace wnls {

struct GffSample {
  SpectralField field;      // g_k / <k>
  SpectralField gaussians;  // g_k
  std::uint64_t seed = 0;
  int N = 1;
};

GffSample sample_gff(int N, std::uint64_t seed);
// Field with coefficients g_k/<k>, drawing g from rng in shell order.
SpectralField draw_gff(int N, std::mt19937_64& rng);
SpectralField gff_from_gaussians(const SpectralField& g);

struct MassStats {
  double m_N = 0;
  double m_N_star = 0;
  double nu_N = 0;  // m*_N - m*_{N/2}
};

MassStats mass_stats(const SpectralField& u, int N);

// V_N[u] = A[W^{2r+2}(Pi_N u)] / (r+1). Throws ConsistencyError if the
// computed mean has an imaginary part above 1e-10 relative.
double potential_energy(const SpectralField& u, const WickContext& ctx);
// sum |k|^2 |u_k|^2 over <k> <= N
double kinetic_energy(const SpectralField& u, int N);
double hamiltonian(const SpectralField& u, const WickContext& ctx);

struct GibbsOptions {
  bool mass_weight = false;  // extra factor e^{-M[u]}
  bool weight_off = false;   // drop e^{-V}: the free field itself
  int workers = 0;
};

struct GibbsEnsemble {
  std::vector<SpectralField> samples;
  std::vector<double> log_weights;
  std::vector<double> potential;  // V_N per sample
  std::uint64_t seed = 0;
  int N = 1;
  int r = 1;
  double ess = 0;
  std::string sampler_tag;  // "importance", "pcn" or "hmc"
  double log_Z = 0;         // importance sampler only
  double acceptance_rate = 1.0;
  std::vector<std::string> warnings;

  std::size_t size() const { return samples.size(); }
  // Self-normalized weights summing to one.
  std::vector<double> normalized_weights() const;
};

GibbsEnsemble sample_gibbs_importance(int N, int r, int count, std::uint64_t seed, const GibbsOptions& opt = {});
GibbsEnsemble sample_gibbs_pcn(int N, int r, int steps, double step_size, std::uint64_t seed,
                               const GibbsOptions& opt = {});

// Preconditioned Hamiltonian Monte Carlo: the Gaussian part is integrated
// exactly as a unit-frequency rotation of (u, velocity), the potential by
// half kicks <k>^{-2} W^{2r+1}(u)_k. Each of the `count` samples is the end
// state of its own chain (substream i of `seed`), so samples are independent
// and carry equal weights.
struct HmcOptions {
  int burn_in = 100;  // HMC iterations per chain
  double step_size = 0.2;
  int leapfrog_steps = 8;
};

GibbsEnsemble sample_gibbs_hmc(int N, int r, int count, std::uint64_t seed, const HmcOptions& hmc = {},
                               const GibbsOptions& opt = {});

struct Estimate {
  double mean = 0;
  double se = 0;
};

// Weighted mean of per-sample values with a standard error appropriate to the
// sampler: the self-normalized delta method for importance ensembles, batch
// means for a pCN chain, the plain standard error for independent HMC chains.
Estimate ensemble_estimate(const GibbsEnsemble& ens, std::span<const double> values);
Estimate weighted_mean(std::span<const double> log_weights, std::span<const double> values);
Estimate batch_mean(std::span<const double> values, int batches = 0);
double effective_sample_size(std::span<const double> log_weights);

}  // namespace wnls
