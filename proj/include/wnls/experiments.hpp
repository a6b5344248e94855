#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wnls/dynamics.hpp"
#include "wnls/gibbs.hpp"
#include "wnls/harness.hpp"

namespace wnls {

// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
struct KsResult {
  double D = 0;
  double p = 1;
};
KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);
// Weighted version: empirical CDFs from normalized weights, effective sizes
// (sum w)^2 / sum w^2 in place of the sample counts.
KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& wa, const std::vector<double>& b,
                       const std::vector<double>& wb);
// P(K > x) for the Kolmogorov distribution.
double kolmogorov_q(double x);

struct InvarianceOptions {
  int N = 8;
  int r = 1;
  double t = 1.0;
  int count = 4096;
  std::uint64_t seed = 1;
  double dt = 0.0;  // 0 selects default_dt(N)
  Scheme scheme = Scheme::ip_rk4;
  bool gauged = false;     // evolve Psi_t and map back with the inverse gauge
  bool nonlinear = true;
  std::string sampler = "hmc";  // "hmc" or "importance"
  HmcOptions hmc;
  int refine_count = 512;  // samples rerun at dt/2
  double z_max = 4.0;
  double ks_p_min = 1e-3;
  double min_ess_fraction = 0.05;
  std::vector<Wavenumber> modes{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 1}, {3, 0}, {2, 2}};
  int workers = 0;
};

// Per-sample observables before and after the flow.
struct ObservableTable {
  std::vector<std::string> names;
  std::vector<double> log_weights;
  std::vector<std::vector<double>> pre;   // [observable][sample]
  std::vector<std::vector<double>> post;
};

struct ObservableRow {
  std::string name;
  double pre = 0, pre_se = 0;
  double post = 0, post_se = 0;
  double z = 0;
};

struct KsRow {
  std::string name;
  KsResult ks;
};

struct InvarianceReport {
  ObservableTable table;
  std::vector<ObservableRow> observables;
  std::vector<KsRow> ks;
  double ess = 0;
  double acceptance = 1;
  double max_abs_z = 0;
  double ks_p_mass = 1;  // KS p-value on m_N
  double min_ks_p = 1;
  // Mean relative energy error |H(Phi u) - H(u)|/|H(u)| over the refinement
  // subset at dt and dt/2.
  double dt = 0;
  double violation = 0;
  double violation_half = 0;
  double refinement_ratio = 0;
  bool z_pass = false, ks_pass = false, refine_pass = false;
  std::vector<std::string> warnings;
  bool pass() const { return z_pass && ks_pass && refine_pass; }
};

// Samples the truncated Gibbs measure, pushes every sample through the flow
// for time t and compares the two ensembles. Throws NumericalAbort when the
// ensemble's effective size is below min_ess_fraction * count.
InvarianceReport invariance_experiment(const InvarianceOptions& opt);

struct ConvergenceOptions {
  std::vector<int> N_list{4, 8, 16, 32};
  int r = 1;
  int seeds = 10;
  std::uint64_t seed = 1;
  double tau = 0.5;
  double eps = 0.1;       // distances in H^{-eps}
  double s_smooth = 0.3;  // remainder measured in H^{s_smooth}
  double delta = 0.1;
  double slope_margin = 0.05;
  double remainder_slope_max = 0.1;
  int frames_per_unit = 64;
  int workers = 0;
};

struct ConvergenceRow {
  std::uint64_t seed = 0;
  int N = 0;
  int N_prev = 0;         // 0 for the first cutoff
  double distance = 0;    // sup_{|t|<=tau} ||v_N - v_{N_prev}||_{H^{-eps}}
  double remainder = 0;   // sup ||v_N - e^{it Delta} v_N(0)||_{H^s}
  double remainder_distance = 0;  // sup ||R_N - R_{N_prev}||_{H^s}, R the remainder above
  double v_norm = 0;      // sup ||v_N||_{H^s}
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double distance_slope = 0;   // pooled log distance vs log N
  double remainder_slope = 0;  // pooled log remainder vs log N
  double remainder_distance_slope = 0;  // diagnostic, not gated
  double v_norm_slope = 0;
  bool decay_pass = false, smoothing_pass = false;
  bool pass() const { return decay_pass && smoothing_pass; }
};

// Gauged solutions v_N on [-tau, tau] from Pi_N of one free-field sample per
// seed, on a frame grid shared by every cutoff.
ConvergenceReport convergence_experiment(const ConvergenceOptions& opt);

struct StabilityOptions {
  std::vector<int> N_list{8, 16, 32};
  int r = 1;
  double A = 1.0;
  double tau = 0.5;
  int seeds = 3;
  std::uint64_t seed = 1;
  double delta = 0.1;
  double growth_max = 20.0;
  int frames_per_unit = 64;
  int workers = 0;
};

struct StabilityRow {
  std::uint64_t seed = 0;
  int N = 0;
  double initial = 0;       // ||w(0) - v_N(0)||_{L^2} = A N^{-1+gamma}
  double end_distance = 0;  // max over t = +-tau
  double max_distance = 0;  // max over [-tau, tau]
  double growth = 0;        // end_distance / initial
};

struct CommutatorRow {
  std::uint64_t seed = 0;
  int N = 0;
  int N_prime = 0;
  double distance = 0;  // sup ||v_N - Pi_N v_{N'}||_{L^2}
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  std::vector<CommutatorRow> commutator;
  double max_growth = 0;
  double commutator_slope = 0;
  bool pass() const { return max_growth <= growth_max; }
  double growth_max = 20;
};

StabilityReport stability_experiment(const StabilityOptions& opt);

// Registered CLI experiments. `defaults` lists every parameter with its
// default value and type; `run` writes outputs through the context and
// returns the summary recorded in the manifest.
struct Experiment {
  std::string name;
  std::string help;
  json defaults;
  std::function<json(const json& params, std::uint64_t seed, RunContext& ctx)> run;
};

const std::vector<Experiment>& experiments();
const Experiment& find_experiment(const std::string& name);

// Runs an experiment into out_dir and writes the manifest there. Missing
// parameters take their defaults; unknown ones throw ConfigError.
RunManifest run_experiment(const std::string& kind, const json& params, std::uint64_t seed,
                           const std::filesystem::path& out_dir, int workers = 0);

struct ReplayResult {
  bool identical = false;
  std::vector<std::string> mismatched;  // outputs whose hashes differ or are missing
  RunManifest replayed;
};

ReplayResult replay(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                    int workers = 0);

}  // namespace wnls
