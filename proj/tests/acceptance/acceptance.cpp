#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "wnls/dynamics.hpp"
#include "wnls/experiments.hpp"
#include "wnls/gibbs.hpp"
#include "wnls/parallel.hpp"
#include "wnls/wick.hpp"

namespace fs = std::filesystem;
using namespace wnls;

namespace {

// Pinned tolerances and budgets.
constexpr double kIdentityTol = 1e-10;
constexpr int kIdentityFields = 100;
constexpr double kMassDriftRate = 1e-10;
constexpr double kEnergyDriftRate = 1e-7;
constexpr double kOrderRatioLo = 8.0;
constexpr double kOrderRatioHi = 32.0;
constexpr double kGaugeTol = 1e-6;
constexpr int kMinCountingInstances = 100;
constexpr int kScanSeeds = 10;
constexpr std::uint64_t kSeed = 7;

constexpr double kBudget[] = {0, 60, 300, 60, 1800, 1800, 1800, 900, 600, 1800};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Criterion 1 oracles: map-based convolutions of the stored coefficients.
using Coeffs = std::map<std::pair<int, int>, cplx>;

Coeffs coeffs_of(const SpectralField& u) {
  Coeffs c;
  for (auto k : shell_modes(u.cutoff())) c[{k.kx, k.ky}] = u[k];
  return c;
}

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
    const auto it = ref.find({k.kx, k.ky});
    const cplx r = it == ref.end() ? cplx(0) : it->second;
    err = std::max(err, std::abs(got[k] - r));
    scale = std::max(scale, std::abs(r));
  }
  return err / std::max(scale, 1e-300);
}

double rel_err(const SpectralField& got, const SpectralField& ref) {
  return max_abs_diff(got, ref) / std::max(max_abs_diff(ref, SpectralField(ref.cutoff())), 1e-300);
}

Outcome identities() {
  const int cutoffs[] = {2, 4, 6, 8};
  std::map<std::string, double> worst{{"expansion", 0}, {"companion", 0}, {"mean", 0},
                                      {"dual_path", 0}, {"W2", 0},        {"r1_closed", 0}};
  for (int i = 0; i < kIdentityFields; ++i) {
    const int N = cutoffs[i % 4];
    const int r = 1 + (i / 4) % 3;
    const WickContext ctx = WickContext::make(r, N);
    const SpectralField v = sample_gff(N, derive_seed(kSeed, i)).field;
    const double m = mass(v);
    const double ms = m - ctx.sigma_N;

    SpectralField odd(N), even(N);
    for (int l = 0; l <= r; ++l) {
      const double c = double(ctx.c[l]) * std::pow(ms, r - l);
      odd.axpy(c, wick_pairfree(v, 2 * l + 1));
      even.axpy(c * (l + 1), wick_pairfree(v, 2 * l));
    }
    auto bump = [&](const std::string& key, double e) { worst[key] = std::max(worst[key], e); };
    bump("expansion", rel_err(odd, wick_power(v, 2 * r + 1, ctx.sigma_N)));
    bump("companion", rel_err(even, double(r + 1) * wick_power(v, 2 * r, ctx.sigma_N)));

    // The natural size of A(:|v|^{2p+2}:) is m^{p+1}; it can cross zero.
    for (int p = 1; p <= r; ++p) {
      const cplx lhs = inner(v, script_N(v, p));
      const cplx rhs = mean(wick_pairfree(v, 2 * p + 2, 1));
      bump("mean", std::abs(lhs - rhs) / std::max(std::abs(rhs), std::pow(m, p + 1)));
    }

    const SpectralField d = gauged_nonlinearity(v, ctx, ms, GaugedPath::direct);
    const SpectralField e = gauged_nonlinearity(v, ctx, ms, GaugedPath::expansion);
    bump("dual_path", rel_err(e, d));

    const Coeffs c = coeffs_of(v);
    Coeffs rho = conv(c, conj_field(c));
    Coeffs w2 = rho;
    w2[{0, 0}] -= ctx.sigma_N;
    bump("W2", rel_err(wick_power(v, 2, ctx.sigma_N), w2));

    if (r == 1) {
      Coeffs q = conv(rho, c);
      for (const auto& [k, a] : c) q[k] -= 2 * m * a;
      bump("r1_closed", rel_err(d, q));
      bump("r1_closed", rel_err(e, q));
    }
  }
  bool pass = true;
  std::string detail;
  for (const auto& [k, e] : worst) {
    pass = pass && e <= kIdentityTol;
    detail += " " + k + "=" + fmt(e);
  }
  return {pass, "fields=" + std::to_string(kIdentityFields) + detail};
}

Outcome conservation() {
  const int N = 8;
  const WickContext ctx = WickContext::make(2, N);
  const SpectralField u0 = sample_gff(N, kSeed).field;
  auto run = [&](double dt) {
    EvolutionConfig c;
    c.scheme = Scheme::ip_gauss4;
    c.dt = dt;
    c.t1 = 1.0;
    c.save_stride = 8;
    return conservation_report(evolve(u0, ctx, c, false));
  };
  const double dt = 0.1 / (N * N);
  const ConservationReport a = run(dt), b = run(dt / 2);
  const double ratio = a.max_energy_drift / b.max_energy_drift;
  const bool pass = a.mass_drift_rate <= kMassDriftRate && a.energy_drift_rate <= kEnergyDriftRate &&
                    ratio >= kOrderRatioLo && ratio <= kOrderRatioHi;
  return {pass, "scheme=ip-gauss4 dt=" + fmt(dt) + " mass_rate=" + fmt(a.mass_drift_rate) +
                    " H_rate=" + fmt(a.energy_drift_rate) + " H_rate_half=" + fmt(b.energy_drift_rate) +
                    " ratio=" + fmt(ratio)};
}

Outcome gauge() {
  const int N = 4;
  const WickContext ctx = WickContext::make(1, N);
  const SpectralField u0 = sample_gff(N, kSeed).field;
  EvolutionConfig c;
  c.dt = default_dt(N) / 4;
  c.t1 = 0.5;
  c.save_stride = 32;
  const Trajectory mapped = gauge_forward(evolve(u0, ctx, c, false), ctx);
  const Trajectory direct = evolve(u0, ctx, c, true);
  double err = 0;
  for (std::size_t j = 0; j < direct.size(); ++j) err = std::max(err, max_abs_diff(direct.states[j], mapped.states[j]));
  const double at_end = max_abs_diff(direct.states.back(), mapped.states.back());
  return {at_end <= kGaugeTol, "dt=" + fmt(c.dt) + " err_t0.5=" + fmt(at_end) + " err_max=" + fmt(err)};
}

Outcome from_run(const std::string& kind, const json& params, const fs::path& dir,
                 const std::function<std::string(const json&)>& describe) {
  const RunManifest m = run_experiment(kind, params, kSeed, dir);
  return {m.summary.value("pass", false), describe(m.summary)};
}

Outcome invariance(const fs::path& dir) {
  return from_run("invariance", json::object(), dir, [](const json& s) {
    return "max|z|=" + fmt(s["max_abs_z"]) + " ks_p_m_N=" + fmt(s["ks_p_m_N"]) + " violation=" +
           fmt(s["violation"]) + " violation_half=" + fmt(s["violation_half"]) + " ess=" + fmt(s["ess"]);
  });
}

Outcome convergence(const fs::path& dir) {
  return from_run("convergence", json::object(), dir, [](const json& s) {
    return "distance_slope=" + fmt(s["distance_slope"]) + " remainder_slope=" + fmt(s["remainder_slope"]) +
           " v_norm_slope=" + fmt(s["v_norm_slope"]) +
           " remainder_distance_slope=" + fmt(s["remainder_distance_slope"]);
  });
}

Outcome rao_scan(const fs::path& dir) {
  return from_run("rao-scan", {{"seeds", kScanSeeds}}, dir, [](const json& s) {
    std::string h;
    for (const auto& [N, v] : s["h_L_slope"].items()) h += " h_slope_N" + N + "=" + fmt(v);
    return "z_slope=" + fmt(s["z_slope"]) + " bound=" + fmt(s["z_slope_bound"]) + h;
  });
}

Outcome counting(const fs::path& dir) {
  Outcome o = from_run("counting", json::object(), dir, [](const json& s) {
    return "instances=" + std::to_string(s["instances"].get<int>()) +
           " divisor_cases=" + std::to_string(s["divisor_cases"].get<int>()) +
           " divisor_mismatches=" + std::to_string(s["divisor_mismatches"].get<int>()) +
           " pairing_failures=" + std::to_string(s["pairing_failures"].get<int>());
  });
  const RunManifest m = RunManifest::load(dir / kManifestName);
  o.pass = o.pass && m.summary["instances"].get<int>() >= kMinCountingInstances;
  return o;
}

Outcome deviation(const fs::path& dir) {
  return from_run("deviation", json::object(), dir, [](const json& s) {
    std::string t;
    for (const auto& [n, v] : s["tail_slopes"].items()) t += " slope_n" + n + "=" + fmt(v["slope"]);
    return "domination_failed=" + std::to_string(s["domination_failed"].get<int>()) + "/" +
           std::to_string(s["domination_checked"].get<int>()) + t + " mc_z=" + fmt(s["mc_z"]);
  });
}

// Small runs of every kind, written with one worker and replayed with three.
Outcome reproducibility(const fs::path& dir) {
  const std::vector<std::pair<std::string, json>> runs{
      {"sample-gff", {{"N", 16}, {"count", 4}}},
      {"sample-gibbs", {{"N", 4}, {"count", 16}, {"burn_in", 20}}},
      {"evolve", {{"N", 8}, {"t1", 0.2}, {"scheme", "ip-gauss4"}}},
      {"invariance", {{"N", 4}, {"count", 64}, {"refine_count", 8}, {"burn_in", 20}}},
      {"convergence", {{"N_list", {2, 4, 8}}, {"seeds", 2}}},
      {"stability", {{"N_list", {8, 16}}, {"seeds", 1}}},
      {"rao-scan", {{"N_list", {4, 8}}, {"L_scan_N", {8}}}},
      {"counting", {{"per_class", 3}, {"divisor_samples", 200}}},
      {"deviation", {{"tail_trials", 20000}, {"mc_trials", 50000}, {"domination_cases", 3}}},
  };
  bool pass = true;
  std::string bad;
  for (const auto& [kind, params] : runs) {
    const fs::path a = dir / (kind + "-w1"), b = dir / (kind + "-w3");
    run_experiment(kind, params, kSeed, a, 1);
    const ReplayResult r = replay(a / kManifestName, b, 3);
    if (!r.identical) {
      pass = false;
      bad += " " + kind;
    }
  }
  return {pass, "kinds=" + std::to_string(runs.size()) + " workers=1->3" + (pass ? "" : " mismatched:" + bad)};
}

const char* kNames[] = {"",
                        "wick identities",
                        "conservation",
                        "gauge equivalence",
                        "measure invariance",
                        "truncation convergence",
                        "a-priori scan",
                        "counting suite",
                        "deviation suite",
                        "reproducibility"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-9"};
  std::string out = "acceptance-out";
  std::vector<int> selected;
  app.add_option("--out-dir", out, "directory for run outputs and the report");
  app.add_option("criteria", selected, "criteria to run (default all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const fs::path dir(out);
  fs::create_directories(dir);
  const std::map<int, std::function<Outcome()>> criteria{
      {1, identities},
      {2, conservation},
      {3, gauge},
      {4, [&] { return invariance(dir / "invariance"); }},
      {5, [&] { return convergence(dir / "convergence"); }},
      {6, [&] { return rao_scan(dir / "rao-scan"); }},
      {7, [&] { return counting(dir / "counting"); }},
      {8, [&] { return deviation(dir / "deviation"); }},
      {9, [&] { return reproducibility(dir / "replay"); }},
  };

  std::ofstream report(dir / "acceptance.txt");
  int failed = 0;
  for (int c : std::set<int>(selected.begin(), selected.end())) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria.at(c)();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= kBudget[c];
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::ostringstream line;
    line << "criterion " << c << " (" << kNames[c] << "): " << (pass ? "PASS" : "FAIL") << "  " << o.detail
         << " runtime=" << fmt(secs) << "s budget=" << kBudget[c] << "s" << (in_time ? "" : " over budget");
    std::cout << line.str() << std::endl;
    report << line.str() << "\n";
    report.flush();
  }
  return failed == 0 ? 0 : 1;
}
