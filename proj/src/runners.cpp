#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <stdexcept>

#include "wnls/averaging.hpp"
#include "wnls/counting.hpp"
#include "wnls/deviation.hpp"
#include "wnls/experiments.hpp"
#include "wnls/parallel.hpp"

namespace wnls {

namespace fs = std::filesystem;

namespace {

template <class T>
T param(const json& p, const char* key) {
  try {
    return p.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parameter ") + key + ": " + e.what());
  }
}

Scheme scheme_param(const json& p) {
  try {
    return parse_scheme(param<std::string>(p, "scheme"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Wavenumber wavenumber(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("wavenumber must be [kx, ky]");
  return {j[0].get<int>(), j[1].get<int>()};
}

std::string joined(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

json run_sample_gff(const json& p, std::uint64_t seed, RunContext& ctx) {
  const int N = param<int>(p, "N");
  const int count = param<int>(p, "count");
  if (N < 1 || count < 1) throw ConfigError("sample-gff needs N >= 1 and count >= 1");
  std::vector<SpectralField> frames(count);
  parallel_for(
      count, [&](std::size_t i) { frames[i] = sample_gff(N, derive_seed(seed, i)).field; }, ctx.workers());
  Table t({"index", "m_N", "m_N_star", "nu_N"});
  for (int i = 0; i < count; ++i) {
    const MassStats s = mass_stats(frames[i], N);
    t.add_row({std::int64_t(i), s.m_N, s.m_N_star, s.nu_N});
  }
  ctx.write_fields("gff.bin", frames);
  ctx.write_table("samples.csv", t);
  return {{"N", N}, {"count", count}, {"sigma_N", sigma(N)}};
}

json run_sample_gibbs(const json& p, std::uint64_t seed, RunContext& ctx) {
  const int N = param<int>(p, "N"), r = param<int>(p, "r"), count = param<int>(p, "count");
  const std::string sampler = param<std::string>(p, "sampler");
  if (N < 1 || r < 1 || count < 1) throw ConfigError("sample-gibbs needs N, r, count >= 1");
  GibbsOptions gopt;
  gopt.workers = ctx.workers();
  gopt.mass_weight = param<bool>(p, "mass_weight");
  GibbsEnsemble ens;
  if (sampler == "hmc") {
    HmcOptions h{param<int>(p, "burn_in"), param<double>(p, "step_size"), param<int>(p, "leapfrog_steps")};
    ens = sample_gibbs_hmc(N, r, count, seed, h, gopt);
  } else if (sampler == "importance") {
    ens = sample_gibbs_importance(N, r, count, seed, gopt);
  } else if (sampler == "pcn") {
    ens = sample_gibbs_pcn(N, r, count, param<double>(p, "pcn_step"), seed, gopt);
  } else {
    throw ConfigError("unknown sampler " + sampler + " (hmc, importance, pcn)");
  }
  for (const auto& w : ens.warnings) ctx.warn(w);
  const WickContext wc = WickContext::make(r, N);
  Table t({"index", "log_weight", "V_N", "m_N", "H_N"});
  for (std::size_t i = 0; i < ens.size(); ++i)
    t.add_row({std::int64_t(i), ens.log_weights[i], ens.potential[i], mass(ens.samples[i]),
               hamiltonian(ens.samples[i], wc)});
  ctx.write_fields("gibbs.bin", ens.samples);
  ctx.write_table("samples.csv", t);
  json s = {{"N", N},           {"r", r},
            {"delta", wc.params.delta}, {"sampler", ens.sampler_tag},
            {"count", count},   {"ess", ens.ess},
            {"acceptance_rate", ens.acceptance_rate}};
  s["log_Z_N"] = sampler == "importance" ? json(ens.log_Z) : json(nullptr);
  return s;
}

json run_evolve(const json& p, std::uint64_t seed, RunContext& ctx) {
  const int N = param<int>(p, "N"), r = param<int>(p, "r");
  if (N < 1 || r < 1) throw ConfigError("evolve needs N, r >= 1");
  EvolutionConfig cfg;
  cfg.scheme = scheme_param(p);
  cfg.dt = param<double>(p, "dt");
  cfg.t1 = param<double>(p, "t1");
  cfg.save_stride = param<int>(p, "save_stride");
  const bool gauged = param<bool>(p, "gauged");
  const std::string data = param<std::string>(p, "data");
  json summary;
  SpectralField u0;
  if (data.empty()) {
    u0 = sample_gff(N, seed).field;
  } else {
    u0 = read_field_file(data).at(0);
    summary["inputs"] = {{data, sha256_file(data)}};
  }
  const WickContext wc = WickContext::make(r, N);
  const Trajectory tr = evolve(u0, wc, cfg, gauged);
  Table t({"t", "mass", "energy", "gauge_phase"});
  for (std::size_t i = 0; i < tr.size(); ++i) t.add_row({tr.times[i], tr.mass[i], tr.energy[i], tr.gauge_phase[i]});
  ctx.write_fields("trajectory.bin", tr.states);
  ctx.write_table("trajectory.csv", t);
  const ConservationReport c = conservation_report(tr);
  summary.update({{"scheme", scheme_name(cfg.scheme)},
                  {"dt", tr.dt},
                  {"frames", tr.size()},
                  {"m_star", tr.m_star},
                  {"max_mass_drift", c.max_mass_drift},
                  {"max_energy_drift", c.max_energy_drift}});
  return summary;
}

json run_invariance(const json& p, std::uint64_t seed, RunContext& ctx) {
  InvarianceOptions o;
  o.N = param<int>(p, "N");
  o.r = param<int>(p, "r");
  o.t = param<double>(p, "t");
  o.count = param<int>(p, "count");
  o.seed = seed;
  o.dt = param<double>(p, "dt");
  o.scheme = scheme_param(p);
  o.gauged = param<bool>(p, "gauged");
  o.nonlinear = param<bool>(p, "nonlinear");
  o.sampler = param<std::string>(p, "sampler");
  o.hmc = {param<int>(p, "burn_in"), param<double>(p, "step_size"), param<int>(p, "leapfrog_steps")};
  o.refine_count = param<int>(p, "refine_count");
  o.z_max = param<double>(p, "z_max");
  o.ks_p_min = param<double>(p, "ks_p_min");
  o.min_ess_fraction = param<double>(p, "min_ess_fraction");
  const auto flat = param<std::vector<int>>(p, "modes");
  if (flat.size() % 2) throw ConfigError("modes must list kx, ky pairs");
  o.modes.clear();
  for (std::size_t i = 0; i < flat.size(); i += 2) o.modes.push_back({flat[i], flat[i + 1]});
  o.workers = ctx.workers();

  const InvarianceReport rep = invariance_experiment(o);
  for (const auto& w : rep.warnings) ctx.warn(w);

  Table obs({"observable", "pre_mean", "pre_se", "post_mean", "post_se", "z"});
  for (const auto& row : rep.observables) obs.add_row({row.name, row.pre, row.pre_se, row.post, row.post_se, row.z});
  Table ks({"observable", "D", "p"});
  for (const auto& row : rep.ks) ks.add_row({row.name, row.ks.D, row.ks.p});
  std::vector<std::string> cols{"index", "log_weight"};
  for (const auto& n : rep.table.names) {
    cols.push_back(n + "_pre");
    cols.push_back(n + "_post");
  }
  Table samples(cols);
  for (std::size_t i = 0; i < rep.table.log_weights.size(); ++i) {
    std::vector<Table::Cell> row{std::int64_t(i), rep.table.log_weights[i]};
    for (std::size_t c = 0; c < rep.table.names.size(); ++c) {
      row.push_back(rep.table.pre[c][i]);
      row.push_back(rep.table.post[c][i]);
    }
    samples.add_row(std::move(row));
  }
  Table refine({"dt", "violation"});
  refine.add_row({rep.dt, rep.violation});
  refine.add_row({rep.dt / 2, rep.violation_half});
  ctx.write_table("observables.csv", obs);
  ctx.write_table("ks.csv", ks);
  ctx.write_table("samples.csv", samples);
  ctx.write_table("refinement.csv", refine);
  return {{"ess", rep.ess},
          {"acceptance_rate", rep.acceptance},
          {"max_abs_z", rep.max_abs_z},
          {"ks_p_m_N", rep.ks_p_mass},
          {"min_ks_p", rep.min_ks_p},
          {"violation", rep.violation},
          {"violation_half", rep.violation_half},
          {"refinement_ratio", rep.refinement_ratio},
          {"z_pass", rep.z_pass},
          {"ks_pass", rep.ks_pass},
          {"refine_pass", rep.refine_pass},
          {"pass", rep.pass()}};
}

json run_convergence(const json& p, std::uint64_t seed, RunContext& ctx) {
  ConvergenceOptions o;
  o.N_list = param<std::vector<int>>(p, "N_list");
  o.r = param<int>(p, "r");
  o.seeds = param<int>(p, "seeds");
  o.seed = seed;
  o.tau = param<double>(p, "tau");
  o.eps = param<double>(p, "eps");
  o.s_smooth = param<double>(p, "s_smooth");
  o.delta = param<double>(p, "delta");
  o.slope_margin = param<double>(p, "slope_margin");
  o.remainder_slope_max = param<double>(p, "remainder_slope_max");
  o.frames_per_unit = param<int>(p, "frames_per_unit");
  o.workers = ctx.workers();
  const ConvergenceReport rep = convergence_experiment(o);
  Table t({"seed", "N", "N_prev", "distance", "remainder", "remainder_distance", "v_norm"});
  for (const auto& row : rep.rows)
    t.add_row({std::int64_t(row.seed), std::int64_t(row.N), std::int64_t(row.N_prev), row.distance, row.remainder,
               row.remainder_distance, row.v_norm});
  ctx.write_table("convergence.csv", t);
  return {{"distance_slope", rep.distance_slope}, {"remainder_slope", rep.remainder_slope},
          {"v_norm_slope", rep.v_norm_slope},     {"remainder_distance_slope", rep.remainder_distance_slope},
          {"decay_pass", rep.decay_pass},
          {"smoothing_pass", rep.smoothing_pass}, {"pass", rep.pass()}};
}

json run_stability(const json& p, std::uint64_t seed, RunContext& ctx) {
  StabilityOptions o;
  o.N_list = param<std::vector<int>>(p, "N_list");
  o.r = param<int>(p, "r");
  o.A = param<double>(p, "A");
  o.tau = param<double>(p, "tau");
  o.seeds = param<int>(p, "seeds");
  o.seed = seed;
  o.delta = param<double>(p, "delta");
  o.growth_max = param<double>(p, "growth_max");
  o.frames_per_unit = param<int>(p, "frames_per_unit");
  o.workers = ctx.workers();
  const StabilityReport rep = stability_experiment(o);
  Table g({"seed", "N", "initial", "end_distance", "max_distance", "growth"});
  for (const auto& row : rep.rows)
    g.add_row({std::int64_t(row.seed), std::int64_t(row.N), row.initial, row.end_distance, row.max_distance, row.growth});
  Table c({"seed", "N", "N_prime", "distance"});
  for (const auto& row : rep.commutator)
    c.add_row({std::int64_t(row.seed), std::int64_t(row.N), std::int64_t(row.N_prime), row.distance});
  ctx.write_table("growth.csv", g);
  ctx.write_table("commutator.csv", c);
  return {{"max_growth", rep.max_growth}, {"commutator_slope", rep.commutator_slope}, {"pass", rep.pass()}};
}

json run_rao_scan(const json& p, std::uint64_t seed, RunContext& ctx) {
  ScanOptions o;
  o.N_list = param<std::vector<int>>(p, "N_list");
  o.r = param<int>(p, "r");
  const int seeds = param<int>(p, "seeds");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  o.seeds.clear();
  for (int s = 0; s < seeds; ++s) o.seeds.push_back(derive_seed(seed, s));
  o.delta = param<double>(p, "delta");
  o.tau = param<double>(p, "tau");
  o.full_kernel_max_N = param<int>(p, "full_kernel_max_N");
  o.probes = param<int>(p, "probes");
  o.L_scan_N = param<std::vector<int>>(p, "L_scan_N");
  o.workers = ctx.workers();
  const ScanReport rep = apriori_scan(o);
  for (const auto& w : rep.warnings) ctx.warn(w);
  Table t({"seed", "N", "L", "quantity", "value", "bound"});
  for (const auto& row : rep.rows)
    t.add_row({std::int64_t(row.seed), std::int64_t(row.N), row.L, row.quantity, row.value, row.bound});
  ctx.write_table("scan.csv", t);
  json slopes = json::object();
  bool decreasing = true;
  for (const auto& [N, s] : rep.fit.h_L_slope) {
    slopes[std::to_string(N)] = s;
    decreasing = decreasing && s < 0.0;
  }
  const bool z_pass = rep.fit.z_slope <= rep.fit.z_slope_bound;
  return {{"z_slope", rep.fit.z_slope},        {"z_slope_bound", rep.fit.z_slope_bound},
          {"h_L_slope", slopes},                {"z_pass", z_pass},
          {"h_decreasing", decreasing},         {"pass", z_pass && decreasing}};
}

CountingInstance parse_counting_instance(const json& j) {
  CountingInstance c;
  c.n = j.at("n").get<int>();
  c.signs = j.at("signs").get<std::vector<int>>();
  c.sign_prime = j.value("sign_prime", 1);
  c.N = j.at("N").get<std::vector<int>>();
  for (const auto& w : j.value("center", json::array())) c.center.push_back(wavenumber(w));
  if (c.center.empty()) c.center.assign(c.n, Wavenumber{});
  c.N0 = j.value("N0", 1);
  c.M = j.value("M", 1.0);
  if (j.contains("d")) c.d = wavenumber(j["d"]);
  if (j.contains("d_plus")) c.d_plus = wavenumber(j["d_plus"]);
  c.alpha = j.value("alpha", 0.0);
  c.Gamma = j.value("Gamma", 0.0);
  c.gamma_index = j.value("gamma_index", -1);
  c.p = j.value("p", 0);
  c.R = j.value("R", std::vector<double>{});
  c.A = j.value("A", std::vector<int>{});
  return c;
}

json run_counting(const json& p, std::uint64_t seed, RunContext& ctx) {
  const std::string path = param<std::string>(p, "instances");
  const double theta = param<double>(p, "theta");
  const double delta = param<double>(p, "delta");
  if (path.empty()) {
    CountingSuiteOptions o;
    o.seed = seed;
    o.per_class = param<int>(p, "per_class");
    o.theta = theta;
    o.delta = delta;
    o.divisor_samples = param<int>(p, "divisor_samples");
    o.divisor_max = param<std::int64_t>(p, "divisor_max");
    o.workers = ctx.workers();
    const CountingSuiteReport rep = run_counting_suite(o);
    Table rows({"set", "size", "count", "value", "rhs", "ratio"});
    for (const auto& r : rep.rows) rows.add_row({r.set, std::int64_t(r.size), r.count, r.value, r.rhs, r.ratio});
    Table shapes({"set", "instances", "fitted_constant", "smaller_max", "largest_max", "growth", "pass"});
    for (const auto& s : rep.shapes)
      shapes.add_row({s.name, std::int64_t(s.instances), s.fitted_constant, s.smaller_max, s.largest_max, s.growth,
                      std::int64_t(s.pass)});
    ctx.write_table("counts.csv", rows);
    ctx.write_table("shapes.csv", shapes);
    return {{"instances", rep.rows.size()},
            {"divisor_cases", rep.divisor_cases},
            {"divisor_mismatches", rep.divisor_mismatches},
            {"pairing_cases", rep.pairing_cases},
            {"pairing_failures", rep.pairing_failures},
            {"order_mismatches", rep.order_mismatches},
            {"pass", rep.pass()}};
  }

  json doc = read_json_file(path);
  const json list = doc.is_array() ? doc : doc.value("instances", json::array());
  const Params prm = Params::from_delta(delta, 0.1, theta);
  Table t({"index", "set", "sizes", "signs", "alpha", "count", "rhs", "ratio"});
  try {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& j = list[i];
      std::string set = j.at("set").get<std::string>();
      std::int64_t count = 0;
      double rhs = 0, alpha = 0;
      std::vector<int> sizes, signs;
      if (set == "S") {
        TripleInstance inst;
        const auto N = j.at("N").get<std::vector<int>>();
        if (N.size() != 3) throw ConfigError("triple instance needs three radii");
        inst.N1 = N[0], inst.N2 = N[1], inst.N3 = N[2];
        const auto sg = j.at("signs").get<std::vector<int>>();
        if (sg.size() != 3) throw ConfigError("triple instance needs three signs");
        inst.signs = {sg[0], sg[1], sg[2]};
        inst.a = wavenumber(j.at("a"));
        inst.b = wavenumber(j.at("b"));
        inst.c = wavenumber(j.at("c"));
        inst.d = wavenumber(j.at("d"));
        inst.alpha = j.at("alpha").get<std::int64_t>();
        count = count_S(inst);
        rhs = triple_bound(inst, theta, j.value("strong", false));
        sizes = N;
        signs = sg;
        alpha = static_cast<double>(inst.alpha);
      } else {
        const bool plus = j.value("plus", false);
        const SetKind kind = parse_set_kind(set);
        const CountingInstance inst = parse_counting_instance(j);
        inst.validate(kind, delta);
        count = count_S123(inst, kind, plus);
        rhs = counting_rhs(inst, kind, plus, prm.gamma0);
        sizes = inst.N;
        signs = inst.signs;
        alpha = inst.alpha;
        if (plus) set += "+";
      }
      t.add_row({std::int64_t(i), set, joined(sizes), joined(signs), alpha, count, rhs,
                 rhs > 0 ? double(count) / rhs : 0.0});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("instances: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("instances: ") + e.what());
  }
  ctx.write_table("counts.csv", t);
  return {{"instances", t.rows()}, {"inputs", {{path, sha256_file(path)}}}};
}

MultilinearExpression parse_expression(const json& j, const fs::path& base) {
  const auto support = j.at("support");
  const auto signs = j.at("signs").get<std::vector<int>>();
  MultilinearExpression e(static_cast<int>(signs.size()), static_cast<int>(support.size()), signs);
  if (j.contains("coefficients")) {
    const auto& c = j["coefficients"];
    if (c.size() != e.a.size()) throw ConfigError("coefficient tensor has the wrong size");
    for (std::size_t i = 0; i < c.size(); ++i) e.a[i] = {c[i].at(0).get<double>(), c[i].at(1).get<double>()};
  } else {
    const Table t = Table::read_csv(base / j.at("coefficient_file").get<std::string>());
    auto num = [](const Table::Cell& c) {
      if (auto i = std::get_if<std::int64_t>(&c)) return double(*i);
      if (auto d = std::get_if<double>(&c)) return *d;
      throw ConfigError("non-numeric coefficient cell");
    };
    for (std::size_t r = 0; r < t.rows(); ++r) {
      std::vector<int> k;
      for (int m = 1; m <= e.n; ++m) k.push_back(static_cast<int>(num(t.at(r, "k" + std::to_string(m)))));
      e.at(k) = {num(t.at(r, "re")), num(t.at(r, "im"))};
    }
  }
  e.validate();
  return e;
}

json run_deviation(const json& p, std::uint64_t seed, RunContext& ctx) {
  const std::string path = param<std::string>(p, "expression");
  const std::int64_t tail_trials = param<std::int64_t>(p, "tail_trials");
  if (path.empty()) {
    DeviationSuiteOptions o;
    o.seed = seed;
    o.tail_trials = tail_trials;
    o.mc_trials = param<std::int64_t>(p, "mc_trials");
    o.domination_cases = param<int>(p, "domination_cases");
    o.workers = ctx.workers();
    const DeviationSuiteReport rep = run_deviation_suite(o);
    Table t({"n", "B", "exceed", "p"});
    json slopes = json::object();
    for (const auto& [n, tail] : rep.tails) {
      for (const auto& pt : tail.points) t.add_row({std::int64_t(n), pt.B, pt.exceed, pt.p});
      slopes[std::to_string(n)] = {{"slope", tail.slope}, {"bound", rep.slope_bound.at(n)}};
    }
    ctx.write_table("tails.csv", t);
    return {{"domination_checked", rep.domination_checked},
            {"domination_failed", rep.domination_failed},
            {"worst_domination_ratio", rep.worst_domination_ratio},
            {"tail_slopes", slopes},
            {"exact_second", rep.exact_second},
            {"mc_second", rep.mc_second},
            {"mc_z", rep.mc_z},
            {"worst_G_over_M", rep.worst_G_over_M},
            {"pass", rep.pass()}};
  }

  const json doc = read_json_file(path);
  MultilinearExpression e;
  try {
    e = parse_expression(doc, fs::path(path).parent_path());
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("expression: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("expression: ") + ex.what());
  }
  const int d_max = param<int>(p, "d_max");
  Table m({"d", "unit_phase_F", "gaussian_G", "holds"});
  bool all = true;
  for (int d = 1; d <= d_max; ++d) {
    const DominationResult r = moment_domination(e, d);
    m.add_row({std::int64_t(d), r.F_moment, r.G_moment, std::int64_t(r.holds)});
    all = all && r.holds;
  }
  const auto B = param<std::vector<double>>(p, "B");
  const TailReport tail = tail_check(e, B, tail_trials, seed, 2.0, 6.0, ctx.workers());
  Table t({"B", "exceed", "p"});
  for (const auto& pt : tail.points) t.add_row({pt.B, pt.exceed, pt.p});
  ctx.write_table("moments.csv", m);
  ctx.write_table("tail.csv", t);
  const double exact = moment_abs(e, 1, Law::gaussian);
  return {{"M", tail.M},
          {"domination_holds", all},
          {"exact_second_moment", exact},
          {"mc_second_moment", tail.second_moment},
          {"mc_second_moment_se", tail.second_moment_se},
          {"tail_slope", tail.slope},
          {"inputs", {{path, sha256_file(path)}}}};
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> list = {
      {"sample-gff", "draw free-field samples", {{"N", 32}, {"count", 1}}, run_sample_gff},
      {"sample-gibbs",
       "sample the truncated Gibbs measure",
       {{"N", 8},
        {"r", 1},
        {"count", 256},
        {"sampler", "hmc"},
        {"burn_in", 100},
        {"step_size", 0.2},
        {"leapfrog_steps", 8},
        {"pcn_step", 0.1},
        {"mass_weight", false}},
       run_sample_gibbs},
      {"evolve",
       "integrate the truncated or gauged flow",
       {{"N", 8},
        {"r", 1},
        {"dt", 0.0},
        {"t1", 1.0},
        {"scheme", "ip-rk4"},
        {"gauged", false},
        {"save_stride", 16},
        {"data", ""}},
       run_evolve},
      {"invariance",
       "push a Gibbs ensemble through the flow and compare",
       {{"N", 8},
        {"r", 1},
        {"t", 1.0},
        {"count", 4096},
        {"dt", 0.0},
        {"scheme", "ip-rk4"},
        {"gauged", false},
        {"nonlinear", true},
        {"sampler", "hmc"},
        {"burn_in", 100},
        {"step_size", 0.2},
        {"leapfrog_steps", 8},
        {"refine_count", 512},
        {"z_max", 4.0},
        {"ks_p_min", 1e-3},
        {"min_ess_fraction", 0.05},
        {"modes", {0, 0, 1, 0, 0, 1, 1, 1, 2, 1, 3, 0, 2, 2}}},
       run_invariance},
      {"convergence",
       "distances between gauged solutions across cutoffs",
       {{"N_list", {4, 8, 16, 32}},
        {"r", 1},
        {"seeds", 10},
        {"tau", 0.5},
        {"eps", 0.1},
        {"s_smooth", 0.3},
        {"delta", 0.1},
        {"slope_margin", 0.05},
        {"remainder_slope_max", 0.1},
        {"frames_per_unit", 64}},
       run_convergence},
      {"stability",
       "growth of small L2 perturbations of v_N",
       {{"N_list", {8, 16, 32}},
        {"r", 1},
        {"A", 1.0},
        {"tau", 0.5},
        {"seeds", 3},
        {"delta", 0.1},
        {"growth_max", 20.0},
        {"frames_per_unit", 64}},
       run_stability},
      {"rao-scan",
       "a-priori bounds for y_N, z_N and the averaging kernels",
       {{"N_list", {4, 8, 16, 32}},
        {"r", 1},
        {"seeds", 1},
        {"delta", 0.1},
        {"tau", 0.5},
        {"full_kernel_max_N", 8},
        {"probes", 4},
        {"L_scan_N", {16}}},
       run_rao_scan},
      {"counting",
       "lattice counting bounds (suite, or --instances file)",
       {{"instances", ""},
        {"theta", 0.1},
        {"delta", 0.1},
        {"per_class", 30},
        {"divisor_samples", 2000},
        {"divisor_max", 100000}},
       run_counting},
      {"deviation",
       "moment domination and tails of multilinear Gaussian expressions",
       {{"expression", ""},
        {"tail_trials", 200000},
        {"mc_trials", 1000000},
        {"domination_cases", 12},
        {"d_max", 3},
        {"B", {1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0}}},
       run_deviation},
  };
  return list;
}

const Experiment& find_experiment(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return e;
  throw ConfigError("unknown experiment " + name);
}

RunManifest run_experiment(const std::string& kind, const json& params, std::uint64_t seed, const fs::path& out_dir,
                           int workers) {
  const Experiment& exp = find_experiment(kind);
  json full = exp.defaults;
  if (!params.is_null()) {
    if (!params.is_object()) throw ConfigError("parameters must be an object");
    for (const auto& [key, value] : params.items()) {
      if (!full.contains(key)) throw ConfigError("unknown parameter " + key + " for " + kind);
      const json& like = full[key];
      const bool ok = (like.is_number() && value.is_number()) || (like.is_array() && value.is_array()) ||
                      like.type() == value.type();
      if (!ok) throw ConfigError("parameter " + key + " has the wrong type");
      full[key] = like.is_number_float() ? json(value.get<double>()) : value;
    }
  }
  RunContext ctx(out_dir, workers);
  RunManifest m;
  m.kind = kind;
  m.params = full;
  m.seed = seed;
  m.version = code_version();
  m.started_utc = utc_now();
  m.workers = workers > 0 ? workers : worker_count();
  const auto t0 = std::chrono::steady_clock::now();
  m.summary = exp.run(full, seed, ctx);
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.warnings = ctx.warnings();
  for (const auto& f : ctx.files())
    m.outputs.push_back({f, sha256_file(out_dir / f), fs::file_size(out_dir / f)});
  m.save(out_dir / kManifestName);
  return m;
}

ReplayResult replay(const fs::path& manifest_path, const fs::path& out_dir, int workers) {
  const RunManifest original = RunManifest::load(manifest_path);
  ReplayResult res;
  res.replayed = run_experiment(original.kind, original.params, original.seed, out_dir, workers);
  std::set<std::string> seen;
  for (const auto& f : original.outputs) {
    seen.insert(f.path);
    bool match = false;
    for (const auto& g : res.replayed.outputs)
      if (g.path == f.path) match = g.sha256 == f.sha256;
    if (!match) res.mismatched.push_back(f.path);
  }
  for (const auto& g : res.replayed.outputs)
    if (!seen.count(g.path)) res.mismatched.push_back(g.path);
  res.identical = res.mismatched.empty();
  return res;
}

}  // namespace wnls
