#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "wnls/experiments.hpp"
#include "wnls/harness.hpp"
#include "wnls/parallel.hpp"

using namespace wnls;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wnls_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("format_double is exact") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0})
    CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("CSV round trip") {
  const fs::path dir = scratch("csv");
  Table t({"name", "count", "value"});
  t.add_row({std::string("plain"), std::int64_t(3), 0.1});
  t.add_row({std::string("with, comma \"and quote\""), std::int64_t(-7), 1e-17});
  CHECK_THROWS(t.add_row({std::int64_t(1)}));
  t.write_csv(dir / "t.csv");
  const Table r = Table::read_csv(dir / "t.csv");
  REQUIRE(r.rows() == 2);
  CHECK(r.columns() == t.columns());
  CHECK(std::get<std::string>(r.at(1, "name")) == "with, comma \"and quote\"");
  CHECK(std::get<std::int64_t>(r.at(1, "count")) == -7);
  CHECK(std::get<double>(r.at(1, "value")) == 1e-17);
  CHECK(std::get<double>(r.at(0, "value")) == 0.1);
}

TEST_CASE("sha256") {
  const fs::path dir = scratch("sha");
  write_text(dir / "abc", "abc");
  CHECK(sha256_file(dir / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config files and overrides") {
  const fs::path dir = scratch("cfg");
  write_text(dir / "a.ini", "seed = 5\n[invariance]\ncount = 32\nmodes = 1,0,0,1\nnonlinear = false\n");
  const auto cfg = read_config(dir / "a.ini");
  CHECK(cfg.at("seed") == "5");
  CHECK(cfg.at("invariance.count") == "32");

  json p = {{"count", 4096}, {"modes", {0, 0}}, {"nonlinear", true}, {"t", 1.0}, {"sampler", "hmc"}};
  apply_overrides(p, {{"count", "32"}, {"modes", "1,0,0,1"}, {"nonlinear", "false"}, {"t", "0.25"}});
  CHECK(p["count"] == 32);
  CHECK(p["modes"] == json({1, 0, 0, 1}));
  CHECK(p["nonlinear"] == false);
  CHECK(p["t"] == 0.25);
  CHECK_THROWS_AS(apply_overrides(p, {{"bogus", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(p, {{"count", "many"}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(p, {{"count", "1.5"}}), ConfigError);
  CHECK_THROWS_AS(read_config(dir / "missing.ini"), ConfigError);
}

TEST_CASE("manifest json round trip") {
  RunManifest m;
  m.kind = "evolve";
  m.params = {{"N", 8}};
  m.seed = 18446744073709551615ull;
  m.outputs = {{"a.csv", "00", 3}};
  m.summary = {{"x", 1.5}};
  const RunManifest r = RunManifest::from_json(m.to_json());
  CHECK(r.kind == "evolve");
  CHECK(r.seed == m.seed);
  CHECK(r.params == m.params);
  CHECK(r.outputs.size() == 1);
  CHECK(r.outputs[0].bytes == 3);
}

TEST_CASE("Kolmogorov-Smirnov") {
  CHECK(kolmogorov_q(0.0) == 1.0);
  CHECK(kolmogorov_q(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_q(1.6276) == doctest::Approx(0.01).epsilon(1e-3));

  std::vector<double> a{1, 2, 3, 4, 5};
  const KsResult same = ks_two_sample(a, a);
  CHECK(same.D == 0.0);
  CHECK(same.p == doctest::Approx(1.0));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(2000), y(2000), z(2000);
  for (auto& v : x) v = g(rng);
  for (auto& v : y) v = g(rng);
  for (auto& v : z) v = g(rng) + 0.3;
  CHECK(ks_two_sample(x, y).p > 1e-3);
  CHECK(ks_two_sample(x, z).p < 1e-6);

  const std::vector<double> w(2000, 1.0);
  const KsResult u = ks_two_sample(x, z), wt = ks_two_sample(x, w, z, w);
  CHECK(wt.D == doctest::Approx(u.D));
  CHECK(wt.p == doctest::Approx(u.p).epsilon(1e-9));
}

TEST_CASE("invariance experiment limits") {
  InvarianceOptions o;
  o.N = 4;
  o.count = 48;
  o.refine_count = 8;
  o.hmc.burn_in = 30;

  SUBCASE("t = 0 leaves every sample in place") {
    o.t = 0.0;
    const InvarianceReport r = invariance_experiment(o);
    CHECK(r.max_abs_z == 0.0);
    for (const auto& k : r.ks) CHECK(k.ks.D == 0.0);
  }
  SUBCASE("the linear flow preserves the moduli but not the weight") {
    o.t = 0.5;
    o.nonlinear = false;
    const InvarianceReport r = invariance_experiment(o);
    for (const auto& row : r.observables) {
      if (row.name == "m_N" || row.name == "K_N" || row.name.rfind("abs2_", 0) == 0)
        CHECK(std::abs(row.z) < 1e-9);
      if (row.name.rfind("re_u_", 0) == 0) CHECK(std::abs(row.z) < 3.0);
      // e^{it Delta} moves V_N, so the test must see it.
      if (row.name == "V_N") CHECK(std::abs(row.z) > 4.0);
    }
  }
  SUBCASE("a collapsed importance ensemble aborts") {
    o.N = 8;
    o.t = 0.0;
    o.count = 400;
    o.sampler = "importance";
    CHECK_THROWS_AS(invariance_experiment(o), NumericalAbort);
  }
}

TEST_CASE("runs, manifests and replay") {
  const fs::path dir = scratch("run");
  const json params = {{"N", 6}, {"count", 3}};
  const RunManifest m = run_experiment("sample-gff", params, 17, dir / "a", 1);
  CHECK(m.kind == "sample-gff");
  CHECK(m.params["N"] == 6);
  CHECK(m.params["count"] == 3);
  CHECK(fs::exists(dir / "a" / kManifestName));
  bool has_sidecar = false;
  for (const auto& f : m.outputs) {
    CHECK(sha256_file(dir / "a" / f.path) == f.sha256);
    if (f.path == "gff.bin.json") has_sidecar = true;
  }
  CHECK(has_sidecar);

  const ReplayResult r = replay(dir / "a" / kManifestName, dir / "b", 3);
  CHECK(r.identical);
  CHECK(r.mismatched.empty());

  CHECK_THROWS_AS(run_experiment("sample-gff", {{"bogus", 1}}, 1, dir / "c"), ConfigError);
  CHECK_THROWS_AS(run_experiment("sample-gff", {{"N", "eight"}}, 1, dir / "c"), ConfigError);
  CHECK_THROWS(find_experiment("nonexistent"));
  CHECK(experiments().size() == 9);
}
