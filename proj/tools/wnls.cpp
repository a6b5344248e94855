#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "wnls/experiments.hpp"
#include "wnls/parallel.hpp"

namespace fs = std::filesystem;
using namespace wnls;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

const char* kPathParams[] = {"instances", "expression", "data"};

struct Invocation {
  std::string kind;
  std::map<std::string, std::string> flags;
};

int run(int argc, char** argv) {
  CLI::App app{"Wick-ordered NLS truncation experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string out_dir, config, manifest;
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out-dir", out_dir, "output directory (default runs/<kind>-<seed>)");
  app.add_option("--config", config, "INI file; its values override flags");

  std::map<std::string, Invocation> calls;
  for (const auto& exp : experiments()) {
    CLI::App* sub = app.add_subcommand(exp.name, exp.help);
    Invocation& inv = calls[exp.name];
    inv.kind = exp.name;
    for (const auto& [key, value] : exp.defaults.items()) {
      std::string& slot = inv.flags[key];
      const std::string desc = "default " + value.dump();
      if (value.is_boolean())
        sub->add_flag("--" + key + "{true}", slot, desc);
      else
        sub->add_option("--" + key, slot, desc);
    }
  }
  CLI::App* rep = app.add_subcommand("replay", "rerun a manifest and compare output hashes");
  rep->add_option("--manifest", manifest, "manifest.json of the original run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  const int workers = worker_count();
  if (rep->parsed()) {
    if (out_dir.empty()) out_dir = (fs::path(manifest).parent_path() / "replay").string();
    const ReplayResult r = replay(manifest, out_dir, workers);
    std::cout << json{{"identical", r.identical}, {"mismatched", r.mismatched}, {"out_dir", out_dir}}.dump(2) << '\n';
    return r.identical ? 0 : 1;
  }

  const std::string kind = app.get_subcommands().front()->get_name();
  const Experiment& exp = find_experiment(kind);
  std::map<std::string, std::string> given;
  for (const auto& [key, text] : calls[kind].flags)
    if (!text.empty() || app.get_subcommands().front()->count("--" + key)) given[key] = text;

  json params = exp.defaults;
  apply_overrides(params, given);
  if (!config.empty()) {
    std::map<std::string, std::string> from_file;
    for (const auto& [key, text] : read_config(config)) {
      if (key == "seed" || key == "run.seed") {
        seed = parse_like(json(std::uint64_t(0)), text, key).get<std::uint64_t>();
      } else if (key == "out_dir" || key == "run.out_dir") {
        out_dir = text;
      } else if (key.rfind(kind + ".", 0) == 0) {
        from_file[key.substr(kind.size() + 1)] = text;
      } else if (key.find('.') == std::string::npos) {
        from_file[key] = text;
      }
    }
    apply_overrides(params, from_file);
  }
  for (const char* key : kPathParams)
    if (params.contains(key) && !params[key].get<std::string>().empty())
      params[key] = fs::absolute(params[key].get<std::string>()).string();

  if (out_dir.empty()) out_dir = "runs/" + kind + "-" + std::to_string(seed);
  const RunManifest m = run_experiment(kind, params, seed, out_dir, workers);
  std::cout << json{{"kind", m.kind}, {"out_dir", out_dir}, {"summary", m.summary}}.dump(2) << '\n';
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
