#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wnls/spectral.hpp"

namespace wnls {

using json = nlohmann::json;

std::string code_version();

// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

// Column-oriented CSV table; every row must have one cell per column.
class Table {
 public:
  using Cell = std::variant<std::int64_t, double, std::string>;

  explicit Table(std::vector<std::string> columns);
  void add_row(std::vector<Cell> row);
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& columns() const { return columns_; }
  const Cell& at(std::size_t row, const std::string& column) const;
  void write_csv(const std::filesystem::path& path) const;
  static Table read_csv(const std::filesystem::path& path);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

std::string sha256_file(const std::filesystem::path& path);

struct OutputFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

// Everything needed to rerun an experiment: kind and fully resolved parameters
// (seed included). Version, inventory, timing and worker count are records.
struct RunManifest {
  std::string kind;
  json params;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<OutputFile> outputs;
  json summary;
  std::vector<std::string> warnings;
  double wall_clock_seconds = 0;
  int workers = 1;
  std::string started_utc;

  json to_json() const;
  static RunManifest from_json(const json& j);
  static RunManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

inline constexpr const char* kManifestName = "manifest.json";

// Collects the files written by one run. Writers are single-owner: each
// output file is produced by exactly one call.
class RunContext {
 public:
  RunContext(std::filesystem::path out_dir, int workers);
  const std::filesystem::path& out_dir() const { return out_dir_; }
  int workers() const { return workers_; }

  void write_table(const std::string& name, const Table& t);
  // Binary frames plus their JSON sidecar.
  void write_fields(const std::string& name, const std::vector<SpectralField>& frames);
  void write_json(const std::string& name, const json& j);
  void warn(std::string w) { warnings_.push_back(std::move(w)); }

  const std::vector<std::string>& files() const { return files_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::filesystem::path out_dir_;
  int workers_;
  std::vector<std::string> files_;
  std::vector<std::string> warnings_;
};

// Flat key-value INI with sections. Keys come back as "section.key", or just
// "key" before the first section header.
std::map<std::string, std::string> read_config(const std::filesystem::path& path);

// Parses `text` as a value of the same JSON type as `like` (numbers, booleans,
// strings, and comma-separated lists of numbers). Throws ConfigError.
json parse_like(const json& like, const std::string& text, const std::string& key);

// Overlays values onto a parameter object; unknown keys throw ConfigError.
void apply_overrides(json& params, const std::map<std::string, std::string>& values);

}  // namespace wnls
