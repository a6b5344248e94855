#include "wnls/harness.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

namespace wnls {

namespace fs = std::filesystem;

std::string code_version() {
#ifdef WNLS_VERSION
  return WNLS_VERSION;
#else
  return "unknown";
#endif
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size())
    throw std::invalid_argument("row has " + std::to_string(row.size()) + " cells, table has " +
                                std::to_string(columns_.size()) + " columns");
  rows_.push_back(std::move(row));
}

const Table::Cell& Table::at(std::size_t row, const std::string& column) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c] == column) return rows_.at(row)[c];
  throw std::out_of_range("no column " + column);
}

namespace {
std::string cell_text(const Table::Cell& c) {
  if (auto i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (auto d = std::get_if<double>(&c)) return format_double(*d);
  const std::string& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

Table::Cell parse_cell(const std::string& s) {
  std::int64_t i = 0;
  auto ri = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ri.ec == std::errc() && ri.ptr == s.data() + s.size() && !s.empty()) return i;
  double d = 0;
  auto rd = std::from_chars(s.data(), s.data() + s.size(), d);
  if (rd.ec == std::errc() && rd.ptr == s.data() + s.size() && !s.empty()) return d;
  return s;
}
}  // namespace

void Table::write_csv(const fs::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t c = 0; c < columns_.size(); ++c) os << (c ? "," : "") << columns_[c];
  os << '\n';
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << cell_text(row[c]);
    os << '\n';
  }
}

Table Table::read_csv(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV " + path.string());
  Table t(split_csv_line(line));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<Cell> row;
    for (const auto& s : split_csv_line(line)) row.push_back(parse_cell(s));
    t.add_row(std::move(row));
  }
  return t;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

json RunManifest::to_json() const {
  json files = json::array();
  for (const auto& f : outputs) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return {{"kind", kind},           {"params", params},     {"seed", seed},
          {"version", version},     {"outputs", files},     {"summary", summary},
          {"warnings", warnings},   {"wall_clock_seconds", wall_clock_seconds},
          {"workers", workers},     {"started_utc", started_utc}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.kind = j.at("kind").get<std::string>();
    m.params = j.at("params");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.value("version", "");
    for (const auto& f : j.value("outputs", json::array()))
      m.outputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                           f.at("bytes").get<std::uintmax_t>()});
    m.summary = j.value("summary", json::object());
    m.warnings = j.value("warnings", std::vector<std::string>{});
    m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    m.workers = j.value("workers", 1);
    m.started_utc = j.value("started_utc", "");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read manifest " + path.string());
  try {
    return from_json(json::parse(is));
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
}

void RunManifest::save(const fs::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json().dump(2) << '\n';
}

RunContext::RunContext(fs::path out_dir, int workers) : out_dir_(std::move(out_dir)), workers_(workers) {
  fs::create_directories(out_dir_);
}

void RunContext::write_table(const std::string& name, const Table& t) {
  t.write_csv(out_dir_ / name);
  files_.push_back(name);
}

void RunContext::write_fields(const std::string& name, const std::vector<SpectralField>& frames) {
  write_field_file((out_dir_ / name).string(), frames);
  files_.push_back(name);
  files_.push_back(name + ".json");
}

void RunContext::write_json(const std::string& name, const json& j) {
  std::ofstream os(out_dir_ / name);
  if (!os) throw std::runtime_error("cannot write " + (out_dir_ / name).string());
  os << j.dump(2) << '\n';
  files_.push_back(name);
}

std::map<std::string, std::string> read_config(const fs::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> out;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      out[key] = node.data();
    } else {
      for (const auto& [k, v] : node) out[key + "." + k] = v.data();
    }
  }
  return out;
}

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

json parse_scalar(const json& like, const std::string& raw, const std::string& key) {
  const std::string text = trim(raw);
  auto fail = [&]() -> json { throw ConfigError("bad value '" + raw + "' for " + key); };
  if (like.is_boolean()) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    return fail();
  }
  if (like.is_number_unsigned() || like.is_number_integer()) {
    std::int64_t i = 0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), i);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size() || text.empty()) return fail();
    if (like.is_number_unsigned() && i < 0) return fail();
    return like.is_number_unsigned() ? json(static_cast<std::uint64_t>(i)) : json(i);
  }
  if (like.is_number_float()) {
    double d = 0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), d);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size() || text.empty()) return fail();
    return d;
  }
  return text;
}
}  // namespace

json parse_like(const json& like, const std::string& text, const std::string& key) {
  if (!like.is_array()) return parse_scalar(like, text, key);
  const json elem = like.empty() ? json(0.0) : like.front();
  json out = json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(parse_scalar(elem, item, key));
  return out;
}

void apply_overrides(json& params, const std::map<std::string, std::string>& values) {
  for (const auto& [key, text] : values) {
    if (!params.contains(key)) throw ConfigError("unknown parameter " + key);
    params[key] = parse_like(params[key], text, key);
  }
}

}  // namespace wnls
