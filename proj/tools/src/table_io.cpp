#include "table_io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace nvsense::cli {
namespace {

using nlohmann::json;

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

void write_header(std::ostream& out, const TableMetadata& meta) {
  out << "# command: " << meta.command << "\n";
  out << "# config_hash: " << meta.config_hash << "\n";
  out << "# seed: " << meta.seed << "\n";
  for (const auto& [key, value] : meta.extra) {
    out << "# " << key << ": " << value << "\n";
  }
}

// Splits a '# key: value' line; returns false for separator or malformed
// comment lines, which are skipped.
bool parse_header_line(const std::string& line, std::string& key, std::string& value) {
  auto colon = line.find(':');
  if (colon == std::string::npos) return false;
  key = line.substr(1, colon - 1);
  value = line.substr(colon + 1);
  auto trim = [](std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t\r");
    s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
  };
  trim(key);
  trim(value);
  return !key.empty();
}

void assign_meta(TableMetadata& meta, const std::string& key, const std::string& value) {
  if (key == "command") {
    meta.command = value;
  } else if (key == "config_hash") {
    meta.config_hash = value;
  } else if (key == "seed") {
    meta.seed = std::stoull(value);
  } else {
    meta.extra.emplace_back(key, value);
  }
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  std::string word;
  while (in >> word) parts.push_back(word);
  return parts;
}

json rows_to_json(const std::vector<std::vector<double>>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json jr = json::array();
    for (double v : row) {
      if (std::isfinite(v)) {
        jr.push_back(v);
      } else {
        jr.push_back(nullptr);
      }
    }
    out.push_back(std::move(jr));
  }
  return out;
}

Table read_records_body(const TableMetadata& meta, std::istream& in) {
  json doc = json::parse(in);
  Table table;
  table.meta = meta;
  for (const auto& name : doc.at("columns")) {
    table.columns.push_back(name.get<std::string>());
  }
  for (const auto& jr : doc.at("rows")) {
    std::vector<double> row;
    row.reserve(jr.size());
    for (const auto& v : jr) {
      row.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                : v.get<double>());
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.11e", value);
  return buf;
}

void write_table_tsv(const std::filesystem::path& path, const Table& table) {
  auto out = open_for_write(path);
  write_header(out, table.meta);
  out << "# columns:";
  for (const auto& name : table.columns) out << " " << name;
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw std::logic_error("table row width does not match the column list");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "\t";
      out << format_number(row[i]);
    }
    out << "\n";
  }
}

void write_table_records(const std::filesystem::path& path, const Table& table) {
  auto out = open_for_write(path);
  write_header(out, table.meta);
  json doc;
  json meta = json::object();
  for (const auto& [key, value] : table.meta.extra) meta[key] = value;
  doc["meta"] = std::move(meta);
  doc["columns"] = table.columns;
  doc["rows"] = rows_to_json(table.rows);
  out << doc.dump(2) << "\n";
}

std::string write_table(const std::filesystem::path& dir,
                        const std::string& stem,
                        const std::string& format,
                        const Table& table) {
  if (format == "tsv") {
    std::string name = stem + ".tsv";
    write_table_tsv(dir / name, table);
    return name;
  }
  if (format == "records") {
    std::string name = stem + ".json";
    write_table_records(dir / name, table);
    return name;
  }
  throw std::runtime_error("unknown output format '" + format + "'");
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  }
  Table table;
  std::string line;
  bool have_columns = false;
  while (true) {
    auto pos = in.tellg();
    if (!std::getline(in, line)) break;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string key;
      std::string value;
      if (!parse_header_line(line, key, value)) continue;
      if (key == "columns") {
        table.columns = split_whitespace(value);
        have_columns = true;
      } else {
        assign_meta(table.meta, key, value);
      }
      continue;
    }
    if (line[0] == '{') {
      in.seekg(pos);
      return read_records_body(table.meta, in);
    }
    std::vector<double> row;
    for (const auto& cell : split_whitespace(line)) {
      std::size_t used = 0;
      row.push_back(std::stod(cell, &used));
      if (used != cell.size()) {
        throw std::runtime_error("'" + path.string() + "': malformed number '" + cell + "'");
      }
    }
    if (have_columns && row.size() != table.columns.size()) {
      throw std::runtime_error("'" + path.string() + "': row width does not match columns");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_manifest(const std::filesystem::path& dir,
                    const TableMetadata& meta,
                    const std::vector<std::string>& files,
                    const std::string& status,
                    const std::string& failure_stage) {
  json doc;
  doc["command"] = meta.command;
  doc["config_hash"] = meta.config_hash;
  doc["seed"] = meta.seed;
  doc["status"] = status;
  if (!failure_stage.empty()) doc["failure_stage"] = failure_stage;
  doc["files"] = files;
  std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  doc["created"] = stamp;
  auto out = open_for_write(dir / "MANIFEST.json");
  write_header(out, meta);
  out << doc.dump(2) << "\n";
}

}  // namespace nvsense::cli
