#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nvsense::cli {

// Header lines shared by every artifact file: the producing command, the
// FNV-1a hash of the effective config, and the master seed, followed by any
// command-specific metadata in insertion order.
struct TableMetadata {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

struct Table {
  TableMetadata meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t hash);

// Formats with 12 significant digits; reading the result back with strtod
// recovers the value to that precision. Non-finite values print as nan/inf.
std::string format_number(double value);

// Delimiter-separated text: '#'-prefixed metadata, a '# columns:' line, then
// one tab-separated row per line.
void write_table_tsv(const std::filesystem::path& path, const Table& table);

// Structured record form: the same '#' header followed by a JSON document
// {"meta": {...}, "columns": [...], "rows": [[...], ...]} with non-finite
// entries stored as null.
void write_table_records(const std::filesystem::path& path, const Table& table);

// Writes in the format selected by name ("tsv" or "records") and returns the
// file name actually written (extension follows the format).
std::string write_table(const std::filesystem::path& dir,
                        const std::string& stem,
                        const std::string& format,
                        const Table& table);

// Reads either format back, keyed on the first non-header byte. Lossless at
// the printed precision; null record entries come back as NaN.
Table read_table(const std::filesystem::path& path);

// Run manifest, the only artifact carrying a timestamp. status is "ok" or
// "failed"; failure_stage names the stage that threw when status is failed.
void write_manifest(const std::filesystem::path& dir,
                    const TableMetadata& meta,
                    const std::vector<std::string>& files,
                    const std::string& status,
                    const std::string& failure_stage = "");

}  // namespace nvsense::cli
