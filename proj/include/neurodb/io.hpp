#pragma once

// Text formats: dataset and workload CSV, key=value config files, and the
// query-function descriptor that travels alongside workloads.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "neurodb/core.hpp"

namespace neurodb::io {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(const std::string& text);
long long parse_int(const std::string& text);

/// Dataset CSV: one header line of attribute names, then one line per row.
void write_dataset_csv(std::ostream& out, const Dataset& dataset);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Workload CSV: header q0..q{p-1}[,y0..y{o-1}], one query per line.
void write_workload_csv(std::ostream& out, const Workload& workload);
void write_workload_csv(const std::filesystem::path& path, const Workload& workload);
/// Reads query and optional label columns; the spec must match the widths.
Workload read_workload_csv(std::istream& in, const QueryFunctionSpec& spec);
Workload read_workload_csv(const std::filesystem::path& path,
                           const QueryFunctionSpec& spec);

/// Ordered key=value text. '#' starts a comment; blank lines are ignored.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return values_; }

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
};

KeyValues to_key_values(const QueryFunctionSpec& spec);
QueryFunctionSpec spec_from_key_values(const KeyValues& kv);

std::vector<std::size_t> parse_index_list(const std::string& text);
std::string format_index_list(const std::vector<std::size_t>& values);

}  // namespace neurodb::io
