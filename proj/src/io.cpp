#include "neurodb/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace neurodb::io {

namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void write_row(std::ostream& out, std::span<const double> values, bool first) {
  for (double v : values) {
    if (!first) out << ',';
    out << format_double(v);
    first = false;
  }
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc{}) throw InputError("cannot format number");
  return std::string(buffer, end);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty()) {
    throw InputError("not a number: '" + text + "'");
  }
  return value;
}

long long parse_int(const std::string& text) {
  const std::string t = trim(text);
  long long value = 0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty()) {
    throw InputError("not an integer: '" + text + "'");
  }
  return value;
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  const auto& names = dataset.names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out << ',';
    out << names[j];
  }
  out << '\n';
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    write_row(out, dataset.row(i), true);
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  write_dataset_csv(out, dataset);
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset CSV is empty");
  auto names = split(line, ',');
  const std::size_t d = names.size();
  if (d == 0) throw InputError("dataset CSV header has no columns");
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != d) {
      throw InputError("dataset CSV line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(d));
    }
    for (const auto& c : cells) values.push_back(parse_double(c));
  }
  if (values.empty()) throw InputError("dataset CSV has no rows");
  try {
    return Dataset(std::move(values), d, std::move(names));
  } catch (const ContractError& e) {
    throw InputError(std::string("invalid dataset: ") + e.what());
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset_csv(in);
}

void write_workload_csv(std::ostream& out, const Workload& workload) {
  const std::size_t p = workload.spec.d_pred();
  const std::size_t o = workload.spec.output_dim();
  const bool labeled = !workload.labels.empty();
  for (std::size_t j = 0; j < p; ++j) out << (j ? "," : "") << 'q' << j;
  if (labeled) {
    for (std::size_t j = 0; j < o; ++j) out << ",y" << j;
  }
  out << '\n';
  for (std::size_t i = 0; i < workload.queries.size(); ++i) {
    write_row(out, workload.queries[i], true);
    if (labeled) write_row(out, workload.labels[i], false);
    out << '\n';
  }
}

void write_workload_csv(const std::filesystem::path& path, const Workload& workload) {
  auto out = open_out(path);
  write_workload_csv(out, workload);
}

Workload read_workload_csv(std::istream& in, const QueryFunctionSpec& spec) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("workload CSV is empty");
  const auto header = split(line, ',');
  const std::size_t p = spec.d_pred();
  const std::size_t o = spec.output_dim();
  std::size_t q_cols = 0;
  std::size_t y_cols = 0;
  for (const auto& h : header) {
    if (!h.empty() && h[0] == 'q') {
      if (y_cols) throw InputError("workload CSV: query column after label column");
      ++q_cols;
    } else if (!h.empty() && h[0] == 'y') {
      ++y_cols;
    } else {
      throw InputError("workload CSV: unexpected column '" + h + "'");
    }
  }
  if (q_cols != p) {
    throw InputError("workload CSV has " + std::to_string(q_cols) +
                     " query columns, spec expects " + std::to_string(p));
  }
  if (y_cols != 0 && y_cols != o) {
    throw InputError("workload CSV has " + std::to_string(y_cols) +
                     " label columns, spec expects " + std::to_string(o));
  }
  Workload w;
  w.spec = spec;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != q_cols + y_cols) {
      throw InputError("workload CSV line " + std::to_string(line_no) +
                       " has the wrong number of fields");
    }
    QueryInstance q(p);
    for (std::size_t j = 0; j < p; ++j) q[j] = parse_double(cells[j]);
    w.queries.push_back(std::move(q));
    if (y_cols) {
      std::vector<double> y(o);
      for (std::size_t j = 0; j < o; ++j) y[j] = parse_double(cells[p + j]);
      w.labels.push_back(std::move(y));
    }
  }
  try {
    w.validate();
  } catch (const ContractError& e) {
    throw InputError(std::string("invalid workload: ") + e.what());
  }
  return w;
}

Workload read_workload_csv(const std::filesystem::path& path,
                           const QueryFunctionSpec& spec) {
  auto in = open_in(path);
  return read_workload_csv(in, spec);
}

KeyValues KeyValues::parse(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(line_no) + " lacks '='");
    }
    kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse(in);
}

const std::string& KeyValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InputError("missing config key: " + key);
  return it->second;
}

std::string KeyValues::get_or(const std::string& key,
                              const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_double(get(key)) : fallback;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  return has(key) ? parse_int(get(key)) : fallback;
}

void KeyValues::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw InputError("empty config key");
  values_[key] = value;
}

void KeyValues::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
}

void KeyValues::save(const std::filesystem::path& path) const {
  auto out = open_out(path);
  write(out);
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (trim(text).empty()) return out;
  for (const auto& cell : split(text, ',')) {
    const long long v = parse_int(cell);
    if (v < 0) throw InputError("negative index in list: " + text);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string format_index_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

KeyValues to_key_values(const QueryFunctionSpec& spec) {
  KeyValues kv;
  kv.set("query", to_string(spec.kind));
  kv.set("data_dim", std::to_string(spec.data_dim));
  if (spec.kind == QueryKind::Raq) {
    kv.set("predicate", to_string(spec.predicate.kind));
    kv.set("attributes", format_index_list(spec.predicate.attributes));
    kv.set("agg", to_string(spec.aggregation.kind));
    kv.set("measure", std::to_string(spec.aggregation.measure));
    if (spec.group_by) {
      kv.set("group_by_attribute", std::to_string(spec.group_by->attribute));
      kv.set("group_by_value", format_double(spec.group_by->value));
    }
  } else {
    kv.set("k", std::to_string(spec.k));
  }
  return kv;
}

QueryFunctionSpec spec_from_key_values(const KeyValues& kv) {
  const auto data_dim = static_cast<std::size_t>(kv.get_int("data_dim", 0));
  const QueryKind kind = parse_query_kind(kv.get_or("query", "raq"));
  try {
    if (kind != QueryKind::Raq) {
      const auto k = kv.get_int("k", 1);
      if (k < 1) throw InputError("k must be positive");
      return kind == QueryKind::KnnDistance
                 ? QueryFunctionSpec::knn_distance(static_cast<std::size_t>(k), data_dim)
                 : QueryFunctionSpec::knn_point(static_cast<std::size_t>(k), data_dim);
    }
    PredicateSpec pred{parse_predicate_kind(kv.get_or("predicate", "axis-range")),
                       parse_index_list(kv.get("attributes"))};
    Aggregation agg{parse_agg_kind(kv.get_or("agg", "count")),
                    static_cast<std::size_t>(kv.get_int("measure", 0))};
    std::optional<GroupBy> group;
    if (kv.has("group_by_attribute")) {
      group = GroupBy{static_cast<std::size_t>(kv.get_int("group_by_attribute", 0)),
                      kv.get_double("group_by_value", 0.0)};
    }
    return QueryFunctionSpec::raq(std::move(pred), agg, data_dim, group);
  } catch (const ContractError& e) {
    throw InputError(std::string("invalid query function: ") + e.what());
  }
}

}  // namespace neurodb::io
