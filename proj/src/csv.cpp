#include "gapscore/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gapscore/errors.hpp"

namespace gapscore {
namespace {

constexpr std::string_view kNa = "NA";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

// nullopt means NA.
std::optional<double> parse_cell(std::string_view cell, std::size_t row,
                                 const std::string& column) {
  if (cell == kNa) return std::nullopt;
  if (cell.empty()) throw ParseError(row, column, "empty cell");
  std::string_view body = cell;
  if (body.front() == '+') body.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || ptr != body.data() + body.size() || !std::isfinite(v))
    throw ParseError(row, column, "not a number: '" + std::string(cell) + "'");
  return v;
}

}  // namespace

LabeledDataset read_csv(std::istream& in, const CsvReadOptions& opts) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty file: no header row");
  std::vector<std::string> header;
  for (auto name : split(line)) header.emplace_back(name);
  if (header.empty() || (header.size() == 1 && header[0].empty()))
    throw FormatError("empty header row");

  std::optional<std::size_t> label_idx;
  if (opts.label_column) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == *opts.label_column) label_idx = j;
    if (!label_idx)
      throw ConfigError("label column '" + *opts.label_column +
                        "' not found in header");
  }
  const std::size_t n_features = header.size() - (label_idx ? 1 : 0);
  if (n_features == 0) throw FormatError("no feature columns");

  std::vector<std::optional<double>> cells;
  std::vector<int> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto parts = split(line);
    if (parts.size() != header.size()) {
      throw FormatError("row " + std::to_string(row) + " has " +
                        std::to_string(parts.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < parts.size(); ++j) {
      auto v = parse_cell(parts[j], row, header[j]);
      if (label_idx && j == *label_idx) {
        if (!v || (*v != 0.0 && *v != 1.0))
          throw ParseError(row, header[j], "label must be 0 or 1");
        labels.push_back(static_cast<int>(*v));
        continue;
      }
      if (v && opts.sentinel && *v == *opts.sentinel) v.reset();
      cells.push_back(v);
    }
  }

  LabeledDataset out;
  out.features = MaskedMatrix(row, n_features);
  for (std::size_t i = 0; i < row; ++i) {
    for (std::size_t j = 0; j < n_features; ++j) {
      const auto& c = cells[i * n_features + j];
      if (c) {
        out.features.set(i, j, *c);
      } else {
        out.features.set_missing(i, j);
      }
    }
  }
  out.labels = std::move(labels);
  for (std::size_t j = 0; j < header.size(); ++j)
    if (!label_idx || j != *label_idx) out.names.push_back(header[j]);
  return out;
}

LabeledDataset load_csv(const std::filesystem::path& path,
                        const CsvReadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_csv(in, opts);
}

void CsvTable::add_column(std::string name, std::vector<CsvCell> cells) {
  if (!columns.empty() && cells.size() != columns[0].size())
    throw FormatError("column '" + name + "' length differs from table");
  names.push_back(std::move(name));
  columns.push_back(std::move(cells));
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw FormatError("cannot format number");
  std::string s(buf.data(), ptr);
  // Keep a decimal point on integral values so the column reads as real.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void write_csv(const CsvTable& table, std::ostream& out) {
  for (std::size_t c = 1; c < table.columns.size(); ++c)
    if (table.columns[c].size() != table.columns[0].size())
      throw FormatError("columns differ in length");
  for (std::size_t c = 0; c < table.names.size(); ++c)
    out << (c ? "," : "") << table.names[c];
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out << ',';
      std::visit(
          [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
              out << kNa;
            } else if constexpr (std::is_same_v<T, double>) {
              out << format_number(v);
            } else {
              out << v;
            }
          },
          table.columns[c][r]);
    }
    out << '\n';
  }
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_csv(table, out);
  if (!out) throw IoError("write failed for " + path.string());
}

CsvTable to_table(const LabeledDataset& data, const std::string& label_name) {
  const auto& m = data.features;
  CsvTable t;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    std::vector<CsvCell> cells;
    cells.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (m.observed(i, j)) {
        cells.emplace_back(m.value(i, j));
      } else {
        cells.emplace_back(std::monostate{});
      }
    }
    std::string name =
        j < data.names.size() ? data.names[j] : "x" + std::to_string(j + 1);
    t.add_column(std::move(name), std::move(cells));
  }
  if (!data.labels.empty()) {
    std::vector<CsvCell> cells;
    for (int l : data.labels) cells.emplace_back(std::int64_t{l});
    t.add_column(label_name, std::move(cells));
  }
  return t;
}

}  // namespace gapscore
