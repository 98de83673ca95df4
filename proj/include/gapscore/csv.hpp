#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gapscore/masked_matrix.hpp"

namespace gapscore {

// CSV dialect: UTF-8, comma separated, one header row, every cell a decimal
// number or the literal token NA.

struct CsvReadOptions {
  // Column removed from the features and parsed as a 0/1 label.
  std::optional<std::string> label_column;
  // A numeric value to be read as NA (e.g. -999). Nothing is mapped unless
  // this is set.
  std::optional<double> sentinel;
};

LabeledDataset read_csv(std::istream& in, const CsvReadOptions& opts = {});
LabeledDataset load_csv(const std::filesystem::path& path,
                        const CsvReadOptions& opts = {});

// NA cells are std::monostate.
using CsvCell = std::variant<std::monostate, double, std::int64_t, std::string>;

struct CsvTable {
  std::vector<std::string> names;
  std::vector<std::vector<CsvCell>> columns;

  void add_column(std::string name, std::vector<CsvCell> cells);
  std::size_t rows() const { return columns.empty() ? 0 : columns[0].size(); }
};

void write_csv(const CsvTable& table, std::ostream& out);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

// Features (and labels under `label_name` when present) as a table.
CsvTable to_table(const LabeledDataset& data,
                  const std::string& label_name = "label");

// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

}  // namespace gapscore
