#include "gapscore/masked_matrix.hpp"

#include <algorithm>
#include <numeric>

#include "gapscore/errors.hpp"

namespace gapscore {

bool RowView::complete() const {
  return std::all_of(observed.begin(), observed.end(),
                     [](std::uint8_t o) { return o != 0; });
}

std::size_t RowView::observed_count() const {
  return static_cast<std::size_t>(
      std::count_if(observed.begin(), observed.end(),
                    [](std::uint8_t o) { return o != 0; }));
}

MaskedMatrix::MaskedMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0), mask_(rows * cols, 1) {
  if (cols == 0) throw ConfigError("matrix needs at least one column");
}

MaskedMatrix MaskedMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ConfigError("from_rows needs at least one row");
  MaskedMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols_) throw FormatError("ragged rows");
    for (std::size_t j = 0; j < m.cols_; ++j) m.set(i, j, rows[i][j]);
  }
  return m;
}

MaskedMatrix MaskedMatrix::from_eigen(const Eigen::MatrixXd& e) {
  MaskedMatrix m(static_cast<std::size_t>(e.rows()),
                 static_cast<std::size_t>(e.cols()));
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j)
      m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), e(i, j));
  return m;
}

RowView MaskedMatrix::row(std::size_t i) const {
  return {std::span<const double>(values_).subspan(i * cols_, cols_),
          std::span<const std::uint8_t>(mask_).subspan(i * cols_, cols_)};
}

bool MaskedMatrix::fully_observed() const {
  return std::all_of(mask_.begin(), mask_.end(),
                     [](std::uint8_t o) { return o != 0; });
}

std::size_t MaskedMatrix::missing_count() const {
  return static_cast<std::size_t>(
      std::count(mask_.begin(), mask_.end(), std::uint8_t{0}));
}

Eigen::MatrixXd MaskedMatrix::to_eigen(const char* what) const {
  require_complete(*this, what);
  Eigen::MatrixXd e(static_cast<Eigen::Index>(rows_),
                    static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j)
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          value(i, j);
  return e;
}

MaskedMatrix MaskedMatrix::select_rows(std::span<const std::size_t> idx) const {
  MaskedMatrix out;
  out.rows_ = idx.size();
  out.cols_ = cols_;
  out.values_.reserve(idx.size() * cols_);
  out.mask_.reserve(idx.size() * cols_);
  for (std::size_t i : idx) {
    auto first = static_cast<std::ptrdiff_t>(i * cols_);
    auto last = first + static_cast<std::ptrdiff_t>(cols_);
    out.values_.insert(out.values_.end(), values_.begin() + first,
                       values_.begin() + last);
    out.mask_.insert(out.mask_.end(), mask_.begin() + first,
                     mask_.begin() + last);
  }
  return out;
}

bool equivalent(const MaskedMatrix& a, const MaskedMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (a.observed(i, j) != b.observed(i, j)) return false;
      if (a.observed(i, j) && a.value(i, j) != b.value(i, j)) return false;
    }
  }
  return true;
}

void require_complete(const MaskedMatrix& m, const char* what) {
  if (!m.fully_observed()) {
    throw UnsupportedInputError(std::string(what) +
                                " contains missing values (" +
                                std::to_string(m.missing_count()) + " cells)");
  }
}

std::size_t LabeledDataset::anomaly_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

}  // namespace gapscore
