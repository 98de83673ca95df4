#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gapscore {

// Read-only view of one row: values plus the parallel observed flags.
// Values at unobserved positions carry no meaning.
struct RowView {
  std::span<const double> values;
  std::span<const std::uint8_t> observed;

  std::size_t size() const { return values.size(); }
  bool is_observed(std::size_t j) const { return observed[j] != 0; }
  bool complete() const;
  std::size_t observed_count() const;
};

// Row-major numeric matrix with a boolean missingness mask (true = observed).
class MaskedMatrix {
 public:
  MaskedMatrix() = default;
  // All cells observed and zero. cols must be >= 1.
  MaskedMatrix(std::size_t rows, std::size_t cols);

  static MaskedMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static MaskedMatrix from_eigen(const Eigen::MatrixXd& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double value(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }
  bool observed(std::size_t i, std::size_t j) const {
    return mask_[i * cols_ + j] != 0;
  }

  void set(std::size_t i, std::size_t j, double v) {
    values_[i * cols_ + j] = v;
    mask_[i * cols_ + j] = 1;
  }
  void set_missing(std::size_t i, std::size_t j) {
    values_[i * cols_ + j] = 0.0;
    mask_[i * cols_ + j] = 0;
  }

  RowView row(std::size_t i) const;

  bool fully_observed() const;
  std::size_t missing_count() const;

  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> mask() const { return mask_; }

  // Requires every cell to be observed; throws UnsupportedInputError
  // naming `what` otherwise.
  Eigen::MatrixXd to_eigen(const char* what = "matrix") const;

  // Copy of rows selected by index, in the given order.
  MaskedMatrix select_rows(std::span<const std::size_t> idx) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

// Same shape, same mask, same values on observed cells.
bool equivalent(const MaskedMatrix& a, const MaskedMatrix& b);

void require_complete(const MaskedMatrix& m, const char* what);

struct LabeledDataset {
  MaskedMatrix features;
  std::vector<int> labels;          // 1 = anomaly, 0 = nominal; may be empty
  std::vector<std::string> names;   // feature column names

  std::size_t anomaly_count() const;
};

}  // namespace gapscore
