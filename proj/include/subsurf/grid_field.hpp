/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace subsurf {

/// Row-major R x C raster. Row 0 is the northernmost row, column 0 the westernmost.
class GridField {
 public:
  GridField() = default;
  GridField(std::size_t rows, std::size_t cols, double fill = 0.0);
  GridField(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const GridField& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const GridField&, const GridField&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

enum class GridFormat { text, binary };

// "GFLD <rows> <cols>" followed by one line per row, or the binary "GFLB" form.
void write_grid_field(const std::filesystem::path& path, const GridField& field,
                      GridFormat format = GridFormat::text);

/// Reads either form; the format is detected from the leading magic.
GridField read_grid_field(const std::filesystem::path& path);

}  // namespace subsurf
