/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/grid_field.hpp"

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "subsurf/binary.hpp"
#include "subsurf/errors.hpp"
#include "subsurf/io.hpp"

namespace subsurf {

GridField::GridField(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

GridField::GridField(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DomainError("GridField: " + std::to_string(values_.size()) + " values for a " +
                      std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
}

void write_grid_field(const std::filesystem::path& path, const GridField& field,
                      GridFormat format) {
  if (format == GridFormat::binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write("GFLB", 4);
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.rows()));
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.cols()));
    for (double v : field.values()) binary::write_le<double>(out, v);
    if (!out) throw std::runtime_error("write failed: " + path.string());
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "GFLD " << field.rows() << ' ' << field.cols() << '\n';
  for (std::size_t r = 0; r < field.rows(); ++r) {
    for (std::size_t c = 0; c < field.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(field(r, c));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

double parse_value(const std::string& token, const std::filesystem::path& path) {
  // strtod accepts "nan"/"inf", which the scan exports rely on.
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw DomainError(path.string() + ": bad value '" + token + "'");
  }
  return v;
}

}  // namespace

GridField read_grid_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in) throw DomainError(path.string() + ": too short for a GridField file");
  const std::string tag(magic, 4);
  if (tag == "GFLB") {
    const auto rows = binary::read_le<std::uint32_t>(in);
    const auto cols = binary::read_le<std::uint32_t>(in);
    std::vector<double> values(static_cast<std::size_t>(rows) * cols);
    for (auto& v : values) v = binary::read_le<double>(in);
    return GridField(rows, cols, std::move(values));
  }
  if (tag != "GFLD") throw DomainError(path.string() + ": not a GridField file");
  std::size_t rows = 0, cols = 0;
  if (!(in >> rows >> cols)) throw DomainError(path.string() + ": bad GFLD header");
  std::vector<double> values;
  values.reserve(rows * cols);
  std::string token;
  while (values.size() < rows * cols && in >> token) {
    values.push_back(parse_value(token, path));
  }
  if (values.size() != rows * cols) {
    throw DomainError(path.string() + ": expected " + std::to_string(rows * cols) +
                      " values, found " + std::to_string(values.size()));
  }
  return GridField(rows, cols, std::move(values));
}

}  // namespace subsurf
