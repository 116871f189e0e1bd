/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "subsurf/errors.hpp"

namespace subsurf {

GridField to_grid_field(const Eigen::MatrixXd& m) {
  GridField f(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f(r, c) = m(r, c);
  return f;
}

Eigen::MatrixXd to_matrix(const GridField& f) {
  Eigen::MatrixXd m(f.rows(), f.cols());
  for (std::size_t r = 0; r < f.rows(); ++r)
    for (std::size_t c = 0; c < f.cols(); ++c) m(r, c) = f(r, c);
  return m;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  write_grid_field(path, to_grid_field(m));
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  return to_matrix(read_grid_field(path));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_observations(const std::filesystem::path& path, const Eigen::VectorXd& d) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "index,value\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) out << i << ',' << format_double(d[i]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Eigen::VectorXd read_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,value", 0) != 0) {
    throw DomainError(path.string() + ": missing 'index,value' header");
  }
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DomainError(path.string() + ":" + std::to_string(lineno) + ": expected index,value");
    }
    const std::size_t index = std::stoul(line.substr(0, comma));
    if (index != values.size()) {
      throw DomainError(path.string() + ":" + std::to_string(lineno) + ": indices out of order");
    }
    values.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

}  // namespace subsurf
