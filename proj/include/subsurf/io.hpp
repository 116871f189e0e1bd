/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subsurf/grid_field.hpp"

namespace subsurf {

GridField to_grid_field(const Eigen::MatrixXd& m);
Eigen::MatrixXd to_matrix(const GridField& f);

/// Matrices are persisted in the GridField file format (rows x cols as stored).
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

/// Observation vector CSV with header "index,value".
void write_observations(const std::filesystem::path& path, const Eigen::VectorXd& d);
Eigen::VectorXd read_observations(const std::filesystem::path& path);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

}  // namespace subsurf
