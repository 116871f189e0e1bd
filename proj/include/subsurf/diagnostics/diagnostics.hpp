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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subsurf/grid_field.hpp"
#include "subsurf/varinv/varinv.hpp"

namespace subsurf::diagnostics {

/// West-east semivariogram; lags in cells.
struct Semivariogram {
  std::vector<double> lags;
  std::vector<double> gamma;
  std::vector<std::size_t> pairs;
};

Semivariogram semivariogram(const GridField& field, std::size_t max_lag);
/// Pools the same-row pairs of every field.
Semivariogram mean_semivariogram(const std::vector<GridField>& fields, std::size_t max_lag);

double rmse(std::span<const double> a, std::span<const double> b);
double rmse(const GridField& a, const GridField& b);
double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct EnsembleSummary {
  GridField mean;
  GridField variance;  // unbiased
};

EnsembleSummary ensemble_summary(const std::vector<GridField>& fields);

struct ScanOptions {
  double lo = -5.0;
  double hi = 5.0;
  double step = 0.1;
  unsigned threads = 0;
};

/// L over a square grid of two latent coordinates; every other coordinate stays at z_ref.
struct SurfaceScan {
  std::size_t index_i = 0;
  std::size_t index_j = 0;
  std::vector<double> axis;
  Eigen::MatrixXd values;  // values(a, b): z_i = axis[a], z_j = axis[b]; NaN where the forward failed
  Eigen::VectorXd z_ref;

  std::size_t missing() const;
  /// Cell of the smallest finite value.
  std::pair<std::size_t, std::size_t> argmin() const;
};

/// Uniform axis lo, lo + step, ..., hi. When 1/step is an integer the values are
/// formed as k / (1/step) so decimal grid points are hit exactly.
std::vector<double> scan_axis(const ScanOptions& o);

SurfaceScan objective_surface(std::size_t i, std::size_t j, const Eigen::VectorXd& z_ref,
                              const varinv::ObjectiveSpec& spec, const varinv::ForwardG& forward,
                              const ScanOptions& options = {});

/// Leave-one-out 1-NN accuracy on the pooled set (label real = 1, generated = 0),
/// Euclidean pixel distance, ties going to the lowest pooled index.
double nn_two_sample_accuracy(const std::vector<GridField>& real_set,
                              const std::vector<GridField>& gen_set);

GridField binarize(const GridField& field, double threshold = 0.2);

// CSV exports for external plotting.
void write_semivariogram(const std::filesystem::path& path, const Semivariogram& s,
                         double cell_size = 1.0);
void write_scan(const std::filesystem::path& path, const SurfaceScan& s);

}  // namespace subsurf::diagnostics
