/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "subsurf/grid_field.hpp"

namespace subsurf::genlatent {

/// N_z x N_r matrix of i.i.d. standard normal draws, filled column by column.
Eigen::MatrixXd sample_latent_prior(std::size_t n_z, std::size_t n_r, std::uint64_t seed);

/// Anisotropic spherical variogram in cell units. At azimuth 0 the major range
/// runs west-east (along columns); positive azimuth rotates it toward north.
struct GrfParams {
  double sill = 1.0;
  double nugget = 0.0;
  double range_major = 60.0;
  double range_minor = 40.0;
  double azimuth_deg = 0.0;

  void validate() const;
  /// Covariance between cells separated by (drow, dcol).
  double covariance(double drow, double dcol) const;
  double semivariogram(double drow, double dcol) const { return sill + nugget - covariance(drow, dcol); }
};

enum class GrfMethod { circulant, dense };

/// `n` zero-mean stationary fields. The dense path factorizes the full covariance
/// and is limited to grids of at most 48x48.
std::vector<GridField> grf_sample(const GrfParams& p, std::size_t rows, std::size_t cols,
                                  std::size_t n, std::uint64_t seed,
                                  GrfMethod method = GrfMethod::circulant);

struct FractureParams {
  std::size_t rows = 96;
  std::size_t cols = 96;
  std::size_t count = 20;
  std::size_t length_min = 10;
  std::size_t length_max = 20;
  std::size_t width = 2;
  std::vector<int> orientations = {0, 45, 90};
  bool allow_overlap = true;
  std::size_t max_attempts = 10000;  // per fracture, only used without overlap

  void validate() const;
};

/// One bar, anchored at (row, col). Pixel (t, w) for t < length, w < width is
///   0 deg:  (row + w, col + t)
///   90 deg: (row + t, col + w)
///   45 deg: (row - t, col + t + w)
struct FractureBar {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t length = 0;
  std::size_t width = 0;
  int orientation = 0;

  std::vector<std::pair<std::size_t, std::size_t>> pixels() const;
};

std::vector<FractureBar> synth_fracture_bars(const FractureParams& p, std::uint64_t seed);
GridField paint_fractures(const std::vector<FractureBar>& bars, std::size_t rows, std::size_t cols);

/// Binary raster: 1 on fracture pixels, 0 elsewhere.
GridField synth_fractures(const FractureParams& p, std::uint64_t seed);

/// Sinuous west-east bands: centre y0 + A sin(2 pi x / lambda + phi).
struct ChannelParams {
  std::size_t rows = 96;
  std::size_t cols = 96;
  std::size_t count = 4;
  double width_min = 6.0;
  double width_max = 10.0;
  double amplitude_min = 4.0;
  double amplitude_max = 12.0;
  double wavelength_min = 40.0;
  double wavelength_max = 120.0;
  double fraction_min = 0.2;
  double fraction_max = 0.4;
  std::size_t max_attempts = 200;

  void validate() const;
};

/// Binary raster: 1 inside a channel. Redraws the whole field until the channel
/// fraction lies in [fraction_min, fraction_max]; NumericalError after max_attempts.
GridField synth_channels(const ChannelParams& p, std::uint64_t seed);

/// Fraction of cells equal to 1.
double feature_fraction(const GridField& binary);

}  // namespace subsurf::genlatent
