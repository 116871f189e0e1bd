/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "subsurf/grid_field.hpp"

// Steady-state 2D confined groundwater flow on a uniform raster.
//
// West and east columns are constant-head cells, north and south edges are
// no-flow. The remaining cells solve
//
//   sum_faces C_f (h_nb - h) + R dx dy + Q = 0
//
// with C_f the harmonic mean of the two cell transmissivities (T = K b) and
// Q the sum of well rates in the cell (negative = extraction).
namespace subsurf::flowsim {

struct AquiferGrid {
  std::size_t rows = 96;
  std::size_t cols = 96;
  double cell_size = 5.0;   // m
  double thickness = 10.0;  // m

  void validate() const;
  friend bool operator==(const AquiferGrid&, const AquiferGrid&) = default;
};

struct BoundarySpec {
  double west_head = 0.0;    // m
  double east_head = -10.0;  // m
  friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;
};

struct Well {
  std::size_t row = 0;
  std::size_t col = 0;
  double rate = 0.0;  // m^3/d, negative = extraction
};

struct SourceSpec {
  double recharge = 0.001;  // m/d over every cell
  std::vector<Well> wells;
};

enum class WellRole : std::uint8_t { monitoring, pumping_capable };

struct WellLocation {
  std::size_t row = 0;
  std::size_t col = 0;
  WellRole role = WellRole::monitoring;
  friend bool operator==(const WellLocation&, const WellLocation&) = default;
};

struct WellLayout {
  std::vector<WellLocation> wells;

  std::size_t size() const { return wells.size(); }
  std::size_t pumping_count() const;

  /// k x k lattice at (round((i+1) rows/(k+1)), round((j+1) cols/(k+1))), row-major.
  static WellLayout lattice(const AquiferGrid& grid, std::size_t k, WellRole role);

  /// Cases 1-3: 3x3, 4x4, 5x5 monitoring lattices. Case 4: 4x4 pumping-capable lattice.
  static WellLayout preset_case(int case_number, const AquiferGrid& grid);

  /// Cells distinct and inside the grid.
  void validate(const AquiferGrid& grid) const;

  friend bool operator==(const WellLayout&, const WellLayout&) = default;
};

enum class ExperimentMode : std::uint8_t { static_heads, tomography };

struct ExperimentSpec {
  ExperimentMode mode = ExperimentMode::static_heads;
  WellLayout layout;
  double pumping_rate = 0.0;  // m^3/d extracted by the active well (tomography only)
  AquiferGrid grid;
  BoundarySpec boundary;
  SourceSpec sources;

  std::size_t observation_count() const;
  void validate() const;
};

using HeadField = GridField;
using ObservationVector = Eigen::VectorXd;

/// Reusable factorization of the flow operator for one conductivity field.
/// Not thread-safe; use one per worker.
class SteadyFlowSolver {
 public:
  SteadyFlowSolver(const AquiferGrid& grid, const BoundarySpec& bc);
  ~SteadyFlowSolver();
  SteadyFlowSolver(SteadyFlowSolver&&) noexcept;
  SteadyFlowSolver& operator=(SteadyFlowSolver&&) noexcept;

  /// Assembles and factorizes the operator for conductivity K (m/d).
  void factorize(const GridField& conductivity);

  /// Heads for the current factorization under the given sources.
  HeadField solve(const SourceSpec& sources) const;

  /// Relative residual ||b - A h|| / ||b|| of the last solve.
  double last_residual() const { return last_residual_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  mutable double last_residual_ = 0.0;
};

HeadField solve_steady_heads(const GridField& conductivity, const AquiferGrid& grid,
                             const BoundarySpec& bc, const SourceSpec& src);

ObservationVector observe_heads(const HeadField& heads, const WellLayout& layout);

/// Static mode: one solve, heads at every layout well. Tomography: one solve per
/// pumping-capable well (extracting pumping_rate on top of the base sources),
/// recording heads at the other wells; tests concatenated in layout order.
ObservationVector run_forward(const GridField& conductivity, const ExperimentSpec& exp);

/// Same as run_forward but reuses a caller-owned solver workspace.
ObservationVector run_forward(const GridField& conductivity, const ExperimentSpec& exp,
                              SteadyFlowSolver& solver);

ObservationVector add_noise(const ObservationVector& d, double sigma, std::uint64_t seed);

}  // namespace subsurf::flowsim
