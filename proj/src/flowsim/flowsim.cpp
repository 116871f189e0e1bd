/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/flowsim/flowsim.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <utility>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "subsurf/errors.hpp"
#include "subsurf/random.hpp"

namespace subsurf::flowsim {

namespace {

constexpr double kResidualTolerance = 1e-10;

std::string cell_name(std::size_t r, std::size_t c) {
  return "(" + std::to_string(r) + "," + std::to_string(c) + ")";
}

double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

void AquiferGrid::validate() const {
  if (rows < 2 || cols < 2) throw DomainError("AquiferGrid: need at least 2x2 cells");
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw DomainError("AquiferGrid: cell_size must be positive");
  }
  if (!(thickness > 0.0) || !std::isfinite(thickness)) {
    throw DomainError("AquiferGrid: thickness must be positive");
  }
}

std::size_t WellLayout::pumping_count() const {
  std::size_t n = 0;
  for (const auto& w : wells) n += w.role == WellRole::pumping_capable;
  return n;
}

WellLayout WellLayout::lattice(const AquiferGrid& grid, std::size_t k, WellRole role) {
  if (k == 0) throw DomainError("WellLayout::lattice: k must be positive");
  WellLayout layout;
  auto place = [k](std::size_t i, std::size_t n) {
    return static_cast<std::size_t>(std::lround(static_cast<double>((i + 1) * n) /
                                                static_cast<double>(k + 1)));
  };
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      layout.wells.push_back({place(i, grid.rows), place(j, grid.cols), role});
    }
  }
  layout.validate(grid);
  return layout;
}

WellLayout WellLayout::preset_case(int case_number, const AquiferGrid& grid) {
  switch (case_number) {
    case 1: return lattice(grid, 3, WellRole::monitoring);
    case 2: return lattice(grid, 4, WellRole::monitoring);
    case 3: return lattice(grid, 5, WellRole::monitoring);
    case 4: return lattice(grid, 4, WellRole::pumping_capable);
    default: throw DomainError("WellLayout: unknown case " + std::to_string(case_number));
  }
}

void WellLayout::validate(const AquiferGrid& grid) const {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& w : wells) {
    if (w.row >= grid.rows || w.col >= grid.cols) {
      throw DomainError("well cell " + cell_name(w.row, w.col) + " outside the grid");
    }
    if (!seen.emplace(w.row, w.col).second) {
      throw DomainError("duplicate well cell " + cell_name(w.row, w.col));
    }
  }
}

std::size_t ExperimentSpec::observation_count() const {
  if (mode == ExperimentMode::static_heads) return layout.size();
  return layout.pumping_count() * (layout.size() - 1);
}

void ExperimentSpec::validate() const {
  grid.validate();
  layout.validate(grid);
  if (layout.size() == 0) throw DomainError("experiment has no wells");
  if (mode == ExperimentMode::tomography) {
    if (layout.pumping_count() == 0) {
      throw DomainError("tomography experiment has no pumping-capable wells");
    }
    if (!(pumping_rate >= 0.0) || !std::isfinite(pumping_rate)) {
      throw DomainError("pumping_rate must be a non-negative extraction magnitude");
    }
  }
}

// -----------------------------------------------------------------------------

struct SteadyFlowSolver::Impl {
  AquiferGrid grid;
  BoundarySpec bc;
  std::size_t active_cols = 0;
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd dirichlet_rhs;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  bool pattern_ready = false;
  bool factorized = false;

  Eigen::Index index(std::size_t r, std::size_t c) const {
    return static_cast<Eigen::Index>(r * active_cols + (c - 1));
  }
  bool is_dirichlet(std::size_t c) const { return c == 0 || c + 1 == grid.cols; }
  double dirichlet_head(std::size_t c) const { return c == 0 ? bc.west_head : bc.east_head; }
};

SteadyFlowSolver::SteadyFlowSolver(const AquiferGrid& grid, const BoundarySpec& bc)
    : impl_(std::make_unique<Impl>()) {
  grid.validate();
  if (!std::isfinite(bc.west_head) || !std::isfinite(bc.east_head)) {
    throw DomainError("boundary heads must be finite");
  }
  impl_->grid = grid;
  impl_->bc = bc;
  impl_->active_cols = grid.cols - 2;
}

SteadyFlowSolver::~SteadyFlowSolver() = default;
SteadyFlowSolver::SteadyFlowSolver(SteadyFlowSolver&&) noexcept = default;
SteadyFlowSolver& SteadyFlowSolver::operator=(SteadyFlowSolver&&) noexcept = default;

void SteadyFlowSolver::factorize(const GridField& conductivity) {
  Impl& s = *impl_;
  const auto& g = s.grid;
  if (conductivity.rows() != g.rows || conductivity.cols() != g.cols) {
    throw DomainError("conductivity is " + std::to_string(conductivity.rows()) + "x" +
                      std::to_string(conductivity.cols()) + ", grid is " +
                      std::to_string(g.rows) + "x" + std::to_string(g.cols));
  }
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      const double k = conductivity(r, c);
      if (!(k > 0.0) || !std::isfinite(k)) {
        throw DomainError("conductivity must be positive and finite; cell " + cell_name(r, c) +
                          " = " + std::to_string(k));
      }
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(g.rows * s.active_cols);
  s.dirichlet_rhs = Eigen::VectorXd::Zero(n);
  s.factorized = false;
  if (n == 0) {
    s.factorized = true;
    return;
  }

  // Square cells: face conductance = harmonic-mean transmissivity.
  auto conductance = [&](std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1) {
    return harmonic_mean(conductivity(r0, c0) * g.thickness, conductivity(r1, c1) * g.thickness);
  };

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * 3);
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 1; c + 1 < g.cols; ++c) {
      const Eigen::Index i = s.index(r, c);
      double diag = 0.0;
      // Neighbours: north, south, west, east.
      const std::pair<long, long> offsets[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (const auto& [dr, dc] : offsets) {
        const long rn = static_cast<long>(r) + dr;
        const long cn = static_cast<long>(c) + dc;
        if (rn < 0 || rn >= static_cast<long>(g.rows)) continue;  // no-flow edge
        const auto ur = static_cast<std::size_t>(rn);
        const auto uc = static_cast<std::size_t>(cn);
        const double cf = conductance(r, c, ur, uc);
        diag += cf;
        if (s.is_dirichlet(uc)) {
          s.dirichlet_rhs[i] += cf * s.dirichlet_head(uc);
        } else {
          const Eigen::Index j = s.index(ur, uc);
          if (j < i) triplets.emplace_back(i, j, -cf);
        }
      }
      triplets.emplace_back(i, i, diag);
    }
  }
  s.matrix.resize(n, n);
  s.matrix.setFromTriplets(triplets.begin(), triplets.end());
  if (!s.pattern_ready) {
    s.ldlt.analyzePattern(s.matrix);
    s.pattern_ready = true;
  }
  s.ldlt.factorize(s.matrix);
  if (s.ldlt.info() != Eigen::Success) {
    throw NumericalError("flow operator factorization failed");
  }
  s.factorized = true;
}

HeadField SteadyFlowSolver::solve(const SourceSpec& sources) const {
  const Impl& s = *impl_;
  const auto& g = s.grid;
  if (!s.factorized) throw std::logic_error("SteadyFlowSolver::solve before factorize");
  if (!std::isfinite(sources.recharge)) throw DomainError("recharge must be finite");

  const Eigen::Index n = static_cast<Eigen::Index>(g.rows * s.active_cols);
  Eigen::VectorXd rhs = s.dirichlet_rhs;
  const double area = g.cell_size * g.cell_size;
  rhs.array() += sources.recharge * area;
  for (const auto& w : sources.wells) {
    if (w.row >= g.rows || w.col >= g.cols) {
      throw DomainError("well cell " + cell_name(w.row, w.col) + " outside the grid");
    }
    if (s.is_dirichlet(w.col)) {
      throw DomainError("well cell " + cell_name(w.row, w.col) + " is a constant-head cell");
    }
    if (!std::isfinite(w.rate)) throw DomainError("well rate must be finite");
    rhs[s.index(w.row, w.col)] += w.rate;
  }

  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  last_residual_ = 0.0;
  if (n > 0) {
    h = s.ldlt.solve(rhs);
    const double scale = std::max(rhs.norm(), std::numeric_limits<double>::min());
    Eigen::VectorXd residual = rhs - s.matrix.selfadjointView<Eigen::Lower>() * h;
    last_residual_ = residual.norm() / scale;
    if (last_residual_ > kResidualTolerance) {
      h += s.ldlt.solve(residual);
      residual = rhs - s.matrix.selfadjointView<Eigen::Lower>() * h;
      last_residual_ = residual.norm() / scale;
    }
    if (!(last_residual_ <= kResidualTolerance)) {
      throw NumericalError("flow solve did not converge: relative residual " +
                           std::to_string(last_residual_));
    }
  }

  HeadField heads(g.rows, g.cols);
  for (std::size_t r = 0; r < g.rows; ++r) {
    heads(r, 0) = s.bc.west_head;
    heads(r, g.cols - 1) = s.bc.east_head;
    for (std::size_t c = 1; c + 1 < g.cols; ++c) heads(r, c) = h[s.index(r, c)];
  }
  return heads;
}

HeadField solve_steady_heads(const GridField& conductivity, const AquiferGrid& grid,
                             const BoundarySpec& bc, const SourceSpec& src) {
  SteadyFlowSolver solver(grid, bc);
  solver.factorize(conductivity);
  return solver.solve(src);
}

ObservationVector observe_heads(const HeadField& heads, const WellLayout& layout) {
  ObservationVector d(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& w = layout.wells[i];
    if (w.row >= heads.rows() || w.col >= heads.cols()) {
      throw DomainError("monitoring cell " + cell_name(w.row, w.col) + " outside the grid");
    }
    d[static_cast<Eigen::Index>(i)] = heads(w.row, w.col);
  }
  return d;
}

ObservationVector run_forward(const GridField& conductivity, const ExperimentSpec& exp) {
  SteadyFlowSolver solver(exp.grid, exp.boundary);
  return run_forward(conductivity, exp, solver);
}

ObservationVector run_forward(const GridField& conductivity, const ExperimentSpec& exp,
                              SteadyFlowSolver& solver) {
  exp.validate();
  solver.factorize(conductivity);
  if (exp.mode == ExperimentMode::static_heads) {
    return observe_heads(solver.solve(exp.sources), exp.layout);
  }

  const auto& wells = exp.layout.wells;
  ObservationVector d(static_cast<Eigen::Index>(exp.observation_count()));
  Eigen::Index out = 0;
  std::size_t test = 0;
  for (std::size_t p = 0; p < wells.size(); ++p) {
    if (wells[p].role != WellRole::pumping_capable) continue;
    SourceSpec src = exp.sources;
    src.wells.push_back({wells[p].row, wells[p].col, -exp.pumping_rate});
    HeadField heads;
    try {
      heads = solver.solve(src);
    } catch (const NumericalError& e) {
      throw NumericalError("pumping test " + std::to_string(test) + ": " + e.what());
    } catch (const DomainError& e) {
      throw DomainError("pumping test " + std::to_string(test) + ": " + e.what());
    }
    for (std::size_t m = 0; m < wells.size(); ++m) {
      if (m == p) continue;
      d[out++] = heads(wells[m].row, wells[m].col);
    }
    ++test;
  }
  return d;
}

ObservationVector add_noise(const ObservationVector& d, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw DomainError("noise sigma must be non-negative, got " + std::to_string(sigma));
  }
  ObservationVector out = d;
  if (sigma == 0.0) return out;
  Rng rng = make_stream(seed, {0x6e6f697365ULL});
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += normal(rng);
  return out;
}

}  // namespace subsurf::flowsim
