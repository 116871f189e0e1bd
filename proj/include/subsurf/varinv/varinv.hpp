/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subsurf/esmda/esmda.hpp"

namespace subsurf::varinv {

/// Latent vector -> simulated observations (generator followed by the forward model).
using ForwardG = std::function<Eigen::VectorXd(const Eigen::VectorXd& z)>;

/// L(z) = 1/2 |z_c - z|^2_{C_Z^-1} + 1/2 |d_obs - F(G(z))|^2_{C_D^-1}
struct ObjectiveSpec {
  esmda::ObservationModel observations;
  Eigen::VectorXd prior_center;
  /// Diagonal of C_Z; empty means identity.
  Eigen::VectorXd prior_variance;

  Eigen::VectorXd prior_precision() const;
  void validate() const;
};

/// Standard MAP setup: prior centred at zero with identity covariance.
ObjectiveSpec map_objective(esmda::ObservationModel m, std::size_t n_z);

double objective_value(const Eigen::VectorXd& z, const Eigen::VectorXd& d_pred, const ObjectiveSpec& spec);
double objective(const Eigen::VectorXd& z, const ObjectiveSpec& spec, const ForwardG& forward);

/// Central differences, column k = (F(z + h e_k) - F(z - h e_k)) / 2h.
Eigen::MatrixXd fd_jacobian(const ForwardG& forward, const Eigen::VectorXd& z, double step,
                            unsigned threads = 1);

enum class StepMode { gauss_newton, levenberg_marquardt };

struct InversionPolicy {
  StepMode mode = StepMode::gauss_newton;
  double fd_step = 1e-3;
  std::size_t max_iterations = 50;
  double gradient_tolerance = 1e-6;  // on max |dL/dz|
  double step_tolerance = 1e-10;     // relative to 1 + |z|
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  std::size_t max_halvings = 30;  // also caps consecutive LM rejections
  double lm_init = 1e-2;
  double lm_grow = 10.0;
  double lm_shrink = 0.5;
  unsigned threads = 1;

  void validate() const;
};

/// Solves (J^T C_D^-1 J + C_Z^-1 + mu diag) dz = J^T C_D^-1 r - C_Z^-1 (z - z_c),
/// with r = d_obs - F(G(z)). `damping` is ignored in Gauss-Newton mode.
Eigen::VectorXd step_direction(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual,
                               const Eigen::VectorXd& z, const ObjectiveSpec& spec, StepMode mode,
                               double damping = 0.0);

/// dL/dz from a Jacobian and residual.
Eigen::VectorXd objective_gradient(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual,
                                   const Eigen::VectorXd& z, const ObjectiveSpec& spec);

enum class Termination { gradient, step_collapse, line_search_exhausted, max_iterations };
std::string to_string(Termination t);

struct TrajectoryPoint {
  std::size_t iteration = 0;
  Eigen::VectorXd z;
  double objective = 0.0;
  double rmse = 0.0;  // data misfit, m
  double step = 0.0;  // |accepted dz|
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;  // points[0] is the start
  Termination termination = Termination::max_iterations;
  std::size_t forward_evaluations = 0;

  const TrajectoryPoint& final() const { return points.back(); }
};

Trajectory run_variational(const Eigen::VectorXd& z0, const ObjectiveSpec& spec,
                           const ForwardG& forward, const InversionPolicy& policy);

/// trajectory.csv (iteration, L, rmse, step, termination) and z_<k>.gfld per point.
void write_trajectory(const std::filesystem::path& dir, const Trajectory& t);

}  // namespace subsurf::varinv
