/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subsurf/genlatent/latent_map.hpp"
#include "subsurf/harness/config.hpp"

namespace subsurf::harness {

struct RunMetrics {
  std::size_t observation_count = 0;
  double fit_rmse = 0.0;       // forward of the posterior mean vs d_obs, m
  double fit_rmse_true = 0.0;  // same vs the noise-free data
  double krmse_mean = 0.0;     // mean log10 K RMSE of the final realizations vs truth
  double misfit_initial = 0.0;
  double misfit_final = 0.0;
};

struct RunManifest {
  std::filesystem::path dir;
  bool complete = false;
  double wall_seconds = 0.0;
  RunMetrics metrics;
  std::vector<std::filesystem::path> children;
};

std::shared_ptr<const genlatent::LatentMap> make_latent_map(const RunConfig& cfg);

/// The reference log10 K field named by truth.*.
GridField true_log10k(const RunConfig& cfg, const genlatent::LatentMap& map);

struct Observations {
  Eigen::VectorXd d_true;
  Eigen::VectorXd d_obs;
};
Observations simulate_observations(const RunConfig& cfg, const GridField& log10k);

/// Runs one configuration (or each child of a sweep) and writes every output plus
/// a manifest into cfg.output_dir. Failures mark the manifest incomplete and rethrow.
RunManifest execute_run(const RunConfig& cfg);

/// Child configurations of a sweep, in execution order; empty without sweep keys.
std::vector<RunConfig> sweep_children(const RunConfig& cfg);

}  // namespace subsurf::harness
