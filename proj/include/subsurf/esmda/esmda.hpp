/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "subsurf/grid_field.hpp"
#include "subsurf/random.hpp"

namespace subsurf::esmda {

/// N_z x N_r: column j is the latent vector of member j.
using LatentEnsemble = Eigen::MatrixXd;
/// N_obs x N_r: column j holds the simulated observations of member j.
using SimulationBatch = Eigen::MatrixXd;

struct ObservationModel {
  Eigen::VectorXd d_obs;           // m
  Eigen::VectorXd error_variance;  // diagonal of C_D, m^2

  static ObservationModel iid(Eigen::VectorXd d_obs, double sigma);
  Eigen::Index size() const { return d_obs.size(); }
  void validate() const;
};

struct InflationSchedule {
  std::vector<double> alphas;

  /// positive entries, sum of reciprocals 1 within 1e-12
  void validate() const;
  std::size_t size() const { return alphas.size(); }
};

InflationSchedule constant_inflation(std::size_t n_a);

struct TruncationPolicy {
  double energy = 0.99;
  void validate() const;
};

/// Column j = d_obs + sqrt(alpha) C_D^{1/2} eps_j.
Eigen::MatrixXd perturb_observations(const ObservationModel& m, double alpha, std::size_t n_r,
                                     std::uint64_t seed);
Eigen::MatrixXd perturb_observations(const ObservationModel& m, double alpha, std::size_t n_r,
                                     Rng& rng);

struct Covariances {
  Eigen::MatrixXd c_zd;
  Eigen::MatrixXd c_dd;
};

/// Centered cross/auto covariances with 1/(N_r - 1) normalization.
Covariances ensemble_covariances(const LatentEnsemble& z, const SimulationBatch& d);

struct PseudoInverse {
  Eigen::MatrixXd inverse;
  Eigen::Index retained = 0;
  Eigen::VectorXd eigenvalues;  // descending
};

/// Eigen-truncated inverse of a symmetric PSD matrix. Keeps the largest count of
/// leading eigenvalues whose cumulative energy fraction stays <= policy.energy
/// (at least one); eigenvalues <= 1e-14 lambda_max are always dropped.
PseudoInverse truncated_pseudo_inverse(const Eigen::MatrixXd& m, const TruncationPolicy& policy);

/// One Kalman-type update of every member against the perturbed data d_uc.
LatentEnsemble esmda_iterate(const LatentEnsemble& z, const SimulationBatch& d,
                             const Eigen::MatrixXd& d_uc, const ObservationModel& m, double alpha,
                             const TruncationPolicy& policy, Eigen::Index* retained = nullptr);

using ForwardFn = std::function<Eigen::VectorXd(const GridField& conductivity)>;
using GeneratorFn = std::function<GridField(const Eigen::VectorXd& z)>;

struct EsmdaOptions {
  unsigned threads = 0;
  /// Replaces the N(0, I) prior draw; must be N_z x N_r.
  std::optional<LatentEnsemble> initial;
  /// Replaces constant_inflation(N_a) when set.
  std::optional<InflationSchedule> schedule;
  /// Latent dimension of the prior draw when `initial` is absent.
  std::size_t n_z = 0;
};

struct MisfitRow {
  std::size_t iteration = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct AssimilationRecord {
  std::uint64_t seed = 0;
  InflationSchedule schedule;
  TruncationPolicy policy;
  std::vector<LatentEnsemble> ensembles;      // N_a + 1 snapshots, prior first
  std::vector<SimulationBatch> simulations;   // simulations[k] from ensembles[k]
  std::vector<MisfitRow> misfit;              // per-member observation RMSE
  std::vector<Eigen::Index> retained;         // eigenvalues kept per update

  const LatentEnsemble& final_ensemble() const { return ensembles.back(); }
};

/// Per-member observation RMSE against d_obs, aggregated.
MisfitRow misfit_row(std::size_t iteration, const SimulationBatch& d, const Eigen::VectorXd& d_obs);

/// Simulates every member; a failing member raises NumericalError naming its index.
SimulationBatch simulate_ensemble(const LatentEnsemble& z, const GeneratorFn& gen,
                                  const ForwardFn& forward, unsigned threads);

AssimilationRecord run_esmda(const ForwardFn& forward, const GeneratorFn& gen,
                             const ObservationModel& m, std::size_t n_a, std::size_t n_r,
                             const TruncationPolicy& policy, std::uint64_t seed,
                             const EsmdaOptions& options);

/// iter_<k>/Z.gfld, iter_<k>/D.csv and misfit.csv under `dir`.
void write_record(const std::filesystem::path& dir, const AssimilationRecord& record);

}  // namespace subsurf::esmda
