/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/esmda/esmda.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "subsurf/errors.hpp"
#include "subsurf/genlatent/samplers.hpp"
#include "subsurf/io.hpp"
#include "subsurf/parallel.hpp"

namespace subsurf::esmda {

namespace {

constexpr std::uint64_t kPerturbTag = 0x70657274ULL;
constexpr double kEigenFloor = 1e-14;
constexpr double kSymmetryTol = 1e-9;

}  // namespace

ObservationModel ObservationModel::iid(Eigen::VectorXd d_obs, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("observation error sigma must be positive");
  const auto n = d_obs.size();
  return {std::move(d_obs), Eigen::VectorXd::Constant(n, sigma * sigma)};
}

void ObservationModel::validate() const {
  if (d_obs.size() == 0) throw DomainError("observation vector is empty");
  if (error_variance.size() != d_obs.size()) {
    throw DomainError("error variance has " + std::to_string(error_variance.size()) +
                      " entries for " + std::to_string(d_obs.size()) + " observations");
  }
  if (!d_obs.allFinite()) throw DomainError("observations must be finite");
  for (Eigen::Index i = 0; i < error_variance.size(); ++i) {
    if (!(error_variance[i] > 0.0) || !std::isfinite(error_variance[i])) {
      throw DomainError("error variance entry " + std::to_string(i) + " must be positive");
    }
  }
}

void InflationSchedule::validate() const {
  if (alphas.empty()) throw DomainError("inflation schedule is empty");
  double s = 0.0;
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("inflation coefficients must be positive");
    s += 1.0 / a;
  }
  if (std::abs(s - 1.0) > 1e-12) {
    throw DomainError("inflation reciprocals sum to " + format_double(s) + ", not 1");
  }
}

InflationSchedule constant_inflation(std::size_t n_a) {
  if (n_a == 0) throw DomainError("N_a must be at least 1");
  return {std::vector<double>(n_a, double(n_a))};
}

void TruncationPolicy::validate() const {
  if (!(energy > 0.0 && energy <= 1.0)) throw DomainError("truncation energy must lie in (0, 1]");
}

Eigen::MatrixXd perturb_observations(const ObservationModel& m, double alpha, std::size_t n_r,
                                     Rng& rng) {
  m.validate();
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  const Eigen::VectorXd scale = (alpha * m.error_variance).cwiseSqrt();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(m.size(), Eigen::Index(n_r));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = m.d_obs[i] + scale[i] * normal(rng);
  }
  return out;
}

Eigen::MatrixXd perturb_observations(const ObservationModel& m, double alpha, std::size_t n_r,
                                     std::uint64_t seed) {
  Rng rng = make_stream(seed, {kPerturbTag});
  return perturb_observations(m, alpha, n_r, rng);
}

Covariances ensemble_covariances(const LatentEnsemble& z, const SimulationBatch& d) {
  if (z.cols() != d.cols()) {
    throw DomainError("ensemble has " + std::to_string(z.cols()) + " members, batch has " +
                      std::to_string(d.cols()));
  }
  if (z.cols() < 2) throw DomainError("covariances need at least 2 members");
  const double scale = 1.0 / double(z.cols() - 1);
  const Eigen::MatrixXd az = z.colwise() - z.rowwise().mean();
  const Eigen::MatrixXd ad = d.colwise() - d.rowwise().mean();
  Covariances c;
  c.c_zd = scale * az * ad.transpose();
  c.c_dd = scale * ad * ad.transpose();
  // Exact symmetry; the product is symmetric only up to rounding.
  c.c_dd = 0.5 * (c.c_dd + c.c_dd.transpose()).eval();
  return c;
}

PseudoInverse truncated_pseudo_inverse(const Eigen::MatrixXd& m, const TruncationPolicy& policy) {
  policy.validate();
  if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("pseudo-inverse needs a square matrix");
  const double magnitude = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * std::max(magnitude, 1e-300)) {
    throw DomainError("pseudo-inverse input is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  // Eigen orders ascending; work in descending order.
  const Eigen::VectorXd lambda = eig.eigenvalues().reverse();
  const Eigen::MatrixXd v = eig.eigenvectors().rowwise().reverse();
  const double lmax = lambda[0];
  if (!(lmax > 0.0)) throw NumericalError("pseudo-inverse input has no positive eigenvalue");

  std::vector<double> cumsum(lambda.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    acc += std::max(lambda[i], 0.0);
    cumsum[i] = acc;
  }
  const double total = acc;
  Eigen::Index keep = 1;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (cumsum[i] / total <= policy.energy) keep = std::max(keep, i + 1);
  }
  while (keep > 1 && lambda[keep - 1] <= kEigenFloor * lmax) --keep;

  PseudoInverse out;
  out.retained = keep;
  out.eigenvalues = lambda;
  const Eigen::MatrixXd vn = v.leftCols(keep);
  out.inverse = vn * lambda.head(keep).cwiseInverse().asDiagonal() * vn.transpose();
  return out;
}

LatentEnsemble esmda_iterate(const LatentEnsemble& z, const SimulationBatch& d,
                             const Eigen::MatrixXd& d_uc, const ObservationModel& m, double alpha,
                             const TruncationPolicy& policy, Eigen::Index* retained) {
  m.validate();
  if (d.rows() != m.size() || d_uc.rows() != m.size() || d_uc.cols() != d.cols()) {
    throw DomainError("simulated and perturbed data shapes disagree with the observation model");
  }
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  const auto cov = ensemble_covariances(z, d);
  Eigen::MatrixXd gain_system = cov.c_dd;
  gain_system.diagonal() += alpha * m.error_variance;
  const auto pinv = truncated_pseudo_inverse(gain_system, policy);
  if (retained) *retained = pinv.retained;
  return z + cov.c_zd * (pinv.inverse * (d_uc - d));
}

MisfitRow misfit_row(std::size_t iteration, const SimulationBatch& d, const Eigen::VectorXd& d_obs) {
  if (d.rows() != d_obs.size() || d.cols() == 0) throw DomainError("misfit: shape mismatch");
  MisfitRow row{iteration, 0.0, std::numeric_limits<double>::infinity(), 0.0};
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    const double r = std::sqrt((d.col(j) - d_obs).squaredNorm() / double(d_obs.size()));
    row.mean += r;
    row.min = std::min(row.min, r);
    row.max = std::max(row.max, r);
  }
  row.mean /= double(d.cols());
  return row;
}

SimulationBatch simulate_ensemble(const LatentEnsemble& z, const GeneratorFn& gen,
                                  const ForwardFn& forward, unsigned threads) {
  std::vector<Eigen::VectorXd> cols(z.cols());
  parallel_for(std::size_t(z.cols()), threads, [&](std::size_t j) {
    try {
      cols[j] = forward(gen(z.col(Eigen::Index(j))));
      if (!cols[j].allFinite()) throw NumericalError("non-finite simulated observation");
    } catch (const std::exception& e) {
      throw NumericalError("ensemble member " + std::to_string(j) + ": " + e.what());
    }
  });
  const Eigen::Index n_obs = cols.empty() ? 0 : cols[0].size();
  SimulationBatch d(n_obs, z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (cols[j].size() != n_obs) throw DomainError("members returned different observation counts");
    d.col(j) = cols[j];
  }
  return d;
}

AssimilationRecord run_esmda(const ForwardFn& forward, const GeneratorFn& gen,
                             const ObservationModel& m, std::size_t n_a, std::size_t n_r,
                             const TruncationPolicy& policy, std::uint64_t seed,
                             const EsmdaOptions& options) {
  m.validate();
  policy.validate();
  if (n_r < 2) throw DomainError("ES-MDA needs N_r >= 2");
  AssimilationRecord rec;
  rec.seed = seed;
  rec.policy = policy;
  rec.schedule = options.schedule ? *options.schedule : constant_inflation(n_a);
  rec.schedule.validate();
  if (rec.schedule.size() != n_a) throw DomainError("inflation schedule length differs from N_a");

  LatentEnsemble z;
  if (options.initial) {
    z = *options.initial;
    if (z.cols() != Eigen::Index(n_r)) throw DomainError("initial ensemble has the wrong member count");
    if (!z.allFinite() || z.rows() == 0) throw DomainError("initial ensemble must be finite and non-empty");
  } else {
    if (options.n_z == 0) throw DomainError("latent dimension n_z is not set");
    z = genlatent::sample_latent_prior(options.n_z, n_r, seed);
  }

  rec.ensembles.push_back(z);
  for (std::size_t i = 0; i <= n_a; ++i) {
    SimulationBatch d = simulate_ensemble(z, gen, forward, options.threads);
    if (d.rows() != m.size()) {
      throw DomainError("forward returned " + std::to_string(d.rows()) + " observations, expected " +
                        std::to_string(m.size()));
    }
    rec.misfit.push_back(misfit_row(i, d, m.d_obs));
    if (i == n_a) {
      rec.simulations.push_back(std::move(d));
      break;
    }
    const double alpha = rec.schedule.alphas[i];
    Rng rng = make_stream(seed, {kPerturbTag, i});
    const Eigen::MatrixXd d_uc = perturb_observations(m, alpha, n_r, rng);
    Eigen::Index kept = 0;
    z = esmda_iterate(z, d, d_uc, m, alpha, policy, &kept);
    rec.retained.push_back(kept);
    rec.simulations.push_back(std::move(d));
    rec.ensembles.push_back(z);
  }
  return rec;
}

void write_record(const std::filesystem::path& dir, const AssimilationRecord& record) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t k = 0; k < record.ensembles.size(); ++k) {
    const fs::path sub = dir / ("iter_" + std::to_string(k));
    fs::create_directories(sub);
    write_matrix(sub / "Z.gfld", record.ensembles[k]);
    const auto& d = record.simulations[k];
    std::ofstream out(sub / "D.csv");
    out << "index";
    for (Eigen::Index j = 0; j < d.cols(); ++j) out << ",member_" << j;
    out << '\n';
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      out << i;
      for (Eigen::Index j = 0; j < d.cols(); ++j) out << ',' << format_double(d(i, j));
      out << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + (sub / "D.csv").string());
  }
  std::ofstream out(dir / "misfit.csv");
  out << "iteration,mean_rmse,min_rmse,max_rmse\n";
  for (const auto& r : record.misfit) {
    out << r.iteration << ',' << format_double(r.mean) << ',' << format_double(r.min) << ','
        << format_double(r.max) << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + (dir / "misfit.csv").string());
}

}  // namespace subsurf::esmda
