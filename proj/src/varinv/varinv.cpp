/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/varinv/varinv.hpp"

#include <cmath>
#include <fstream>

#include "subsurf/errors.hpp"
#include "subsurf/io.hpp"
#include "subsurf/parallel.hpp"

namespace subsurf::varinv {

Eigen::VectorXd ObjectiveSpec::prior_precision() const {
  if (prior_variance.size() == 0) return Eigen::VectorXd::Ones(prior_center.size());
  return prior_variance.cwiseInverse();
}

void ObjectiveSpec::validate() const {
  observations.validate();
  if (prior_center.size() == 0) throw DomainError("objective prior center is empty");
  if (prior_variance.size() != 0) {
    if (prior_variance.size() != prior_center.size()) {
      throw DomainError("prior variance and center lengths differ");
    }
    if (!(prior_variance.array() > 0.0).all()) throw DomainError("prior variance must be positive");
  }
}

ObjectiveSpec map_objective(esmda::ObservationModel m, std::size_t n_z) {
  return {std::move(m), Eigen::VectorXd::Zero(Eigen::Index(n_z)), {}};
}

double objective_value(const Eigen::VectorXd& z, const Eigen::VectorXd& d_pred, const ObjectiveSpec& spec) {
  const auto& m = spec.observations;
  if (z.size() != spec.prior_center.size() || d_pred.size() != m.size()) {
    throw DomainError("objective: shape mismatch");
  }
  const Eigen::VectorXd dz = spec.prior_center - z;
  const Eigen::VectorXd r = m.d_obs - d_pred;
  return 0.5 * dz.dot(spec.prior_precision().cwiseProduct(dz)) +
         0.5 * r.dot(r.cwiseQuotient(m.error_variance));
}

double objective(const Eigen::VectorXd& z, const ObjectiveSpec& spec, const ForwardG& forward) {
  if (!z.allFinite()) throw DomainError("objective: non-finite latent vector");
  return objective_value(z, forward(z), spec);
}

Eigen::MatrixXd fd_jacobian(const ForwardG& forward, const Eigen::VectorXd& z, double step,
                            unsigned threads) {
  if (!(step > 0.0)) throw DomainError("finite-difference step must be positive");
  std::vector<Eigen::VectorXd> cols(z.size());
  parallel_for(std::size_t(z.size()), threads, [&](std::size_t k) {
    try {
      Eigen::VectorXd zp = z, zm = z;
      zp[Eigen::Index(k)] += step;
      zm[Eigen::Index(k)] -= step;
      cols[k] = (forward(zp) - forward(zm)) / (2.0 * step);
    } catch (const std::exception& e) {
      throw NumericalError("Jacobian column " + std::to_string(k) + ": " + e.what());
    }
  });
  if (cols.empty()) throw DomainError("Jacobian of an empty latent vector");
  Eigen::MatrixXd j(cols[0].size(), z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) j.col(k) = cols[k];
  return j;
}

void InversionPolicy::validate() const {
  if (!(fd_step > 0.0)) throw DomainError("fd_step must be positive");
  if (max_iterations == 0) throw DomainError("max_iterations must be positive");
  if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0)) throw DomainError("tolerances must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw DomainError("backtracking factor must lie in (0, 1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0)) {
    throw DomainError("sufficient-decrease constant must lie in (0, 1)");
  }
  if (max_halvings == 0) throw DomainError("max_halvings must be positive");
  if (!(lm_init > 0.0) || !(lm_grow > 1.0) || !(lm_shrink > 0.0 && lm_shrink < 1.0)) {
    throw DomainError("invalid Levenberg-Marquardt damping parameters");
  }
}

Eigen::VectorXd objective_gradient(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual,
                                   const Eigen::VectorXd& z, const ObjectiveSpec& spec) {
  const Eigen::VectorXd w = residual.cwiseQuotient(spec.observations.error_variance);
  return -jac.transpose() * w + spec.prior_precision().cwiseProduct(z - spec.prior_center);
}

Eigen::VectorXd step_direction(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual,
                               const Eigen::VectorXd& z, const ObjectiveSpec& spec, StepMode mode,
                               double damping) {
  const auto& cd = spec.observations.error_variance;
  if (jac.rows() != cd.size() || residual.size() != cd.size() || jac.cols() != z.size() ||
      z.size() != spec.prior_center.size()) {
    throw DomainError("step_direction: shape mismatch");
  }
  const Eigen::MatrixXd wj = cd.cwiseInverse().asDiagonal() * jac;
  Eigen::MatrixXd normal = jac.transpose() * wj;
  normal.diagonal() += spec.prior_precision();
  if (mode == StepMode::levenberg_marquardt) {
    if (!(damping >= 0.0)) throw DomainError("damping must be non-negative");
    normal.diagonal() *= (1.0 + damping);
  }
  const Eigen::VectorXd rhs = -objective_gradient(jac, residual, z, spec);
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success || !normal.allFinite()) {
    throw NumericalError("normal matrix is singular or not positive definite");
  }
  return llt.solve(rhs);
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::gradient: return "gradient";
    case Termination::step_collapse: return "step_collapse";
    case Termination::line_search_exhausted: return "line_search_exhausted";
    default: return "max_iterations";
  }
}

Trajectory run_variational(const Eigen::VectorXd& z0, const ObjectiveSpec& spec,
                           const ForwardG& forward, const InversionPolicy& policy) {
  spec.validate();
  policy.validate();
  if (z0.size() != spec.prior_center.size() || !z0.allFinite()) {
    throw DomainError("starting point must be finite and match the prior center");
  }
  Trajectory traj;
  const auto n_obs = double(spec.observations.size());
  auto evaluate = [&](const Eigen::VectorXd& z, Eigen::VectorXd& d) {
    d = forward(z);
    ++traj.forward_evaluations;
    return objective_value(z, d, spec);
  };

  Eigen::VectorXd z = z0, d;
  double l = evaluate(z, d);
  if (!std::isfinite(l)) throw NumericalError("objective is not finite at the starting point");
  auto rmse = [&](const Eigen::VectorXd& dp) {
    return std::sqrt((spec.observations.d_obs - dp).squaredNorm() / n_obs);
  };
  traj.points.push_back({0, z, l, rmse(d), 0.0});
  double mu = policy.lm_init;

  for (std::size_t it = 1;; ++it) {
    if (it > policy.max_iterations) {
      traj.termination = Termination::max_iterations;
      break;
    }
    const Eigen::MatrixXd jac = fd_jacobian(forward, z, policy.fd_step, policy.threads);
    traj.forward_evaluations += 2 * std::size_t(z.size());
    const Eigen::VectorXd r = spec.observations.d_obs - d;
    const Eigen::VectorXd g = objective_gradient(jac, r, z, spec);
    if (g.cwiseAbs().maxCoeff() <= policy.gradient_tolerance) {
      traj.termination = Termination::gradient;
      break;
    }

    bool accepted = false, collapsed = false;
    Eigen::VectorXd z_new, d_new;
    double l_new = 0.0;
    for (std::size_t trial = 0; trial <= policy.max_halvings; ++trial) {
      Eigen::VectorXd dz;
      if (policy.mode == StepMode::gauss_newton) {
        const Eigen::VectorXd dir = step_direction(jac, r, z, spec, policy.mode);
        dz = std::pow(policy.backtrack, double(trial)) * dir;
      } else {
        dz = step_direction(jac, r, z, spec, policy.mode, mu);
      }
      if (dz.norm() <= policy.step_tolerance * (1.0 + z.norm())) {
        collapsed = true;
        break;
      }
      z_new = z + dz;
      l_new = evaluate(z_new, d_new);
      if (std::isfinite(l_new) && l_new <= l + policy.sufficient_decrease * g.dot(dz)) {
        accepted = true;
        if (policy.mode == StepMode::levenberg_marquardt) mu *= policy.lm_shrink;
        break;
      }
      if (policy.mode == StepMode::levenberg_marquardt) mu *= policy.lm_grow;
    }
    if (collapsed) {
      traj.termination = Termination::step_collapse;
      break;
    }
    if (!accepted) {
      traj.termination = Termination::line_search_exhausted;
      break;
    }
    const double step = (z_new - z).norm();
    z = std::move(z_new);
    d = std::move(d_new);
    l = l_new;
    traj.points.push_back({it, z, l, rmse(d), step});
  }
  return traj;
}

void write_trajectory(const std::filesystem::path& dir, const Trajectory& t) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "trajectory.csv");
  out << "iteration,L,rmse,step,termination\n";
  for (std::size_t k = 0; k < t.points.size(); ++k) {
    const auto& p = t.points[k];
    out << p.iteration << ',' << format_double(p.objective) << ',' << format_double(p.rmse) << ','
        << format_double(p.step) << ',' << (k + 1 == t.points.size() ? to_string(t.termination) : "")
        << '\n';
    write_matrix(dir / ("z_" + std::to_string(p.iteration) + ".gfld"), p.z);
  }
  if (!out) throw std::runtime_error("cannot write " + (dir / "trajectory.csv").string());
}

}  // namespace subsurf::varinv
