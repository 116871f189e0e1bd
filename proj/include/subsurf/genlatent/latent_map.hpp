/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <memory>

#include <Eigen/Dense>

#include "subsurf/genlatent/generator.hpp"
#include "subsurf/genlatent/samplers.hpp"
#include "subsurf/genlatent/scaling.hpp"
#include "subsurf/grid_field.hpp"

namespace subsurf::genlatent {

/// Latent vector -> log10 conductivity raster. Implementations are immutable and
/// safe to evaluate concurrently.
class LatentMap {
 public:
  virtual ~LatentMap() = default;
  virtual std::size_t latent_size() const = 0;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual GridField log10k(const Eigen::VectorXd& z) const = 0;

  GridField conductivity(const Eigen::VectorXd& z) const { return log10k_to_conductivity(log10k(z)); }

 protected:
  void check_size(const Eigen::VectorXd& z) const;
};

/// Trained generator followed by FieldScaling.
class NeuralLatentMap final : public LatentMap {
 public:
  NeuralLatentMap(GeneratorModel model, FieldScaling scaling, LatentShape shape);

  std::size_t latent_size() const override { return shape_.size(); }
  std::size_t rows() const override { return rows_; }
  std::size_t cols() const override { return cols_; }
  GridField log10k(const Eigen::VectorXd& z) const override;

  const GeneratorModel& model() const { return model_; }

 private:
  GeneratorModel model_;
  FieldScaling scaling_;
  LatentShape shape_;
  std::size_t rows_ = 0, cols_ = 0;
};

/// log10 K = offset + B z. Stand-in generator for desk-scale experiments.
class LinearLatentMap final : public LatentMap {
 public:
  LinearLatentMap(GridField offset, Eigen::MatrixXd basis);

  /// Columns are amplitude / sqrt(n_z) times independent GRF draws, so the prior
  /// log10 K has pointwise standard deviation close to `amplitude`.
  static LinearLatentMap from_grf(std::size_t rows, std::size_t cols, std::size_t n_z,
                                  std::uint64_t seed, double amplitude = 0.5,
                                  const GrfParams& grf = {}, double offset = 0.0);

  std::size_t latent_size() const override { return static_cast<std::size_t>(basis_.cols()); }
  std::size_t rows() const override { return offset_.rows(); }
  std::size_t cols() const override { return offset_.cols(); }
  GridField log10k(const Eigen::VectorXd& z) const override;

  const Eigen::MatrixXd& basis() const { return basis_; }
  const GridField& offset() const { return offset_; }

 private:
  GridField offset_;
  Eigen::MatrixXd basis_;
};

/// Applies the staircase s(z) = q round(z/q) - beta (z - q round(z/q)) to every
/// latent component before an inner map. Each step of s carries its own local
/// optimum, which makes the data misfit multimodal.
class PiecewiseLatentMap final : public LatentMap {
 public:
  PiecewiseLatentMap(std::shared_ptr<const LatentMap> inner, double step = 1.0, double beta = 0.5);

  static double staircase(double z, double step, double beta);

  std::size_t latent_size() const override { return inner_->latent_size(); }
  std::size_t rows() const override { return inner_->rows(); }
  std::size_t cols() const override { return inner_->cols(); }
  GridField log10k(const Eigen::VectorXd& z) const override;

 private:
  std::shared_ptr<const LatentMap> inner_;
  double step_, beta_;
};

}  // namespace subsurf::genlatent
