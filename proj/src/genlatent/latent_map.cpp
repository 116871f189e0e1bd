/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/genlatent/latent_map.hpp"

#include <cmath>
#include <string>

#include "subsurf/errors.hpp"

namespace subsurf::genlatent {

void LatentMap::check_size(const Eigen::VectorXd& z) const {
  if (static_cast<std::size_t>(z.size()) != latent_size()) {
    throw SpecError("latent vector has " + std::to_string(z.size()) + " entries, map expects " +
                    std::to_string(latent_size()));
  }
}

NeuralLatentMap::NeuralLatentMap(GeneratorModel model, FieldScaling scaling, LatentShape shape)
    : model_(std::move(model)), scaling_(scaling), shape_(shape) {
  model_.spec.validate();
  check_weights(model_.spec, model_.weights);
  scaling_.validate();
  if (shape_.channels != model_.spec.input_channels() || shape_.height != shape_.width) {
    throw SpecError("latent shape does not match the generator input");
  }
  const auto sizes = model_.spec.spatial_sizes(shape_.height);
  rows_ = cols_ = sizes.back();
}

GridField NeuralLatentMap::log10k(const Eigen::VectorXd& z) const {
  check_size(z);
  LatentVector lv{shape_, std::vector<double>(z.data(), z.data() + z.size())};
  return scaling_.to_log10k(generate(model_.spec, model_.weights, lv));
}

LinearLatentMap::LinearLatentMap(GridField offset, Eigen::MatrixXd basis)
    : offset_(std::move(offset)), basis_(std::move(basis)) {
  if (offset_.empty() || static_cast<std::size_t>(basis_.rows()) != offset_.size() || basis_.cols() == 0) {
    throw SpecError("linear latent map: basis rows must equal the cell count");
  }
}

LinearLatentMap LinearLatentMap::from_grf(std::size_t rows, std::size_t cols, std::size_t n_z,
                                          std::uint64_t seed, double amplitude, const GrfParams& grf,
                                          double offset) {
  if (n_z == 0) throw DomainError("linear latent map needs n_z >= 1");
  const auto fields = grf_sample(grf, rows, cols, n_z, seed);
  Eigen::MatrixXd basis(rows * cols, n_z);
  const double scale = amplitude / std::sqrt(double(n_z));
  for (std::size_t k = 0; k < n_z; ++k) {
    const auto v = fields[k].values();
    for (std::size_t i = 0; i < v.size(); ++i) basis(i, k) = scale * v[i];
  }
  return LinearLatentMap(GridField(rows, cols, offset), std::move(basis));
}

GridField LinearLatentMap::log10k(const Eigen::VectorXd& z) const {
  check_size(z);
  GridField out = offset_;
  Eigen::Map<Eigen::VectorXd>(out.values().data(), Eigen::Index(out.size())) += basis_ * z;
  return out;
}

PiecewiseLatentMap::PiecewiseLatentMap(std::shared_ptr<const LatentMap> inner, double step, double beta)
    : inner_(std::move(inner)), step_(step), beta_(beta) {
  if (!inner_) throw SpecError("piecewise latent map needs an inner map");
  if (!(step_ > 0.0) || !std::isfinite(beta_)) throw DomainError("piecewise latent map: bad step or beta");
}

double PiecewiseLatentMap::staircase(double z, double step, double beta) {
  const double centre = step * std::round(z / step);
  return centre - beta * (z - centre);
}

GridField PiecewiseLatentMap::log10k(const Eigen::VectorXd& z) const {
  check_size(z);
  Eigen::VectorXd s(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) s[i] = staircase(z[i], step_, beta_);
  return inner_->log10k(s);
}

}  // namespace subsurf::genlatent
