/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include "subsurf/grid_field.hpp"

namespace subsurf::genlatent {

/// Affine map from generator output in [0, 1] to log10 conductivity in [lo, hi].
struct FieldScaling {
  double lo = -1.0;
  double hi = 1.0;
  static constexpr double kSlack = 1e-9;

  void validate() const;
  GridField to_log10k(const GridField& g) const;
  GridField to_conductivity(const GridField& g) const;
  GridField from_log10k(const GridField& log10k) const;
  GridField from_conductivity(const GridField& k) const;
};

/// 10^x cellwise.
GridField log10k_to_conductivity(const GridField& log10k);
GridField conductivity_to_log10k(const GridField& k);

}  // namespace subsurf::genlatent
