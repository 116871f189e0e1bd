/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/genlatent/scaling.hpp"

#include <cmath>
#include <string>

#include "subsurf/errors.hpp"

namespace subsurf::genlatent {

void FieldScaling::validate() const {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw DomainError("FieldScaling: need finite lo < hi");
  }
}

GridField FieldScaling::to_log10k(const GridField& g) const {
  validate();
  GridField out = g;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = g[i];
    if (!(v >= -kSlack && v <= 1.0 + kSlack)) {
      throw DomainError("generator value " + std::to_string(v) + " at cell " +
                        std::to_string(i) + " is outside [0, 1]");
    }
    out[i] = lo + (hi - lo) * v;
  }
  return out;
}

GridField FieldScaling::to_conductivity(const GridField& g) const {
  return log10k_to_conductivity(to_log10k(g));
}

GridField FieldScaling::from_log10k(const GridField& log10k) const {
  validate();
  GridField out = log10k;
  for (auto& v : out.values()) v = (v - lo) / (hi - lo);
  return out;
}

GridField FieldScaling::from_conductivity(const GridField& k) const {
  return from_log10k(conductivity_to_log10k(k));
}

GridField log10k_to_conductivity(const GridField& log10k) {
  GridField out = log10k;
  for (auto& v : out.values()) v = std::pow(10.0, v);
  return out;
}

GridField conductivity_to_log10k(const GridField& k) {
  GridField out = k;
  for (auto& v : out.values()) {
    if (!(v > 0.0)) throw DomainError("conductivity must be positive");
    v = std::log10(v);
  }
  return out;
}

}  // namespace subsurf::genlatent
