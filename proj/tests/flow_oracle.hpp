// Independent discrete budget of a computed head field: recomputes every face
// flux from K and h and sums them per cell and over the constant-head faces.
#pragma once

#include <algorithm>
#include <cmath>

#include "subsurf/flowsim/flowsim.hpp"

namespace oracle {

struct Budget {
  double max_cell_residual = 0.0;  // |sum of face fluxes + sources| over active cells
  double max_face_flux = 0.0;
  double inflow = 0.0;
  double outflow = 0.0;
  double relative_cell_residual() const { return max_cell_residual / max_face_flux; }
  double relative_imbalance() const { return std::abs(inflow - outflow) / inflow; }
};

inline Budget flow_budget(const subsurf::GridField& k, const subsurf::GridField& h,
                          const subsurf::flowsim::AquiferGrid& g,
                          const subsurf::flowsim::SourceSpec& src) {
  const std::size_t R = g.rows, C = g.cols;
  auto cond = [&](std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1) {
    const double t0 = k(r0, c0) * g.thickness, t1 = k(r1, c1) * g.thickness;
    return 2.0 * t0 * t1 / (t0 + t1);
  };
  subsurf::GridField q(R, C, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 1; c + 1 < C; ++c) q(r, c) = src.recharge * g.cell_size * g.cell_size;
  for (const auto& w : src.wells) q(w.row, w.col) += w.rate;

  Budget b;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 1; c + 1 < C; ++c) {
      double net = q(r, c);
      if (q(r, c) > 0) b.inflow += q(r, c); else b.outflow -= q(r, c);
      const long dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int f = 0; f < 4; ++f) {
        const long rn = static_cast<long>(r) + dr[f], cn = static_cast<long>(c) + dc[f];
        if (rn < 0 || rn >= static_cast<long>(R)) continue;
        const double flux = cond(r, c, rn, cn) * (h(rn, cn) - h(r, c));  // into (r,c)
        net += flux;
        b.max_face_flux = std::max(b.max_face_flux, std::abs(flux));
        if (cn == 0 || cn + 1 == static_cast<long>(C)) {
          if (flux > 0) b.inflow += flux; else b.outflow -= flux;
        }
      }
      b.max_cell_residual = std::max(b.max_cell_residual, std::abs(net));
    }
  }
  return b;
}

}  // namespace oracle
