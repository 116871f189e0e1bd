/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/diagnostics/diagnostics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "subsurf/errors.hpp"
#include "subsurf/io.hpp"
#include "subsurf/parallel.hpp"

namespace subsurf::diagnostics {

Semivariogram mean_semivariogram(const std::vector<GridField>& fields, std::size_t max_lag) {
  if (fields.empty()) throw DomainError("semivariogram of an empty set");
  const std::size_t rows = fields[0].rows(), cols = fields[0].cols();
  if (max_lag >= cols) {
    throw DomainError("max_lag " + std::to_string(max_lag) + " must be below the column count " +
                      std::to_string(cols));
  }
  Semivariogram s;
  for (std::size_t h = 0; h <= max_lag; ++h) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : fields) {
      if (f.rows() != rows || f.cols() != cols) throw DomainError("semivariogram fields differ in shape");
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c + h < cols; ++c) {
          const double diff = f(r, c + h) - f(r, c);
          sum += diff * diff;
        }
      }
      n += rows * (cols - h);
    }
    s.lags.push_back(double(h));
    s.gamma.push_back(sum / (2.0 * double(n)));
    s.pairs.push_back(n);
  }
  return s;
}

Semivariogram semivariogram(const GridField& field, std::size_t max_lag) {
  return mean_semivariogram({field}, max_lag);
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DomainError("rmse: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.empty()) throw DomainError("rmse of empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / double(a.size()));
}

double rmse(const GridField& a, const GridField& b) {
  if (!a.same_shape(b)) throw DomainError("rmse: field shapes differ");
  return rmse(a.values(), b.values());
}

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return rmse(std::span<const double>(a.data(), std::size_t(a.size())),
              std::span<const double>(b.data(), std::size_t(b.size())));
}

EnsembleSummary ensemble_summary(const std::vector<GridField>& fields) {
  if (fields.size() < 2) throw DomainError("ensemble summary needs at least 2 fields");
  const auto& first = fields[0];
  GridField mean(first.rows(), first.cols(), 0.0), m2(first.rows(), first.cols(), 0.0);
  double n = 0.0;
  for (const auto& f : fields) {
    if (!f.same_shape(first)) throw DomainError("ensemble summary: field shapes differ");
    n += 1.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double delta = f[i] - mean[i];
      mean[i] += delta / n;
      m2[i] += delta * (f[i] - mean[i]);
    }
  }
  for (auto& v : m2.values()) v = std::max(v, 0.0) / (n - 1.0);
  return {std::move(mean), std::move(m2)};
}

std::size_t SurfaceScan::missing() const {
  std::size_t n = 0;
  for (auto v : values.reshaped()) n += std::isnan(v);
  return n;
}

std::pair<std::size_t, std::size_t> SurfaceScan::argmin() const {
  double best = std::numeric_limits<double>::infinity();
  std::pair<std::size_t, std::size_t> at{0, 0};
  for (Eigen::Index a = 0; a < values.rows(); ++a) {
    for (Eigen::Index b = 0; b < values.cols(); ++b) {
      if (std::isfinite(values(a, b)) && values(a, b) < best) {
        best = values(a, b);
        at = {std::size_t(a), std::size_t(b)};
      }
    }
  }
  return at;
}

std::vector<double> scan_axis(const ScanOptions& o) {
  if (!(o.step > 0.0) || !(o.hi > o.lo)) throw DomainError("scan axis needs lo < hi and step > 0");
  const double count = (o.hi - o.lo) / o.step;
  const auto n = std::size_t(std::llround(count));
  if (std::abs(count - double(n)) > 1e-9 * std::max(1.0, count)) {
    throw DomainError("scan range is not a whole number of steps");
  }
  std::vector<double> axis(n + 1);
  const double per_unit = 1.0 / o.step;
  const double k0 = o.lo * per_unit;
  const bool decimal = std::abs(per_unit - std::round(per_unit)) < 1e-9 &&
                       std::abs(k0 - std::round(k0)) < 1e-9;
  for (std::size_t k = 0; k <= n; ++k) {
    axis[k] = decimal ? (std::round(k0) + double(k)) / std::round(per_unit) : o.lo + double(k) * o.step;
  }
  return axis;
}

SurfaceScan objective_surface(std::size_t i, std::size_t j, const Eigen::VectorXd& z_ref,
                              const varinv::ObjectiveSpec& spec, const varinv::ForwardG& forward,
                              const ScanOptions& options) {
  spec.validate();
  if (i == j) throw DomainError("scan indices must differ");
  if (i >= std::size_t(z_ref.size()) || j >= std::size_t(z_ref.size())) {
    throw DomainError("scan index out of range for a latent vector of length " + std::to_string(z_ref.size()));
  }
  SurfaceScan s;
  s.index_i = i;
  s.index_j = j;
  s.axis = scan_axis(options);
  s.z_ref = z_ref;
  const std::size_t n = s.axis.size();
  s.values.resize(Eigen::Index(n), Eigen::Index(n));
  parallel_for(n * n, options.threads, [&](std::size_t cell) {
    const std::size_t a = cell / n, b = cell % n;
    Eigen::VectorXd z = z_ref;
    z[Eigen::Index(i)] = s.axis[a];
    z[Eigen::Index(j)] = s.axis[b];
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
      v = varinv::objective(z, spec, forward);
      if (!std::isfinite(v)) v = std::numeric_limits<double>::quiet_NaN();
    } catch (const std::exception&) {
      // recorded as missing
    }
    s.values(Eigen::Index(a), Eigen::Index(b)) = v;
  });
  return s;
}

double nn_two_sample_accuracy(const std::vector<GridField>& real_set,
                              const std::vector<GridField>& gen_set) {
  if (real_set.empty() || gen_set.empty()) throw DomainError("1-NN test needs two non-empty sets");
  const std::size_t n = real_set.size() + gen_set.size();
  const std::size_t p = real_set[0].size();
  Eigen::MatrixXd x{Eigen::Index(p), Eigen::Index(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const auto& f = k < real_set.size() ? real_set[k] : gen_set[k - real_set.size()];
    if (!f.same_shape(real_set[0])) throw DomainError("1-NN test: field shapes differ");
    for (std::size_t q = 0; q < p; ++q) x(Eigen::Index(q), Eigen::Index(k)) = f[q];
  }
  Eigen::MatrixXd gram{Eigen::Index(n), Eigen::Index(n)};
  gram.setZero();
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd sq = gram.diagonal();

  std::size_t correct = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t nearest = k;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == k) continue;
      const double d2 = sq[Eigen::Index(k)] + sq[Eigen::Index(o)] - 2.0 * gram(Eigen::Index(k), Eigen::Index(o));
      if (d2 < best) {
        best = d2;
        nearest = o;
      }
    }
    const bool real_k = k < real_set.size();
    const bool real_nn = nearest < real_set.size();
    correct += real_k == real_nn;
  }
  return double(correct) / double(n);
}

GridField binarize(const GridField& field, double threshold) {
  GridField out = field;
  for (auto& v : out.values()) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

void write_semivariogram(const std::filesystem::path& path, const Semivariogram& s, double cell_size) {
  std::ofstream out(path);
  out << "lag,distance,gamma,pairs\n";
  for (std::size_t k = 0; k < s.lags.size(); ++k) {
    out << format_double(s.lags[k]) << ',' << format_double(s.lags[k] * cell_size) << ','
        << format_double(s.gamma[k]) << ',' << s.pairs[k] << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_scan(const std::filesystem::path& path, const SurfaceScan& s) {
  std::ofstream out(path);
  out << "z" << s.index_i << ",z" << s.index_j << ",L\n";
  for (std::size_t a = 0; a < s.axis.size(); ++a) {
    for (std::size_t b = 0; b < s.axis.size(); ++b) {
      out << format_double(s.axis[a]) << ',' << format_double(s.axis[b]) << ','
          << format_double(s.values(Eigen::Index(a), Eigen::Index(b))) << '\n';
    }
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace subsurf::diagnostics
