/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/genlatent/samplers.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <random>
#include <string>

#include "subsurf/errors.hpp"
#include "subsurf/random.hpp"

namespace subsurf::genlatent {

namespace {

constexpr std::size_t kDenseLimit = 48 * 48;
constexpr int kEmbeddingGrowthSteps = 6;
// Negative circulant eigenvalues smaller than this fraction of the largest are
// rounding noise and are clipped to zero.
constexpr double kEigenClip = 1e-8;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_fft_size(std::size_t n) {
  for (;; ++n) {
    if (n % 2) continue;
    std::size_t m = n;
    for (std::size_t f : {2, 3, 5}) {
      while (m % f == 0) m /= f;
    }
    if (m == 1) return n;
  }
}

// Wraps an fftw plan for an in-place 2D complex transform of a fixed size.
class Fft2 {
 public:
  Fft2(std::size_t m, std::size_t n) : m_(m), n_(n) {
    buffer_ = fftw_alloc_complex(m * n);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_2d(static_cast<int>(m), static_cast<int>(n), buffer_, buffer_,
                             FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ~Fft2() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(buffer_);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buffer_); }
  void execute() { fftw_execute(plan_); }

 private:
  std::size_t m_, n_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan plan_ = nullptr;
};

double axis_extent(const GrfParams& p, bool along_cols) {
  const double t = p.azimuth_deg * std::numbers::pi / 180.0;
  const double a = p.range_major, b = p.range_minor;
  return along_cols ? std::hypot(a * std::cos(t), b * std::sin(t))
                    : std::hypot(a * std::sin(t), b * std::cos(t));
}

std::vector<GridField> grf_dense(const GrfParams& p, std::size_t rows, std::size_t cols,
                                 std::size_t n, Rng& rng) {
  const std::size_t cells = rows * cols;
  if (cells > kDenseLimit) {
    throw DomainError("dense GRF sampling is limited to 48x48 grids");
  }
  Eigen::MatrixXd c(cells, cells);
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double dr = double(i / cols) - double(j / cols);
      const double dc = double(i % cols) - double(j % cols);
      c(i, j) = c(j, i) = p.covariance(dr, dc);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    c.diagonal().array() += 1e-10 * (p.sill + p.nugget);
    llt.compute(c);
    if (llt.info() != Eigen::Success) throw NumericalError("GRF covariance is not positive definite");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  std::normal_distribution<double> normal;
  std::vector<GridField> out;
  out.reserve(n);
  Eigen::VectorXd xi(cells);
  for (std::size_t s = 0; s < n; ++s) {
    for (auto& v : xi) v = normal(rng);
    const Eigen::VectorXd f = l.triangularView<Eigen::Lower>() * xi;
    out.emplace_back(rows, cols, std::vector<double>(f.data(), f.data() + cells));
  }
  return out;
}

std::vector<GridField> grf_circulant(const GrfParams& p, std::size_t rows, std::size_t cols,
                                     std::size_t n, Rng& rng) {
  std::size_t m_r = next_fft_size(std::max(2 * (rows - 1), rows + std::size_t(std::ceil(axis_extent(p, false)))));
  std::size_t m_c = next_fft_size(std::max(2 * (cols - 1), cols + std::size_t(std::ceil(axis_extent(p, true)))));

  std::vector<double> lambda;
  for (int attempt = 0;; ++attempt) {
    Fft2 fft(m_r, m_c);
    auto* buf = fft.data();
    for (std::size_t i = 0; i < m_r; ++i) {
      const double dr = i <= m_r / 2 ? double(i) : double(i) - double(m_r);
      for (std::size_t j = 0; j < m_c; ++j) {
        const double dc = j <= m_c / 2 ? double(j) : double(j) - double(m_c);
        buf[i * m_c + j] = p.covariance(dr, dc);
      }
    }
    fft.execute();
    lambda.resize(m_r * m_c);
    double lmax = 0.0, lmin = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      lambda[k] = buf[k].real();
      lmax = std::max(lmax, lambda[k]);
      lmin = std::min(lmin, lambda[k]);
    }
    if (lmin >= -kEigenClip * lmax) break;
    if (attempt == kEmbeddingGrowthSteps) {
      throw NumericalError("circulant embedding is not positive definite after " +
                           std::to_string(kEmbeddingGrowthSteps) +
                           " enlargements; use the dense GRF path for grids up to 48x48");
    }
    m_r = next_fft_size(m_r + m_r / 2);
    m_c = next_fft_size(m_c + m_c / 2);
  }

  const double norm = 1.0 / double(m_r * m_c);
  std::vector<double> amp(lambda.size());
  for (std::size_t k = 0; k < lambda.size(); ++k) amp[k] = std::sqrt(std::max(lambda[k], 0.0) * norm);

  Fft2 fft(m_r, m_c);
  auto* buf = fft.data();
  std::normal_distribution<double> normal;
  std::vector<GridField> out;
  out.reserve(n);
  while (out.size() < n) {
    for (std::size_t k = 0; k < amp.size(); ++k) {
      const double re = normal(rng);
      const double im = normal(rng);
      buf[k] = {amp[k] * re, amp[k] * im};
    }
    fft.execute();
    GridField a(rows, cols), b(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        a(r, c) = buf[r * m_c + c].real();
        b(r, c) = buf[r * m_c + c].imag();
      }
    }
    out.push_back(std::move(a));
    if (out.size() < n) out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

Eigen::MatrixXd sample_latent_prior(std::size_t n_z, std::size_t n_r, std::uint64_t seed) {
  if (n_z == 0 || n_r == 0) throw DomainError("latent prior needs N_z >= 1 and N_r >= 1");
  Rng rng = make_stream(seed, {0x7072696fULL});
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(n_z, n_r);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = normal(rng);
  }
  return z;
}

void GrfParams::validate() const {
  if (!(sill > 0.0)) throw DomainError("GRF sill must be positive");
  if (!(nugget >= 0.0)) throw DomainError("GRF nugget must be non-negative");
  if (!(range_major > 0.0) || !(range_minor > 0.0)) throw DomainError("GRF ranges must be positive");
  if (!std::isfinite(azimuth_deg)) throw DomainError("GRF azimuth must be finite");
}

double GrfParams::covariance(double drow, double dcol) const {
  const double t = azimuth_deg * std::numbers::pi / 180.0;
  // Rows grow southward, so north is -drow.
  const double u = dcol * std::cos(t) - drow * std::sin(t);
  const double v = dcol * std::sin(t) + drow * std::cos(t);
  const double h = std::hypot(u / range_major, v / range_minor);
  if (h == 0.0) return sill + nugget;
  if (h >= 1.0) return 0.0;
  return sill * (1.0 - 1.5 * h + 0.5 * h * h * h);
}

std::vector<GridField> grf_sample(const GrfParams& p, std::size_t rows, std::size_t cols,
                                  std::size_t n, std::uint64_t seed, GrfMethod method) {
  p.validate();
  if (rows < 2 || cols < 2) throw DomainError("GRF grid must be at least 2x2");
  Rng rng = make_stream(seed, {0x67726646ULL});
  return method == GrfMethod::dense ? grf_dense(p, rows, cols, n, rng)
                                    : grf_circulant(p, rows, cols, n, rng);
}

void FractureParams::validate() const {
  if (rows == 0 || cols == 0) throw DomainError("fracture grid must be non-empty");
  if (width == 0) throw DomainError("fracture width must be positive");
  if (length_min == 0 || length_min > length_max) throw DomainError("need 0 < length_min <= length_max");
  if (orientations.empty()) throw DomainError("no fracture orientations given");
  for (int o : orientations) {
    std::size_t need_r = 0, need_c = 0;
    switch (o) {
      case 0: need_r = width; need_c = length_max; break;
      case 90: need_r = length_max; need_c = width; break;
      case 45: need_r = length_max; need_c = length_max + width - 1; break;
      default: throw DomainError("fracture orientation " + std::to_string(o) + " is not 0, 45 or 90");
    }
    if (need_r > rows || need_c > cols) {
      throw DomainError("fractures of length " + std::to_string(length_max) + " at " +
                        std::to_string(o) + " degrees do not fit a " + std::to_string(rows) +
                        "x" + std::to_string(cols) + " grid");
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> FractureBar::pixels() const {
  std::vector<std::pair<std::size_t, std::size_t>> px;
  px.reserve(length * width);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t w = 0; w < width; ++w) {
      switch (orientation) {
        case 0: px.emplace_back(row + w, col + t); break;
        case 90: px.emplace_back(row + t, col + w); break;
        default: px.emplace_back(row - t, col + t + w); break;
      }
    }
  }
  return px;
}

std::vector<FractureBar> synth_fracture_bars(const FractureParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng = make_stream(seed, {0x66726163ULL});
  std::uniform_int_distribution<std::size_t> pick_len(p.length_min, p.length_max);
  std::uniform_int_distribution<std::size_t> pick_dir(0, p.orientations.size() - 1);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto draw = [&]() {
    FractureBar b;
    b.length = pick_len(rng);
    b.width = p.width;
    b.orientation = p.orientations[pick_dir(rng)];
    switch (b.orientation) {
      case 0:
        b.row = uniform(0, p.rows - b.width);
        b.col = uniform(0, p.cols - b.length);
        break;
      case 90:
        b.row = uniform(0, p.rows - b.length);
        b.col = uniform(0, p.cols - b.width);
        break;
      default:
        b.row = uniform(b.length - 1, p.rows - 1);
        b.col = uniform(0, p.cols - b.length - b.width + 1);
        break;
    }
    return b;
  };

  std::vector<FractureBar> bars;
  std::vector<char> taken(p.rows * p.cols, 0);
  for (std::size_t k = 0; k < p.count; ++k) {
    if (p.allow_overlap) {
      bars.push_back(draw());
      continue;
    }
    bool placed = false;
    for (std::size_t attempt = 0; attempt < p.max_attempts && !placed; ++attempt) {
      FractureBar b = draw();
      const auto px = b.pixels();
      if (std::any_of(px.begin(), px.end(),
                      [&](const auto& rc) { return taken[rc.first * p.cols + rc.second]; })) {
        continue;
      }
      for (const auto& [r, c] : px) taken[r * p.cols + c] = 1;
      bars.push_back(b);
      placed = true;
    }
    if (!placed) {
      throw NumericalError("could not place fracture " + std::to_string(k) + " without overlap in " +
                           std::to_string(p.max_attempts) + " attempts");
    }
  }
  return bars;
}

GridField paint_fractures(const std::vector<FractureBar>& bars, std::size_t rows, std::size_t cols) {
  GridField g(rows, cols, 0.0);
  for (const auto& b : bars) {
    for (const auto& [r, c] : b.pixels()) {
      if (r >= rows || c >= cols) throw DomainError("fracture bar leaves the grid");
      g(r, c) = 1.0;
    }
  }
  return g;
}

GridField synth_fractures(const FractureParams& p, std::uint64_t seed) {
  return paint_fractures(synth_fracture_bars(p, seed), p.rows, p.cols);
}

void ChannelParams::validate() const {
  if (rows == 0 || cols == 0) throw DomainError("channel grid must be non-empty");
  auto range = [](double lo, double hi, const char* what, bool strict) {
    if (!(lo <= hi) || (strict ? !(lo > 0.0) : !(lo >= 0.0))) {
      throw DomainError(std::string("invalid channel ") + what + " range");
    }
  };
  range(width_min, width_max, "width", true);
  range(amplitude_min, amplitude_max, "amplitude", false);
  range(wavelength_min, wavelength_max, "wavelength", true);
  if (!(fraction_min >= 0.0 && fraction_min <= fraction_max && fraction_max <= 1.0)) {
    throw DomainError("invalid channel fraction bounds");
  }
  if (max_attempts == 0) throw DomainError("channel max_attempts must be positive");
}

GridField synth_channels(const ChannelParams& p, std::uint64_t seed) {
  p.validate();
  GridField g(p.rows, p.cols, 0.0);
  if (p.count == 0) return g;
  Rng rng = make_stream(seed, {0x6368616eULL});
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  double fraction = 0.0;
  for (std::size_t attempt = 0; attempt < p.max_attempts; ++attempt) {
    std::fill(g.values().begin(), g.values().end(), 0.0);
    for (std::size_t k = 0; k < p.count; ++k) {
      const double y0 = uniform(0.0, double(p.rows));
      const double amp = uniform(p.amplitude_min, p.amplitude_max);
      const double wavelength = uniform(p.wavelength_min, p.wavelength_max);
      const double phase = uniform(0.0, 2.0 * std::numbers::pi);
      const double half = 0.5 * uniform(p.width_min, p.width_max);
      for (std::size_t c = 0; c < p.cols; ++c) {
        const double centre =
            y0 + amp * std::sin(2.0 * std::numbers::pi * (double(c) + 0.5) / wavelength + phase);
        for (std::size_t r = 0; r < p.rows; ++r) {
          if (std::abs(double(r) + 0.5 - centre) <= half) g(r, c) = 1.0;
        }
      }
    }
    fraction = feature_fraction(g);
    if (fraction >= p.fraction_min && fraction <= p.fraction_max) return g;
  }
  throw NumericalError("channel fraction stayed outside [" + std::to_string(p.fraction_min) + ", " +
                       std::to_string(p.fraction_max) + "] for " + std::to_string(p.max_attempts) +
                       " attempts (last " + std::to_string(fraction) + ")");
}

double feature_fraction(const GridField& binary) {
  if (binary.empty()) return 0.0;
  const auto v = binary.values();
  return double(std::count(v.begin(), v.end(), 1.0)) / double(v.size());
}

}  // namespace subsurf::genlatent
