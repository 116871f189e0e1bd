/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subsurf/flowsim/flowsim.hpp"
#include "subsurf/varinv/varinv.hpp"

// Run configuration: flat "key = value" lines, '#' starts a comment.
// Keys under provenance.* are kept verbatim; keys under manifest.* are ignored,
// so a run manifest can be fed back in as a configuration.
namespace subsurf::harness {

enum class TruthSource { file, generator, grf, fractures, channels };
enum class GeneratorKind { neural, linear, piecewise };
enum class InversionKind { esmda, variational };

struct RunConfig {
  // experiment
  std::size_t grid_rows = 96;
  std::size_t grid_cols = 96;
  double cell_size = 5.0;
  double thickness = 10.0;
  double west_head = 0.0;
  double east_head = -10.0;
  double recharge = 0.001;
  flowsim::ExperimentMode mode = flowsim::ExperimentMode::tomography;
  int layout_case = 4;
  double pumping_rate = 0.0;

  // true field
  TruthSource truth_source = TruthSource::grf;
  std::filesystem::path truth_file;  // log10 K raster
  std::vector<double> truth_z;       // generator truth; drawn from the prior when empty
  std::uint64_t truth_seed = 1;
  std::size_t fracture_count = 20;
  std::size_t channel_count = 4;
  double grf_scale = 0.4;  // log10 K = clamp(scale * f, scaling.lo, scaling.hi)

  // observation noise
  double noise_sigma = 0.02;
  std::uint64_t noise_seed = 1;
  std::optional<double> assumed_sigma;  // C_D used by the inversion; defaults to noise_sigma

  // latent generator
  GeneratorKind generator_kind = GeneratorKind::linear;
  std::filesystem::path generator_weights;
  std::size_t n_z = 36;
  std::uint64_t generator_seed = 1;
  double generator_amplitude = 0.5;
  double generator_offset = 0.0;
  double piecewise_step = 1.0;
  double piecewise_beta = 0.5;
  double scaling_lo = -1.0;
  double scaling_hi = 1.0;

  // inversion
  InversionKind inversion = InversionKind::esmda;
  std::size_t esmda_n_a = 8;
  std::size_t esmda_n_r = 200;
  double esmda_energy = 0.99;
  std::uint64_t esmda_seed = 1;
  varinv::StepMode var_mode = varinv::StepMode::gauss_newton;
  std::size_t var_max_iterations = 50;
  double var_fd_step = 1e-3;
  double var_gradient_tolerance = 1e-6;
  std::uint64_t var_z0_seed = 1;

  // diagnostics and sweeps
  std::optional<double> binarize_threshold;
  std::vector<double> sweep_noise_sigmas;
  std::vector<double> sweep_pumping_rates;

  std::filesystem::path output_dir;
  unsigned threads = 0;
  std::map<std::string, std::string> provenance;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Validated configuration; throws ConfigError listing every problem with key and line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text that parses back to an equal RunConfig.
std::string serialize_config(const RunConfig& cfg);

/// Cross-field checks that parse_config also applies (and file existence).
void validate_config(const RunConfig& cfg);

/// Keys that must appear in every configuration.
const std::vector<std::string>& required_keys();

flowsim::ExperimentSpec experiment_spec(const RunConfig& cfg);

std::string to_string(TruthSource s);
std::string to_string(GeneratorKind k);

}  // namespace subsurf::harness
