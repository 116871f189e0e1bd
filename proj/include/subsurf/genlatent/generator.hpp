/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "subsurf/grid_field.hpp"

namespace subsurf::genlatent {

struct TransposedConv {
  std::uint32_t in_channels = 1;
  std::uint32_t out_channels = 1;
  std::uint32_t kernel = 4;
  std::uint32_t stride = 2;
  std::uint32_t padding = 1;
  std::uint32_t dilation = 1;

  std::uint32_t output_size(std::uint32_t input) const {
    return (input - 1) * stride + dilation * (kernel - 1) + 1 - 2 * padding;
  }
  friend bool operator==(const TransposedConv&, const TransposedConv&) = default;
};

/// Per-sample, per-channel standardization; statistics always come from the
/// current sample (there are no running averages at inference).
struct InstanceNorm {
  std::uint32_t channels = 1;
  double epsilon = 1e-5;
  bool affine = false;
  friend bool operator==(const InstanceNorm&, const InstanceNorm&) = default;
};

enum class ActivationKind : std::uint8_t { relu, leaky_relu, sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  friend bool operator==(const Activation&, const Activation&) = default;
};

inline constexpr double kLeakyReluSlope = 0.2;

using LayerSpec = std::variant<TransposedConv, InstanceNorm, Activation>;

struct LatentShape {
  std::uint32_t channels = 1;
  std::uint32_t height = 6;
  std::uint32_t width = 6;
  std::size_t size() const { return std::size_t{channels} * height * width; }
  friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

struct LatentVector {
  LatentShape shape;
  std::vector<double> values;

  /// Single-channel square map; throws SpecError unless values.size() is a square.
  static LatentVector square(std::span<const double> values);
};

struct GeneratorSpec {
  std::vector<LayerSpec> layers;

  /// Channels expected by the first transposed convolution.
  std::uint32_t input_channels() const;

  /// Spatial size after every layer, starting from a `input` x `input` latent map.
  std::vector<std::uint32_t> spatial_sizes(std::uint32_t input) const;

  /// Channel chaining, a single-channel output and a final Sigmoid.
  void validate() const;

  /// Gaussian-field generator: 6x6 latent, 4 stride-2 transposed convolutions to
  /// 96x96, instance norm + ReLU after the first three, Sigmoid output.
  static GeneratorSpec gaussian_6x6(std::vector<std::uint32_t> hidden_channels = {64, 32, 16});

  /// Channelized-field generator: 3x3 latent, 5 transposed convolutions to 96x96.
  static GeneratorSpec channel_3x3(
      std::vector<std::uint32_t> hidden_channels = {64, 32, 16, 8});

  /// `hidden_channels.size() + 1` upsampling stages from a 1-channel latent map.
  static GeneratorSpec upsampling_stack(const std::vector<std::uint32_t>& hidden_channels,
                                        bool affine_norm = false);

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

/// Trained parameters, one block set per layer (empty for parameter-free layers).
/// Kernels are (in_channels, out_channels, kH, kW) row-major.
struct LayerWeights {
  std::vector<float> kernel;
  std::vector<float> bias;
  std::vector<float> scale;
  std::vector<float> shift;
  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct WeightStore {
  std::vector<LayerWeights> layers;
  friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

struct GeneratorModel {
  GeneratorSpec spec;
  WeightStore weights;
};

/// Throws SpecError when block sizes disagree with the layer descriptors.
void check_weights(const GeneratorSpec& spec, const WeightStore& w);

/// Zero-filled blocks of the right shapes.
WeightStore zero_weights(const GeneratorSpec& spec);

/// N(0, stddev^2) kernels, zero biases, unit scale / zero shift.
WeightStore random_weights(const GeneratorSpec& spec, std::uint64_t seed, double stddev = 0.05);

/// Deterministic forward pass. Output is the single output channel as a raster.
GridField generate(const GeneratorSpec& spec, const WeightStore& w, const LatentVector& z);

/// Activations after every layer; used by tests that inspect intermediate maps.
struct LayerTrace {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> values;  // (channel, row, col) row-major
};
std::vector<LayerTrace> generate_trace(const GeneratorSpec& spec, const WeightStore& w,
                                       const LatentVector& z);

/// "WGGW" weights file: little-endian, version 1.
void write_generator(const std::filesystem::path& path, const GeneratorModel& model);
GeneratorModel read_generator(const std::filesystem::path& path);

}  // namespace subsurf::genlatent
