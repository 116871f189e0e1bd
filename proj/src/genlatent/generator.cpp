/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/genlatent/generator.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "subsurf/binary.hpp"
#include "subsurf/errors.hpp"
#include "subsurf/random.hpp"

namespace subsurf::genlatent {

namespace {

constexpr char kMagic[4] = {'W', 'G', 'G', 'W'};
constexpr std::uint32_t kVersion = 1;

enum class LayerCode : std::uint8_t { tconv = 0, inorm = 1, relu = 2, leaky_relu = 3, sigmoid = 4 };

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string layer_name(std::size_t index, const LayerSpec& layer) {
  const char* kind = std::visit(
      overloaded{[](const TransposedConv&) { return "transposed-convolution"; },
                 [](const InstanceNorm&) { return "instance-normalization"; },
                 [](const Activation& a) {
                   switch (a.kind) {
                     case ActivationKind::relu: return "relu";
                     case ActivationKind::leaky_relu: return "leaky-relu";
                     default: return "sigmoid";
                   }
                 }},
      layer);
  return "layer " + std::to_string(index) + " (" + kind + ")";
}

struct Tensor {
  std::uint32_t c = 0, h = 0, w = 0;
  std::vector<double> v;
  double& at(std::uint32_t ch, std::uint32_t y, std::uint32_t x) {
    return v[(std::size_t{ch} * h + y) * w + x];
  }
};

Tensor apply_tconv(const TransposedConv& t, const LayerWeights& lw, const Tensor& in) {
  Tensor out;
  out.c = t.out_channels;
  out.h = t.output_size(in.h);
  out.w = t.output_size(in.w);
  out.v.assign(std::size_t{out.c} * out.h * out.w, 0.0);
  const std::uint32_t k = t.kernel;
  const long pad = t.padding;
  for (std::uint32_t i = 0; i < in.c; ++i) {
    for (std::uint32_t iy = 0; iy < in.h; ++iy) {
      for (std::uint32_t ix = 0; ix < in.w; ++ix) {
        const double x = in.v[(std::size_t{i} * in.h + iy) * in.w + ix];
        if (x == 0.0) continue;
        for (std::uint32_t o = 0; o < out.c; ++o) {
          const float* kern = lw.kernel.data() + (std::size_t{i} * out.c + o) * k * k;
          for (std::uint32_t ky = 0; ky < k; ++ky) {
            const long oy = static_cast<long>(iy) * t.stride - pad + long{ky} * t.dilation;
            if (oy < 0 || oy >= static_cast<long>(out.h)) continue;
            double* row = out.v.data() + (std::size_t{o} * out.h + oy) * out.w;
            for (std::uint32_t kx = 0; kx < k; ++kx) {
              const long ox = static_cast<long>(ix) * t.stride - pad + long{kx} * t.dilation;
              if (ox < 0 || ox >= static_cast<long>(out.w)) continue;
              row[ox] += x * static_cast<double>(kern[ky * k + kx]);
            }
          }
        }
      }
    }
  }
  const std::size_t plane = std::size_t{out.h} * out.w;
  for (std::uint32_t o = 0; o < out.c; ++o) {
    const double b = lw.bias[o];
    for (std::size_t p = 0; p < plane; ++p) out.v[o * plane + p] += b;
  }
  return out;
}

void apply_inorm(const InstanceNorm& n, const LayerWeights& lw, Tensor& x) {
  const std::size_t plane = std::size_t{x.h} * x.w;
  for (std::uint32_t ch = 0; ch < x.c; ++ch) {
    double* p = x.v.data() + ch * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += p[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(plane);  // biased, as in the training framework
    const double inv = 1.0 / std::sqrt(var + n.epsilon);
    const double gamma = n.affine ? lw.scale[ch] : 1.0;
    const double beta = n.affine ? lw.shift[ch] : 0.0;
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mean) * inv * gamma + beta;
  }
}

void apply_activation(const Activation& a, Tensor& x) {
  switch (a.kind) {
    case ActivationKind::relu:
      for (auto& v : x.v) v = v > 0.0 ? v : 0.0;
      break;
    case ActivationKind::leaky_relu:
      for (auto& v : x.v) v = v > 0.0 ? v : kLeakyReluSlope * v;
      break;
    case ActivationKind::sigmoid:
      for (auto& v : x.v) v = 1.0 / (1.0 + std::exp(-v));
      break;
  }
}

void write_floats(std::ostream& out, const std::vector<float>& v) {
  for (float f : v) binary::write_le<float>(out, f);
}

std::vector<float> read_floats(std::istream& in, std::size_t n) {
  std::vector<float> v(n);
  for (auto& f : v) f = binary::read_le<float>(in);
  return v;
}

}  // namespace

LatentVector LatentVector::square(std::span<const double> values) {
  const auto side = static_cast<std::uint32_t>(std::lround(std::sqrt(double(values.size()))));
  if (std::size_t{side} * side != values.size() || side == 0) {
    throw SpecError("latent vector of length " + std::to_string(values.size()) +
                    " is not a square map");
  }
  return {{1, side, side}, std::vector<double>(values.begin(), values.end())};
}

std::uint32_t GeneratorSpec::input_channels() const {
  for (const auto& layer : layers) {
    if (const auto* t = std::get_if<TransposedConv>(&layer)) return t->in_channels;
  }
  throw SpecError("generator has no transposed-convolution layer");
}

std::vector<std::uint32_t> GeneratorSpec::spatial_sizes(std::uint32_t input) const {
  std::vector<std::uint32_t> sizes;
  std::uint32_t s = input;
  for (const auto& layer : layers) {
    if (const auto* t = std::get_if<TransposedConv>(&layer)) s = t->output_size(s);
    sizes.push_back(s);
  }
  return sizes;
}

void GeneratorSpec::validate() const {
  if (layers.empty()) throw SpecError("generator has no layers");
  std::uint32_t channels = input_channels();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (const auto* t = std::get_if<TransposedConv>(&layer)) {
      if (t->in_channels != channels) {
        throw SpecError(layer_name(i, layer) + ": expects " + std::to_string(t->in_channels) +
                        " input channels, previous layer yields " + std::to_string(channels));
      }
      if (t->kernel == 0 || t->stride == 0 || t->dilation == 0 || t->out_channels == 0) {
        throw SpecError(layer_name(i, layer) + ": zero kernel/stride/dilation/channels");
      }
      channels = t->out_channels;
    } else if (const auto* n = std::get_if<InstanceNorm>(&layer)) {
      if (n->channels != channels) {
        throw SpecError(layer_name(i, layer) + ": normalizes " + std::to_string(n->channels) +
                        " channels, input has " + std::to_string(channels));
      }
      if (!(n->epsilon > 0.0)) throw SpecError(layer_name(i, layer) + ": epsilon must be > 0");
    }
  }
  if (channels != 1) throw SpecError("generator output must be single-channel");
  const auto* last = std::get_if<Activation>(&layers.back());
  if (!last || last->kind != ActivationKind::sigmoid) {
    throw SpecError("generator must end with a Sigmoid activation");
  }
}

GeneratorSpec GeneratorSpec::upsampling_stack(const std::vector<std::uint32_t>& hidden,
                                              bool affine_norm) {
  GeneratorSpec spec;
  std::uint32_t in = 1;
  for (std::uint32_t ch : hidden) {
    spec.layers.emplace_back(TransposedConv{in, ch});
    spec.layers.emplace_back(InstanceNorm{ch, 1e-5, affine_norm});
    spec.layers.emplace_back(Activation{ActivationKind::relu});
    in = ch;
  }
  spec.layers.emplace_back(TransposedConv{in, 1});
  spec.layers.emplace_back(Activation{ActivationKind::sigmoid});
  return spec;
}

GeneratorSpec GeneratorSpec::gaussian_6x6(std::vector<std::uint32_t> hidden_channels) {
  if (hidden_channels.size() != 3) throw SpecError("gaussian_6x6 needs 3 hidden widths");
  return upsampling_stack(hidden_channels);
}

GeneratorSpec GeneratorSpec::channel_3x3(std::vector<std::uint32_t> hidden_channels) {
  if (hidden_channels.size() != 4) throw SpecError("channel_3x3 needs 4 hidden widths");
  return upsampling_stack(hidden_channels);
}

void check_weights(const GeneratorSpec& spec, const WeightStore& w) {
  if (w.layers.size() != spec.layers.size()) {
    throw SpecError("weights hold " + std::to_string(w.layers.size()) + " layers, spec has " +
                    std::to_string(spec.layers.size()));
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& lw = w.layers[i];
    auto expect = [&](const char* block, std::size_t got, std::size_t want) {
      if (got != want) {
        throw SpecError(layer_name(i, spec.layers[i]) + ": " + block + " has " +
                        std::to_string(got) + " values, expected " + std::to_string(want));
      }
    };
    std::visit(overloaded{[&](const TransposedConv& t) {
                            expect("kernel", lw.kernel.size(), std::size_t{t.in_channels} *
                                                                   t.out_channels * t.kernel *
                                                                   t.kernel);
                            expect("bias", lw.bias.size(), t.out_channels);
                            expect("scale", lw.scale.size(), 0);
                            expect("shift", lw.shift.size(), 0);
                          },
                          [&](const InstanceNorm& n) {
                            expect("kernel", lw.kernel.size(), 0);
                            expect("bias", lw.bias.size(), 0);
                            expect("scale", lw.scale.size(), n.affine ? n.channels : 0);
                            expect("shift", lw.shift.size(), n.affine ? n.channels : 0);
                          },
                          [&](const Activation&) {
                            expect("kernel", lw.kernel.size(), 0);
                            expect("bias", lw.bias.size(), 0);
                            expect("scale", lw.scale.size(), 0);
                            expect("shift", lw.shift.size(), 0);
                          }},
               spec.layers[i]);
  }
}

WeightStore zero_weights(const GeneratorSpec& spec) {
  WeightStore w;
  for (const auto& layer : spec.layers) {
    LayerWeights lw;
    if (const auto* t = std::get_if<TransposedConv>(&layer)) {
      lw.kernel.assign(std::size_t{t->in_channels} * t->out_channels * t->kernel * t->kernel, 0.f);
      lw.bias.assign(t->out_channels, 0.f);
    } else if (const auto* n = std::get_if<InstanceNorm>(&layer); n && n->affine) {
      lw.scale.assign(n->channels, 0.f);
      lw.shift.assign(n->channels, 0.f);
    }
    w.layers.push_back(std::move(lw));
  }
  return w;
}

WeightStore random_weights(const GeneratorSpec& spec, std::uint64_t seed, double stddev) {
  WeightStore w = zero_weights(spec);
  Rng rng = make_stream(seed, {0x77656967ULL});
  std::normal_distribution<double> normal(0.0, stddev);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    for (auto& v : w.layers[i].kernel) v = static_cast<float>(normal(rng));
    for (auto& v : w.layers[i].scale) v = 1.f;
  }
  return w;
}

std::vector<LayerTrace> generate_trace(const GeneratorSpec& spec, const WeightStore& w,
                                       const LatentVector& z) {
  spec.validate();
  check_weights(spec, w);
  if (z.values.size() != z.shape.size()) {
    throw SpecError("latent values do not match the declared latent shape");
  }
  if (z.shape.channels != spec.input_channels()) {
    throw SpecError("latent has " + std::to_string(z.shape.channels) +
                    " channels, generator expects " + std::to_string(spec.input_channels()));
  }
  for (double v : z.values) {
    if (!std::isfinite(v)) throw NumericalError("latent vector has a non-finite entry");
  }

  Tensor x{z.shape.channels, z.shape.height, z.shape.width, z.values};
  std::vector<LayerTrace> trace;
  trace.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    std::visit(overloaded{[&](const TransposedConv& t) {
                            if (t.output_size(x.h) == 0 || x.h * t.stride < 2 * t.padding) {
                              throw SpecError(layer_name(i, layer) + ": input too small");
                            }
                            x = apply_tconv(t, w.layers[i], x);
                          },
                          [&](const InstanceNorm& n) { apply_inorm(n, w.layers[i], x); },
                          [&](const Activation& a) { apply_activation(a, x); }},
               layer);
    for (double v : x.v) {
      if (!std::isfinite(v)) throw NumericalError(layer_name(i, layer) + ": non-finite value");
    }
    trace.push_back({x.c, x.h, x.w, x.v});
  }
  return trace;
}

GridField generate(const GeneratorSpec& spec, const WeightStore& w, const LatentVector& z) {
  auto trace = generate_trace(spec, w, z);
  auto& out = trace.back();
  return GridField(out.height, out.width, std::move(out.values));
}

void write_generator(const std::filesystem::path& path, const GeneratorModel& model) {
  model.spec.validate();
  check_weights(model.spec, model.weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  binary::write_le<std::uint32_t>(out, kVersion);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.spec.layers.size()));
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const auto& layer = model.spec.layers[i];
    const auto& lw = model.weights.layers[i];
    auto header = [&](LayerCode code, std::uint32_t a, std::uint32_t b, std::uint32_t c,
                      std::uint32_t d) {
      binary::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(code));
      for (std::uint32_t v : {a, b, c, d}) binary::write_le<std::uint32_t>(out, v);
    };
    if (const auto* t = std::get_if<TransposedConv>(&layer)) {
      if (t->stride != 2 || t->padding != 1 || t->dilation != 1) {
        throw SpecError(layer_name(i, layer) +
                        ": only stride 2, padding 1, dilation 1 are expressible in WGGW");
      }
      header(LayerCode::tconv, t->in_channels, t->out_channels, t->kernel, t->kernel);
      write_floats(out, lw.kernel);
      write_floats(out, lw.bias);
    } else if (const auto* n = std::get_if<InstanceNorm>(&layer)) {
      if (n->epsilon != 1e-5) {
        throw SpecError(layer_name(i, layer) + ": WGGW stores epsilon 1e-5 only");
      }
      header(LayerCode::inorm, n->channels, n->affine ? 1u : 0u, 0, 0);
      write_floats(out, lw.scale);
      write_floats(out, lw.shift);
    } else {
      const auto kind = std::get<Activation>(layer).kind;
      const LayerCode code = kind == ActivationKind::relu         ? LayerCode::relu
                             : kind == ActivationKind::leaky_relu ? LayerCode::leaky_relu
                                                                  : LayerCode::sigmoid;
      header(code, 0, 0, 0, 0);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GeneratorModel read_generator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw SpecError(path.string() + ": not a WGGW weights file");
  }
  GeneratorModel model;
  try {
    const auto version = binary::read_le<std::uint32_t>(in);
    if (version != kVersion) {
      throw SpecError(path.string() + ": unsupported WGGW version " + std::to_string(version));
    }
    const auto count = binary::read_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto code = binary::read_le<std::uint8_t>(in);
      std::uint32_t shape[4];
      for (auto& s : shape) s = binary::read_le<std::uint32_t>(in);
      LayerWeights lw;
      switch (static_cast<LayerCode>(code)) {
        case LayerCode::tconv: {
          if (shape[2] != shape[3]) throw SpecError("layer " + std::to_string(i) +
                                                    ": non-square kernels are not supported");
          TransposedConv t{shape[0], shape[1], shape[2]};
          lw.kernel = read_floats(in, std::size_t{shape[0]} * shape[1] * shape[2] * shape[3]);
          lw.bias = read_floats(in, shape[1]);
          model.spec.layers.emplace_back(t);
          break;
        }
        case LayerCode::inorm: {
          InstanceNorm n{shape[0], 1e-5, shape[1] != 0};
          if (n.affine) {
            lw.scale = read_floats(in, shape[0]);
            lw.shift = read_floats(in, shape[0]);
          }
          model.spec.layers.emplace_back(n);
          break;
        }
        case LayerCode::relu: model.spec.layers.emplace_back(Activation{ActivationKind::relu}); break;
        case LayerCode::leaky_relu:
          model.spec.layers.emplace_back(Activation{ActivationKind::leaky_relu});
          break;
        case LayerCode::sigmoid:
          model.spec.layers.emplace_back(Activation{ActivationKind::sigmoid});
          break;
        default:
          throw SpecError(path.string() + ": unknown layer type code " + std::to_string(code));
      }
      model.weights.layers.push_back(std::move(lw));
    }
  } catch (const std::runtime_error& e) {
    throw SpecError(path.string() + ": " + e.what());
  }
  model.spec.validate();
  return model;
}

}  // namespace subsurf::genlatent
