/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/harness/run.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "subsurf/diagnostics/diagnostics.hpp"
#include "subsurf/errors.hpp"
#include "subsurf/esmda/esmda.hpp"
#include "subsurf/genlatent/samplers.hpp"
#include "subsurf/io.hpp"
#include "subsurf/varinv/varinv.hpp"

namespace subsurf::harness {

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

genlatent::FieldScaling scaling_of(const RunConfig& cfg) { return {cfg.scaling_lo, cfg.scaling_hi}; }

GridField binary_to_log10k(const GridField& b, const RunConfig& cfg) {
  GridField out = b;
  for (auto& v : out.values()) v = v >= 0.5 ? cfg.scaling_hi : cfg.scaling_lo;
  return out;
}

class ManifestWriter {
 public:
  explicit ManifestWriter(const RunConfig& cfg) : cfg_(cfg) {}

  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }

  void digest(const std::string& name, const fs::path& file) {
    if (fs::exists(file)) set("manifest.digest." + name, file_sha256(file));
  }

  void write() const {
    std::ofstream out(cfg_.output_dir / "manifest");
    out << serialize_config(cfg_) << '\n';
    for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
    if (!out) throw std::runtime_error("cannot write manifest in " + cfg_.output_dir.string());
  }

 private:
  const RunConfig& cfg_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

void write_summary(const fs::path& path, const RunMetrics& m) {
  std::ofstream out(path);
  out << "metric,value\n"
      << "observation_count," << m.observation_count << '\n'
      << "fit_rmse," << format_double(m.fit_rmse) << '\n'
      << "fit_rmse_true," << format_double(m.fit_rmse_true) << '\n'
      << "krmse_mean," << format_double(m.krmse_mean) << '\n'
      << "misfit_initial," << format_double(m.misfit_initial) << '\n'
      << "misfit_final," << format_double(m.misfit_final) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_krmse(const fs::path& path, const std::vector<double>& v) {
  std::ofstream out(path);
  out << "realization,log10k_rmse\n";
  for (std::size_t j = 0; j < v.size(); ++j) out << j << ',' << format_double(v[j]) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string tag(double v) { return format_double(v); }

RunMetrics run_single(const RunConfig& cfg, ManifestWriter& manifest) {
  const fs::path& dir = cfg.output_dir;
  const auto exp = experiment_spec(cfg);
  const auto map = make_latent_map(cfg);
  if (map->rows() != cfg.grid_rows || map->cols() != cfg.grid_cols) {
    throw SpecError("generator produces " + std::to_string(map->rows()) + "x" + std::to_string(map->cols()) +
                    " fields, grid is " + std::to_string(cfg.grid_rows) + "x" + std::to_string(cfg.grid_cols));
  }

  const GridField truth = true_log10k(cfg, *map);
  write_grid_field(dir / "truth_log10k.gfld", truth);
  const auto obs = simulate_observations(cfg, truth);
  write_observations(dir / "d_true.csv", obs.d_true);
  write_observations(dir / "d_obs.csv", obs.d_obs);
  manifest.set("manifest.observation_count", std::to_string(obs.d_obs.size()));

  const double sigma = cfg.assumed_sigma.value_or(cfg.noise_sigma);
  const auto model = esmda::ObservationModel::iid(obs.d_obs, sigma);
  esmda::ForwardFn forward = [&exp](const GridField& k) { return flowsim::run_forward(k, exp); };
  esmda::GeneratorFn gen = [&map](const Eigen::VectorXd& z) { return map->conductivity(z); };

  RunMetrics metrics;
  metrics.observation_count = std::size_t(obs.d_obs.size());
  std::vector<GridField> members;
  if (cfg.inversion == InversionKind::esmda) {
    esmda::EsmdaOptions opt;
    opt.threads = cfg.threads;
    opt.n_z = map->latent_size();
    const auto rec = esmda::run_esmda(forward, gen, model, cfg.esmda_n_a, cfg.esmda_n_r,
                                      {cfg.esmda_energy}, cfg.esmda_seed, opt);
    esmda::write_record(dir / "esmda", rec);
    for (Eigen::Index j = 0; j < rec.final_ensemble().cols(); ++j) {
      members.push_back(map->log10k(rec.final_ensemble().col(j)));
    }
    metrics.misfit_initial = rec.misfit.front().mean;
    metrics.misfit_final = rec.misfit.back().mean;
  } else {
    varinv::InversionPolicy pol;
    pol.mode = cfg.var_mode;
    pol.max_iterations = cfg.var_max_iterations;
    pol.fd_step = cfg.var_fd_step;
    pol.gradient_tolerance = cfg.var_gradient_tolerance;
    pol.threads = cfg.threads;
    const auto spec = varinv::map_objective(model, map->latent_size());
    varinv::ForwardG fg = [&](const Eigen::VectorXd& z) { return forward(gen(z)); };
    const Eigen::VectorXd z0 = genlatent::sample_latent_prior(map->latent_size(), 1, cfg.var_z0_seed).col(0);
    const auto traj = varinv::run_variational(z0, spec, fg, pol);
    varinv::write_trajectory(dir / "variational", traj);
    members.push_back(map->log10k(traj.final().z));
    metrics.misfit_initial = traj.points.front().rmse;
    metrics.misfit_final = traj.final().rmse;
    manifest.set("manifest.termination", varinv::to_string(traj.termination));
  }

  GridField mean = members.front();
  if (members.size() >= 2) {
    const auto summary = diagnostics::ensemble_summary(members);
    mean = summary.mean;
    write_grid_field(dir / "posterior_variance_log10k.gfld", summary.variance);
  }
  write_grid_field(dir / "posterior_mean_log10k.gfld", mean);
  std::vector<double> krmse;
  for (const auto& m : members) krmse.push_back(diagnostics::rmse(m, truth));
  write_krmse(dir / "krmse.csv", krmse);
  metrics.krmse_mean = 0.0;
  for (double v : krmse) metrics.krmse_mean += v / double(krmse.size());

  const Eigen::VectorXd d_mean = forward(genlatent::log10k_to_conductivity(mean));
  write_observations(dir / "d_fit.csv", d_mean);
  metrics.fit_rmse = diagnostics::rmse(d_mean, obs.d_obs);
  metrics.fit_rmse_true = diagnostics::rmse(d_mean, obs.d_true);

  if (cfg.binarize_threshold) {
    const auto unit = scaling_of(cfg).from_log10k(mean);
    write_grid_field(dir / "binarized_mean.gfld", diagnostics::binarize(unit, *cfg.binarize_threshold));
  }
  write_summary(dir / "summary.csv", metrics);
  return metrics;
}

}  // namespace

std::shared_ptr<const genlatent::LatentMap> make_latent_map(const RunConfig& cfg) {
  using namespace genlatent;
  switch (cfg.generator_kind) {
    case GeneratorKind::neural: {
      auto model = read_generator(cfg.generator_weights);
      const std::uint32_t in = model.spec.input_channels();
      const auto side = std::uint32_t(std::lround(std::sqrt(double(cfg.n_z) / in)));
      if (std::size_t(in) * side * side != cfg.n_z) {
        throw SpecError("generator.n_z=" + std::to_string(cfg.n_z) + " is not " + std::to_string(in) +
                        " square latent maps");
      }
      return std::make_shared<NeuralLatentMap>(std::move(model), scaling_of(cfg), LatentShape{in, side, side});
    }
    case GeneratorKind::linear:
      return std::make_shared<LinearLatentMap>(LinearLatentMap::from_grf(
          cfg.grid_rows, cfg.grid_cols, cfg.n_z, cfg.generator_seed, cfg.generator_amplitude, {},
          cfg.generator_offset));
    default: {
      auto inner = std::make_shared<LinearLatentMap>(LinearLatentMap::from_grf(
          cfg.grid_rows, cfg.grid_cols, cfg.n_z, cfg.generator_seed, cfg.generator_amplitude, {},
          cfg.generator_offset));
      return std::make_shared<PiecewiseLatentMap>(std::move(inner), cfg.piecewise_step, cfg.piecewise_beta);
    }
  }
}

GridField true_log10k(const RunConfig& cfg, const genlatent::LatentMap& map) {
  using namespace genlatent;
  switch (cfg.truth_source) {
    case TruthSource::file: {
      auto f = read_grid_field(cfg.truth_file);
      if (f.rows() != cfg.grid_rows || f.cols() != cfg.grid_cols) {
        throw DomainError("truth file " + cfg.truth_file.string() + " is " + std::to_string(f.rows()) + "x" +
                          std::to_string(f.cols()) + ", grid is " + std::to_string(cfg.grid_rows) + "x" +
                          std::to_string(cfg.grid_cols));
      }
      return f;
    }
    case TruthSource::generator: {
      Eigen::VectorXd z;
      if (!cfg.truth_z.empty()) {
        z = Eigen::Map<const Eigen::VectorXd>(cfg.truth_z.data(), Eigen::Index(cfg.truth_z.size()));
      } else {
        z = sample_latent_prior(map.latent_size(), 1, cfg.truth_seed).col(0);
      }
      return map.log10k(z);
    }
    case TruthSource::grf: {
      auto f = grf_sample(GrfParams{}, cfg.grid_rows, cfg.grid_cols, 1, cfg.truth_seed).front();
      for (auto& v : f.values()) v = std::clamp(cfg.grf_scale * v, cfg.scaling_lo, cfg.scaling_hi);
      return f;
    }
    case TruthSource::fractures: {
      FractureParams p;
      p.rows = cfg.grid_rows;
      p.cols = cfg.grid_cols;
      p.count = cfg.fracture_count;
      return binary_to_log10k(synth_fractures(p, cfg.truth_seed), cfg);
    }
    default: {
      ChannelParams p;
      p.rows = cfg.grid_rows;
      p.cols = cfg.grid_cols;
      p.count = cfg.channel_count;
      return binary_to_log10k(synth_channels(p, cfg.truth_seed), cfg);
    }
  }
}

Observations simulate_observations(const RunConfig& cfg, const GridField& log10k) {
  const auto exp = experiment_spec(cfg);
  Observations o;
  o.d_true = flowsim::run_forward(genlatent::log10k_to_conductivity(log10k), exp);
  o.d_obs = flowsim::add_noise(o.d_true, cfg.noise_sigma, cfg.noise_seed);
  return o;
}

std::vector<RunConfig> sweep_children(const RunConfig& cfg) {
  std::vector<RunConfig> out;
  if (cfg.sweep_noise_sigmas.empty() && cfg.sweep_pumping_rates.empty()) return out;
  const auto sigmas = cfg.sweep_noise_sigmas.empty() ? std::vector<double>{cfg.noise_sigma} : cfg.sweep_noise_sigmas;
  const auto rates = cfg.sweep_pumping_rates.empty() ? std::vector<double>{cfg.pumping_rate} : cfg.sweep_pumping_rates;
  for (double s : sigmas) {
    for (double q : rates) {
      RunConfig child = cfg;
      child.sweep_noise_sigmas.clear();
      child.sweep_pumping_rates.clear();
      child.noise_sigma = s;
      child.pumping_rate = q;
      std::string name;
      if (!cfg.sweep_noise_sigmas.empty()) name += "sigma_" + tag(s);
      if (!cfg.sweep_pumping_rates.empty()) name += std::string(name.empty() ? "" : "_") + "rate_" + tag(q);
      child.output_dir = cfg.output_dir / name;
      out.push_back(std::move(child));
    }
  }
  return out;
}

RunManifest execute_run(const RunConfig& cfg) {
  validate_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.output_dir);
  RunManifest result;
  result.dir = cfg.output_dir;

  ManifestWriter manifest(cfg);
  manifest.set("manifest.status", "incomplete");
  manifest.set("manifest.version", std::string("subsurf ") + kVersion);
  manifest.set("manifest.eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION));
  manifest.set("manifest.fftw", fftw_version);
  if (cfg.truth_source == TruthSource::file) manifest.digest("truth_file", cfg.truth_file);
  if (cfg.generator_kind == GeneratorKind::neural) manifest.digest("generator_weights", cfg.generator_weights);
  manifest.write();

  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  try {
    const auto children = sweep_children(cfg);
    if (!children.empty()) {
      for (std::size_t k = 0; k < children.size(); ++k) {
        execute_run(children[k]);
        result.children.push_back(children[k].output_dir);
        manifest.set("manifest.child." + std::to_string(k), children[k].output_dir.filename().string());
      }
    } else {
      result.metrics = run_single(cfg, manifest);
      for (const char* name : {"truth_log10k.gfld", "d_true.csv", "d_obs.csv", "d_fit.csv", "posterior_mean_log10k.gfld",
                               "posterior_variance_log10k.gfld", "krmse.csv", "summary.csv", "binarized_mean.gfld"}) {
        manifest.digest(std::string("output.") + name, cfg.output_dir / name);
      }
    }
  } catch (const std::exception& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ';');
    manifest.set("manifest.error", what);
    manifest.set("manifest.wall_seconds", format_double(elapsed()));
    manifest.write();
    throw;
  }
  result.complete = true;
  result.wall_seconds = elapsed();
  manifest.set("manifest.status", "complete");
  manifest.set("manifest.wall_seconds", format_double(result.wall_seconds));
  manifest.write();
  return result;
}

}  // namespace subsurf::harness
