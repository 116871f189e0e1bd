/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

// subsurf command-line driver.
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "subsurf/diagnostics/diagnostics.hpp"
#include "subsurf/errors.hpp"
#include "subsurf/flowsim/flowsim.hpp"
#include "subsurf/genlatent/latent_map.hpp"
#include "subsurf/genlatent/samplers.hpp"
#include "subsurf/genlatent/scaling.hpp"
#include "subsurf/harness/config.hpp"
#include "subsurf/harness/run.hpp"
#include "subsurf/io.hpp"
#include "subsurf/varinv/varinv.hpp"

namespace fs = std::filesystem;
using namespace subsurf;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "run configuration file");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "seed override");
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

harness::RunConfig resolved_config(const Common& c) {
  auto cfg = harness::load_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.threads) cfg.threads = *c.threads;
  if (c.seed) {
    cfg.esmda_seed = *c.seed;
    cfg.var_z0_seed = *c.seed;
  }
  harness::validate_config(cfg);
  return cfg;
}

fs::path out_dir(const Common& c, const char* fallback) {
  fs::path dir = c.out.empty() ? fs::path(fallback) : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

std::string field_name(std::size_t k) {
  std::ostringstream s;
  s << "field_" << std::setw(4) << std::setfill('0') << k << ".gfld";
  return s.str();
}

std::vector<GridField> read_fields(const std::vector<std::string>& paths) {
  std::vector<GridField> fields;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".gfld") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) fields.push_back(read_grid_field(f));
    } else {
      fields.push_back(read_grid_field(p));
    }
  }
  return fields;
}

void print_manifest(const harness::RunManifest& m) {
  std::cout << "output: " << m.dir.string() << "\n";
  if (!m.children.empty()) {
    for (const auto& c : m.children) std::cout << "child: " << c.string() << "\n";
    return;
  }
  std::cout << "observations: " << m.metrics.observation_count << "\n"
            << "fit_rmse: " << format_double(m.metrics.fit_rmse) << "\n"
            << "krmse_mean: " << format_double(m.metrics.krmse_mean) << "\n"
            << "wall_seconds: " << format_double(m.wall_seconds) << "\n";
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subsurf: latent-space inversion of hydraulic tomography data"};
  app.require_subcommand(1);

  // gen-fields
  Common gen_c;
  std::string gen_kind = "grf";
  std::size_t gen_rows = 96, gen_cols = 96, gen_count = 1;
  genlatent::GrfParams grf;
  genlatent::FractureParams frac;
  genlatent::ChannelParams chan;
  auto* gen = app.add_subcommand("gen-fields", "sample GRF, fracture or channel fields");
  add_common(gen, gen_c, false);
  gen->add_option("--kind", gen_kind)->check(CLI::IsMember({"grf", "fractures", "channels"}));
  gen->add_option("--rows", gen_rows);
  gen->add_option("--cols", gen_cols);
  gen->add_option("--count", gen_count);
  gen->add_option("--range-major", grf.range_major);
  gen->add_option("--range-minor", grf.range_minor);
  gen->add_option("--azimuth", grf.azimuth_deg);
  gen->add_option("--fractures", frac.count, "bars per fracture field");
  gen->add_option("--channels", chan.count, "channels per channel field");

  // simulate
  Common sim_c;
  std::string sim_field;
  auto* sim = app.add_subcommand("simulate", "forward model plus observation noise");
  add_common(sim, sim_c, true);
  sim->add_option("--field", sim_field, "log10 K field replacing the configured truth")->check(CLI::ExistingFile);

  Common esmda_c, gn_c, run_c;
  auto* inv_e = app.add_subcommand("invert-esmda", "run a configuration with an esmda block");
  add_common(inv_e, esmda_c, true);
  auto* inv_g = app.add_subcommand("invert-gn", "run a configuration with a variational block");
  add_common(inv_g, gn_c, true);
  auto* run = app.add_subcommand("run", "full configuration, including sweeps");
  add_common(run, run_c, true);

  // scan-objective
  Common scan_c;
  std::size_t scan_i = 0, scan_j = 1;
  diagnostics::ScanOptions scan_opt;
  std::string scan_zref, scan_obs;
  auto* scan = app.add_subcommand("scan-objective", "objective surface over two latent coordinates");
  add_common(scan, scan_c, true);
  scan->add_option("--i", scan_i);
  scan->add_option("--j", scan_j);
  scan->add_option("--lo", scan_opt.lo);
  scan->add_option("--hi", scan_opt.hi);
  scan->add_option("--step", scan_opt.step);
  scan->add_option("--z-ref", scan_zref, "comma list; defaults to truth.z or zeros");
  scan->add_option("--obs", scan_obs, "observation CSV; defaults to noise-free data at z-ref")
      ->check(CLI::ExistingFile);

  // semivariogram
  Common sv_c;
  std::vector<std::string> sv_fields;
  std::size_t sv_max_lag = 60;
  double sv_cell = 1.0;
  auto* sv = app.add_subcommand("semivariogram", "west-east semivariogram pooled over fields");
  add_common(sv, sv_c, false);
  sv->add_option("fields", sv_fields, "field files or directories")->required();
  sv->add_option("--max-lag", sv_max_lag);
  sv->add_option("--cell-size", sv_cell);

  // metrics
  Common met_c;
  std::string met_truth;
  std::vector<std::string> met_fields;
  auto* met = app.add_subcommand("metrics", "log10 K RMSE of fields against a reference");
  add_common(met, met_c, false);
  met->add_option("--truth", met_truth)->required()->check(CLI::ExistingFile);
  met->add_option("fields", met_fields, "field files or directories")->required();

  // nn-test
  Common nn_c;
  std::vector<std::string> nn_real, nn_gen;
  auto* nn = app.add_subcommand("nn-test", "leave-one-out 1-NN two-sample accuracy");
  add_common(nn, nn_c, false);
  nn->add_option("--real", nn_real)->required();
  nn->add_option("--generated", nn_gen)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const auto dir = out_dir(gen_c, "fields");
      const std::uint64_t seed = gen_c.seed.value_or(1);
      std::vector<GridField> fields;
      if (gen_kind == "grf") {
        fields = genlatent::grf_sample(grf, gen_rows, gen_cols, gen_count, seed);
      } else {
        for (std::size_t k = 0; k < gen_count; ++k) {
          if (gen_kind == "fractures") {
            frac.rows = gen_rows;
            frac.cols = gen_cols;
            fields.push_back(genlatent::synth_fractures(frac, seed + k));
          } else {
            chan.rows = gen_rows;
            chan.cols = gen_cols;
            fields.push_back(genlatent::synth_channels(chan, seed + k));
          }
        }
      }
      for (std::size_t k = 0; k < fields.size(); ++k) write_grid_field(dir / field_name(k), fields[k]);
      std::cout << fields.size() << " fields written to " << dir.string() << "\n";
    } else if (*sim) {
      auto cfg = resolved_config(sim_c);
      if (sim_c.seed) cfg.noise_seed = *sim_c.seed;
      const auto dir = out_dir(sim_c, cfg.output_dir.string().c_str());
      GridField truth;
      if (!sim_field.empty()) {
        truth = read_grid_field(sim_field);
      } else {
        const auto map = harness::make_latent_map(cfg);
        truth = harness::true_log10k(cfg, *map);
      }
      const auto obs = harness::simulate_observations(cfg, truth);
      write_grid_field(dir / "truth_log10k.gfld", truth);
      write_observations(dir / "d_true.csv", obs.d_true);
      write_observations(dir / "d_obs.csv", obs.d_obs);
      std::cout << obs.d_obs.size() << " observations written to " << dir.string() << "\n";
    } else if (*inv_e || *inv_g || *run) {
      const Common& c = *inv_e ? esmda_c : (*inv_g ? gn_c : run_c);
      const auto cfg = resolved_config(c);
      if (*inv_e && cfg.inversion != harness::InversionKind::esmda)
        throw ConfigError("invert-esmda needs an esmda block");
      if (*inv_g && cfg.inversion != harness::InversionKind::variational)
        throw ConfigError("invert-gn needs a variational block");
      if (!*run && !(cfg.sweep_noise_sigmas.empty() && cfg.sweep_pumping_rates.empty()))
        throw ConfigError("sweeps are only executed by the run subcommand");
      print_manifest(harness::execute_run(cfg));
    } else if (*scan) {
      const auto cfg = resolved_config(scan_c);
      scan_opt.threads = cfg.threads;
      const auto dir = out_dir(scan_c, cfg.output_dir.string().c_str());
      const auto map = harness::make_latent_map(cfg);
      const auto exp = harness::experiment_spec(cfg);
      varinv::ForwardG forward = [&](const Eigen::VectorXd& z) {
        return flowsim::run_forward(map->conductivity(z), exp);
      };
      Eigen::VectorXd z_ref = Eigen::VectorXd::Zero(Eigen::Index(map->latent_size()));
      const auto ref = scan_zref.empty() ? cfg.truth_z : parse_list(scan_zref);
      if (!ref.empty()) {
        if (ref.size() != map->latent_size()) throw ConfigError("z-ref length differs from generator.n_z");
        z_ref = Eigen::Map<const Eigen::VectorXd>(ref.data(), Eigen::Index(ref.size()));
      }
      const Eigen::VectorXd d = scan_obs.empty() ? forward(z_ref) : read_observations(scan_obs);
      const auto spec = varinv::map_objective(
          esmda::ObservationModel::iid(d, cfg.assumed_sigma.value_or(cfg.noise_sigma)), map->latent_size());
      const auto s = diagnostics::objective_surface(scan_i, scan_j, z_ref, spec, forward, scan_opt);
      diagnostics::write_scan(dir / "scan.csv", s);
      const auto [a, b] = s.argmin();
      std::cout << "minimum L " << format_double(s.values(Eigen::Index(a), Eigen::Index(b))) << " at z_"
                << scan_i << " = " << format_double(s.axis[a]) << ", z_" << scan_j << " = "
                << format_double(s.axis[b]) << "; missing cells " << s.missing() << "\n";
    } else if (*sv) {
      const auto dir = out_dir(sv_c, ".");
      const auto s = diagnostics::mean_semivariogram(read_fields(sv_fields), sv_max_lag);
      diagnostics::write_semivariogram(dir / "semivariogram.csv", s, sv_cell);
      std::cout << "semivariogram written to " << (dir / "semivariogram.csv").string() << "\n";
    } else if (*met) {
      const auto truth = read_grid_field(met_truth);
      const auto fields = read_fields(met_fields);
      std::ostringstream csv;
      csv << "member,krmse\n";
      double sum = 0.0;
      for (std::size_t k = 0; k < fields.size(); ++k) {
        const double r = diagnostics::rmse(fields[k], truth);
        sum += r;
        csv << k << "," << format_double(r) << "\n";
      }
      if (!met_c.out.empty()) {
        const auto dir = out_dir(met_c, ".");
        std::ofstream(dir / "krmse.csv") << csv.str();
      }
      std::cout << "mean krmse " << format_double(sum / double(fields.size())) << " over " << fields.size()
                << " fields\n";
    } else if (*nn) {
      const double acc = diagnostics::nn_two_sample_accuracy(read_fields(nn_real), read_fields(nn_gen));
      if (!nn_c.out.empty()) {
        const auto dir = out_dir(nn_c, ".");
        std::ofstream(dir / "nn_test.csv") << "metric,value\naccuracy," << format_double(acc) << "\n";
      }
      std::cout << "1-NN accuracy " << format_double(acc) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
