#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "subsurf/errors.hpp"
#include "subsurf/genlatent/generator.hpp"
#include "subsurf/harness/config.hpp"
#include "subsurf/harness/run.hpp"
#include "subsurf/io.hpp"

using namespace subsurf;
using namespace subsurf::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("subsurf_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string minimal(const fs::path& out) {
  return "# desk benchmark\n"
         "experiment.mode = tomography\n"
         "experiment.layout = case4\n"
         "experiment.pumping_rate = 50\n"
         "truth.source = grf\n"
         "noise.sigma = 0.02\n"
         "generator.kind = linear\n"
         "esmda.n_a = 8\n"
         "esmda.n_r = 200\n"
         "output.dir = " + out.string() + "\n";
}

std::string small_run(const fs::path& out) {
  return "grid.rows = 24\ngrid.cols = 24\ngrid.cell_size = 10\n"
         "experiment.mode = tomography\nexperiment.layout = case4\nexperiment.pumping_rate = 50\n"
         "truth.source = generator\ntruth.seed = 3\n"
         "noise.sigma = 0.02\nnoise.seed = 4\n"
         "generator.kind = linear\ngenerator.n_z = 9\n"
         "esmda.n_a = 3\nesmda.n_r = 24\nesmda.seed = 5\n"
         "diagnostics.binarize_threshold = 0.5\n"
         "run.threads = 2\n"
         "provenance.note = unit test\n"
         "output.dir = " + out.string() + "\n";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string drop_line(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind(key + " =", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("minimal config parses and round-trips") {
  const auto cfg = parse_config(minimal("/tmp/x"));
  CHECK(cfg.esmda_n_a == 8);
  CHECK(cfg.esmda_n_r == 200);
  CHECK(cfg.inversion == InversionKind::esmda);
  CHECK(cfg.pumping_rate == 50.0);
  CHECK(experiment_spec(cfg).observation_count() == 240);
  const auto again = parse_config(serialize_config(cfg));
  CHECK(again == cfg);

  auto rich = parse_config(small_run("/tmp/y"));
  rich.truth_z = std::vector<double>(9, 0.25);
  rich.sweep_noise_sigmas = {0.02, 0.05};
  rich.assumed_sigma = 0.1;
  CHECK(parse_config(serialize_config(rich)) == rich);
  CHECK(rich.provenance.at("note") == "unit test");

  auto var = parse_config(drop_line(drop_line(minimal("/tmp/z"), "esmda.n_a"), "esmda.n_r") +
                          "variational.mode = levenberg-marquardt\nvariational.fd_step = 0.01\n");
  CHECK(var.inversion == InversionKind::variational);
  CHECK(var.var_fd_step == 0.01);
  CHECK(parse_config(serialize_config(var)) == var);
}

TEST_CASE("config errors name key and line") {
  const std::string base = minimal("/tmp/x");
  try {
    parse_config(base + "experiment.pmping_rate = 5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(e.issues().size() == 1);
    CHECK(e.issues()[0].key == "experiment.pmping_rate");
    CHECK(e.issues()[0].line == 11);
    CHECK(std::string(e.what()).find("pmping_rate") != std::string::npos);
  }
  try {
    parse_config(base + "grid.rows = many\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.issues()[0].key == "grid.rows");
    CHECK(e.issues()[0].line == 11);
  }
  CHECK_THROWS_AS(parse_config(base + "noise.sigma = 0.05\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "variational.mode = gauss-newton\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(drop_line(drop_line(base, "esmda.n_a"), "esmda.n_r")), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "experiment.layout2 case1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "truth.z = 1,,2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(base + "generator.scaling.lo = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(drop_line(base, "truth.source") + "truth.source = file\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(drop_line(base, "generator.kind") + "generator.kind = neural\n"), ConfigError);
  // manifest keys are ignored
  CHECK_NOTHROW(parse_config(base + "manifest.status = complete\n"));
}

TEST_CASE("every required key is enforced") {
  std::vector<std::string> keys = required_keys();
  keys.push_back("experiment.pumping_rate");
  keys.push_back("esmda.n_a");
  keys.push_back("esmda.n_r");
  for (const auto& key : keys) {
    CAPTURE(key);
    try {
      parse_config(drop_line(minimal("/tmp/x"), key));
      FAIL("omission accepted");
    } catch (const ConfigError& e) {
      bool named = false;
      for (const auto& i : e.issues()) named |= i.key == key;
      CHECK(named);
    }
  }
}

TEST_CASE("relative input paths resolve against the config file") {
  const auto dir = scratch("relpath");
  fs::create_directories(dir);
  write_grid_field(dir / "truth.gfld", GridField(24, 24, 0.0));
  std::ofstream(dir / "run.cfg") << drop_line(small_run(dir / "out"), "truth.source")
                                 << "truth.source = file\ntruth.file = truth.gfld\n";
  const auto cfg = load_config(dir / "run.cfg");
  CHECK(cfg.truth_file == dir / "truth.gfld");
  fs::remove_all(dir);
}

TEST_CASE("end-to-end ES-MDA run is reproducible") {
  const auto out = scratch("run_a");
  const auto cfg = parse_config(small_run(out));
  const auto m = execute_run(cfg);
  CHECK(m.complete);
  CHECK(m.metrics.observation_count == 240);
  CHECK(read_observations(out / "d_obs.csv").size() == 240);
  CHECK(m.metrics.misfit_final < m.metrics.misfit_initial);
  for (const char* f : {"truth_log10k.gfld", "d_true.csv", "posterior_mean_log10k.gfld",
                        "posterior_variance_log10k.gfld", "krmse.csv", "summary.csv", "binarized_mean.gfld",
                        "esmda/misfit.csv", "esmda/iter_3/Z.gfld", "manifest"}) {
    CAPTURE(f);
    CHECK(fs::exists(out / f));
  }
  const auto manifest = slurp(out / "manifest");
  CHECK(manifest.find("manifest.status = complete") != std::string::npos);

  // Re-derive from the manifest alone, with one thread instead of two.
  auto again = parse_config(manifest);
  const auto out_b = scratch("run_b");
  again.output_dir = out_b;
  again.threads = 1;
  execute_run(again);
  for (const char* f : {"truth_log10k.gfld", "d_obs.csv", "d_fit.csv", "posterior_mean_log10k.gfld",
                        "posterior_variance_log10k.gfld", "krmse.csv", "summary.csv", "esmda/iter_3/D.csv"}) {
    CAPTURE(f);
    CHECK(slurp(out / f) == slurp(out_b / f));
  }
  fs::remove_all(out);
  fs::remove_all(out_b);
}

TEST_CASE("variational run") {
  const auto out = scratch("run_var");
  auto text = drop_line(drop_line(drop_line(small_run(out), "esmda.n_a"), "esmda.n_r"), "esmda.seed");
  text += "variational.mode = gauss-newton\nvariational.max_iterations = 5\n";
  const auto m = execute_run(parse_config(text));
  CHECK(m.complete);
  CHECK(fs::exists(out / "variational/trajectory.csv"));
  CHECK(!fs::exists(out / "posterior_variance_log10k.gfld"));
  CHECK(m.metrics.misfit_final <= m.metrics.misfit_initial);
  fs::remove_all(out);
}

TEST_CASE("error-level sweep creates one child per level") {
  const auto out = scratch("sweep");
  auto cfg = parse_config(small_run(out));
  cfg.esmda_n_a = 1;
  cfg.esmda_n_r = 8;
  cfg.sweep_noise_sigmas = {0.02, 0.05, 0.2, 0.5};
  const auto m = execute_run(cfg);
  REQUIRE(m.children.size() == 4);
  for (const char* name : {"sigma_0.02", "sigma_0.05", "sigma_0.2", "sigma_0.5"}) {
    CAPTURE(name);
    CHECK(fs::exists(out / name / "manifest"));
    CHECK(fs::exists(out / name / "d_obs.csv"));
  }
  const auto child = parse_config(slurp(out / "sigma_0.2" / "manifest"));
  CHECK(child.noise_sigma == 0.2);
  CHECK(child.sweep_noise_sigmas.empty());
  fs::remove_all(out);
}

TEST_CASE("failures leave an incomplete manifest") {
  const auto out = scratch("fail");
  fs::create_directories(out);
  const auto spec = genlatent::GeneratorSpec::gaussian_6x6({4, 4, 2});
  genlatent::write_generator(out / "g.wggw", {spec, genlatent::zero_weights(spec)});
  auto text = drop_line(drop_line(small_run(out / "run"), "generator.kind"), "generator.n_z");
  text += "generator.kind = neural\ngenerator.n_z = 36\ngenerator.weights = " + (out / "g.wggw").string() + "\n";
  CHECK_THROWS_AS(execute_run(parse_config(text)), SpecError);
  const auto manifest = slurp(out / "run" / "manifest");
  CHECK(manifest.find("manifest.status = incomplete") != std::string::npos);
  CHECK(manifest.find("manifest.error") != std::string::npos);
  CHECK(manifest.find("manifest.digest.generator_weights") != std::string::npos);
  fs::remove_all(out);
}
