/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "subsurf/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "subsurf/errors.hpp"
#include "subsurf/io.hpp"

namespace subsurf::harness {

namespace {

namespace fs = std::filesystem;

// Thrown by value parsers; turned into a ConfigIssue by the caller.
struct BadValue {
  std::string message;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) throw BadValue{"expected a number, got '" + v + "'"};
  return out;
}

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw BadValue{"expected a non-negative integer, got '" + v + "'"};
  return out;
}

std::size_t parse_count(const std::string& v) {
  const auto n = parse_uint(v);
  if (n == 0) throw BadValue{"expected a positive integer, got '" + v + "'"};
  return std::size_t(n);
}

double parse_positive(const std::string& v) {
  const double x = parse_real(v);
  if (!(x > 0.0)) throw BadValue{"expected a positive number, got '" + v + "'"};
  return x;
}

double parse_nonnegative(const std::string& v) {
  const double x = parse_real(v);
  if (!(x >= 0.0)) throw BadValue{"expected a non-negative number, got '" + v + "'"};
  return x;
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw BadValue{"empty entry in list '" + v + "'"};
    out.push_back(parse_real(item));
  }
  if (out.empty()) throw BadValue{"expected a comma-separated list of numbers"};
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

template <typename E>
E parse_enum(const std::string& v, std::initializer_list<std::pair<const char*, E>> names) {
  std::string allowed;
  for (const auto& [n, e] : names) {
    if (v == n) return e;
    if (!allowed.empty()) allowed += ", ";
    allowed += n;
  }
  throw BadValue{"expected one of {" + allowed + "}, got '" + v + "'"};
}

const std::initializer_list<std::pair<const char*, flowsim::ExperimentMode>> kModes = {
    {"static", flowsim::ExperimentMode::static_heads}, {"tomography", flowsim::ExperimentMode::tomography}};
const std::initializer_list<std::pair<const char*, TruthSource>> kSources = {
    {"file", TruthSource::file},           {"generator", TruthSource::generator},
    {"grf", TruthSource::grf},             {"fractures", TruthSource::fractures},
    {"channels", TruthSource::channels}};
const std::initializer_list<std::pair<const char*, GeneratorKind>> kKinds = {
    {"neural", GeneratorKind::neural}, {"linear", GeneratorKind::linear}, {"piecewise", GeneratorKind::piecewise}};
const std::initializer_list<std::pair<const char*, varinv::StepMode>> kStepModes = {
    {"gauss-newton", varinv::StepMode::gauss_newton},
    {"levenberg-marquardt", varinv::StepMode::levenberg_marquardt}};

template <typename E>
std::string enum_name(E e, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [n, v] : names) {
    if (v == e) return n;
  }
  return "?";
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> parse;
  // nullopt: key is not written (optional and unset, or inactive block)
  std::function<std::optional<std::string>(const RunConfig&)> emit;
};

#define REAL_FIELD(KEY, MEMBER, PARSER)                                                   \
  Field {                                                                                 \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = PARSER(v); },               \
        [](const RunConfig& c) { return std::optional<std::string>(format_double(c.MEMBER)); } \
  }
#define UINT_FIELD(KEY, MEMBER, PARSER)                                                     \
  Field {                                                                                   \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = decltype(c.MEMBER)(PARSER(v)); }, \
        [](const RunConfig& c) { return std::optional<std::string>(std::to_string(c.MEMBER)); } \
  }

bool is_esmda(const RunConfig& c) { return c.inversion == InversionKind::esmda; }
bool is_var(const RunConfig& c) { return c.inversion == InversionKind::variational; }

template <typename F>
auto only_if(bool (*pred)(const RunConfig&), F f) {
  return [pred, f](const RunConfig& c) -> std::optional<std::string> {
    if (!pred(c)) return std::nullopt;
    return f(c);
  };
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      UINT_FIELD("grid.rows", grid_rows, parse_count),
      UINT_FIELD("grid.cols", grid_cols, parse_count),
      REAL_FIELD("grid.cell_size", cell_size, parse_positive),
      REAL_FIELD("grid.thickness", thickness, parse_positive),
      REAL_FIELD("boundary.west_head", west_head, parse_real),
      REAL_FIELD("boundary.east_head", east_head, parse_real),
      REAL_FIELD("sources.recharge", recharge, parse_real),
      {"experiment.mode", [](RunConfig& c, const std::string& v) { c.mode = parse_enum(v, kModes); },
       [](const RunConfig& c) { return std::optional(enum_name(c.mode, kModes)); }},
      {"experiment.layout",
       [](RunConfig& c, const std::string& v) {
         c.layout_case = parse_enum<int>(v, {{"case1", 1}, {"case2", 2}, {"case3", 3}, {"case4", 4}});
       },
       [](const RunConfig& c) { return std::optional("case" + std::to_string(c.layout_case)); }},
      REAL_FIELD("experiment.pumping_rate", pumping_rate, parse_nonnegative),

      {"truth.source", [](RunConfig& c, const std::string& v) { c.truth_source = parse_enum(v, kSources); },
       [](const RunConfig& c) { return std::optional(enum_name(c.truth_source, kSources)); }},
      {"truth.file", [](RunConfig& c, const std::string& v) { c.truth_file = v; },
       [](const RunConfig& c) {
         return c.truth_file.empty() ? std::nullopt : std::optional(c.truth_file.string());
       }},
      {"truth.z", [](RunConfig& c, const std::string& v) { c.truth_z = parse_list(v); },
       [](const RunConfig& c) { return c.truth_z.empty() ? std::nullopt : std::optional(format_list(c.truth_z)); }},
      UINT_FIELD("truth.seed", truth_seed, parse_uint),
      UINT_FIELD("truth.fracture_count", fracture_count, parse_uint),
      UINT_FIELD("truth.channel_count", channel_count, parse_uint),
      REAL_FIELD("truth.grf_scale", grf_scale, parse_positive),

      REAL_FIELD("noise.sigma", noise_sigma, parse_positive),
      UINT_FIELD("noise.seed", noise_seed, parse_uint),
      {"noise.assumed_sigma", [](RunConfig& c, const std::string& v) { c.assumed_sigma = parse_positive(v); },
       [](const RunConfig& c) {
         return c.assumed_sigma ? std::optional(format_double(*c.assumed_sigma)) : std::nullopt;
       }},

      {"generator.kind", [](RunConfig& c, const std::string& v) { c.generator_kind = parse_enum(v, kKinds); },
       [](const RunConfig& c) { return std::optional(enum_name(c.generator_kind, kKinds)); }},
      {"generator.weights", [](RunConfig& c, const std::string& v) { c.generator_weights = v; },
       [](const RunConfig& c) {
         return c.generator_weights.empty() ? std::nullopt : std::optional(c.generator_weights.string());
       }},
      UINT_FIELD("generator.n_z", n_z, parse_count),
      UINT_FIELD("generator.seed", generator_seed, parse_uint),
      REAL_FIELD("generator.amplitude", generator_amplitude, parse_positive),
      REAL_FIELD("generator.offset", generator_offset, parse_real),
      REAL_FIELD("generator.step", piecewise_step, parse_positive),
      REAL_FIELD("generator.beta", piecewise_beta, parse_real),
      REAL_FIELD("generator.scaling.lo", scaling_lo, parse_real),
      REAL_FIELD("generator.scaling.hi", scaling_hi, parse_real),

      {"esmda.n_a", [](RunConfig& c, const std::string& v) { c.esmda_n_a = parse_count(v); },
       only_if(is_esmda, [](const RunConfig& c) { return std::to_string(c.esmda_n_a); })},
      {"esmda.n_r", [](RunConfig& c, const std::string& v) { c.esmda_n_r = parse_count(v); },
       only_if(is_esmda, [](const RunConfig& c) { return std::to_string(c.esmda_n_r); })},
      {"esmda.energy", [](RunConfig& c, const std::string& v) { c.esmda_energy = parse_positive(v); },
       only_if(is_esmda, [](const RunConfig& c) { return format_double(c.esmda_energy); })},
      {"esmda.seed", [](RunConfig& c, const std::string& v) { c.esmda_seed = parse_uint(v); },
       only_if(is_esmda, [](const RunConfig& c) { return std::to_string(c.esmda_seed); })},
      {"variational.mode", [](RunConfig& c, const std::string& v) { c.var_mode = parse_enum(v, kStepModes); },
       only_if(is_var, [](const RunConfig& c) { return enum_name(c.var_mode, kStepModes); })},
      {"variational.max_iterations",
       [](RunConfig& c, const std::string& v) { c.var_max_iterations = parse_count(v); },
       only_if(is_var, [](const RunConfig& c) { return std::to_string(c.var_max_iterations); })},
      {"variational.fd_step", [](RunConfig& c, const std::string& v) { c.var_fd_step = parse_positive(v); },
       only_if(is_var, [](const RunConfig& c) { return format_double(c.var_fd_step); })},
      {"variational.gradient_tolerance",
       [](RunConfig& c, const std::string& v) { c.var_gradient_tolerance = parse_positive(v); },
       only_if(is_var, [](const RunConfig& c) { return format_double(c.var_gradient_tolerance); })},
      {"variational.z0_seed", [](RunConfig& c, const std::string& v) { c.var_z0_seed = parse_uint(v); },
       only_if(is_var, [](const RunConfig& c) { return std::to_string(c.var_z0_seed); })},

      {"diagnostics.binarize_threshold",
       [](RunConfig& c, const std::string& v) { c.binarize_threshold = parse_real(v); },
       [](const RunConfig& c) {
         return c.binarize_threshold ? std::optional(format_double(*c.binarize_threshold)) : std::nullopt;
       }},
      {"sweep.noise_sigmas", [](RunConfig& c, const std::string& v) { c.sweep_noise_sigmas = parse_list(v); },
       [](const RunConfig& c) {
         return c.sweep_noise_sigmas.empty() ? std::nullopt : std::optional(format_list(c.sweep_noise_sigmas));
       }},
      {"sweep.pumping_rates", [](RunConfig& c, const std::string& v) { c.sweep_pumping_rates = parse_list(v); },
       [](const RunConfig& c) {
         return c.sweep_pumping_rates.empty() ? std::nullopt : std::optional(format_list(c.sweep_pumping_rates));
       }},
      {"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
       [](const RunConfig& c) { return std::optional(c.output_dir.string()); }},
      UINT_FIELD("run.threads", threads, parse_uint),
  };
  return f;
}

#undef REAL_FIELD
#undef UINT_FIELD

void check(const RunConfig& c, std::vector<ConfigIssue>& issues,
           const std::map<std::string, std::size_t>& line_of) {
  auto add = [&](const std::string& key, const std::string& msg) {
    const auto it = line_of.find(key);
    issues.push_back({it == line_of.end() ? 0 : it->second, key, msg});
  };
  if (c.grid_rows < 3 || c.grid_cols < 3) add("grid.rows", "grid must be at least 3x3");
  if (c.mode == flowsim::ExperimentMode::tomography && !(c.pumping_rate > 0.0)) {
    add("experiment.pumping_rate", "tomography needs a positive pumping rate");
  }
  if (c.truth_source == TruthSource::file) {
    if (c.truth_file.empty()) add("truth.file", "required when truth.source=file");
    else if (!fs::exists(c.truth_file)) add("truth.file", "file not found: " + c.truth_file.string());
  }
  if (!c.truth_z.empty() && c.truth_z.size() != c.n_z) {
    add("truth.z", "has " + std::to_string(c.truth_z.size()) + " entries, generator.n_z is " +
                       std::to_string(c.n_z));
  }
  if (c.generator_kind == GeneratorKind::neural) {
    if (c.generator_weights.empty()) add("generator.weights", "required when generator.kind=neural");
    else if (!fs::exists(c.generator_weights)) {
      add("generator.weights", "file not found: " + c.generator_weights.string());
    }
  }
  if (!(c.scaling_hi > c.scaling_lo)) add("generator.scaling.hi", "must exceed generator.scaling.lo");
  if (c.inversion == InversionKind::esmda) {
    if (c.esmda_n_r < 2) add("esmda.n_r", "needs at least 2 members");
    if (!(c.esmda_energy <= 1.0)) add("esmda.energy", "must lie in (0, 1]");
  }
  for (double s : c.sweep_noise_sigmas) {
    if (!(s > 0.0)) add("sweep.noise_sigmas", "entries must be positive");
  }
  for (double q : c.sweep_pumping_rates) {
    if (!(q > 0.0)) add("sweep.pumping_rates", "entries must be positive");
  }
  if (c.output_dir.empty()) add("output.dir", "must not be empty");
}

}  // namespace

const std::vector<std::string>& required_keys() {
  static const std::vector<std::string> keys = {"experiment.mode", "experiment.layout", "truth.source",
                                                "noise.sigma",     "generator.kind",    "output.dir"};
  return keys;
}

RunConfig parse_config(const std::string& text) {
  std::vector<ConfigIssue> issues;
  std::map<std::string, std::pair<std::string, std::size_t>> entries;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line_no, "", "expected 'key = value'"});
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) {
      issues.push_back({line_no, "", "missing key before '='"});
      continue;
    }
    if (key.rfind("manifest.", 0) == 0) continue;
    if (!entries.emplace(key, std::pair{value, line_no}).second) {
      issues.push_back({line_no, key, "duplicate key (first set on line " +
                                         std::to_string(entries[key].second) + ")"});
    }
  }

  RunConfig cfg;
  std::map<std::string, std::size_t> line_of;
  for (const auto& [k, v] : entries) line_of[k] = v.second;

  const bool has_esmda = std::any_of(entries.begin(), entries.end(),
                                     [](const auto& e) { return e.first.rfind("esmda.", 0) == 0; });
  const bool has_var = std::any_of(entries.begin(), entries.end(),
                                   [](const auto& e) { return e.first.rfind("variational.", 0) == 0; });
  if (has_esmda == has_var) {
    issues.push_back({0, "", has_esmda ? "both esmda.* and variational.* blocks given; exactly one is allowed"
                                       : "no inversion block; give esmda.* or variational.* keys"});
  }
  cfg.inversion = has_var && !has_esmda ? InversionKind::variational : InversionKind::esmda;

  std::set<std::string> known;
  for (const auto& f : fields()) {
    known.insert(f.key);
    const auto it = entries.find(f.key);
    if (it == entries.end()) continue;
    if (it->second.first.empty()) {
      issues.push_back({it->second.second, f.key, "empty value"});
      continue;
    }
    try {
      f.parse(cfg, it->second.first);
    } catch (const BadValue& e) {
      issues.push_back({it->second.second, f.key, e.message});
    }
  }
  for (const auto& [k, v] : entries) {
    if (k.rfind("provenance.", 0) == 0) {
      cfg.provenance[k.substr(11)] = v.first;
    } else if (!known.count(k)) {
      issues.push_back({v.second, k, "unknown key"});
    }
  }
  for (const auto& k : required_keys()) {
    if (!entries.count(k)) issues.push_back({0, k, "missing required key"});
  }
  if (cfg.mode == flowsim::ExperimentMode::tomography && !entries.count("experiment.pumping_rate") &&
      entries.count("experiment.mode")) {
    issues.push_back({0, "experiment.pumping_rate", "missing required key (tomography mode)"});
  }
  if (has_esmda && !has_var) {
    for (const char* k : {"esmda.n_a", "esmda.n_r"}) {
      if (!entries.count(k)) issues.push_back({0, k, "missing required key (esmda block)"});
    }
  }
  if (has_var && !has_esmda && !entries.count("variational.mode")) {
    issues.push_back({0, "variational.mode", "missing required key (variational block)"});
  }
  if (issues.empty()) check(cfg, issues, line_of);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

void validate_config(const RunConfig& cfg) {
  std::vector<ConfigIssue> issues;
  check(cfg, issues, {});
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  // Referenced inputs are relative to the configuration file.
  const fs::path base = path.parent_path();
  std::string text = ss.str();
  std::ostringstream resolved;
  std::istringstream lines(text);
  std::string raw;
  while (std::getline(lines, raw)) {
    const auto eq = raw.find('=');
    if (eq != std::string::npos) {
      const std::string key = trim(std::string_view(raw).substr(0, eq));
      if (key == "truth.file" || key == "generator.weights") {
        std::string value = raw.substr(eq + 1);
        const auto hash = value.find('#');
        value = trim(std::string_view(value).substr(0, hash));
        if (!value.empty() && fs::path(value).is_relative()) {
          raw = key + " = " + (base / value).lexically_normal().string();
        }
      }
    }
    resolved << raw << '\n';
  }
  return parse_config(resolved.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const auto v = f.emit(cfg);
    if (!v) continue;
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) out << '\n';
      section = s;
    }
    out << f.key << " = " << *v << '\n';
  }
  if (!cfg.provenance.empty()) out << '\n';
  for (const auto& [k, v] : cfg.provenance) out << "provenance." << k << " = " << v << '\n';
  return out.str();
}

flowsim::ExperimentSpec experiment_spec(const RunConfig& cfg) {
  flowsim::ExperimentSpec e;
  e.grid = {cfg.grid_rows, cfg.grid_cols, cfg.cell_size, cfg.thickness};
  e.boundary = {cfg.west_head, cfg.east_head};
  e.sources = {cfg.recharge, {}};
  e.mode = cfg.mode;
  e.pumping_rate = cfg.pumping_rate;
  e.layout = flowsim::WellLayout::preset_case(cfg.layout_case, e.grid);
  if (cfg.mode == flowsim::ExperimentMode::tomography) {
    // Tomography always pumps from the lattice wells.
    for (auto& w : e.layout.wells) w.role = flowsim::WellRole::pumping_capable;
  }
  e.validate();
  return e;
}

std::string to_string(TruthSource s) { return enum_name(s, kSources); }
std::string to_string(GeneratorKind k) { return enum_name(k, kKinds); }

}  // namespace subsurf::harness
