#include "jumpnls/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "jumpnls/io.hpp"

namespace jumpnls {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
    const YAML::Mark m = node.Mark();
    fail_at(m, msg);
  }

  [[noreturn]] void fail_at(const YAML::Mark& m, const std::string& msg) const {
    std::ostringstream out;
    out << source_;
    if (!m.is_null()) out << ':' << m.line + 1 << ':' << m.column + 1;
    out << ": " << msg;
    throw ConfigError(out.str());
  }

  void require_map(const YAML::Node& node, const std::string& where) const {
    if (!node.IsMap()) fail(node, "'" + where + "' must be a mapping");
  }

  void allow_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys) const {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node) {
      const std::string key = kv.first.Scalar();
      if (!allowed.contains(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
    }
  }

  std::string scalar(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) fail(node, "'" + key + "' must be a scalar");
    return node.Scalar();
  }

  double number(const YAML::Node& node, const std::string& key) const {
    const std::string s = scalar(node, key);
    if (s == "inf" || s == ".inf" || s == "+inf" || s == "+.inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-.inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(node, "'" + key + "' must be a number, got '" + s + "'");
    return v;
  }

  std::uint64_t unsigned_integer(const YAML::Node& node, const std::string& key) const {
    const std::string s = scalar(node, key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      fail(node, "'" + key + "' must be a non-negative integer, got '" + s + "'");
    return v;
  }

  bool boolean(const YAML::Node& node, const std::string& key) const {
    const std::string s = scalar(node, key);
    if (s == "true") return true;
    if (s == "false") return false;
    fail(node, "'" + key + "' must be true or false, got '" + s + "'");
  }

  std::vector<double> numbers(const YAML::Node& node, const std::string& key) const {
    if (!node.IsSequence()) fail(node, "'" + key + "' must be a list of numbers");
    std::vector<double> out;
    for (const auto& item : node) out.push_back(number(item, key));
    return out;
  }

  std::vector<std::string> strings(const YAML::Node& node, const std::string& key) const {
    if (!node.IsSequence()) fail(node, "'" + key + "' must be a list");
    std::vector<std::string> out;
    for (const auto& item : node) out.push_back(scalar(item, key));
    return out;
  }

 private:
  std::string source_;
};

ProfileSpec read_profile(const Reader& r, const YAML::Node& node, const std::string& where,
                         const std::filesystem::path& base, bool mark) {
  r.require_map(node, where);
  ProfileSpec p;
  p.kind = mark ? "gaussian-bump" : "gaussian";
  for (const auto& kv : node) {
    const std::string key = kv.first.Scalar();
    const YAML::Node& v = kv.second;
    if (key == "profile") {
      p.kind = r.scalar(v, key);
      const bool ok = mark ? (p.kind == "gaussian-bump" || p.kind == "file")
                           : (p.kind == "gaussian" || p.kind == "sech" || p.kind == "file");
      if (!ok)
        r.fail(v, "unknown profile '" + p.kind + "' in " + where +
                      (mark ? " (expected gaussian-bump or file)" : " (expected gaussian, sech or file)"));
    } else if (key == "amp") {
      p.amplitude = r.number(v, key);
    } else if (key == "width") {
      p.width = r.number(v, key);
      if (!(p.width > 0.0)) r.fail(v, "'width' must be positive");
    } else if (key == "center") {
      p.center = r.numbers(v, key);
    } else if (key == "path") {
      std::filesystem::path file = r.scalar(v, key);
      p.file = file.is_absolute() ? file : std::filesystem::absolute(base / file).lexically_normal();
    } else {
      r.fail(kv.first, "unknown key '" + key + "' in " + where);
    }
  }
  if (p.kind == "file" && p.file.empty()) r.fail(node, where + ": file profile needs 'path'");
  return p;
}

void emit_profile(YAML::Emitter& out, const ProfileSpec& p) {
  out << YAML::BeginMap << YAML::Key << "profile" << YAML::Value << p.kind;
  if (p.kind == "file") {
    out << YAML::Key << "path" << YAML::Value << p.file.string();
  } else {
    out << YAML::Key << "amp" << YAML::Value << format_number(p.amplitude);
    out << YAML::Key << "width" << YAML::Value << format_number(p.width);
    out << YAML::Key << "center" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double c : p.center) out << format_number(c);
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
}

std::string yaml_number(double x) {
  if (std::isinf(x)) return x > 0 ? ".inf" : "-.inf";
  return format_number(x);
}

void emit_numbers(YAML::Emitter& out, const std::vector<double>& xs) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : xs) out << yaml_number(x);
  out << YAML::EndSeq;
}

std::vector<double> origin_if_empty(const std::vector<double>& c, int d) {
  return c.empty() ? std::vector<double>(static_cast<std::size_t>(d), 0.0) : c;
}

}  // namespace

ComplexField profile_field(const GridSpec& grid, const ProfileSpec& spec) {
  if (spec.kind == "file") {
    ComplexField f = read_field(spec.file);
    if (!(f.grid() == grid)) throw DomainError("profile file " + spec.file.string() + " does not match the grid");
    return f;
  }
  const std::vector<double> c = origin_if_empty(spec.center, grid.dimension());
  if (static_cast<int>(c.size()) != grid.dimension())
    throw DomainError("profile center must have one entry per dimension");
  const std::size_t n = grid.points();
  ComplexField f(grid);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double r2 = 0.0;
    if (grid.dimension() == 1) {
      const double dx = grid.coordinate(i) - c[0];
      r2 = dx * dx;
    } else {
      const double dx = grid.coordinate(i / n) - c[0];
      const double dy = grid.coordinate(i % n) - c[1];
      r2 = dx * dx + dy * dy;
    }
    const double s = std::sqrt(r2) / spec.width;
    const double v = (spec.kind == "sech") ? 1.0 / std::cosh(s) : std::exp(-0.5 * s * s);
    f[i] = spec.amplitude * v;
  }
  return f;
}

GridSpec RunConfig::grid() const { return GridSpec(dimension, points, half_width); }

ComplexField RunConfig::initial_field() const { return profile_field(grid(), initial); }

LevyMeasure RunConfig::measure() const {
  const GridSpec g = grid();
  auto make_mark = [&](const ProfileSpec& p) -> MarkPtr {
    if (p.kind == "file") return std::make_shared<const MarkFunction>(MarkFunction::from_field(profile_field(g, p)));
    return std::make_shared<const MarkFunction>(
        MarkFunction::gaussian_bump(g, p.amplitude, origin_if_empty(p.center, dimension), p.width));
  };
  std::vector<Atom> atoms;
  for (const auto& a : this->atoms) atoms.push_back({a.rate, make_mark(a.mark)});
  std::vector<AmplitudeFamily> fams;
  for (const auto& f : families)
    fams.push_back({make_mark(f.base), AmplitudeDensity(f.scale, f.exponent, f.lower, f.upper)});
  return LevyMeasure(std::move(atoms), std::move(fams));
}

NoiseCoefficients RunConfig::coefficients() const { return make_coefficients(coefficient_name, coefficient_params); }

EnsembleConfig RunConfig::ensemble() const {
  EnsembleConfig e{.initial = initial_field(),
                   .measure = measure(),
                   .coefficients = coefficients(),
                   .solver = solver,
                   .paths = paths,
                   .root_seed = seed,
                   .truncation_levels = truncation_levels,
                   .dt_levels = dt_levels,
                   .coupled = coupled,
                   .threads = threads};
  return e;
}

RunConfig parse_config(const std::string& text, const std::string& source_name,
                       const std::filesystem::path& base_dir) {
  const Reader r(source_name);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    r.fail_at(e.mark, e.msg);
  }
  if (root.IsNull()) r.fail_at(YAML::Mark::null_mark(), "empty configuration");
  r.require_map(root, "configuration");
  r.allow_keys(root, "configuration",
               {"seed", "grid", "initial", "solver", "noise", "coefficients", "ensemble", "dispersive", "hypotheses",
                "output"});

  RunConfig c;
  c.source = source_name;
  try {
    if (root["seed"]) c.seed = r.unsigned_integer(root["seed"], "seed");

    if (const YAML::Node g = root["grid"]) {
      r.require_map(g, "grid");
      r.allow_keys(g, "grid", {"dimension", "points", "half_width"});
      if (g["dimension"]) c.dimension = static_cast<int>(r.unsigned_integer(g["dimension"], "dimension"));
      if (g["points"]) c.points = r.unsigned_integer(g["points"], "points");
      if (g["half_width"]) c.half_width = r.number(g["half_width"], "half_width");
      try {
        (void)c.grid();
      } catch (const DomainError& e) {
        r.fail(g, e.what());
      }
    }

    if (const YAML::Node n = root["initial"]) c.initial = read_profile(r, n, "initial", base_dir, false);

    if (const YAML::Node s = root["solver"]) {
      r.require_map(s, "solver");
      r.allow_keys(s, "solver",
                   {"lambda", "alpha", "horizon", "dt", "record_stride", "epsilon", "boundary_threshold", "gamma",
                    "test_mode"});
      SolverConfig& v = c.solver;
      if (s["lambda"]) v.lambda = r.number(s["lambda"], "lambda");
      if (s["alpha"]) v.alpha = r.number(s["alpha"], "alpha");
      if (s["horizon"]) v.horizon = r.number(s["horizon"], "horizon");
      if (s["dt"]) v.dt = r.number(s["dt"], "dt");
      if (s["record_stride"]) v.record_stride = r.unsigned_integer(s["record_stride"], "record_stride");
      if (s["epsilon"]) v.truncation.epsilon = r.number(s["epsilon"], "epsilon");
      if (s["boundary_threshold"]) v.boundary_threshold = r.number(s["boundary_threshold"], "boundary_threshold");
      if (s["gamma"]) v.gamma = r.number(s["gamma"], "gamma");
      if (s["test_mode"]) v.test_mode = r.boolean(s["test_mode"], "test_mode");
      SolverConfig probe = v;
      if (probe.record_stride == 0) probe.record_stride = 1;
      try {
        probe.validate();
      } catch (const DomainError& e) {
        r.fail(s, e.what());
      }
      if (!(v.truncation.epsilon >= 0.0)) r.fail(s["epsilon"], "'epsilon' must be >= 0");
    }

    if (const YAML::Node n = root["noise"]) {
      r.require_map(n, "noise");
      r.allow_keys(n, "noise", {"atoms", "families"});
      if (const YAML::Node atoms = n["atoms"]) {
        if (!atoms.IsSequence()) r.fail(atoms, "'atoms' must be a list");
        for (const auto& a : atoms) {
          r.require_map(a, "atom");
          r.allow_keys(a, "atom", {"rate", "mark"});
          if (!a["rate"] || !a["mark"]) r.fail(a, "an atom needs 'rate' and 'mark'");
          AtomSpec spec;
          spec.rate = r.number(a["rate"], "rate");
          if (!(spec.rate >= 0.0) || !std::isfinite(spec.rate)) r.fail(a["rate"], "'rate' must be finite and >= 0");
          spec.mark = read_profile(r, a["mark"], "mark", base_dir, true);
          c.atoms.push_back(spec);
        }
      }
      if (const YAML::Node fams = n["families"]) {
        if (!fams.IsSequence()) r.fail(fams, "'families' must be a list");
        for (const auto& f : fams) {
          r.require_map(f, "family");
          r.allow_keys(f, "family", {"base", "scale", "exponent", "lower", "upper"});
          if (!f["base"]) r.fail(f, "a family needs 'base'");
          FamilySpec spec;
          spec.base = read_profile(r, f["base"], "base", base_dir, true);
          if (f["scale"]) spec.scale = r.number(f["scale"], "scale");
          if (f["exponent"]) spec.exponent = r.number(f["exponent"], "exponent");
          if (f["lower"]) spec.lower = r.number(f["lower"], "lower");
          if (f["upper"]) spec.upper = r.number(f["upper"], "upper");
          try {
            (void)AmplitudeDensity(spec.scale, spec.exponent, spec.lower, spec.upper);
          } catch (const DomainError& e) {
            r.fail(f, e.what());
          }
          c.families.push_back(spec);
        }
      }
    }

    if (const YAML::Node k = root["coefficients"]) {
      r.require_map(k, "coefficients");
      r.allow_keys(k, "coefficients", {"name", "params"});
      if (k["name"]) c.coefficient_name = r.scalar(k["name"], "name");
      if (const YAML::Node p = k["params"]) {
        r.require_map(p, "params");
        for (const auto& kv : p) c.coefficient_params[kv.first.Scalar()] = r.number(kv.second, kv.first.Scalar());
      }
      try {
        (void)make_coefficients(c.coefficient_name, c.coefficient_params);
      } catch (const DomainError& e) {
        r.fail(k, e.what());
      }
    }

    if (const YAML::Node e = root["ensemble"]) {
      r.require_map(e, "ensemble");
      r.allow_keys(e, "ensemble",
                   {"paths", "truncation_levels", "dt_levels", "coupled", "threads", "sigmas", "quadrature"});
      if (e["paths"]) {
        c.paths = r.unsigned_integer(e["paths"], "paths");
        if (c.paths == 0) r.fail(e["paths"], "'paths' must be >= 1");
      }
      if (e["truncation_levels"]) c.truncation_levels = r.numbers(e["truncation_levels"], "truncation_levels");
      if (e["dt_levels"]) c.dt_levels = r.numbers(e["dt_levels"], "dt_levels");
      if (e["coupled"]) c.coupled = r.boolean(e["coupled"], "coupled");
      if (e["threads"]) c.threads = r.unsigned_integer(e["threads"], "threads");
      if (e["sigmas"]) c.sigmas = r.number(e["sigmas"], "sigmas");
      if (e["quadrature"]) {
        c.quadrature = r.scalar(e["quadrature"], "quadrature");
        if (c.quadrature != "left-point" && c.quadrature != "trapezoid")
          r.fail(e["quadrature"], "'quadrature' must be left-point or trapezoid");
      }
    }

    if (const YAML::Node d = root["dispersive"]) {
      r.require_map(d, "dispersive");
      r.allow_keys(d, "dispersive", {"p", "times"});
      if (d["p"]) c.dispersive_p = r.numbers(d["p"], "p");
      if (d["times"]) c.dispersive_times = r.numbers(d["times"], "times");
    }

    if (const YAML::Node h = root["hypotheses"]) {
      r.require_map(h, "hypotheses");
      r.allow_keys(h, "hypotheses", {"require", "samples"});
      if (h["require"]) {
        c.require = r.strings(h["require"], "require");
        for (const auto& name : c.require)
          if (name != "growth" && name != "mass-pathwise" && name != "mass-mean")
            r.fail(h["require"], "unknown hypothesis '" + name + "' (expected growth, mass-pathwise or mass-mean)");
      }
      if (h["samples"]) c.hypothesis_samples = r.unsigned_integer(h["samples"], "samples");
    }

    if (const YAML::Node o = root["output"]) {
      r.require_map(o, "output");
      r.allow_keys(o, "output", {"directory", "dump_times"});
      if (o["directory"]) {
        std::filesystem::path dir = r.scalar(o["directory"], "directory");
        c.output_directory = dir.is_absolute() ? dir : std::filesystem::absolute(base_dir / dir).lexically_normal();
      }
      if (o["dump_times"]) c.dump_times = r.numbers(o["dump_times"], "dump_times");
    }
  } catch (const YAML::Exception& e) {
    r.fail_at(e.mark, e.msg);
  }
  if (!root["hypotheses"] || !root["hypotheses"]["require"]) c.require = {"growth", "mass-pathwise", "mass-mean"};
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": cannot read configuration (" + e.what() + ")");
  }
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  return parse_config(text, path.string(), base);
}

std::string emit_config(const RunConfig& c) {
  using YAML::BeginMap;
  using YAML::EndMap;
  using YAML::Key;
  using YAML::Value;
  YAML::Emitter out;
  out << BeginMap;
  out << Key << "seed" << Value << std::to_string(c.seed);

  out << Key << "grid" << Value << BeginMap;
  out << Key << "dimension" << Value << std::to_string(c.dimension);
  out << Key << "points" << Value << std::to_string(c.points);
  out << Key << "half_width" << Value << format_number(c.half_width);
  out << EndMap;

  ProfileSpec initial = c.initial;
  if (initial.kind != "file") initial.center = origin_if_empty(initial.center, c.dimension);
  out << Key << "initial" << Value;
  emit_profile(out, initial);

  const SolverConfig& s = c.solver;
  out << Key << "solver" << Value << BeginMap;
  out << Key << "lambda" << Value << format_number(s.lambda);
  out << Key << "alpha" << Value << format_number(s.alpha);
  out << Key << "horizon" << Value << format_number(s.horizon);
  out << Key << "dt" << Value << format_number(s.dt);
  out << Key << "record_stride" << Value << std::to_string(s.record_stride);
  out << Key << "epsilon" << Value << format_number(s.truncation.epsilon);
  out << Key << "boundary_threshold" << Value << format_number(s.boundary_threshold);
  out << Key << "gamma" << Value << format_number(s.gamma);
  out << Key << "test_mode" << Value << (s.test_mode ? "true" : "false");
  out << EndMap;

  out << Key << "noise" << Value << BeginMap;
  out << Key << "atoms" << Value << YAML::BeginSeq;
  for (const auto& a : c.atoms) {
    ProfileSpec m = a.mark;
    if (m.kind != "file") m.center = origin_if_empty(m.center, c.dimension);
    out << BeginMap << Key << "rate" << Value << format_number(a.rate) << Key << "mark" << Value;
    emit_profile(out, m);
    out << EndMap;
  }
  out << YAML::EndSeq;
  out << Key << "families" << Value << YAML::BeginSeq;
  for (const auto& f : c.families) {
    ProfileSpec m = f.base;
    if (m.kind != "file") m.center = origin_if_empty(m.center, c.dimension);
    out << BeginMap << Key << "base" << Value;
    emit_profile(out, m);
    out << Key << "scale" << Value << format_number(f.scale);
    out << Key << "exponent" << Value << format_number(f.exponent);
    out << Key << "lower" << Value << format_number(f.lower);
    out << Key << "upper" << Value << format_number(f.upper);
    out << EndMap;
  }
  out << YAML::EndSeq << EndMap;

  out << Key << "coefficients" << Value << BeginMap;
  out << Key << "name" << Value << c.coefficient_name;
  out << Key << "params" << Value << BeginMap;
  for (const auto& [k, v] : c.coefficient_params) out << Key << k << Value << format_number(v);
  out << EndMap << EndMap;

  out << Key << "ensemble" << Value << BeginMap;
  out << Key << "paths" << Value << std::to_string(c.paths);
  out << Key << "truncation_levels" << Value;
  emit_numbers(out, c.truncation_levels);
  out << Key << "dt_levels" << Value;
  emit_numbers(out, c.dt_levels);
  out << Key << "coupled" << Value << (c.coupled ? "true" : "false");
  out << Key << "threads" << Value << std::to_string(c.threads);
  out << Key << "sigmas" << Value << format_number(c.sigmas);
  out << Key << "quadrature" << Value << c.quadrature;
  out << EndMap;

  out << Key << "dispersive" << Value << BeginMap;
  out << Key << "p" << Value;
  emit_numbers(out, c.dispersive_p);
  out << Key << "times" << Value;
  emit_numbers(out, c.dispersive_times);
  out << EndMap;

  out << Key << "hypotheses" << Value << BeginMap;
  out << Key << "require" << Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& r : c.require) out << r;
  out << YAML::EndSeq;
  out << Key << "samples" << Value << std::to_string(c.hypothesis_samples);
  out << EndMap;

  out << Key << "output" << Value << BeginMap;
  if (!c.output_directory.empty()) out << Key << "directory" << Value << c.output_directory.string();
  out << Key << "dump_times" << Value;
  emit_numbers(out, c.dump_times);
  out << EndMap;

  out << EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace jumpnls
