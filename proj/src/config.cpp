#include "anisoflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "anisoflow/error.hpp"
#include "json.hpp"
#include "number_format.hpp"

namespace anisoflow {

namespace {

using detail::format_double;
using Entries = std::vector<std::pair<std::string, std::string>>;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::InvalidConfig, key + ": " + what);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    bad(key, "expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad(key, "expected an integer, got '" + text + "'");
  return v;
}

int to_int(const std::string& key, const std::string& text) {
  const long long v = to_integer(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) bad(key, "integer out of range");
  return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string item; in >> item;) out.push_back(item);
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

AnisotropyKind to_kind(const std::string& key, const std::string& text) {
  for (AnisotropyKind k : {AnisotropyKind::Isotropic, AnisotropyKind::Elliptic, AnisotropyKind::RegL1,
                           AnisotropyKind::RegLInf})
    if (text == to_string(k)) return k;
  bad(key, "unknown anisotropy '" + text + "' (isotropic, elliptic, reg_l1, reg_linf)");
}

const char* law_name(StepLaw::Kind k) {
  switch (k) {
    case StepLaw::Kind::Absolute: return "absolute";
    case StepLaw::Kind::Linear: return "linear";
    case StepLaw::Kind::Quadratic: return "quadratic";
  }
  return "absolute";
}

StepLaw::Kind to_law(const std::string& key, const std::string& text) {
  for (StepLaw::Kind k : {StepLaw::Kind::Absolute, StepLaw::Kind::Linear, StepLaw::Kind::Quadratic})
    if (text == law_name(k)) return k;
  bad(key, "unknown step law '" + text + "' (absolute, linear, quadratic)");
}

const char* sampling_name(WulffSampling s) {
  return s == WulffSampling::ArcLength ? "arc_length" : "normal_angle";
}

std::string doubles_text(const std::vector<double>& v) {
  std::vector<std::string> items;
  for (double x : v) items.push_back(format_double(x));
  return join(items);
}

// Dispatch table from key to setter.
using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto shape = [](RunConfig& c) -> AnisotropySpec& {
      if (!c.initial.shape) c.initial.shape.emplace();
      return *c.initial.shape;
    };
    t["anisotropy.kind"] = [](RunConfig& c, auto& k, auto& v) { c.anisotropy.kind = to_kind(k, v); };
    t["anisotropy.params"] = [](RunConfig& c, auto& k, auto& v) { c.anisotropy.params = to_doubles(k, v); };
    t["initial.source"] = [](RunConfig& c, auto& k, auto& v) {
      if (v == "wulff")
        c.initial.source = InitialCurveSpec::Source::Wulff;
      else if (v == "mesh")
        c.initial.source = InitialCurveSpec::Source::Mesh;
      else
        bad(k, "expected wulff or mesh, got '" + v + "'");
    };
    t["initial.anisotropy.kind"] = [shape](RunConfig& c, auto& k, auto& v) { shape(c).kind = to_kind(k, v); };
    t["initial.anisotropy.params"] = [shape](RunConfig& c, auto& k, auto& v) {
      shape(c).params = to_doubles(k, v);
    };
    t["initial.radius"] = [](RunConfig& c, auto& k, auto& v) { c.initial.radius = to_double(k, v); };
    t["initial.vertices"] = [](RunConfig& c, auto& k, auto& v) { c.initial.vertices = to_int(k, v); };
    t["initial.sampling"] = [](RunConfig& c, auto& k, auto& v) {
      if (v == "normal_angle")
        c.initial.sampling = WulffSampling::NormalAngle;
      else if (v == "arc_length")
        c.initial.sampling = WulffSampling::ArcLength;
      else
        bad(k, "expected normal_angle or arc_length, got '" + v + "'");
    };
    t["initial.mesh"] = [](RunConfig& c, auto&, auto& v) { c.initial.mesh = v; };
    t["time.tau_law"] = [](RunConfig& c, auto& k, auto& v) { c.tau.kind = to_law(k, v); };
    t["time.tau"] = [](RunConfig& c, auto& k, auto& v) { c.tau.value = to_double(k, v); };
    t["time.tau_tilde_law"] = [](RunConfig& c, auto& k, auto& v) { c.tau_tilde.kind = to_law(k, v); };
    t["time.tau_tilde"] = [](RunConfig& c, auto& k, auto& v) { c.tau_tilde.value = to_double(k, v); };
    t["time.h0"] = [](RunConfig& c, auto& k, auto& v) { c.h0 = to_double(k, v); };
    t["flow.lambda"] = [](RunConfig& c, auto& k, auto& v) { c.lambda = to_double(k, v); };
    t["flow.steps"] = [](RunConfig& c, auto& k, auto& v) { c.steps = to_int(k, v); };
    t["output.snapshots"] = [](RunConfig& c, auto& k, auto& v) {
      c.snapshots.clear();
      for (const std::string& item : split_list(v)) c.snapshots.push_back(to_int(k, item));
    };
    t["solver.newton_rel_tol"] = [](RunConfig& c, auto& k, auto& v) { c.solver.newton_rel_tol = to_double(k, v); };
    t["solver.newton_abs_tol"] = [](RunConfig& c, auto& k, auto& v) { c.solver.newton_abs_tol = to_double(k, v); };
    t["solver.max_newton_iter"] = [](RunConfig& c, auto& k, auto& v) { c.solver.max_newton_iter = to_int(k, v); };
    t["solver.backtrack"] = [](RunConfig& c, auto& k, auto& v) { c.solver.backtrack = to_double(k, v); };
    t["solver.armijo"] = [](RunConfig& c, auto& k, auto& v) { c.solver.armijo = to_double(k, v); };
    t["solver.min_step"] = [](RunConfig& c, auto& k, auto& v) { c.solver.min_step = to_double(k, v); };
    t["solver.theta0"] = [](RunConfig& c, auto& k, auto& v) { c.solver.theta0 = to_double(k, v); };
    t["solver.reduced_fallback"] = [](RunConfig& c, auto& k, auto& v) { c.solver.reduced_fallback = to_bool(k, v); };
    t["study.n_min"] = [](RunConfig& c, auto& k, auto& v) { c.study.n_min = to_int(k, v); };
    t["study.n_max"] = [](RunConfig& c, auto& k, auto& v) { c.study.n_max = to_int(k, v); };
    t["study.target_time"] = [](RunConfig& c, auto& k, auto& v) { c.study.target_time = to_double(k, v); };
    t["study.h0_scale"] = [](RunConfig& c, auto& k, auto& v) { c.study.h0_scale = to_double(k, v); };
    t["seed"] = [](RunConfig& c, auto& k, auto& v) {
      const long long s = to_integer(k, v);
      if (s < 0) bad(k, "seed must be nonnegative");
      c.seed = static_cast<std::uint64_t>(s);
    };
    return t;
  }();
  return table;
}

}  // namespace

AnisotropyModel AnisotropySpec::build() const {
  const std::string key = "anisotropy";
  const std::size_t n = params.size();
  switch (kind) {
    case AnisotropyKind::Isotropic:
      if (n != 0) bad(key, "isotropic takes no parameters");
      return AnisotropyModel::isotropic();
    case AnisotropyKind::Elliptic:
      if (n != 2) bad(key, "elliptic takes two semi-axes");
      if (!(params[0] > 0.0 && params[1] > 0.0)) bad(key, "semi-axes must be positive");
      return AnisotropyModel::elliptic(params[0], params[1]);
    case AnisotropyKind::RegL1:
    case AnisotropyKind::RegLInf:
      if (n != 1) bad(key, std::string(to_string(kind)) + " takes one parameter eps");
      if (!(params[0] > 0.0)) bad(key, "eps must be positive");
      return kind == AnisotropyKind::RegL1 ? AnisotropyModel::reg_l1(params[0])
                                           : AnisotropyModel::reg_linf(params[0]);
    case AnisotropyKind::QuadSum: break;
  }
  bad(key, "quad_sum cannot be configured from a file");
}

void RunConfig::validate() const {
  anisotropy.build();
  if (initial.shape) initial.shape->build();
  if (initial.source == InitialCurveSpec::Source::Wulff) {
    if (!(initial.radius > 0.0)) bad("initial.radius", "must be positive");
    if (initial.vertices < 3) bad("initial.vertices", "need at least 3 vertices");
  } else if (initial.mesh.empty()) {
    bad("initial.mesh", "a mesh source needs a path");
  }
  if (!(tau.value > 0.0)) bad("time.tau", "must be positive");
  if (!(tau_tilde.value > 0.0)) bad("time.tau_tilde", "must be positive");
  if (h0 && !(*h0 > 0.0)) bad("time.h0", "must be positive");
  if (!(lambda >= 0.0)) bad("flow.lambda", "must be nonnegative");
  if (steps < 0) bad("flow.steps", "must be nonnegative");
  for (int s : snapshots)
    if (s < 0 || s > steps) bad("output.snapshots", "index " + std::to_string(s) + " outside 0.." + std::to_string(steps));
  if (study.h0_scale < 0.0) bad("study.h0_scale", "must be nonnegative");
  if (study.target_time < 0.0) bad("study.target_time", "must be nonnegative");
  if (study.n_min < 2 || study.n_max < study.n_min || study.n_max > 20)
    bad("study", "need 2 <= n_min <= n_max <= 20");
  SolverConfig check = solver;
  check.step = {1.0, 1.0, lambda};
  try {
    check.validate();
  } catch (const Error& e) {
    bad("solver", e.what());
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  Entries e;
  e.emplace_back("anisotropy.kind", to_string(anisotropy.kind));
  e.emplace_back("anisotropy.params", doubles_text(anisotropy.params));
  e.emplace_back("initial.source", initial.source == InitialCurveSpec::Source::Wulff ? "wulff" : "mesh");
  if (initial.shape) {
    e.emplace_back("initial.anisotropy.kind", to_string(initial.shape->kind));
    e.emplace_back("initial.anisotropy.params", doubles_text(initial.shape->params));
  }
  e.emplace_back("initial.radius", format_double(initial.radius));
  e.emplace_back("initial.vertices", std::to_string(initial.vertices));
  e.emplace_back("initial.sampling", sampling_name(initial.sampling));
  if (!initial.mesh.empty()) e.emplace_back("initial.mesh", initial.mesh.string());
  e.emplace_back("time.tau_law", law_name(tau.kind));
  e.emplace_back("time.tau", format_double(tau.value));
  e.emplace_back("time.tau_tilde_law", law_name(tau_tilde.kind));
  e.emplace_back("time.tau_tilde", format_double(tau_tilde.value));
  if (h0) e.emplace_back("time.h0", format_double(*h0));
  e.emplace_back("flow.lambda", format_double(lambda));
  e.emplace_back("flow.steps", std::to_string(steps));
  std::vector<std::string> snaps;
  for (int s : snapshots) snaps.push_back(std::to_string(s));
  e.emplace_back("output.snapshots", join(snaps));
  e.emplace_back("solver.newton_rel_tol", format_double(solver.newton_rel_tol));
  e.emplace_back("solver.newton_abs_tol", format_double(solver.newton_abs_tol));
  e.emplace_back("solver.max_newton_iter", std::to_string(solver.max_newton_iter));
  e.emplace_back("solver.backtrack", format_double(solver.backtrack));
  e.emplace_back("solver.armijo", format_double(solver.armijo));
  e.emplace_back("solver.min_step", format_double(solver.min_step));
  e.emplace_back("solver.theta0", format_double(solver.theta0));
  e.emplace_back("solver.reduced_fallback", solver.reduced_fallback ? "true" : "false");
  e.emplace_back("study.n_min", std::to_string(study.n_min));
  e.emplace_back("study.n_max", std::to_string(study.n_max));
  e.emplace_back("study.target_time", format_double(study.target_time));
  e.emplace_back("study.h0_scale", format_double(study.h0_scale));
  e.emplace_back("seed", std::to_string(seed));
  return e;
}

RunConfig parse_config_entries(const std::vector<std::pair<std::string, std::string>>& entries,
                               const std::filesystem::path& base) {
  RunConfig c;
  std::map<std::string, bool> seen;
  for (const auto& [key, value] : entries) {
    const auto it = setters().find(key);
    if (it == setters().end()) bad(key, "unknown key");
    if (seen[key]) bad(key, "given twice");
    seen[key] = true;
    it->second(c, key, value);
  }
  // Absolute, so a run summary written elsewhere still points at the mesh.
  if (!c.initial.mesh.empty()) c.initial.mesh = std::filesystem::absolute(base / c.initial.mesh).lexically_normal();
  c.validate();
  return c;
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base) {
  Entries entries;
  int number = 0;
  for (std::string line; std::getline(in, line);) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(number) + ": empty key");
    entries.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return parse_config_entries(entries, base);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  const std::filesystem::path base = path.parent_path();
  if (path.extension() != ".json") return parse_config(in, base);
  Entries entries;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    for (const auto& [key, value] : j.at("config").items()) entries.emplace_back(key, value.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_config_entries(entries, base);
}

void write_config(std::ostream& out, const RunConfig& config) {
  for (const auto& [key, value] : config.entries()) out << key << " = " << value << '\n';
}

SimplicialSurface initial_curve(const RunConfig& config) {
  if (config.initial.source == InitialCurveSpec::Source::Mesh) {
    std::ifstream in(config.initial.mesh);
    if (!in) throw Error(ErrorKind::Io, "cannot open mesh " + config.initial.mesh.string());
    SimplicialSurface s = read_mesh(in);
    if (s.dim() != 1) throw Error(ErrorKind::Unsupported, "flows are implemented for closed curves only");
    return s;
  }
  const AnisotropyModel shape = (config.initial.shape ? *config.initial.shape : config.anisotropy).build();
  return SimplicialSurface::closed_polygon(
      wulff_sample(shape, config.initial.radius, config.initial.vertices, config.initial.sampling));
}

StepParameters run_step_parameters(const RunConfig& config, const SimplicialSurface& initial) {
  const double h0 = config.h0.value_or(mesh_size(initial));
  return {config.tau.evaluate(h0), config.tau_tilde.evaluate(h0), config.lambda};
}

ConvergenceSpec convergence_spec(const RunConfig& config) {
  if (config.initial.source != InitialCurveSpec::Source::Wulff)
    bad("initial.source", "a convergence study starts from a Wulff shape");
  if (config.initial.shape &&
      (config.initial.shape->kind != config.anisotropy.kind || config.initial.shape->params != config.anisotropy.params))
    bad("initial.anisotropy", "a convergence study starts from the Wulff shape of the flow anisotropy");
  if (!(config.study.target_time > 0.0)) bad("study.target_time", "must be positive");
  ConvergenceSpec spec;
  spec.model = config.anisotropy.build();
  spec.radius = config.initial.radius;
  spec.sampling = config.initial.sampling;
  spec.n_min = config.study.n_min;
  spec.n_max = config.study.n_max;
  spec.target_time = config.study.target_time;
  spec.h0_scale = config.study.h0_scale;
  spec.tau = config.tau;
  spec.tau_tilde = config.tau_tilde;
  spec.lambda = config.lambda;
  spec.solver = config.solver;
  return spec;
}

}  // namespace anisoflow
