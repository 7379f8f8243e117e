#include "anisoflow/commands.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace anisoflow {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void make_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.exceptions(std::ios::badbit | std::ios::failbit);
  return out;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  try {
    std::ofstream out = open_output(path);
    body(out);
  } catch (const std::ios::failure&) {
    throw Error(ErrorKind::Io, "write failed for " + path.string());
  }
}

json config_json(const RunConfig& config) {
  json j = json::object();
  for (const auto& [key, value] : config.entries()) j[key] = value;
  return j;
}

// The error column is only meaningful when the flow starts at a Wulff shape
// of its own anisotropy and the lambda term is off.
std::optional<ExactSolution> exact_solution(const RunConfig& config) {
  if (config.initial.source != InitialCurveSpec::Source::Wulff || config.lambda != 0.0) return std::nullopt;
  if (config.initial.shape &&
      (config.initial.shape->kind != config.anisotropy.kind || config.initial.shape->params != config.anisotropy.params))
    return std::nullopt;
  return ExactSolution{config.anisotropy.build(), config.initial.radius};
}

json row_json(const EnergyRow& r) {
  json j;
  j["step"] = r.step;
  j["time"] = r.time;
  j["energy_outer"] = r.energy_outer;
  j["energy_outer_trivial"] = r.energy_outer_trivial;
  j["area"] = r.area;
  j["enclosed_area"] = r.enclosed_area;
  j["willmore"] = r.willmore;
  j["newton_iterations"] = r.newton_iterations;
  j["residual"] = r.residual;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

}  // namespace

int exit_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidInput:
    case ErrorKind::Unsupported: return exit_code::config;
    case ErrorKind::NonConvergence:
    case ErrorKind::NearSingular: return exit_code::nonconvergence;
    case ErrorKind::Io: return exit_code::io;
  }
  return exit_code::config;
}

void cmd_run(const RunConfig& config, const fs::path& out, std::ostream& log) {
  config.validate();
  const AnisotropyModel model = config.anisotropy.build();
  const SimplicialSurface initial = initial_curve(config);
  SolverConfig solver = config.solver;
  solver.step = run_step_parameters(config, initial);
  solver.steps = config.steps;
  make_directory(out);

  FlowTrajectory done;
  std::vector<std::string> snapshot_files;
  auto observer = [&](const FlowRecord& r) {
    done.records.push_back(r);
    if (std::find(config.snapshots.begin(), config.snapshots.end(), r.step) == config.snapshots.end()) return;
    const std::string name = "snapshot_" + std::to_string(r.step) + ".csv";
    write_file(out / name, [&](std::ostream& o) { write_snapshot_csv(o, r.surface); });
    snapshot_files.push_back(name);
  };

  std::exception_ptr failure;
  std::string message;
  try {
    run_flow(model, initial, solver, observer);
  } catch (const Error& e) {
    if (exit_status(e.kind()) != exit_code::nonconvergence) throw;
    failure = std::current_exception();
    message = e.what();
  }

  const std::vector<EnergyRow> rows = energy_report(done, exact_solution(config));
  write_file(out / "diagnostics.csv", [&](std::ostream& o) { write_energy_csv(o, rows); });

  json summary;
  summary["config"] = config_json(config);
  summary["anisotropy"] = model.describe();
  summary["vertices"] = initial.vertex_count();
  summary["h0"] = config.h0.value_or(mesh_size(initial));
  summary["tau"] = solver.step.tau;
  summary["tau_tilde"] = solver.step.tau_tilde;
  summary["lambda"] = solver.step.lambda;
  summary["status"] = failure ? "nonconvergence" : "ok";
  if (failure) summary["message"] = message;
  const int completed = std::max(0, static_cast<int>(done.records.size()) - 1);
  summary["completed_steps"] = completed;
  summary["snapshots"] = snapshot_files;
  bool decreasing = true;
  int max_iterations = 0;
  json steps = json::array();
  for (const EnergyRow& r : rows) {
    steps.push_back(row_json(r));
    if (r.step > 0 && r.energy_outer > r.energy_outer_trivial + 1e-10) decreasing = false;
    max_iterations = std::max(max_iterations, r.newton_iterations);
  }
  summary["energy_decrease"] = decreasing;
  summary["max_newton_iterations"] = max_iterations;
  summary["steps"] = std::move(steps);
  write_file(out / "run.json", [&](std::ostream& o) { o << summary.dump(2) << '\n'; });

  log << model.describe() << ", " << initial.vertex_count() << " vertices, tau " << solver.step.tau << ", tau~ "
      << solver.step.tau_tilde << ": " << completed << " of " << config.steps << " steps, max "
      << max_iterations << " Newton iterations\n";
  if (failure) std::rethrow_exception(failure);
}

ConvergenceStudy cmd_convergence(const RunConfig& config, const fs::path& out, int threads, std::ostream& log) {
  config.validate();
  const ConvergenceSpec spec = convergence_spec(config);
  make_directory(out);
  const ConvergenceStudy study = run_convergence_study(spec, threads);
  write_file(out / "convergence.csv", [&](std::ostream& o) { study.write_csv(o); });

  json summary;
  summary["config"] = config_json(config);
  summary["anisotropy"] = spec.model.describe();
  summary["target_time"] = study.target_time;
  json rows = json::array();
  for (const ConvergenceRow& r : study.rows) {
    json j;
    j["n"] = r.n;
    j["h0"] = r.h0;
    j["h_t"] = r.h_t;
    j["error"] = r.error;
    j["eoc"] = r.eoc ? json(*r.eoc) : json(nullptr);
    j["steps"] = r.steps;
    j["tau"] = r.tau;
    j["tau_tilde"] = r.tau_tilde;
    j["max_newton_iterations"] = r.max_newton_iterations;
    j["energy_decrease"] = r.energy_decrease;
    rows.push_back(std::move(j));
  }
  summary["rows"] = std::move(rows);
  write_file(out / "study.json", [&](std::ostream& o) { o << summary.dump(2) << '\n'; });

  for (const ConvergenceRow& r : study.rows) {
    log << "n=" << r.n << " h0=" << r.h0 << " h_t=" << r.h_t << " error=" << r.error;
    if (r.eoc) log << " eoc=" << *r.eoc;
    log << " steps=" << r.steps << " newton<=" << r.max_newton_iterations << '\n';
  }
  return study;
}

bool cmd_verify(const VerifyOptions& options, std::ostream& log) {
  const VerificationReport report = run_verification(options);
  report.write(log);
  log << (report.passed() ? "all properties pass" : "some properties FAIL") << '\n';
  return report.passed();
}

}  // namespace anisoflow
