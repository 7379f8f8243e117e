#include "anisoflow/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

#include "anisoflow/error.hpp"
#include "number_format.hpp"

namespace anisoflow {

double exact_wulff_radius(double r0, double t) {
  if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidInput, "initial radius must be positive");
  if (!(t >= 0.0)) throw Error(ErrorKind::InvalidInput, "time must be nonnegative");
  return std::pow(r0 * r0 * r0 * r0 + 2.0 * t, 0.25);
}

WulffRecursion discrete_wulff_recursion(double rk, double tau, double tau_tilde) {
  if (!(rk > 0.0) || !std::isfinite(rk)) throw Error(ErrorKind::InvalidConfig, "radius must be positive");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::InvalidConfig, "tau must be nonnegative");
  if (!(tau_tilde >= 0.0)) throw Error(ErrorKind::InvalidConfig, "tau~ must be nonnegative");
  auto f = [&](double r) { return 2.0 * r * r * (r - rk) * rk - tau; };
  double lo = rk;
  double hi = rk + tau / (2.0 * rk * rk * rk);
  if (f(lo) > 0.0 || f(hi) < 0.0) throw Error(ErrorKind::InvalidConfig, "radius recursion has no bracketing root");
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  const double r = 0.5 * (lo + hi);
  return {r, r - tau_tilde / r};
}

double projected_l2_error(const AnisotropyModel& model, const SimplicialSurface& curve, double r_exact) {
  if (curve.dim() != 1) throw Error(ErrorKind::Unsupported, "projected error is defined for curves only");
  const Eigen::VectorXd weights = lumped_weights(curve);
  double sum = 0.0;
  for (int i = 0; i < curve.vertex_count(); ++i) {
    const Vec nu = vertex_normal(curve, i);
    const Vec exact = r_exact * model.gamma_derivatives(nu, 1).gradient;
    sum += (curve.vertex(i) - exact).squaredNorm() * weights(i);
  }
  return std::sqrt(sum);
}

std::vector<double> eoc(std::span<const double> errors, std::span<const double> hs) {
  if (errors.size() != hs.size() || errors.size() < 2)
    throw Error(ErrorKind::InvalidInput, "eoc needs two equally long sequences of length at least 2");
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!(errors[i] > 0.0) || !(hs[i] > 0.0))
      throw Error(ErrorKind::InvalidInput, "eoc needs positive errors and grid sizes");
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    if (hs[i] == hs[i + 1]) throw Error(ErrorKind::InvalidInput, "eoc needs distinct grid sizes");
    out.push_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
  }
  return out;
}

double StepLaw::evaluate(double h0) const {
  switch (kind) {
    case Kind::Absolute: return value;
    case Kind::Linear: return value * h0;
    case Kind::Quadratic: return value * h0 * h0;
  }
  return value;
}

double StepLaw::invert(double tau) const {
  switch (kind) {
    case Kind::Linear: return tau / value;
    case Kind::Quadratic: return std::sqrt(tau / value);
    case Kind::Absolute: break;
  }
  throw Error(ErrorKind::InvalidInput, "an absolute step law does not determine h0");
}

void ConvergenceStudy::write_csv(std::ostream& out) const {
  out << "n,h0,h_t,error,eoc\n";
  for (const ConvergenceRow& row : rows) {
    out << row.n << ',' << detail::format_double(row.h0) << ',' << detail::format_double(row.h_t) << ','
        << detail::format_double(row.error) << ',';
    if (row.eoc) out << detail::format_double(*row.eoc);
    out << '\n';
  }
}

namespace {

ConvergenceRow run_row(const ConvergenceSpec& spec, int n, double scale, long long steps_min) {
  ConvergenceRow row;
  row.n = n;
  row.h0 = scale / std::ldexp(1.0, n);
  row.steps = static_cast<int>(steps_min << (spec.tau.power() * (n - spec.n_min)));
  row.tau = spec.target_time / row.steps;
  const double h_eff = spec.tau.power() > 0 ? spec.tau.invert(row.tau) : row.h0;
  row.tau_tilde = spec.tau_tilde.evaluate(h_eff);

  SolverConfig config = spec.solver;
  config.step = {row.tau, row.tau_tilde, spec.lambda};
  config.steps = row.steps;
  const SimplicialSurface initial =
      SimplicialSurface::closed_polygon(wulff_sample(spec.model, spec.radius, 1 << n, spec.sampling));
  const FlowTrajectory trajectory = run_flow(spec.model, initial, config, [&](const FlowRecord& r) {
    row.max_newton_iterations = std::max(row.max_newton_iterations, r.diagnostics.newton_iterations);
    if (r.step > 0 && r.diagnostics.energy_outer > r.diagnostics.energy_outer_trivial + 1e-10)
      row.energy_decrease = false;
  });
  const SimplicialSurface& final_curve = trajectory.records.back().surface;
  row.h_t = mesh_size(final_curve);
  row.error = projected_l2_error(spec.model, final_curve, exact_wulff_radius(spec.radius, spec.target_time));
  return row;
}

}  // namespace

ConvergenceStudy run_convergence_study(const ConvergenceSpec& spec, int threads) {
  if (spec.n_min < 2 || spec.n_max < spec.n_min || spec.n_max > 20)
    throw Error(ErrorKind::InvalidConfig, "study needs 2 <= n_min <= n_max <= 20");
  if (!(spec.target_time > 0.0)) throw Error(ErrorKind::InvalidConfig, "study target time must be positive");
  if (!(spec.tau.value > 0.0) || !(spec.tau_tilde.value > 0.0))
    throw Error(ErrorKind::InvalidConfig, "step laws need positive coefficients");
  if (spec.h0_scale < 0.0) throw Error(ErrorKind::InvalidConfig, "h0 scale must be nonnegative");

  const double scale = spec.h0_scale > 0.0 ? spec.h0_scale : wulff_perimeter(spec.model, spec.radius);
  const double tau_coarse = spec.tau.evaluate(scale / std::ldexp(1.0, spec.n_min));
  const long long steps_min = std::max(1LL, std::llround(spec.target_time / tau_coarse));

  const int count = spec.n_max - spec.n_min + 1;
  ConvergenceStudy study;
  study.target_time = spec.target_time;
  study.rows.resize(count);
  std::vector<std::exception_ptr> failures(count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        study.rows[i] = run_row(spec, spec.n_min + i, scale, steps_min);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int pool = std::clamp(threads, 1, count);
  std::vector<std::thread> workers;
  for (int t = 1; t < pool; ++t) workers.emplace_back(worker);
  worker();
  for (std::thread& t : workers) t.join();

  for (int i = 0; i < count; ++i) {
    if (!failures[i]) continue;
    const std::string where = "study row n=" + std::to_string(spec.n_min + i) + ": ";
    try {
      std::rethrow_exception(failures[i]);
    } catch (const NonConvergenceError& e) {
      throw NonConvergenceError(where + e.what(), e.residual_history());
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }

  for (int i = 1; i < count; ++i) {
    const double errors[] = {study.rows[i - 1].error, study.rows[i].error};
    const double hs[] = {study.rows[i - 1].h_t, study.rows[i].h_t};
    study.rows[i].eoc = eoc(errors, hs).front();
  }
  return study;
}

std::vector<EnergyRow> energy_report(const FlowTrajectory& trajectory, const std::optional<ExactSolution>& exact) {
  std::vector<EnergyRow> rows;
  rows.reserve(trajectory.records.size());
  for (const FlowRecord& r : trajectory.records) {
    EnergyRow row;
    row.step = r.step;
    row.time = r.time;
    row.energy_outer = r.diagnostics.energy_outer;
    row.energy_outer_trivial = r.diagnostics.energy_outer_trivial;
    row.area = r.diagnostics.area;
    row.enclosed_area = r.diagnostics.enclosed_area;
    row.willmore = r.diagnostics.willmore;
    row.newton_iterations = r.diagnostics.newton_iterations;
    row.residual = r.diagnostics.residual;
    if (exact)
      row.error = projected_l2_error(exact->model, r.surface, exact_wulff_radius(exact->r0, r.time));
    rows.push_back(row);
  }
  return rows;
}

void write_energy_csv(std::ostream& out, std::span<const EnergyRow> rows) {
  using detail::format_double;
  out << "step,time,energy_outer,energy_outer_trivial,area,enclosed_area,willmore,newton_iterations,residual,error\n";
  for (const EnergyRow& r : rows) {
    out << r.step << ',' << format_double(r.time) << ',' << format_double(r.energy_outer) << ','
        << format_double(r.energy_outer_trivial) << ',' << format_double(r.area) << ','
        << format_double(r.enclosed_area) << ',' << format_double(r.willmore) << ',' << r.newton_iterations << ','
        << format_double(r.residual) << ',';
    if (r.error) out << format_double(*r.error);
    out << '\n';
  }
}

}  // namespace anisoflow
