#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "anisoflow/lagrangian.hpp"

namespace anisoflow {

struct SolverConfig {
  double newton_rel_tol = 1e-9;   // relative to the initial residual max-norm
  double newton_abs_tol = 1e-12;  // absolute floor
  int max_newton_iter = 50;
  double backtrack = 0.5;
  double armijo = 1e-4;
  double min_step = std::ldexp(1.0, -30);
  double theta0 = 1e-3;
  bool reduced_fallback = true;  // see time_step
  StepParameters step;
  int steps = 0;

  /// Throws InvalidConfig on non-positive tolerances or invalid step parameters.
  void validate() const;
  double tolerance(double initial_residual) const {
    return std::max(newton_rel_tol * initial_residual, newton_abs_tol);
  }
};

struct InnerSolution {
  NodalField y;
  int iterations = 0;
  double residual = 0.0;
};

/// Y[X] = argmin_Y E_in[X, Y], Newton from Y = X (or from `guess`) with Armijo
/// backtracking on E_in. Converged when the max-norm of dE_in/dY is below the
/// tolerance, taken relative to the residual at Y = X.
InnerSolution solve_inner(const AnisotropyModel& model, const SimplicialSurface& x, double tau_tilde,
                          const SolverConfig& config, const NodalField* guess = nullptr);

/// P solving d2E_in/dY2[X, Y] P = dE_out/dY. tau = 0 is accepted and gives P = 0.
NodalField solve_adjoint(const AnisotropyModel& model, const SimplicialSurface& previous, const NodalField& x,
                         const NodalField& y, double tau, double tau_tilde);

struct StepDiagnostics {
  double energy_outer = 0.0;          // E_out[X^k, X^{k+1}, Y[X^{k+1}]]
  double energy_outer_trivial = 0.0;  // E_out[X^k, X^k, Y[X^k]]
  double area = 0.0;                  // A_gamma[X^{k+1}]
  double enclosed_area = 0.0;
  double willmore = 0.0;              // M[Y - X, X] / (2 tau~^2)
  int newton_iterations = 0;
  double residual = 0.0;              // final max-norm of grad L
  std::vector<double> residual_history;
};

struct StepResult {
  SimplicialSurface surface;
  NodalField y;
  NodalField p;
  StepDiagnostics diagnostics;
};

/// One step of the nested scheme: full-space Newton on grad L = 0 over (X, Y, P).
/// If its merit line search stalls and config.reduced_fallback is set, the step
/// continues from the last iterate by minimizing E_out[X^k, X, Y[X]] over X with
/// Y and P kept feasible. Convergence is always judged on the max-norm of grad L.
StepResult time_step(const AnisotropyModel& model, const SimplicialSurface& previous, const SolverConfig& config);

struct FlowRecord {
  int step = 0;
  double time = 0.0;
  SimplicialSurface surface;
  StepDiagnostics diagnostics;  // step 0: energies and Newton counts are zero
};

struct FlowTrajectory {
  std::vector<FlowRecord> records;  // step 0 first
};

using FlowObserver = std::function<void(const FlowRecord&)>;

/// config.steps successive time steps. Failures are rethrown with the step index prepended.
FlowTrajectory run_flow(const AnisotropyModel& model, const SimplicialSurface& initial, const SolverConfig& config,
                        const FlowObserver& observer = {});

}  // namespace anisoflow
