#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "anisoflow/solver.hpp"

namespace anisoflow {

/// R(t) = (R0^4 + 2t)^(1/4), the radius of a self-similarly expanding Wulff shape.
double exact_wulff_radius(double r0, double t);

struct WulffRecursion {
  double radius = 0.0;        // R, root of 2 R^2 (R - R^k) R^k = tau above R^k
  double inner_radius = 0.0;  // R~ = R - tau~ / R
};

/// One step of the semi-discrete radius recursion (R - R^k)/tau = 1/(2 R^k R^2).
WulffRecursion discrete_wulff_recursion(double rk, double tau, double tau_tilde);

/// Lumped L2 distance between a curve and the Wulff shape of radius r_exact,
/// each node compared with r_exact * grad gamma(nu_i).
double projected_l2_error(const AnisotropyModel& model, const SimplicialSurface& curve, double r_exact);

/// log(e_i / e_{i+1}) / log(h_i / h_{i+1}) for consecutive pairs.
std::vector<double> eoc(std::span<const double> errors, std::span<const double> hs);

/// tau = value (Absolute), value * h0 (Linear) or value * h0^2 (Quadratic).
struct StepLaw {
  enum class Kind { Absolute, Linear, Quadratic };
  Kind kind = Kind::Absolute;
  double value = 0.0;

  int power() const { return static_cast<int>(kind); }
  double evaluate(double h0) const;
  /// h0 with evaluate(h0) == tau; only for Linear and Quadratic.
  double invert(double tau) const;
};

struct ConvergenceSpec {
  AnisotropyModel model = AnisotropyModel::isotropic();
  double radius = 1.0;
  WulffSampling sampling = WulffSampling::NormalAngle;
  int n_min = 4;
  int n_max = 8;
  double target_time = 0.0;
  double h0_scale = 0.0;  // h0 = h0_scale / 2^n; 0 means the Wulff perimeter
  StepLaw tau{StepLaw::Kind::Quadratic, 1.0};
  StepLaw tau_tilde{StepLaw::Kind::Quadratic, 1.0};
  double lambda = 0.0;
  SolverConfig solver;  // step parameters and step count are set per row
};

struct ConvergenceRow {
  int n = 0;
  double h0 = 0.0;   // nominal h0_scale / 2^n
  double h_t = 0.0;  // mesh size at the target time
  double error = 0.0;
  std::optional<double> eoc;
  int steps = 0;
  double tau = 0.0;
  double tau_tilde = 0.0;
  int max_newton_iterations = 0;
  bool energy_decrease = true;  // E_out never exceeded its trivial value (+1e-10)
};

struct ConvergenceStudy {
  double target_time = 0.0;
  std::vector<ConvergenceRow> rows;

  /// Header n,h0,h_t,error,eoc; the first row has an empty eoc.
  void write_csv(std::ostream& out) const;
};

/// Runs one flow per n in [n_min, n_max] and measures the error at target_time.
///
/// The step count is fixed on the coarsest row as round(t / tau(h0)) (at
/// least 1) and scaled by 2^p per refinement for a law h0^p, so every row
/// ends exactly at t. tau and tau~ are evaluated at the h0 implied by
/// tau = t / K. Rows run concurrently on up to `threads` threads.
ConvergenceStudy run_convergence_study(const ConvergenceSpec& spec, int threads = 1);

struct EnergyRow {
  int step = 0;
  double time = 0.0;
  double energy_outer = 0.0;
  double energy_outer_trivial = 0.0;
  double area = 0.0;
  double enclosed_area = 0.0;
  double willmore = 0.0;
  int newton_iterations = 0;
  double residual = 0.0;
  std::optional<double> error;
};

struct ExactSolution {
  AnisotropyModel model;
  double r0 = 1.0;
};

/// Per-step diagnostics, with the Wulff error when an exact solution is supplied.
std::vector<EnergyRow> energy_report(const FlowTrajectory& trajectory,
                                     const std::optional<ExactSolution>& exact = std::nullopt);

/// Header step,time,energy_outer,energy_outer_trivial,area,enclosed_area,willmore,newton_iterations,residual,error
void write_energy_csv(std::ostream& out, std::span<const EnergyRow> rows);

}  // namespace anisoflow
