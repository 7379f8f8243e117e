#include "anisoflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "anisoflow/error.hpp"

namespace anisoflow {

namespace {

constexpr int kDenseFallbackVertices = 512;
constexpr double kRoundoffStep = 1e-13;
constexpr double kEnergyRoundoff = 64.0 * std::numeric_limits<double>::epsilon();
constexpr double kEdgeFraction = 0.1;

std::string step_failure(const char* what, int iterations, double residual) {
  std::ostringstream msg;
  msg << what << " after " << iterations << " Newton iterations, residual " << residual;
  return msg.str();
}

// Symmetric positive (semi)definite systems: LDL^T, then LU.
Eigen::VectorXd solve_symmetric(const SparseMatrix& a, const Eigen::VectorXd& b) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
  double pivot = 0.0;
  if (ldlt.info() == Eigen::Success) {
    pivot = ldlt.vectorD().cwiseAbs().minCoeff();
    const double scale = ldlt.vectorD().cwiseAbs().maxCoeff();
    if (pivot > 1e-14 * scale) {
      Eigen::VectorXd x = ldlt.solve(b);
      if (x.allFinite()) return x;
    }
  }
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu(a);
  if (lu.info() == Eigen::Success) {
    Eigen::VectorXd x = lu.solve(b);
    if (x.allFinite() && (a * x - b).norm() <= 1e-8 * (b.norm() + 1.0)) return x;
  }
  std::ostringstream msg;
  msg << "inner Hessian is singular, smallest pivot " << pivot;
  throw Error(ErrorKind::NearSingular, msg.str());
}

// Symmetric indefinite KKT system.
Eigen::VectorXd solve_kkt(const SparseMatrix& a, const Eigen::VectorXd& b, int vertices) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() == Eigen::Success) {
    Eigen::VectorXd x = lu.solve(b);
    if (x.allFinite()) return x;
  }
  if (vertices <= kDenseFallbackVertices) {
    const Eigen::MatrixXd dense(a);
    Eigen::FullPivLU<Eigen::MatrixXd> full(dense);
    if (full.isInvertible()) return full.solve(b);
  }
  throw Error(ErrorKind::NearSingular, "KKT matrix is singular");
}

// Largest alpha in (0, 1] for which no simplex edge of coords + alpha dir is
// shorter than kEdgeFraction of its current length. Keeps Newton iterates away
// from collapsed edges, where gamma is not differentiable.
double step_limit(const SimplicialSurface& surface, const NodalField& coords, const NodalField& dir) {
  const int nodes = surface.dim() + 1;
  double limit = 1.0;
  for (int t = 0; t < surface.element_count(); ++t) {
    const LocalVector c = surface.gather(coords, t);
    const LocalVector d = surface.gather(dir, t);
    for (int i = 0; i < nodes; ++i)
      for (int j = i + 1; j < nodes; ++j) {
        const Vec e = c.segment(j * nodes, nodes) - c.segment(i * nodes, nodes);
        const Vec de = d.segment(j * nodes, nodes) - d.segment(i * nodes, nodes);
        // |e + alpha de|^2 = kEdgeFraction^2 |e|^2 at the smaller root of a alpha^2 + b alpha + c.
        const double a = de.squaredNorm();
        const double b = 2.0 * e.dot(de);
        const double c = (1.0 - kEdgeFraction * kEdgeFraction) * e.squaredNorm();
        const double disc = b * b - 4.0 * a * c;
        if (a == 0.0 || b >= 0.0 || disc < 0.0) continue;
        limit = std::min(limit, (-b - std::sqrt(disc)) / (2.0 * a));
      }
  }
  return limit;
}

bool acceptable_mesh(const SimplicialSurface& surface, const NodalField& coords) {
  return coords.allFinite() && is_nondegenerate(surface.with_coordinates(coords));
}

}  // namespace

void SolverConfig::validate() const {
  if (!(newton_rel_tol > 0.0) || !(newton_abs_tol > 0.0))
    throw Error(ErrorKind::InvalidConfig, "Newton tolerances must be positive");
  if (max_newton_iter < 1) throw Error(ErrorKind::InvalidConfig, "max_newton_iter must be at least 1");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw Error(ErrorKind::InvalidConfig, "backtracking factor must lie in (0, 1)");
  if (!(armijo > 0.0 && armijo < 0.5)) throw Error(ErrorKind::InvalidConfig, "armijo constant must lie in (0, 1/2)");
  if (!(min_step > 0.0 && min_step <= 1.0)) throw Error(ErrorKind::InvalidConfig, "min_step must lie in (0, 1]");
  if (!(theta0 >= 0.0 && theta0 <= 1.0)) throw Error(ErrorKind::InvalidConfig, "theta0 must lie in [0, 1]");
  if (steps < 0) throw Error(ErrorKind::InvalidConfig, "step count must be nonnegative");
  step.validate();
}

InnerSolution solve_inner(const AnisotropyModel& model, const SimplicialSurface& x, double tau_tilde,
                          const SolverConfig& config, const NodalField* guess) {
  if (!(tau_tilde > 0.0)) throw Error(ErrorKind::InvalidConfig, "tau~ must be positive");
  require_nondegenerate(x);

  InnerSolution out;
  out.y = x.coordinates();
  InnerDerivatives d = energy_inner_derivatives(model, x, out.y, tau_tilde);
  const double tol = config.tolerance(d.gradient.lpNorm<Eigen::Infinity>());
  if (guess) {
    require_aligned(*guess, x, "initial Y");
    if (acceptable_mesh(x, *guess)) {
      InnerDerivatives g = energy_inner_derivatives(model, x, *guess, tau_tilde);
      if (g.value <= d.value) {
        out.y = *guess;
        d = std::move(g);
      }
    }
  }
  double residual = d.gradient.lpNorm<Eigen::Infinity>();
  std::vector<double> history{residual};
  while (residual > tol) {
    if (out.iterations >= config.max_newton_iter)
      throw NonConvergenceError(step_failure("inner problem did not converge", out.iterations, residual), history);
    const Eigen::VectorXd delta = solve_symmetric(d.hessian, -d.gradient);
    // E_in is convex in Y for curves, so Armijo on the energy is safe. Once the
    // predicted decrease drowns in the roundoff of E_in the energy test cannot
    // decide, and a step is taken when it reduces the residual instead. Using
    // the residual test earlier lets the iteration cycle.
    const double slope = d.gradient.dot(delta);
    const bool energy_resolved = -slope > kEnergyRoundoff * std::abs(d.value);
    double alpha = step_limit(x, out.y, delta);
    for (;;) {
      const NodalField trial = out.y + alpha * delta;
      if (slope < 0.0 && acceptable_mesh(x, trial)) {
        try {
          InnerDerivatives t = energy_inner_derivatives(model, x, trial, tau_tilde);
          const double r = t.gradient.lpNorm<Eigen::Infinity>();
          if (t.value <= d.value + config.armijo * alpha * slope ||
              (!energy_resolved && r <= (1.0 - config.armijo * alpha) * residual)) {
            out.y = trial;
            d = std::move(t);
            break;
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NearSingular) throw;
        }
      }
      alpha *= config.backtrack;
      if (alpha < config.min_step) break;
    }
    // Y is optimal to the precision of E_in once the Newton decrement drowns in roundoff.
    if (alpha < config.min_step) {
      if (!energy_resolved) break;
      throw NonConvergenceError(step_failure("inner line search failed", out.iterations, residual), history);
    }
    ++out.iterations;
    residual = d.gradient.lpNorm<Eigen::Infinity>();
    history.push_back(residual);
    // A full Newton correction at roundoff size: no further progress is possible.
    if (alpha == 1.0 && delta.lpNorm<Eigen::Infinity>() <= kRoundoffStep * (1.0 + out.y.lpNorm<Eigen::Infinity>()))
      break;
  }
  out.residual = residual;
  return out;
}

NodalField solve_adjoint(const AnisotropyModel& model, const SimplicialSurface& previous, const NodalField& x,
                         const NodalField& y, double tau, double tau_tilde) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::InvalidConfig, "tau must be nonnegative");
  if (!(tau_tilde > 0.0)) throw Error(ErrorKind::InvalidConfig, "tau~ must be positive");
  require_aligned(x, previous, "X");
  require_aligned(y, previous, "Y");
  if (tau == 0.0) return NodalField::Zero(x.size());
  const SimplicialSurface current = previous.with_coordinates(x);
  const MixedOrder orders[] = {m_derivative::dZ, m_derivative::dZZ};
  const MGammaDerivatives m = m_gamma_derivatives(model, y - x, current, orders);
  const AGammaDerivatives a = a_gamma_derivatives(model, previous.with_coordinates(y), 2);
  const SparseMatrix hessian = m.dZZ() + 2.0 * tau_tilde * a.second();
  return solve_symmetric(hessian, tau / (tau_tilde * tau_tilde) * m.dZ());
}

namespace {

// Shared state of the Newton iteration for one time step. s stacks (X, Y, P).
struct StepContext {
  const AnisotropyModel& model;
  const SimplicialSurface& previous;
  const SolverConfig& config;
  int n = 0;

  Eigen::Ref<const Eigen::VectorXd> x(const Eigen::VectorXd& s) const { return s.segment(0, n); }
  Eigen::Ref<const Eigen::VectorXd> y(const Eigen::VectorXd& s) const { return s.segment(n, n); }
  Eigen::Ref<const Eigen::VectorXd> p(const Eigen::VectorXd& s) const { return s.segment(2 * n, n); }
  KktSystem hessian(const Eigen::VectorXd& s) const {
    return lagrangian_hessian(model, previous, x(s), y(s), p(s), config.step);
  }
};

struct NewtonState {
  Eigen::VectorXd s;
  KktSystem kkt;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> history;

  void update(const StepContext& ctx, Eigen::VectorXd next) {
    s = std::move(next);
    kkt = ctx.hessian(s);
    residual = kkt.gradient.max_norm();
    history.push_back(residual);
  }
};

// Newton on grad L = 0, backtracking on 1/2 |grad L|^2. Returns false when
// the line search or the iteration budget gives out.
bool full_space_newton(const StepContext& ctx, NewtonState& state, double tol) {
  const SolverConfig& config = ctx.config;
  // Give up early when the merit stagnates, which happens near points where
  // the KKT matrix turns singular; the reduced iteration handles those.
  constexpr int kStagnationWindow = 10;
  double best = state.residual;
  int since_best = 0;
  for (int budget = config.max_newton_iter; state.residual > tol; --budget) {
    if (budget == 0 || since_best >= kStagnationWindow) return false;
    const Eigen::VectorXd g = state.kkt.gradient.stacked();
    const Eigen::VectorXd delta = solve_kkt(state.kkt.matrix(), -g, ctx.previous.vertex_count());
    const double merit = 0.5 * g.squaredNorm();
    const int n = ctx.n;
    double alpha = std::min(step_limit(ctx.previous, ctx.x(state.s), delta.head(n)),
                            step_limit(ctx.previous, ctx.y(state.s), delta.segment(n, n)));
    for (;;) {
      const Eigen::VectorXd trial = state.s + alpha * delta;
      if (acceptable_mesh(ctx.previous, ctx.x(trial)) && acceptable_mesh(ctx.previous, ctx.y(trial))) {
        try {
          const KktGradient tg =
              lagrangian_gradient(ctx.model, ctx.previous, ctx.x(trial), ctx.y(trial), ctx.p(trial), config.step);
          if (0.5 * tg.stacked().squaredNorm() <= (1.0 - 2.0 * config.armijo * alpha) * merit) {
            state.update(ctx, trial);
            break;
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NearSingular) throw;
        }
      }
      alpha *= config.backtrack;
      if (alpha < config.min_step) return false;
    }
    ++state.iterations;
    if (state.residual < 0.5 * best) {
      best = state.residual;
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  return true;
}

// Fallback for stiff (nearly crystalline) anisotropies: keep (Y, P) on the
// constraint manifold and minimize f(X) = E_out[X^k, X, Y[X]]. At such points
// g_X is the gradient of f and the X-part of the KKT step is the reduced
// Newton step; a shift of the X-X block restores descent when the reduced
// Hessian is indefinite. Restarts from the feasible initial point `start`.
bool reduced_newton(const StepContext& ctx, NewtonState& state, const Eigen::VectorXd& start, double tol) {
  const SolverConfig& config = ctx.config;
  const StepParameters& params = config.step;
  const int n = ctx.n;

  struct Feasible {
    NodalField y;
    double energy = 0.0;
  };
  // The accuracy of Y bounds the attainable accuracy of g_X, so the inner
  // problem is solved to roundoff here.
  SolverConfig inner_config = config;
  inner_config.newton_rel_tol = std::numeric_limits<double>::epsilon();
  inner_config.newton_abs_tol = std::numeric_limits<double>::min();
  auto restore = [&](const NodalField& x, const NodalField* guess) -> std::optional<Feasible> {
    if (!acceptable_mesh(ctx.previous, x)) return std::nullopt;
    try {
      Feasible f{solve_inner(ctx.model, ctx.previous.with_coordinates(x), params.tau_tilde, inner_config, guess).y,
                 0.0};
      f.energy = energy_outer(ctx.model, ctx.previous, x, f.y, params.tau, params.tau_tilde, params.lambda);
      return f;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NearSingular && e.kind() != ErrorKind::NonConvergence) throw;
      return std::nullopt;
    }
  };

  NodalField x = start.head(n);
  NodalField guess = start.segment(n, n);
  std::optional<Feasible> current = restore(x, &guess);
  if (!current) return false;
  for (int budget = config.max_newton_iter;; --budget) {
    Eigen::VectorXd s(3 * n);
    s << x, current->y, solve_adjoint(ctx.model, ctx.previous, x, current->y, params.tau, params.tau_tilde);
    state.update(ctx, std::move(s));
    if (state.residual <= tol) return true;
    if (budget == 0) return false;

    const Eigen::VectorXd g = state.kkt.gradient.stacked();
    const SparseMatrix kkt = state.kkt.matrix();
    double shift = 0.0;
    const double scale = Eigen::VectorXd(state.kkt.xx.diagonal()).cwiseAbs().maxCoeff();
    Eigen::VectorXd dx, dy;
    double slope = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
      SparseMatrix shifted = kkt;
      if (shift > 0.0)
        for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift;
      const Eigen::VectorXd delta = solve_kkt(shifted, -g, ctx.previous.vertex_count());
      dx = delta.head(n);
      dy = delta.segment(n, n);
      slope = state.kkt.gradient.x.dot(dx);
      if (slope < 0.0) break;
      shift = shift == 0.0 ? 1e-8 * scale : 10.0 * shift;
    }
    if (!(slope < 0.0)) return false;
    // X is optimal to the precision of E_out once the predicted decrease drowns in roundoff.
    if (-slope <= kEnergyRoundoff * std::abs(current->energy)) return true;

    const double slack = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(current->energy);
    double alpha = std::min(step_limit(ctx.previous, x, dx), step_limit(ctx.previous, current->y, dy));
    for (;;) {
      const NodalField trial = x + alpha * dx;
      guess = current->y + alpha * dy;
      if (std::optional<Feasible> next = restore(trial, &guess);
          next && next->energy <= current->energy + config.armijo * alpha * slope + slack) {
        x = trial;
        current = std::move(next);
        break;
      }
      alpha *= config.backtrack;
      if (alpha < config.min_step) return false;
    }
    ++state.iterations;
  }
}

}  // namespace

StepResult time_step(const AnisotropyModel& model, const SimplicialSurface& previous, const SolverConfig& config) {
  config.validate();
  require_nondegenerate(previous);
  const StepParameters& params = config.step;
  const int n = previous.unknown_count();
  const NodalField& xk = previous.coordinates();
  const StepContext ctx{model, previous, config, n};

  const NodalField yk = solve_inner(model, previous, params.tau_tilde, config).y;
  const double trivial = energy_outer(model, previous, xk, yk, params.tau, params.tau_tilde, params.lambda);

  Eigen::VectorXd start(3 * n);
  {
    const NodalField x0 = xk + config.theta0 * (yk - xk);
    const NodalField y0 = solve_inner(model, previous.with_coordinates(x0), params.tau_tilde, config).y;
    start << x0, y0, solve_adjoint(model, previous, x0, y0, params.tau, params.tau_tilde);
  }
  NewtonState state;
  state.update(ctx, start);
  const double tol = config.tolerance(state.residual);
  bool converged = full_space_newton(ctx, state, tol);
  if (!converged && config.reduced_fallback) converged = reduced_newton(ctx, state, start, tol);
  if (!converged)
    throw NonConvergenceError(step_failure("time step did not converge", state.iterations, state.residual),
                              state.history);
  StepResult out{previous.with_coordinates(ctx.x(state.s)), ctx.y(state.s), ctx.p(state.s), {}};
  StepDiagnostics& diag = out.diagnostics;
  diag.energy_outer = energy_outer(model, previous, out.surface.coordinates(), out.y, params.tau,
                                   params.tau_tilde, params.lambda);
  diag.energy_outer_trivial = trivial;
  diag.area = a_gamma(model, out.surface);
  if (out.surface.dim() == 1) diag.enclosed_area = enclosed_area(out.surface);
  diag.willmore = m_gamma(model, out.y - out.surface.coordinates(), out.surface) /
                  (2.0 * params.tau_tilde * params.tau_tilde);
  diag.newton_iterations = state.iterations;
  diag.residual = state.residual;
  diag.residual_history = std::move(state.history);
  return out;
}

FlowTrajectory run_flow(const AnisotropyModel& model, const SimplicialSurface& initial, const SolverConfig& config,
                        const FlowObserver& observer) {
  config.validate();
  require_nondegenerate(initial);
  FlowTrajectory trajectory;
  trajectory.records.reserve(config.steps + 1);

  FlowRecord first{0, 0.0, initial, {}};
  first.diagnostics.area = a_gamma(model, initial);
  if (initial.dim() == 1) first.diagnostics.enclosed_area = enclosed_area(initial);
  const NodalField y0 = solve_inner(model, initial, config.step.tau_tilde, config).y;
  first.diagnostics.willmore = m_gamma(model, y0 - initial.coordinates(), initial) /
                               (2.0 * config.step.tau_tilde * config.step.tau_tilde);
  trajectory.records.push_back(std::move(first));
  if (observer) observer(trajectory.records.back());

  for (int k = 1; k <= config.steps; ++k) {
    const SimplicialSurface& current = trajectory.records.back().surface;
    StepResult result = [&] {
      const std::string where = "step " + std::to_string(k) + ": ";
      try {
        return time_step(model, current, config);
      } catch (const NonConvergenceError& e) {
        throw NonConvergenceError(where + e.what(), e.residual_history());
      } catch (const Error& e) {
        throw Error(e.kind(), where + e.what());
      }
    }();
    trajectory.records.push_back({k, k * config.step.tau, std::move(result.surface), std::move(result.diagnostics)});
    if (observer) observer(trajectory.records.back());
  }
  return trajectory;
}

}  // namespace anisoflow
