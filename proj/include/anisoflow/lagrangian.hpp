#pragma once

#include <iosfwd>

#include "anisoflow/assembly.hpp"

namespace anisoflow {

struct StepParameters {
  double tau = 0.0;        // outer step
  double tau_tilde = 0.0;  // inner step
  double lambda = 0.0;     // area penalty

  /// Throws InvalidConfig unless tau > 0, tau~ > 0 and lambda >= 0.
  void validate() const;
  double weight() const { return tau / (tau_tilde * tau_tilde); }
};

/// Gradient of L in the block order (X, Y, P).
struct KktGradient {
  Eigen::VectorXd x, y, p;

  Eigen::VectorXd stacked() const;
  double max_norm() const;
};

/// Symmetric Hessian of L. Only the upper blocks are stored; P-P is zero.
struct KktSystem {
  KktGradient gradient;
  SparseMatrix xx, xy, xp, yy, yp;

  /// Full 3N x 3N matrix.
  SparseMatrix matrix() const;
  /// One "row col value" line per stored nonzero of matrix(), row-major order.
  void write_coordinates(std::ostream& out) const;
};

/// L[X, Y, P] = E_out[X^k, X, Y] - dE_in/dY[X, Y](P).
double lagrangian_value(const AnisotropyModel& model, const SimplicialSurface& previous,
                        const NodalField& x, const NodalField& y, const NodalField& p,
                        const StepParameters& params);

KktGradient lagrangian_gradient(const AnisotropyModel& model, const SimplicialSurface& previous,
                                const NodalField& x, const NodalField& y, const NodalField& p,
                                const StepParameters& params);

KktSystem lagrangian_hessian(const AnisotropyModel& model, const SimplicialSurface& previous,
                             const NodalField& x, const NodalField& y, const NodalField& p,
                             const StepParameters& params);

}  // namespace anisoflow
