#pragma once

#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "anisoflow/anisotropy.hpp"
#include "anisoflow/geometry.hpp"

namespace anisoflow {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Global unknowns are vertex-major, component-minor: index (d+1)*vertex + component.

/// Per-element data shared by the M and A derivative families: gamma at the
/// element normal R_T and the chain-rule products with dR.
struct ElementGammaData {
  ElementNormalMap normal_map;
  ScalarDerivatives gamma;  // at R_T
  LocalVector d1;           // d gamma(R_T) / dX_js
  LocalMatrix d2;           // d2 gamma(R_T) / dX_js dX_lt

  /// d3 gamma(R_T)(v, ., .) for a local direction v.
  LocalMatrix d3(const LocalVector& v) const;
};

ElementGammaData element_gamma_data(const AnisotropyModel& model, int dim, const LocalVector& corners,
                                    int order);

/// Discrete anisotropic quadratic form
///   M[Z, X] = sum_T 1/(d+1)! (sum_i gamma*^2(Z_i)) gamma(R_T[X]).
double m_gamma(const AnisotropyModel& model, const NodalField& z, const SimplicialSurface& x);

/// Discrete anisotropic area A[X] = sum_T 1/d! gamma(R_T[X]).
double a_gamma(const AnisotropyModel& model, const SimplicialSurface& x);

/// Mixed derivative order (Z order, X order) of M.
struct MixedOrder {
  int z = 0;
  int x = 0;
  friend bool operator==(const MixedOrder&, const MixedOrder&) = default;
};

namespace m_derivative {
inline constexpr MixedOrder dZ{1, 0};
inline constexpr MixedOrder dZZ{2, 0};
inline constexpr MixedOrder dZZZ{3, 0};
inline constexpr MixedOrder dX{0, 1};
inline constexpr MixedOrder dXX{0, 2};
inline constexpr MixedOrder dZX{1, 1};
inline constexpr MixedOrder dZZX{2, 1};
inline constexpr MixedOrder dZXX{1, 2};
inline constexpr MixedOrder all[] = {dZ, dZZ, dZZZ, dX, dXX, dZX, dZZX, dZXX};
}  // namespace m_derivative

/// Requested derivatives of M at (Z, X). Third-order families are kept as
/// per-element data and contracted against a direction in their first Z slot.
class MGammaDerivatives {
 public:
  double value() const { return value_; }
  const Eigen::VectorXd& dZ() const;
  const Eigen::VectorXd& dX() const;
  const SparseMatrix& dZZ() const;  // block diagonal in the vertex index
  const SparseMatrix& dXX() const;
  const SparseMatrix& dZX() const;  // rows Z, columns X

  SparseMatrix dZZZ(const NodalField& dir) const;  // d3M/dZ3 (dir, ., .)
  SparseMatrix dZZX(const NodalField& dir) const;  // d3M/dZ2dX (Z: dir, Z: ., X: .), rows Z, columns X
  SparseMatrix dZXX(const NodalField& dir) const;  // d3M/dZdX2 (Z: dir, X: ., X: .)

  bool has(MixedOrder order) const;

 private:
  friend MGammaDerivatives m_gamma_derivatives(const AnisotropyModel&, const NodalField&,
                                               const SimplicialSurface&, std::span<const MixedOrder>);
  void require(MixedOrder order) const;

  int dim_ = 1;
  int unknowns_ = 0;
  std::vector<Element> connectivity_;
  std::vector<MixedOrder> requested_;
  double value_ = 0.0;
  double factor_ = 1.0;  // 1/(d+1)!
  std::vector<ScalarDerivatives> nodes_;
  std::vector<ElementGammaData> elements_;
  std::vector<double> element_dual_sums_;
  Eigen::VectorXd dz_, dx_;
  SparseMatrix dzz_, dxx_, dzx_;
};

/// Throws Unsupported for any order outside the eight families listed in m_derivative.
MGammaDerivatives m_gamma_derivatives(const AnisotropyModel& model, const NodalField& z,
                                      const SimplicialSurface& x, std::span<const MixedOrder> request);

/// Derivatives of A at X up to `order`; the third derivative is contracted on demand.
class AGammaDerivatives {
 public:
  int order() const { return order_; }
  double value() const { return value_; }
  const Eigen::VectorXd& first() const { return first_; }
  const SparseMatrix& second() const;
  SparseMatrix third(const NodalField& dir) const;  // d3A (dir, ., .)

 private:
  friend AGammaDerivatives a_gamma_derivatives(const AnisotropyModel&, const SimplicialSurface&, int);

  int dim_ = 1;
  int unknowns_ = 0;
  std::vector<Element> connectivity_;
  int order_ = 0;
  double value_ = 0.0;
  double factor_ = 1.0;  // 1/d!
  std::vector<ElementGammaData> elements_;
  Eigen::VectorXd first_;
  SparseMatrix second_;
};

AGammaDerivatives a_gamma_derivatives(const AnisotropyModel& model, const SimplicialSurface& x, int order);

/// E_in[X, Y] = M[Y - X, X] + 2 tau~ A[Y]
double energy_inner(const AnisotropyModel& model, const SimplicialSurface& x, const NodalField& y,
                    double tau_tilde);

/// E_out[X^k, X, Y] = M[X - X^k, X^k] + tau/tau~^2 M[Y - X, X] + 2 tau lambda A[X]
double energy_outer(const AnisotropyModel& model, const SimplicialSurface& previous, const NodalField& x,
                    const NodalField& y, double tau, double tau_tilde, double lambda);

/// Gradient and Hessian of E_in with respect to Y.
struct InnerDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  SparseMatrix hessian;
};

InnerDerivatives energy_inner_derivatives(const AnisotropyModel& model, const SimplicialSurface& x,
                                          const NodalField& y, double tau_tilde, bool with_hessian = true);

}  // namespace anisoflow
