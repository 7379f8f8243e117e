#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace anisoflow {

// Point and matrix types in the ambient space R^{d+1}, d+1 <= 3. Fixed upper
// bound keeps them off the heap in element loops.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

/// Dense symmetric rank-3 tensor of dimension n <= 3.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n) { data_.fill(0.0); }

  int size() const { return n_; }
  double& operator()(int i, int j, int k) { return data_[(i * 3 + j) * 3 + k]; }
  double operator()(int i, int j, int k) const { return data_[(i * 3 + j) * 3 + k]; }

  /// T(v, ., .)
  Mat contract(const Vec& v) const;

 private:
  int n_ = 0;
  std::array<double, 27> data_{};
};

/// Value and derivatives of a scalar function on R^{d+1}, filled up to `order`.
struct ScalarDerivatives {
  int order = 0;
  double value = 0.0;
  Vec gradient;
  Mat hessian;
  Tensor3 third;
};

/// p -> sum_k sqrt(p . G_k p) with symmetric positive definite G_k.
///
/// Every anisotropy in this library (isotropic, elliptic, both regularized
/// crystalline norms) is of this form, so one set of derivative formulas
/// serves all of them.
class SqrtQuadraticSum {
 public:
  SqrtQuadraticSum() = default;
  explicit SqrtQuadraticSum(std::vector<Mat> forms);

  int dim() const { return dim_; }
  const std::vector<Mat>& forms() const { return forms_; }

  double value(const Vec& p) const;
  ScalarDerivatives derivatives(const Vec& p, int order) const;

 private:
  int dim_ = 0;
  std::vector<Mat> forms_;
};

/// Squared dual anisotropy, either an exact quadratic form z . B z or the
/// square of a SqrtQuadraticSum.
class DualSquared {
 public:
  static DualSquared quadratic(const Mat& b);
  static DualSquared squared_sum(SqrtQuadraticSum root);

  bool is_quadratic() const { return !root_.has_value(); }
  int dim() const { return static_cast<int>(b_.rows()); }
  double value(const Vec& z) const;
  ScalarDerivatives derivatives(const Vec& z, int order) const;

 private:
  Mat b_;
  std::optional<SqrtQuadraticSum> root_;
};

enum class AnisotropyKind { Isotropic, Elliptic, RegL1, RegLInf, QuadSum };

const char* to_string(AnisotropyKind kind);

/// An anisotropy gamma together with its squared dual gamma*^2.
///
/// Immutable after construction. Near the origin, derivatives of a
/// non-quadratic squared dual switch to the quadratic fallback c |z|^2 with
/// c the mean of gamma*^2 over the coordinate unit vectors.
class AnisotropyModel {
 public:
  static constexpr double kDefaultDualGuard = 1e-10;

  static AnisotropyModel isotropic(int dim = 2);
  static AnisotropyModel elliptic(double a1, double a2);
  static AnisotropyModel elliptic(const std::vector<double>& semi_axes);
  /// sum_l sqrt(eps |p|^2 + p_l^2); dual is the regularized l-infinity form (2D only).
  static AnisotropyModel reg_l1(double epsilon, int dim = 2);
  /// (sqrt(eps|p|^2 + (p1+p2)^2) + sqrt(eps|p|^2 + (p1-p2)^2)) / 2; dual is the regularized l1 form.
  static AnisotropyModel reg_linf(double epsilon);
  /// sum_k sqrt(p . G_k p). The dual has no closed form and must be supplied
  /// for any use that needs gamma*.
  static AnisotropyModel quad_sum(std::vector<Mat> forms,
                                  std::optional<DualSquared> dual = std::nullopt);

  AnisotropyModel with_dual_guard(double delta0) const;

  AnisotropyKind kind() const { return kind_; }
  int dim() const { return primal_.dim(); }
  double dual_guard() const { return dual_guard_; }
  /// (a1, a2, ...) for Elliptic, (eps) for the regularized norms, empty otherwise.
  const std::vector<double>& parameters() const { return parameters_; }
  std::string describe() const;

  double gamma(const Vec& p) const;
  ScalarDerivatives gamma_derivatives(const Vec& p, int order) const;

  bool has_dual() const { return dual_.has_value(); }
  double dual_sq(const Vec& z) const;
  ScalarDerivatives dual_sq_derivatives(const Vec& z, int order) const;
  double dual(const Vec& z) const;

  /// T(z) = gamma*(z) grad gamma*(z)
  Vec duality_map(const Vec& z) const;
  /// T^{-1}(xi) = gamma(xi) grad gamma(xi)
  Vec duality_map_inverse(const Vec& xi) const;

 private:
  AnisotropyModel(AnisotropyKind kind, SqrtQuadraticSum primal, std::optional<DualSquared> dual,
                  std::vector<double> parameters);
  const DualSquared& require_dual() const;

  AnisotropyKind kind_ = AnisotropyKind::Isotropic;
  SqrtQuadraticSum primal_;
  std::optional<DualSquared> dual_;
  std::vector<double> parameters_;
  double dual_guard_ = kDefaultDualGuard;
  double fallback_coefficient_ = 1.0;
};

enum class WulffSampling {
  NormalAngle,  // vertex i = R grad gamma(nu_i), nu_i at angle 2 pi i / m
  ArcLength,    // m points equidistributed in arc length along the same curve
};

/// Vertices of a closed, counterclockwise polygon inscribed in the boundary of
/// the Wulff shape scaled by `radius`.
std::vector<Vec> wulff_sample(const AnisotropyModel& model, double radius, int m,
                              WulffSampling sampling = WulffSampling::NormalAngle);

/// Euclidean length of the boundary of the Wulff shape scaled by `radius`.
double wulff_perimeter(const AnisotropyModel& model, double radius);

}  // namespace anisoflow
