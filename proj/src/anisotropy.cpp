#include "anisoflow/anisotropy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>

#include "anisoflow/error.hpp"

namespace anisoflow {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::NearSingular: return "near-singular input";
    case ErrorKind::InvalidConfig: return "invalid configuration";
    case ErrorKind::Unsupported: return "unsupported request";
    case ErrorKind::NonConvergence: return "nonconvergence";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

const char* to_string(AnisotropyKind kind) {
  switch (kind) {
    case AnisotropyKind::Isotropic: return "isotropic";
    case AnisotropyKind::Elliptic: return "elliptic";
    case AnisotropyKind::RegL1: return "reg_l1";
    case AnisotropyKind::RegLInf: return "reg_linf";
    case AnisotropyKind::QuadSum: return "quad_sum";
  }
  return "unknown";
}

Mat Tensor3::contract(const Vec& v) const {
  Mat out = Mat::Zero(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k) out(j, k) += v(i) * (*this)(i, j, k);
  return out;
}

namespace {

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorKind::InvalidInput, std::string(what) + " is not finite");
}

void require_dim(const Vec& v, int dim, const char* what) {
  if (v.size() != dim) {
    std::ostringstream msg;
    msg << what << " has dimension " << v.size() << ", model expects " << dim;
    throw Error(ErrorKind::InvalidInput, msg.str());
  }
}

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw Error(ErrorKind::InvalidConfig, std::string(what) + " must be positive and finite");
}

void require_spd(const Mat& g) {
  if (g.rows() != g.cols() || g.rows() < 2 || g.rows() > 3)
    throw Error(ErrorKind::InvalidConfig, "anisotropy form must be square of size 2 or 3");
  if (!g.allFinite() || (g - g.transpose()).cwiseAbs().maxCoeff() > 1e-14 * g.cwiseAbs().maxCoeff())
    throw Error(ErrorKind::InvalidConfig, "anisotropy form must be symmetric");
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::InvalidConfig, "anisotropy form must be positive definite");
}

Mat diagonal(const std::vector<double>& entries) {
  const int n = static_cast<int>(entries.size());
  Mat m = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = entries[i];
  return m;
}

// Forms of the regularized l1 norm: eps I + e_l e_l^T.
std::vector<Mat> l1_forms(double eps, int dim) {
  std::vector<Mat> forms;
  for (int l = 0; l < dim; ++l) {
    Mat g = eps * Mat::Identity(dim, dim);
    g(l, l) += 1.0;
    forms.push_back(g);
  }
  return forms;
}

// Forms of the regularized l-infinity norm in the plane: (eps I + w w^T) / 4, w = (1, +-1).
std::vector<Mat> linf_forms(double eps) {
  std::vector<Mat> forms;
  for (double sign : {1.0, -1.0}) {
    Vec w(2);
    w << 1.0, sign;
    forms.push_back(0.25 * (eps * Mat::Identity(2, 2) + w * w.transpose()));
  }
  return forms;
}

}  // namespace

SqrtQuadraticSum::SqrtQuadraticSum(std::vector<Mat> forms) : forms_(std::move(forms)) {
  if (forms_.empty()) throw Error(ErrorKind::InvalidConfig, "anisotropy needs at least one form");
  dim_ = static_cast<int>(forms_.front().rows());
  for (const Mat& g : forms_) {
    require_spd(g);
    if (g.rows() != dim_) throw Error(ErrorKind::InvalidConfig, "anisotropy forms differ in size");
  }
}

double SqrtQuadraticSum::value(const Vec& p) const {
  double sum = 0.0;
  for (const Mat& g : forms_) sum += std::sqrt(p.dot(g * p));
  return sum;
}

ScalarDerivatives SqrtQuadraticSum::derivatives(const Vec& p, int order) const {
  const int n = dim_;
  ScalarDerivatives out;
  out.order = order;
  if (order >= 1) out.gradient = Vec::Zero(n);
  if (order >= 2) out.hessian = Mat::Zero(n, n);
  if (order >= 3) out.third = Tensor3(n);
  for (const Mat& g : forms_) {
    const Vec u = g * p;
    const double q = std::sqrt(p.dot(u));
    out.value += q;
    if (order >= 1) out.gradient += u / q;
    if (order >= 2) out.hessian += g / q - u * u.transpose() / (q * q * q);
    if (order >= 3) {
      const double q3 = q * q * q;
      const double q5 = q3 * q * q;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            out.third(i, j, k) += -(g(i, j) * u(k) + g(i, k) * u(j) + g(j, k) * u(i)) / q3 +
                                  3.0 * u(i) * u(j) * u(k) / q5;
    }
  }
  return out;
}

DualSquared DualSquared::quadratic(const Mat& b) {
  require_spd(b);
  DualSquared d;
  d.b_ = b;
  return d;
}

DualSquared DualSquared::squared_sum(SqrtQuadraticSum root) {
  DualSquared d;
  d.b_ = Mat::Zero(root.dim(), root.dim());
  d.root_ = std::move(root);
  return d;
}

double DualSquared::value(const Vec& z) const {
  if (root_) {
    const double g = root_->value(z);
    return g * g;
  }
  return z.dot(b_ * z);
}

ScalarDerivatives DualSquared::derivatives(const Vec& z, int order) const {
  const int n = dim();
  ScalarDerivatives out;
  out.order = order;
  if (!root_) {
    const Vec bz = b_ * z;
    out.value = z.dot(bz);
    if (order >= 1) out.gradient = 2.0 * bz;
    if (order >= 2) out.hessian = 2.0 * b_;
    if (order >= 3) out.third = Tensor3(n);
    return out;
  }
  // f = g^2 with g the 1-homogeneous root.
  const ScalarDerivatives r = root_->derivatives(z, order);
  const double g = r.value;
  out.value = g * g;
  if (order >= 1) out.gradient = 2.0 * g * r.gradient;
  if (order >= 2) out.hessian = 2.0 * (r.gradient * r.gradient.transpose() + g * r.hessian);
  if (order >= 3) {
    out.third = Tensor3(n);
    const Vec& a = r.gradient;
    const Mat& h = r.hessian;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          out.third(i, j, k) = 2.0 * (h(i, j) * a(k) + h(i, k) * a(j) + h(j, k) * a(i)) +
                               2.0 * g * r.third(i, j, k);
  }
  return out;
}

AnisotropyModel::AnisotropyModel(AnisotropyKind kind, SqrtQuadraticSum primal,
                                 std::optional<DualSquared> dual, std::vector<double> parameters)
    : kind_(kind),
      primal_(std::move(primal)),
      dual_(std::move(dual)),
      parameters_(std::move(parameters)) {
  if (dual_) {
    if (dual_->dim() != primal_.dim())
      throw Error(ErrorKind::InvalidConfig, "dual anisotropy dimension differs from primal");
    double sum = 0.0;
    for (int l = 0; l < primal_.dim(); ++l) sum += dual_->value(Vec::Unit(primal_.dim(), l));
    fallback_coefficient_ = sum / primal_.dim();
  }
}

AnisotropyModel AnisotropyModel::isotropic(int dim) {
  if (dim < 2 || dim > 3) throw Error(ErrorKind::InvalidConfig, "dimension must be 2 or 3");
  const Mat id = Mat::Identity(dim, dim);
  return AnisotropyModel(AnisotropyKind::Isotropic, SqrtQuadraticSum({id}),
                         DualSquared::quadratic(id), {});
}

AnisotropyModel AnisotropyModel::elliptic(double a1, double a2) { return elliptic({a1, a2}); }

AnisotropyModel AnisotropyModel::elliptic(const std::vector<double>& semi_axes) {
  if (semi_axes.size() < 2 || semi_axes.size() > 3)
    throw Error(ErrorKind::InvalidConfig, "elliptic anisotropy needs 2 or 3 semi-axes");
  std::vector<double> sq, inv_sq;
  for (double a : semi_axes) {
    require_positive(a, "elliptic semi-axis");
    sq.push_back(a * a);
    inv_sq.push_back(1.0 / (a * a));
  }
  return AnisotropyModel(AnisotropyKind::Elliptic, SqrtQuadraticSum({diagonal(sq)}),
                         DualSquared::quadratic(diagonal(inv_sq)), semi_axes);
}

AnisotropyModel AnisotropyModel::reg_l1(double epsilon, int dim) {
  require_positive(epsilon, "regularization epsilon");
  if (dim < 2 || dim > 3) throw Error(ErrorKind::InvalidConfig, "dimension must be 2 or 3");
  std::optional<DualSquared> dual;
  if (dim == 2) dual = DualSquared::squared_sum(SqrtQuadraticSum(linf_forms(epsilon)));
  return AnisotropyModel(AnisotropyKind::RegL1, SqrtQuadraticSum(l1_forms(epsilon, dim)), dual,
                         {epsilon});
}

AnisotropyModel AnisotropyModel::reg_linf(double epsilon) {
  require_positive(epsilon, "regularization epsilon");
  return AnisotropyModel(AnisotropyKind::RegLInf, SqrtQuadraticSum(linf_forms(epsilon)),
                         DualSquared::squared_sum(SqrtQuadraticSum(l1_forms(epsilon, 2))),
                         {epsilon});
}

AnisotropyModel AnisotropyModel::quad_sum(std::vector<Mat> forms, std::optional<DualSquared> dual) {
  return AnisotropyModel(AnisotropyKind::QuadSum, SqrtQuadraticSum(std::move(forms)),
                         std::move(dual), {});
}

AnisotropyModel AnisotropyModel::with_dual_guard(double delta0) const {
  require_positive(delta0, "dual guard");
  AnisotropyModel copy = *this;
  copy.dual_guard_ = delta0;
  return copy;
}

std::string AnisotropyModel::describe() const {
  std::ostringstream out;
  out << to_string(kind_);
  switch (kind_) {
    case AnisotropyKind::Elliptic:
      out << "(";
      for (std::size_t i = 0; i < parameters_.size(); ++i)
        out << (i ? ", " : "") << "a" << i + 1 << "=" << parameters_[i];
      out << ")";
      break;
    case AnisotropyKind::RegL1:
    case AnisotropyKind::RegLInf:
      out << "(eps=" << parameters_.front() << ")";
      break;
    case AnisotropyKind::QuadSum:
      out << "(" << primal_.forms().size() << " forms)";
      break;
    case AnisotropyKind::Isotropic:
      break;
  }
  return out.str();
}

double AnisotropyModel::gamma(const Vec& p) const {
  require_dim(p, dim(), "gamma argument");
  require_finite(p, "gamma argument");
  return primal_.value(p);
}

ScalarDerivatives AnisotropyModel::gamma_derivatives(const Vec& p, int order) const {
  require_dim(p, dim(), "gamma argument");
  require_finite(p, "gamma argument");
  if (order < 1 || order > 3) throw Error(ErrorKind::Unsupported, "derivative order must be 1, 2 or 3");
  if (p.norm() < dual_guard_)
    throw Error(ErrorKind::NearSingular, "gamma derivatives requested at a near-zero argument");
  return primal_.derivatives(p, order);
}

const DualSquared& AnisotropyModel::require_dual() const {
  if (!dual_)
    throw Error(ErrorKind::Unsupported, describe() + " has no dual anisotropy; supply one explicitly");
  return *dual_;
}

double AnisotropyModel::dual_sq(const Vec& z) const {
  const DualSquared& d = require_dual();
  require_dim(z, dim(), "dual argument");
  require_finite(z, "dual argument");
  return d.value(z);
}

ScalarDerivatives AnisotropyModel::dual_sq_derivatives(const Vec& z, int order) const {
  const DualSquared& d = require_dual();
  require_dim(z, dim(), "dual argument");
  require_finite(z, "dual argument");
  if (order < 1 || order > 3) throw Error(ErrorKind::Unsupported, "derivative order must be 1, 2 or 3");
  if (d.is_quadratic() || z.norm() >= dual_guard_) return d.derivatives(z, order);

  const int n = dim();
  const double c = fallback_coefficient_;
  ScalarDerivatives out;
  out.order = order;
  out.value = c * z.squaredNorm();
  out.gradient = 2.0 * c * z;
  if (order >= 2) out.hessian = 2.0 * c * Mat::Identity(n, n);
  if (order >= 3) out.third = Tensor3(n);
  return out;
}

double AnisotropyModel::dual(const Vec& z) const { return std::sqrt(dual_sq(z)); }

Vec AnisotropyModel::duality_map(const Vec& z) const {
  require_dim(z, dim(), "duality map argument");
  require_finite(z, "duality map argument");
  if (z.norm() < dual_guard_)
    throw Error(ErrorKind::NearSingular, "duality map evaluated at a near-zero argument");
  return 0.5 * require_dual().derivatives(z, 1).gradient;
}

Vec AnisotropyModel::duality_map_inverse(const Vec& xi) const {
  const ScalarDerivatives d = gamma_derivatives(xi, 1);
  return d.value * d.gradient;
}

namespace {

constexpr int kFineSamples = 1 << 17;

Vec wulff_point(const AnisotropyModel& model, double theta) {
  Vec nu(2);
  nu << std::cos(theta), std::sin(theta);
  return model.gamma_derivatives(nu, 1).gradient;
}

double fine_perimeter(const AnisotropyModel& model, int samples) {
  const double step = 2.0 * std::numbers::pi / samples;
  double length = 0.0;
  Vec prev = wulff_point(model, 0.0);
  for (int j = 1; j <= samples; ++j) {
    Vec next = wulff_point(model, j * step);
    length += (next - prev).norm();
    prev = next;
  }
  return length;
}

}  // namespace

std::vector<Vec> wulff_sample(const AnisotropyModel& model, double radius, int m,
                              WulffSampling sampling) {
  if (model.dim() != 2) throw Error(ErrorKind::Unsupported, "Wulff sampling is implemented for curves only");
  if (m < 3) throw Error(ErrorKind::InvalidConfig, "a closed polygon needs at least 3 vertices");
  require_positive(radius, "Wulff radius");

  std::vector<Vec> points;
  points.reserve(m);
  if (sampling == WulffSampling::NormalAngle) {
    for (int i = 0; i < m; ++i) points.push_back(radius * wulff_point(model, 2.0 * std::numbers::pi * i / m));
    return points;
  }

  // Cumulative arc length of a fine polyline on the unit Wulff boundary; the
  // target angles are interpolated there and then mapped exactly onto the curve.
  const double step = 2.0 * std::numbers::pi / kFineSamples;
  std::vector<double> arc(kFineSamples + 1, 0.0);
  Vec prev = wulff_point(model, 0.0);
  for (int j = 1; j <= kFineSamples; ++j) {
    Vec next = wulff_point(model, j * step);
    arc[j] = arc[j - 1] + (next - prev).norm();
    prev = next;
  }
  const double total = arc.back();
  int j = 0;
  for (int i = 0; i < m; ++i) {
    const double target = total * i / m;
    while (j + 1 < kFineSamples && arc[j + 1] <= target) ++j;
    const double span = arc[j + 1] - arc[j];
    const double frac = span > 0.0 ? (target - arc[j]) / span : 0.0;
    points.push_back(radius * wulff_point(model, (j + frac) * step));
  }
  return points;
}

double wulff_perimeter(const AnisotropyModel& model, double radius) {
  if (model.dim() != 2) throw Error(ErrorKind::Unsupported, "Wulff perimeter is implemented for curves only");
  // Inscribed polylines converge at second order; one Richardson step.
  const double fine = fine_perimeter(model, kFineSamples);
  const double coarse = fine_perimeter(model, kFineSamples / 2);
  return radius * (4.0 * fine - coarse) / 3.0;
}

}  // namespace anisoflow
