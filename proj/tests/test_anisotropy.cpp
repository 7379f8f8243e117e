#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "anisoflow/anisotropy.hpp"
#include "anisoflow/error.hpp"

using namespace anisoflow;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Brute-force dual: max over unit directions of z.p / gamma(p).
double dual_by_search(const AnisotropyModel& m, const Vec& z) {
  double best = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * M_PI * i / n;
    const Vec p = v2(std::cos(t), std::sin(t));
    best = std::max(best, z.dot(p) / m.gamma(p));
  }
  return best;
}

double fd_max_error(const std::function<double(const Vec&)>& f, const Vec& p, const Vec& grad, double h) {
  double err = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    Vec e = Vec::Zero(p.size());
    e(i) = h;
    err = std::max(err, std::abs((f(p + e) - f(p - e)) / (2 * h) - grad(i)));
  }
  return err;
}

}  // namespace

TEST(Gamma, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(AnisotropyModel::elliptic(6, 1).gamma(v2(1, 0)), 6.0);
  EXPECT_DOUBLE_EQ(AnisotropyModel::isotropic().gamma(v2(3, 4)), 5.0);
  EXPECT_NEAR(AnisotropyModel::reg_l1(1e-12).gamma(v2(1, -2)), 3.0, 1e-5);
}

TEST(Gamma, FirstDerivatives) {
  EXPECT_TRUE(AnisotropyModel::isotropic().gamma_derivatives(v2(0, 1), 1).gradient.isApprox(v2(0, 1)));
  EXPECT_TRUE(AnisotropyModel::elliptic(2, 1).gamma_derivatives(v2(1, 0), 1).gradient.isApprox(v2(2, 0)));
}

TEST(Gamma, ThirdOrderMatchesFiniteDifferences) {
  const AnisotropyModel m = AnisotropyModel::reg_l1(0.001);
  const Vec p = v2(0.3, 0.7);
  const ScalarDerivatives d = m.gamma_derivatives(p, 3);
  const double h = 1e-5;
  EXPECT_LT(fd_max_error([&](const Vec& q) { return m.gamma(q); }, p, d.gradient, h), 1e-5 * d.gradient.norm());
  for (int i = 0; i < 2; ++i) {
    Vec e = Vec::Zero(2);
    e(i) = h;
    const Mat fd_hess_col = (m.gamma_derivatives(p + e, 1).gradient - m.gamma_derivatives(p - e, 1).gradient) / (2 * h);
    EXPECT_LT((fd_hess_col - d.hessian.col(i)).cwiseAbs().maxCoeff(), 1e-5 * d.hessian.cwiseAbs().maxCoeff());
    const Mat fd_third = (m.gamma_derivatives(p + e, 2).hessian - m.gamma_derivatives(p - e, 2).hessian) / (2 * h);
    Vec dir = Vec::Zero(2);
    dir(i) = 1.0;
    const Mat analytic = d.third.contract(dir);
    EXPECT_LT((fd_third - analytic).cwiseAbs().maxCoeff(), 1e-5 * analytic.cwiseAbs().maxCoeff());
  }
}

TEST(Gamma, NearZeroArgumentIsRejected) {
  EXPECT_THROW(AnisotropyModel::isotropic().gamma_derivatives(v2(1e-14, 0), 1), Error);
}

TEST(Gamma, NonFiniteInputIsRejected) {
  try {
    AnisotropyModel::isotropic().gamma(v2(NAN, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(Gamma, OneHomogeneousAndConvex) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const AnisotropyModel& m : {AnisotropyModel::elliptic(3, 1), AnisotropyModel::reg_l1(0.01),
                                   AnisotropyModel::reg_linf(0.01)}) {
    for (int i = 0; i < 50; ++i) {
      const Vec p = v2(u(rng), u(rng)), q = v2(u(rng), u(rng));
      EXPECT_NEAR(m.gamma(2.5 * p), 2.5 * m.gamma(p), 1e-12);
      EXPECT_LE(m.gamma(0.5 * (p + q)), 0.5 * (m.gamma(p) + m.gamma(q)) + 1e-12);
    }
  }
}

TEST(DualSquared, ClosedFormValues) {
  EXPECT_NEAR(AnisotropyModel::elliptic(6, 1).dual_sq(v2(6, 0)), 1.0, 1e-14);
  const ScalarDerivatives d = AnisotropyModel::isotropic().dual_sq_derivatives(v2(0, 0), 2);
  EXPECT_EQ(d.value, 0.0);
  EXPECT_EQ(d.gradient.norm(), 0.0);
  EXPECT_TRUE(d.hessian.isApprox(2.0 * Mat::Identity(2, 2)));
}

TEST(DualSquared, RegularizedDerivativesMatchFiniteDifferences) {
  const AnisotropyModel m = AnisotropyModel::reg_linf(1e-4);
  const Vec z = v2(0.5, 0.2);
  const ScalarDerivatives d = m.dual_sq_derivatives(z, 2);
  const double h = 1e-6;
  EXPECT_LT(fd_max_error([&](const Vec& q) { return m.dual_sq(q); }, z, d.gradient, h), 1e-4 * d.gradient.norm());
  for (int i = 0; i < 2; ++i) {
    Vec e = Vec::Zero(2);
    e(i) = h;
    const Vec col = (m.dual_sq_derivatives(z + e, 1).gradient - m.dual_sq_derivatives(z - e, 1).gradient) / (2 * h);
    EXPECT_LT((col - d.hessian.col(i)).cwiseAbs().maxCoeff(), 1e-4 * d.hessian.cwiseAbs().maxCoeff());
  }
}

TEST(DualSquared, EllipticDualMatchesBruteForceSupport) {
  const AnisotropyModel m = AnisotropyModel::elliptic(3, 1);
  for (const Vec& z : {v2(1, 0), v2(0.3, -0.8), v2(-2, 1)}) EXPECT_NEAR(m.dual(z), dual_by_search(m, z), 1e-6);
}

TEST(DualSquared, RegularizedPairingApproachesTrueDual) {
  // Exact duality only as eps -> 0.
  const Vec z = v2(0.4, -0.9);
  const double exact = std::max(std::abs(z(0)), std::abs(z(1)));
  EXPECT_NEAR(AnisotropyModel::reg_l1(1e-8).dual(z), exact, 1e-3);
  EXPECT_NEAR(dual_by_search(AnisotropyModel::reg_l1(1e-8), z), exact, 1e-3);
}

TEST(QuadSum, MissingDualIsUnsupported) {
  const AnisotropyModel m = AnisotropyModel::quad_sum({Mat::Identity(2, 2)});
  EXPECT_NEAR(m.gamma(v2(3, 4)), 5.0, 1e-14);
  try {
    m.dual_sq(v2(1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
}

TEST(DualityMap, ClosedForms) {
  EXPECT_TRUE(AnisotropyModel::isotropic().duality_map(v2(2, 0)).isApprox(v2(2, 0)));
  EXPECT_TRUE(AnisotropyModel::elliptic(2, 1).duality_map(v2(2, 0)).isApprox(v2(0.5, 0)));
}

TEST(DualityMap, RoundTrip) {
  const AnisotropyModel m = AnisotropyModel::elliptic(2, 1);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec z = v2(u(rng), u(rng));
    worst = std::max(worst, (m.duality_map_inverse(m.duality_map(z)) - z).norm() / z.norm());
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(WulffSample, Vertices) {
  const auto ellipse = wulff_sample(AnisotropyModel::elliptic(6, 1), 1.0, 16);
  EXPECT_TRUE(ellipse.front().isApprox(v2(6, 0)));
  const auto square = wulff_sample(AnisotropyModel::isotropic(), 2.0, 4);
  ASSERT_EQ(square.size(), 4u);
  EXPECT_LT((square[0] - v2(2, 0)).norm(), 1e-14);
  EXPECT_LT((square[1] - v2(0, 2)).norm(), 1e-14);
  EXPECT_LT((square[2] - v2(-2, 0)).norm(), 1e-14);
  EXPECT_LT((square[3] - v2(0, -2)).norm(), 1e-14);
}

TEST(WulffSample, RegularizedL1VerticesLieOnDualSphere) {
  const AnisotropyModel m = AnisotropyModel::reg_l1(1e-4);
  for (WulffSampling s : {WulffSampling::NormalAngle, WulffSampling::ArcLength})
    for (const Vec& v : wulff_sample(m, 1.0, 200, s)) EXPECT_LE(std::abs(m.dual(v) - 1.0), 2e-2);
}

TEST(WulffSample, ArcLengthSpacingIsUniform) {
  const auto pts = wulff_sample(AnisotropyModel::elliptic(6, 1), 1.0, 128, WulffSampling::ArcLength);
  double lo = 1e300, hi = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double len = (pts[(i + 1) % pts.size()] - pts[i]).norm();
    lo = std::min(lo, len);
    hi = std::max(hi, len);
  }
  EXPECT_LT(hi / lo, 1.05);
}
