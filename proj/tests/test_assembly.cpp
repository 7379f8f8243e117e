#include <gtest/gtest.h>

#include <cmath>

#include "anisoflow/assembly.hpp"
#include "anisoflow/error.hpp"
#include "anisoflow/verification.hpp"

using namespace anisoflow;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

SimplicialSurface unit_square() {
  const std::vector<Vec> pts{v2(0, 0), v2(1, 0), v2(1, 1), v2(0, 1)};
  return SimplicialSurface::closed_polygon(pts);
}

// Independent per-segment summation of M for a closed polygon.
double m_by_segments(const AnisotropyModel& m, const NodalField& z, const NodalField& x) {
  const int n = static_cast<int>(x.size()) / 2;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const Vec edge = x.segment(2 * j, 2) - x.segment(2 * i, 2);
    const double g = m.gamma(v2(-edge(1), edge(0)));
    sum += 0.5 * (m.dual_sq(z.segment(2 * i, 2)) + m.dual_sq(z.segment(2 * j, 2))) * g;
  }
  return sum;
}

}  // namespace

TEST(MGamma, IsotropicHandValue) {
  NodalField z = NodalField::Zero(8);
  z.segment(0, 2) = v2(0, 1);
  z.segment(2, 2) = v2(0, 3);
  // Edges (0,1), (1,2), (3,0) contribute 5, 4.5 and 0.5.
  EXPECT_NEAR(m_gamma(AnisotropyModel::isotropic(), z, unit_square()), 10.0, 1e-14);
}

TEST(MGamma, ZeroField) {
  for (const AnisotropyModel& m : {AnisotropyModel::isotropic(), AnisotropyModel::reg_l1(0.1)})
    EXPECT_EQ(m_gamma(m, NodalField::Zero(8), unit_square()), 0.0);
}

TEST(MGamma, MatchesSegmentSummation) {
  const AnisotropyModel m = AnisotropyModel::elliptic(6, 1);
  const SimplicialSurface x =
      SimplicialSurface::closed_polygon(wulff_sample(AnisotropyModel::isotropic(), 1.0, 64));
  NodalField z(x.unknown_count());
  for (int i = 0; i < x.vertex_count(); ++i) z.segment(2 * i, 2) = x.vertex(i).normalized();
  EXPECT_NEAR(m_gamma(m, z, x), m_by_segments(m, z, x.coordinates()), 1e-12);
}

TEST(MGamma, MisalignedFieldIsInvalidInput) {
  try {
    m_gamma(AnisotropyModel::isotropic(), NodalField::Zero(6), unit_square());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(MGammaDerivatives, UnknownOrderIsUnsupported) {
  const MixedOrder bad[] = {MixedOrder{0, 3}};
  try {
    m_gamma_derivatives(AnisotropyModel::isotropic(), NodalField::Zero(8), unit_square(), bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
}

TEST(MGammaDerivatives, UnrequestedFamilyIsRefused) {
  const MixedOrder dz[] = {m_derivative::dZ};
  const MGammaDerivatives d = m_gamma_derivatives(AnisotropyModel::isotropic(), NodalField::Ones(8), unit_square(), dz);
  EXPECT_TRUE(d.has(m_derivative::dZ));
  EXPECT_FALSE(d.has(m_derivative::dXX));
  EXPECT_THROW(d.dXX(), Error);
}

TEST(MGammaDerivatives, AllFamiliesMatchFiniteDifferences) {
  VerifyOptions options;
  options.instances = 8;
  options.polygon_sizes = {3, 8};
  const VerificationReport report = run_verification(options);
  for (const PropertyResult& r : report.properties) EXPECT_TRUE(r.passed) << r.name << " " << r.max_deviation;
}

TEST(Verification, ZeroToleranceReportsFailures) {
  VerifyOptions options;
  options.instances = 1;
  options.tolerance = 0.0;
  EXPECT_FALSE(run_verification(options).passed());
}

TEST(Verification, IncludesTriangleKernels) {
  VerifyOptions options;
  options.instances = 1;
  bool found = false;
  for (const PropertyResult& r : run_verification(options).properties) found |= r.name.find("d=2") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(AGamma, CrystallineSquare) {
  EXPECT_NEAR(a_gamma(AnisotropyModel::reg_l1(1e-12), unit_square()), 4.0, 1e-5);
}

TEST(AGamma, IsotropicPerimeter) {
  for (int m : {3, 10, 64}) {
    const SimplicialSurface s = SimplicialSurface::closed_polygon(wulff_sample(AnisotropyModel::isotropic(), 1.0, m));
    EXPECT_NEAR(a_gamma(AnisotropyModel::isotropic(), s), 2 * m * std::sin(M_PI / m), 1e-13);
  }
}

TEST(AGamma, DegenerateElementIsNearSingular) {
  const std::vector<Vec> pts{v2(0, 0), v2(1, 0), v2(1, 0), v2(0, 1)};
  try {
    a_gamma_derivatives(AnisotropyModel::isotropic(), SimplicialSurface::closed_polygon(pts), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NearSingular);
  }
}

TEST(EnergyInner, IdentityGivesAreaTerm) {
  const AnisotropyModel m = AnisotropyModel::isotropic();
  const SimplicialSurface s = SimplicialSurface::closed_polygon(wulff_sample(m, 1.0, 64));
  EXPECT_NEAR(energy_inner(m, s, s.coordinates(), 0.01), 2 * 0.01 * 128 * std::sin(M_PI / 64), 1e-14);
}

TEST(EnergyInner, ShrunkWulffShapeIsRadiallyStationary) {
  // On a Wulff polygon gamma*(X_i) = 1, so M[X, X] = A[X] and the radial
  // derivative of E_in vanishes at the scale 1 - tau~.
  const AnisotropyModel m = AnisotropyModel::elliptic(6, 1);
  const double tt = 1e-3;
  for (int n : {64, 128, 256}) {
    const SimplicialSurface s = SimplicialSurface::closed_polygon(wulff_sample(m, 1.0, n));
    const InnerDerivatives d = energy_inner_derivatives(m, s, (1.0 - tt) * s.coordinates(), tt, false);
    EXPECT_LT(std::abs(d.gradient.dot(s.coordinates())), 1e-12);
  }
}

TEST(EnergyInner, GradientAndHessianMatchFiniteDifferences) {
  const AnisotropyModel m = AnisotropyModel::reg_linf(0.05);
  const SimplicialSurface s = SimplicialSurface::closed_polygon(wulff_sample(m, 1.0, 9));
  NodalField y = 0.9 * s.coordinates();
  y(3) += 0.02;
  const InnerDerivatives d = energy_inner_derivatives(m, s, y, 0.1);
  const Eigen::MatrixXd hess(d.hessian);
  const double h = 1e-6;
  for (int i = 0; i < y.size(); ++i) {
    NodalField e = NodalField::Zero(y.size());
    e(i) = h;
    EXPECT_NEAR((energy_inner(m, s, y + e, 0.1) - energy_inner(m, s, y - e, 0.1)) / (2 * h), d.gradient(i), 1e-8);
    const Eigen::VectorXd col = (energy_inner_derivatives(m, s, y + e, 0.1, false).gradient -
                                 energy_inner_derivatives(m, s, y - e, 0.1, false).gradient) /
                                (2 * h);
    EXPECT_LT((col - hess.col(i)).cwiseAbs().maxCoeff(), 1e-6 * hess.cwiseAbs().maxCoeff());
  }
}

TEST(EnergyOuter, TrivialStateIsZero) {
  const AnisotropyModel m = AnisotropyModel::elliptic(2, 1);
  const SimplicialSurface s = SimplicialSurface::closed_polygon(wulff_sample(m, 1.0, 12));
  EXPECT_EQ(energy_outer(m, s, s.coordinates(), s.coordinates(), 0.1, 0.01, 0.0), 0.0);
}

TEST(EnergyOuter, NonPositiveStepsAreInvalidConfig) {
  const SimplicialSurface s = unit_square();
  for (double tau : {0.0, -1.0}) {
    try {
      energy_outer(AnisotropyModel::isotropic(), s, s.coordinates(), s.coordinates(), tau, 0.1, 0.0);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
    }
  }
  EXPECT_THROW(energy_outer(AnisotropyModel::isotropic(), s, s.coordinates(), s.coordinates(), 0.1, 0.0, 0.0), Error);
}
