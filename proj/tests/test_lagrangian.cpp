#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "anisoflow/error.hpp"
#include "anisoflow/lagrangian.hpp"
#include "anisoflow/solver.hpp"

using namespace anisoflow;

namespace {

struct Config {
  SimplicialSurface previous;
  NodalField x, y, p;
};

Config random_config(const AnisotropyModel& m, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Config c{SimplicialSurface::closed_polygon(wulff_sample(m, 1.0, n)), {}, {}, {}};
  const int size = c.previous.unknown_count();
  c.x = c.previous.coordinates();
  c.y.resize(size);
  c.p.resize(size);
  for (int i = 0; i < size; ++i) {
    c.x(i) += 0.03 * u(rng);
    c.y(i) = c.x(i) + 0.1 * u(rng);
    c.p(i) = u(rng);
  }
  return c;
}

const StepParameters kParams{0.3, 0.2, 0.7};

// Gradient of L for gamma = |.| written out by hand: M[Z, X] = sum_i |Z_i|^2 l_i(X)
// with lumped weights l_i and A[X] = sum_T |e_T|.
KktGradient isotropic_gradient(const Config& c, const StepParameters& sp) {
  const int n = c.previous.vertex_count();
  const double w = sp.weight();
  auto pt = [](const NodalField& f, int i) -> Eigen::Vector2d { return f.segment<2>(2 * i); };
  const NodalField& xk = c.previous.coordinates();
  auto weights = [&](const NodalField& f) {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < n; ++a) {
      const double len = (pt(f, (a + 1) % n) - pt(f, a)).norm();
      l(a) += 0.5 * len;
      l((a + 1) % n) += 0.5 * len;
    }
    return l;
  };
  const Eigen::VectorXd lk = weights(xk), lx = weights(c.x);
  KktGradient g{NodalField::Zero(2 * n), NodalField::Zero(2 * n), NodalField::Zero(2 * n)};
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d z = pt(c.y, i) - pt(c.x, i);
    g.x.segment<2>(2 * i) += 2 * lk(i) * (pt(c.x, i) - pt(xk, i)) - 2 * w * lx(i) * z + 2 * lx(i) * pt(c.p, i);
    g.y.segment<2>(2 * i) += 2 * w * lx(i) * z - 2 * lx(i) * pt(c.p, i);
    g.p.segment<2>(2 * i) -= 2 * lx(i) * z;
  }
  for (int a = 0; a < n; ++a) {
    const int b = (a + 1) % n;
    auto coeff = [&](int i) {
      const Eigen::Vector2d z = pt(c.y, i) - pt(c.x, i);
      return w * z.squaredNorm() - 2 * z.dot(pt(c.p, i));
    };
    const Eigen::Vector2d ex = pt(c.x, b) - pt(c.x, a);
    const Eigen::Vector2d tx = ex.normalized();
    const Eigen::Vector2d fx = (0.5 * (coeff(a) + coeff(b)) + 2 * sp.tau * sp.lambda) * tx;
    g.x.segment<2>(2 * b) += fx;
    g.x.segment<2>(2 * a) -= fx;
    const Eigen::Vector2d ey = pt(c.y, b) - pt(c.y, a);
    const Eigen::Vector2d ty = ey.normalized();
    const Eigen::Vector2d q = pt(c.p, b) - pt(c.p, a);
    const Eigen::Vector2d fy = 2 * sp.tau_tilde * (q - ty * ty.dot(q)) / ey.norm();
    g.y.segment<2>(2 * b) -= fy;
    g.y.segment<2>(2 * a) += fy;
    g.p.segment<2>(2 * b) -= 2 * sp.tau_tilde * ty;
    g.p.segment<2>(2 * a) += 2 * sp.tau_tilde * ty;
  }
  return g;
}

}  // namespace

TEST(LagrangianValue, ZeroMultiplierIsOuterEnergy) {
  const AnisotropyModel m = AnisotropyModel::elliptic(2, 1);
  const Config c = random_config(m, 8, 1);
  const NodalField zero = NodalField::Zero(c.p.size());
  EXPECT_NEAR(lagrangian_value(m, c.previous, c.x, c.y, zero, kParams),
              energy_outer(m, c.previous, c.x, c.y, kParams.tau, kParams.tau_tilde, kParams.lambda), 1e-14);
}

TEST(LagrangianValue, LinearInMultiplier) {
  const AnisotropyModel m = AnisotropyModel::reg_l1(0.1);
  const Config c = random_config(m, 8, 2);
  const NodalField zero = NodalField::Zero(c.p.size());
  const double l0 = lagrangian_value(m, c.previous, c.x, c.y, zero, kParams);
  const double l1 = lagrangian_value(m, c.previous, c.x, c.y, c.p, kParams);
  const double l2 = lagrangian_value(m, c.previous, c.x, c.y, 2.0 * c.p, kParams);
  EXPECT_NEAR(l2 - l0, 2.0 * (l1 - l0), 1e-13 * std::abs(l0));
}

TEST(LagrangianValue, MatchesDirectionalDerivativeComposition) {
  for (const AnisotropyModel& m : {AnisotropyModel::isotropic(), AnisotropyModel::reg_linf(0.1)}) {
    const Config c = random_config(m, 8, 3);
    const SimplicialSurface current = c.previous.with_coordinates(c.x);
    const double h = 1e-5;
    const double directional = (energy_inner(m, current, c.y + h * c.p, kParams.tau_tilde) -
                                energy_inner(m, current, c.y - h * c.p, kParams.tau_tilde)) /
                               (2 * h);
    const double expected =
        energy_outer(m, c.previous, c.x, c.y, kParams.tau, kParams.tau_tilde, kParams.lambda) - directional;
    EXPECT_NEAR(lagrangian_value(m, c.previous, c.x, c.y, c.p, kParams), expected, 1e-6 * std::abs(expected));
  }
}

TEST(LagrangianGradient, MatchesFiniteDifferencesOverSeeds) {
  const AnisotropyModel models[] = {AnisotropyModel::isotropic(), AnisotropyModel::elliptic(3, 1),
                                    AnisotropyModel::reg_l1(0.1), AnisotropyModel::reg_linf(0.1)};
  for (unsigned seed = 0; seed < 20; ++seed) {
    const AnisotropyModel& m = models[seed % 4];
    const Config c = random_config(m, 8, 100 + seed);
    const int n = static_cast<int>(c.x.size());
    Eigen::VectorXd s(3 * n);
    s << c.x, c.y, c.p;
    auto value = [&](const Eigen::VectorXd& v) {
      return lagrangian_value(m, c.previous, v.segment(0, n), v.segment(n, n), v.segment(2 * n, n), kParams);
    };
    const Eigen::VectorXd g = lagrangian_gradient(m, c.previous, c.x, c.y, c.p, kParams).stacked();
    Eigen::VectorXd fd(3 * n);
    const double h = 1e-6;
    for (int i = 0; i < 3 * n; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(3 * n);
      e(i) = h;
      fd(i) = (value(s + e) - value(s - e)) / (2 * h);
    }
    EXPECT_LE((g - fd).cwiseAbs().maxCoeff(), 1e-6 * fd.cwiseAbs().maxCoeff()) << m.describe();
  }
}

TEST(LagrangianGradient, IsotropicHandCodedOracle) {
  const AnisotropyModel m = AnisotropyModel::isotropic();
  const Config c = random_config(m, 11, 4);
  const KktGradient g = lagrangian_gradient(m, c.previous, c.x, c.y, c.p, kParams);
  const KktGradient oracle = isotropic_gradient(c, kParams);
  EXPECT_LE((g.x - oracle.x).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((g.y - oracle.y).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((g.p - oracle.p).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LagrangianGradient, ConstraintBlockVanishesAtInnerSolution) {
  const AnisotropyModel m = AnisotropyModel::elliptic(2, 1);
  const Config c = random_config(m, 16, 5);
  SolverConfig config;
  const NodalField y = solve_inner(m, c.previous.with_coordinates(c.x), kParams.tau_tilde, config).y;
  const KktGradient g = lagrangian_gradient(m, c.previous, c.x, y, c.p, kParams);
  EXPECT_LE(g.p.lpNorm<Eigen::Infinity>(), 1e-11);
}

TEST(LagrangianHessian, MatchesFiniteDifferencesOverSeeds) {
  const AnisotropyModel models[] = {AnisotropyModel::isotropic(), AnisotropyModel::elliptic(3, 1),
                                    AnisotropyModel::reg_l1(0.1), AnisotropyModel::reg_linf(0.1)};
  for (unsigned seed = 0; seed < 20; ++seed) {
    const AnisotropyModel& m = models[seed % 4];
    const Config c = random_config(m, 8, 200 + seed);
    const int n = static_cast<int>(c.x.size());
    Eigen::VectorXd s(3 * n);
    s << c.x, c.y, c.p;
    auto gradient = [&](const Eigen::VectorXd& v) {
      return lagrangian_gradient(m, c.previous, v.segment(0, n), v.segment(n, n), v.segment(2 * n, n), kParams)
          .stacked();
    };
    const Eigen::MatrixXd hess(lagrangian_hessian(m, c.previous, c.x, c.y, c.p, kParams).matrix());
    Eigen::MatrixXd fd(3 * n, 3 * n);
    const double h = 1e-6;
    for (int i = 0; i < 3 * n; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(3 * n);
      e(i) = h;
      fd.col(i) = (gradient(s + e) - gradient(s - e)) / (2 * h);
    }
    EXPECT_LE((hess - fd).cwiseAbs().maxCoeff(), 1e-4 * fd.cwiseAbs().maxCoeff()) << m.describe();
  }
}

TEST(LagrangianHessian, BlockStructure) {
  const AnisotropyModel m = AnisotropyModel::reg_linf(0.1);
  const Config c = random_config(m, 8, 6);
  const KktSystem k = lagrangian_hessian(m, c.previous, c.x, c.y, c.p, kParams);
  const Eigen::MatrixXd h(k.matrix());
  const int n = static_cast<int>(c.x.size());
  EXPECT_EQ(h.bottomRightCorner(n, n).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((h - h.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(k.gradient.stacked().isApprox(lagrangian_gradient(m, c.previous, c.x, c.y, c.p, kParams).stacked()));
}

TEST(LagrangianHessian, CoordinateDump) {
  const AnisotropyModel m = AnisotropyModel::isotropic();
  const Config c = random_config(m, 4, 7);
  const KktSystem k = lagrangian_hessian(m, c.previous, c.x, c.y, c.p, kParams);
  std::stringstream out;
  k.write_coordinates(out);
  int row = 0, col = 0, lines = 0;
  double value = 0.0;
  const Eigen::MatrixXd h(k.matrix());
  while (out >> row >> col >> value) {
    EXPECT_EQ(value, h(row, col));
    ++lines;
  }
  EXPECT_EQ(lines, k.matrix().nonZeros());
}

TEST(StepParameters, Validation) {
  EXPECT_THROW((StepParameters{0.0, 1.0, 0.0}.validate()), Error);
  EXPECT_THROW((StepParameters{1.0, 0.0, 0.0}.validate()), Error);
  EXPECT_THROW((StepParameters{1.0, 1.0, -1.0}.validate()), Error);
  EXPECT_NO_THROW((StepParameters{1.0, 1.0, 0.0}.validate()));
}
