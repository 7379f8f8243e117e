#include "anisoflow/lagrangian.hpp"

#include <cmath>
#include <ostream>

#include "anisoflow/error.hpp"
#include "number_format.hpp"

namespace anisoflow {

namespace {

struct Inputs {
  SimplicialSurface current;
  NodalField z1;  // X - X^k on X^k
  NodalField z2;  // Y - X on X
};

Inputs prepare(const SimplicialSurface& previous, const NodalField& x, const NodalField& y,
               const NodalField& p, const StepParameters& params) {
  params.validate();
  require_aligned(x, previous, "X");
  require_aligned(y, previous, "Y");
  require_aligned(p, previous, "P");
  SimplicialSurface current = previous.with_coordinates(x);
  return {current, x - previous.coordinates(), y - x};
}

void append(std::vector<Eigen::Triplet<double>>& out, const SparseMatrix& m, int row0, int col0,
            bool transpose) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      if (transpose)
        out.emplace_back(row0 + static_cast<int>(it.col()), col0 + static_cast<int>(it.row()), it.value());
      else
        out.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()), it.value());
    }
}

SparseMatrix symmetric_part(const SparseMatrix& m) {
  SparseMatrix t = m.transpose();
  return 0.5 * (m + t);
}

}  // namespace

void StepParameters::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::InvalidConfig, "tau must be positive");
  if (!(tau_tilde > 0.0) || !std::isfinite(tau_tilde))
    throw Error(ErrorKind::InvalidConfig, "tau~ must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw Error(ErrorKind::InvalidConfig, "lambda must be nonnegative");
}

Eigen::VectorXd KktGradient::stacked() const {
  Eigen::VectorXd out(x.size() + y.size() + p.size());
  out << x, y, p;
  return out;
}

double KktGradient::max_norm() const {
  return std::max({x.lpNorm<Eigen::Infinity>(), y.lpNorm<Eigen::Infinity>(), p.lpNorm<Eigen::Infinity>()});
}

SparseMatrix KktSystem::matrix() const {
  const int n = static_cast<int>(xx.rows());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(xx.nonZeros() + 2 * (xy.nonZeros() + xp.nonZeros() + yp.nonZeros()) + yy.nonZeros());
  append(trip, xx, 0, 0, false);
  append(trip, xy, 0, n, false);
  append(trip, xy, n, 0, true);
  append(trip, xp, 0, 2 * n, false);
  append(trip, xp, 2 * n, 0, true);
  append(trip, yy, n, n, false);
  append(trip, yp, n, 2 * n, false);
  append(trip, yp, 2 * n, n, true);
  SparseMatrix out(3 * n, 3 * n);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void KktSystem::write_coordinates(std::ostream& out) const {
  const Eigen::SparseMatrix<double, Eigen::RowMajor> m = matrix();
  for (int r = 0; r < m.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << detail::format_double(it.value()) << '\n';
}

double lagrangian_value(const AnisotropyModel& model, const SimplicialSurface& previous, const NodalField& x,
                        const NodalField& y, const NodalField& p, const StepParameters& params) {
  const Inputs in = prepare(previous, x, y, p, params);
  const MixedOrder dz[] = {m_derivative::dZ};
  const MGammaDerivatives m2 = m_gamma_derivatives(model, in.z2, in.current, dz);
  const AGammaDerivatives ay = a_gamma_derivatives(model, previous.with_coordinates(y), 1);
  double value = m_gamma(model, in.z1, previous) + params.weight() * m2.value();
  if (params.lambda != 0.0) value += 2.0 * params.tau * params.lambda * a_gamma(model, in.current);
  value -= p.dot(m2.dZ() + 2.0 * params.tau_tilde * ay.first());
  return value;
}

KktGradient lagrangian_gradient(const AnisotropyModel& model, const SimplicialSurface& previous,
                                const NodalField& x, const NodalField& y, const NodalField& p,
                                const StepParameters& params) {
  const Inputs in = prepare(previous, x, y, p, params);
  const double w = params.weight();
  const MixedOrder first[] = {m_derivative::dZ};
  const MixedOrder second[] = {m_derivative::dZ, m_derivative::dX, m_derivative::dZZ, m_derivative::dZX};
  const MGammaDerivatives m1 = m_gamma_derivatives(model, in.z1, previous, first);
  const MGammaDerivatives m2 = m_gamma_derivatives(model, in.z2, in.current, second);
  const AGammaDerivatives ay = a_gamma_derivatives(model, previous.with_coordinates(y), 2);

  KktGradient g;
  g.x = m1.dZ() + w * (m2.dX() - m2.dZ()) + m2.dZZ() * p - m2.dZX().transpose() * p;
  if (params.lambda != 0.0)
    g.x += 2.0 * params.tau * params.lambda * a_gamma_derivatives(model, in.current, 1).first();
  g.y = w * m2.dZ() - (m2.dZZ() * p + 2.0 * params.tau_tilde * (ay.second() * p));
  g.p = -(m2.dZ() + 2.0 * params.tau_tilde * ay.first());
  return g;
}

KktSystem lagrangian_hessian(const AnisotropyModel& model, const SimplicialSurface& previous,
                             const NodalField& x, const NodalField& y, const NodalField& p,
                             const StepParameters& params) {
  const Inputs in = prepare(previous, x, y, p, params);
  const double w = params.weight();
  const double tt = params.tau_tilde;
  const MixedOrder first[] = {m_derivative::dZ, m_derivative::dZZ};
  const MGammaDerivatives m1 = m_gamma_derivatives(model, in.z1, previous, first);
  const MGammaDerivatives m2 = m_gamma_derivatives(model, in.z2, in.current, m_derivative::all);
  const AGammaDerivatives ay = a_gamma_derivatives(model, previous.with_coordinates(y), 3);

  const SparseMatrix& dzz = m2.dZZ();
  const SparseMatrix& dzx = m2.dZX();
  const SparseMatrix dxz = dzx.transpose();
  const SparseMatrix t3p = m2.dZZZ(p);
  const SparseMatrix zzxp = m2.dZZX(p);
  const SparseMatrix xzzp = zzxp.transpose();
  const SparseMatrix zxxp = m2.dZXX(p);
  const SparseMatrix ayy = ay.second();

  KktSystem k;
  k.gradient.x = m1.dZ() + w * (m2.dX() - m2.dZ()) + dzz * p - dxz * p;
  k.gradient.y = w * m2.dZ() - (dzz * p + 2.0 * tt * (ayy * p));
  k.gradient.p = -(m2.dZ() + 2.0 * tt * ay.first());

  SparseMatrix xx = m1.dZZ() + w * (m2.dXX() - dzx - dxz + dzz) - (t3p - zzxp - xzzp + zxxp);
  if (params.lambda != 0.0) {
    const AGammaDerivatives ax = a_gamma_derivatives(model, in.current, 2);
    k.gradient.x += 2.0 * params.tau * params.lambda * ax.first();
    xx += 2.0 * params.tau * params.lambda * ax.second();
  }
  k.xx = symmetric_part(xx);
  k.xy = w * (dxz - dzz) + t3p - xzzp;
  k.yy = symmetric_part(w * dzz - (t3p + 2.0 * tt * ay.third(p)));
  k.xp = dzz - dxz;
  k.yp = -(dzz + 2.0 * tt * ayy);
  for (SparseMatrix* m : {&k.xx, &k.xy, &k.yy, &k.xp, &k.yp}) m->prune(0.0);
  return k;
}

}  // namespace anisoflow
