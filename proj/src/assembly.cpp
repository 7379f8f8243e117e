#include "anisoflow/assembly.hpp"

#include <algorithm>
#include <sstream>

#include "anisoflow/error.hpp"

namespace anisoflow {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// Scatter a local (nodes*c) x (nodes*c) block into global triplets.
void scatter(Triplets& out, const Element& e, int nodes, int c, const LocalMatrix& block, double scale) {
  for (int a = 0; a < nodes; ++a)
    for (int r = 0; r < c; ++r)
      for (int b = 0; b < nodes; ++b)
        for (int s = 0; s < c; ++s) {
          const double v = block(a * c + r, b * c + s);
          if (v != 0.0) out.emplace_back(e[a] * c + r, e[b] * c + s, scale * v);
        }
}

// Scatter a per-node c x c block onto the diagonal block of vertex i.
void scatter_node(Triplets& out, int i, int c, const Mat& block, double scale) {
  for (int r = 0; r < c; ++r)
    for (int s = 0; s < c; ++s)
      if (block(r, s) != 0.0) out.emplace_back(i * c + r, i * c + s, scale * block(r, s));
}

SparseMatrix build(int n, Triplets& triplets) {
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

void require_order_set(std::span<const MixedOrder> request) {
  for (const MixedOrder& o : request) {
    if (std::find(std::begin(m_derivative::all), std::end(m_derivative::all), o) ==
        std::end(m_derivative::all)) {
      std::ostringstream msg;
      msg << "derivative of M of order " << o.z << " in Z and " << o.x << " in X is not available";
      throw Error(ErrorKind::Unsupported, msg.str());
    }
  }
}

}  // namespace

LocalMatrix ElementGammaData::d3(const LocalVector& v) const {
  const LocalJacobian& jac = normal_map.jacobian;
  const Vec a = jac * v;
  const Mat& hess = gamma.hessian;
  LocalMatrix out = jac.transpose() * gamma.third.contract(a) * jac;
  if (!normal_map.is_linear()) {
    const int m = static_cast<int>(a.size());
    LocalJacobian hv(m, v.size());
    for (int w = 0; w < m; ++w) hv.row(w) = (normal_map.hessian[w] * v).transpose();
    const LocalMatrix mixed = hv.transpose() * hess * jac;
    out += mixed + mixed.transpose();
    const Vec ha = hess * a;
    for (int u = 0; u < m; ++u) out += ha(u) * normal_map.hessian[u];
  }
  return out;
}

ElementGammaData element_gamma_data(const AnisotropyModel& model, int dim, const LocalVector& corners,
                                    int order) {
  ElementGammaData data;
  data.normal_map = element_normal_map(dim, corners);
  const Vec& r = data.normal_map.normal;
  if (order == 0) {
    data.gamma.value = model.gamma(r);
    return data;
  }
  data.gamma = model.gamma_derivatives(r, order);
  const LocalJacobian& jac = data.normal_map.jacobian;
  data.d1 = jac.transpose() * data.gamma.gradient;
  if (order >= 2) {
    data.d2 = jac.transpose() * data.gamma.hessian * jac;
    if (!data.normal_map.is_linear())
      for (int w = 0; w < static_cast<int>(r.size()); ++w)
        data.d2 += data.gamma.gradient(w) * data.normal_map.hessian[w];
  }
  return data;
}

double m_gamma(const AnisotropyModel& model, const NodalField& z, const SimplicialSurface& x) {
  require_aligned(z, x, "Z");
  const int c = x.components();
  const double factor = 1.0 / factorial(x.dim() + 1);
  double total = 0.0;
  for (int t = 0; t < x.element_count(); ++t) {
    const Element& e = x.element(t);
    double sum = 0.0;
    for (int a = 0; a < x.nodes_per_element(); ++a) sum += model.dual_sq(z.segment(e[a] * c, c));
    total += factor * sum * model.gamma(element_normal_map(x.dim(), x.gather(x.coordinates(), t)).normal);
  }
  return total;
}

double a_gamma(const AnisotropyModel& model, const SimplicialSurface& x) {
  const double factor = 1.0 / factorial(x.dim());
  double total = 0.0;
  for (int t = 0; t < x.element_count(); ++t)
    total += factor * model.gamma(element_normal_map(x.dim(), x.gather(x.coordinates(), t)).normal);
  return total;
}

// ---------------------------------------------------------------------------
// M derivatives

bool MGammaDerivatives::has(MixedOrder order) const {
  return std::find(requested_.begin(), requested_.end(), order) != requested_.end();
}

void MGammaDerivatives::require(MixedOrder order) const {
  if (!has(order)) throw Error(ErrorKind::InvalidInput, "derivative of M was not requested");
}

const Eigen::VectorXd& MGammaDerivatives::dZ() const {
  require(m_derivative::dZ);
  return dz_;
}
const Eigen::VectorXd& MGammaDerivatives::dX() const {
  require(m_derivative::dX);
  return dx_;
}
const SparseMatrix& MGammaDerivatives::dZZ() const {
  require(m_derivative::dZZ);
  return dzz_;
}
const SparseMatrix& MGammaDerivatives::dXX() const {
  require(m_derivative::dXX);
  return dxx_;
}
const SparseMatrix& MGammaDerivatives::dZX() const {
  require(m_derivative::dZX);
  return dzx_;
}

SparseMatrix MGammaDerivatives::dZZZ(const NodalField& dir) const {
  require(m_derivative::dZZZ);
  const int c = dim_ + 1;
  Triplets trip;
  for (std::size_t t = 0; t < connectivity_.size(); ++t) {
    const Element& e = connectivity_[t];
    const double g = elements_[t].gamma.value;
    for (int a = 0; a <= dim_; ++a) {
      const int i = e[a];
      scatter_node(trip, i, c, nodes_[i].third.contract(dir.segment(i * c, c)), factor_ * g);
    }
  }
  return build(unknowns_, trip);
}

SparseMatrix MGammaDerivatives::dZZX(const NodalField& dir) const {
  require(m_derivative::dZZX);
  const int c = dim_ + 1;
  const int nodes = dim_ + 1;
  Triplets trip;
  for (std::size_t t = 0; t < connectivity_.size(); ++t) {
    const Element& e = connectivity_[t];
    const LocalVector& d1 = elements_[t].d1;
    for (int a = 0; a < nodes; ++a) {
      const int i = e[a];
      const Vec row = nodes_[i].hessian * dir.segment(i * c, c);
      for (int s = 0; s < c; ++s)
        for (int b = 0; b < nodes; ++b)
          for (int u = 0; u < c; ++u)
            trip.emplace_back(i * c + s, e[b] * c + u, factor_ * row(s) * d1(b * c + u));
    }
  }
  return build(unknowns_, trip);
}

SparseMatrix MGammaDerivatives::dZXX(const NodalField& dir) const {
  require(m_derivative::dZXX);
  const int c = dim_ + 1;
  const int nodes = dim_ + 1;
  Triplets trip;
  for (std::size_t t = 0; t < connectivity_.size(); ++t) {
    const Element& e = connectivity_[t];
    double weight = 0.0;
    for (int a = 0; a < nodes; ++a) weight += nodes_[e[a]].gradient.dot(dir.segment(e[a] * c, c));
    scatter(trip, e, nodes, c, elements_[t].d2, factor_ * weight);
  }
  return build(unknowns_, trip);
}

MGammaDerivatives m_gamma_derivatives(const AnisotropyModel& model, const NodalField& z,
                                      const SimplicialSurface& x, std::span<const MixedOrder> request) {
  require_order_set(request);
  require_aligned(z, x, "Z");

  MGammaDerivatives out;
  out.dim_ = x.dim();
  out.unknowns_ = x.unknown_count();
  out.connectivity_ = x.elements();
  out.requested_.assign(request.begin(), request.end());
  out.factor_ = 1.0 / factorial(x.dim() + 1);

  int z_order = 0, x_order = 0;
  for (const MixedOrder& o : request) {
    z_order = std::max(z_order, o.z);
    x_order = std::max(x_order, o.x);
  }

  const int c = x.components();
  const int nodes = x.nodes_per_element();
  const int n = x.vertex_count();
  out.nodes_.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec zi = z.segment(i * c, c);
    if (z_order == 0) {
      out.nodes_[i].value = model.dual_sq(zi);
    } else {
      out.nodes_[i] = model.dual_sq_derivatives(zi, z_order);
    }
  }

  out.elements_.reserve(x.element_count());
  out.element_dual_sums_.reserve(x.element_count());
  for (int t = 0; t < x.element_count(); ++t) {
    out.elements_.push_back(element_gamma_data(model, x.dim(), x.gather(x.coordinates(), t), x_order));
    double sum = 0.0;
    for (int a = 0; a < nodes; ++a) sum += out.nodes_[x.element(t)[a]].value;
    out.element_dual_sums_.push_back(sum);
    out.value_ += out.factor_ * sum * out.elements_.back().gamma.value;
  }

  const double f = out.factor_;
  if (out.has(m_derivative::dZ)) {
    out.dz_ = Eigen::VectorXd::Zero(out.unknowns_);
    for (int t = 0; t < x.element_count(); ++t) {
      const double g = out.elements_[t].gamma.value;
      for (int a = 0; a < nodes; ++a) {
        const int i = x.element(t)[a];
        out.dz_.segment(i * c, c) += f * g * out.nodes_[i].gradient;
      }
    }
  }
  if (out.has(m_derivative::dZZ)) {
    Triplets trip;
    for (int t = 0; t < x.element_count(); ++t) {
      const double g = out.elements_[t].gamma.value;
      for (int a = 0; a < nodes; ++a) {
        const int i = x.element(t)[a];
        scatter_node(trip, i, c, out.nodes_[i].hessian, f * g);
      }
    }
    out.dzz_ = build(out.unknowns_, trip);
  }
  if (out.has(m_derivative::dX)) {
    out.dx_ = Eigen::VectorXd::Zero(out.unknowns_);
    for (int t = 0; t < x.element_count(); ++t) {
      const Element& e = x.element(t);
      for (int a = 0; a < nodes; ++a)
        out.dx_.segment(e[a] * c, c) +=
            f * out.element_dual_sums_[t] * out.elements_[t].d1.segment(a * c, c);
    }
  }
  if (out.has(m_derivative::dXX)) {
    Triplets trip;
    for (int t = 0; t < x.element_count(); ++t)
      scatter(trip, x.element(t), nodes, c, out.elements_[t].d2, f * out.element_dual_sums_[t]);
    out.dxx_ = build(out.unknowns_, trip);
  }
  if (out.has(m_derivative::dZX)) {
    Triplets trip;
    for (int t = 0; t < x.element_count(); ++t) {
      const Element& e = x.element(t);
      const LocalVector& d1 = out.elements_[t].d1;
      for (int a = 0; a < nodes; ++a) {
        const Vec& s = out.nodes_[e[a]].gradient;
        for (int r = 0; r < c; ++r)
          for (int b = 0; b < nodes; ++b)
            for (int u = 0; u < c; ++u)
              trip.emplace_back(e[a] * c + r, e[b] * c + u, f * s(r) * d1(b * c + u));
      }
    }
    out.dzx_ = build(out.unknowns_, trip);
  }
  return out;
}

// ---------------------------------------------------------------------------
// A derivatives

const SparseMatrix& AGammaDerivatives::second() const {
  if (order_ < 2) throw Error(ErrorKind::InvalidInput, "second derivative of A was not requested");
  return second_;
}

SparseMatrix AGammaDerivatives::third(const NodalField& dir) const {
  if (order_ < 3) throw Error(ErrorKind::InvalidInput, "third derivative of A was not requested");
  const int c = dim_ + 1;
  const int nodes = dim_ + 1;
  Triplets trip;
  for (std::size_t t = 0; t < connectivity_.size(); ++t) {
    const Element& e = connectivity_[t];
    LocalVector local(nodes * c);
    for (int a = 0; a < nodes; ++a) local.segment(a * c, c) = dir.segment(e[a] * c, c);
    scatter(trip, e, nodes, c, elements_[t].d3(local), factor_);
  }
  return build(unknowns_, trip);
}

AGammaDerivatives a_gamma_derivatives(const AnisotropyModel& model, const SimplicialSurface& x, int order) {
  if (order < 1 || order > 3) throw Error(ErrorKind::Unsupported, "derivatives of A exist up to order 3");
  AGammaDerivatives out;
  out.dim_ = x.dim();
  out.unknowns_ = x.unknown_count();
  out.connectivity_ = x.elements();
  out.order_ = order;
  out.factor_ = 1.0 / factorial(x.dim());

  const int c = x.components();
  const int nodes = x.nodes_per_element();
  out.first_ = Eigen::VectorXd::Zero(out.unknowns_);
  Triplets trip;
  out.elements_.reserve(x.element_count());
  for (int t = 0; t < x.element_count(); ++t) {
    out.elements_.push_back(element_gamma_data(model, x.dim(), x.gather(x.coordinates(), t), order));
    const ElementGammaData& data = out.elements_.back();
    const Element& e = x.element(t);
    out.value_ += out.factor_ * data.gamma.value;
    for (int a = 0; a < nodes; ++a) out.first_.segment(e[a] * c, c) += out.factor_ * data.d1.segment(a * c, c);
    if (order >= 2) scatter(trip, e, nodes, c, data.d2, out.factor_);
  }
  if (order >= 2) out.second_ = build(out.unknowns_, trip);
  return out;
}

// ---------------------------------------------------------------------------
// Energies

double energy_inner(const AnisotropyModel& model, const SimplicialSurface& x, const NodalField& y,
                    double tau_tilde) {
  require_aligned(y, x, "Y");
  return m_gamma(model, y - x.coordinates(), x) + 2.0 * tau_tilde * a_gamma(model, x.with_coordinates(y));
}

double energy_outer(const AnisotropyModel& model, const SimplicialSurface& previous, const NodalField& x,
                    const NodalField& y, double tau, double tau_tilde, double lambda) {
  if (!(tau > 0.0) || !(tau_tilde > 0.0))
    throw Error(ErrorKind::InvalidConfig, "time steps tau and tau~ must be positive");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidConfig, "lambda must be nonnegative");
  require_aligned(x, previous, "X");
  require_aligned(y, previous, "Y");
  const SimplicialSurface current = previous.with_coordinates(x);
  double value = m_gamma(model, x - previous.coordinates(), previous) +
                 tau / (tau_tilde * tau_tilde) * m_gamma(model, y - x, current);
  if (lambda != 0.0) value += 2.0 * tau * lambda * a_gamma(model, current);
  return value;
}

InnerDerivatives energy_inner_derivatives(const AnisotropyModel& model, const SimplicialSurface& x,
                                          const NodalField& y, double tau_tilde, bool with_hessian) {
  require_aligned(y, x, "Y");
  const MixedOrder grad_only[] = {m_derivative::dZ};
  const MixedOrder with_second[] = {m_derivative::dZ, m_derivative::dZZ};
  const MGammaDerivatives m =
      with_hessian ? m_gamma_derivatives(model, y - x.coordinates(), x, with_second)
                   : m_gamma_derivatives(model, y - x.coordinates(), x, grad_only);
  const AGammaDerivatives a = a_gamma_derivatives(model, x.with_coordinates(y), with_hessian ? 2 : 1);
  InnerDerivatives out;
  out.value = m.value() + 2.0 * tau_tilde * a.value();
  out.gradient = m.dZ() + 2.0 * tau_tilde * a.first();
  if (with_hessian) out.hessian = m.dZZ() + 2.0 * tau_tilde * a.second();
  return out;
}

}  // namespace anisoflow
