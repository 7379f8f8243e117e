#include "anisoflow/geometry.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Geometry>

#include "anisoflow/error.hpp"
#include "number_format.hpp"

namespace anisoflow {

SimplicialSurface::SimplicialSurface(int dim, NodalField coordinates, std::vector<Element> elements)
    : dim_(dim), coords_(std::move(coordinates)), elements_(std::move(elements)) {
  const int n = vertex_count();
  if (coords_.size() % components() != 0)
    throw Error(ErrorKind::InvalidInput, "coordinate vector length is not a multiple of d+1");
  if (!coords_.allFinite()) throw Error(ErrorKind::InvalidInput, "vertex coordinates are not finite");
  for (const Element& e : elements_) {
    for (int a = 0; a < nodes_per_element(); ++a) {
      if (e[a] < 0 || e[a] >= n) throw Error(ErrorKind::InvalidInput, "element index out of range");
      for (int b = 0; b < a; ++b)
        if (e[a] == e[b]) throw Error(ErrorKind::InvalidInput, "element repeats a vertex");
    }
  }
}

SimplicialSurface SimplicialSurface::closed_polygon(std::span<const Vec> points) {
  NodalField coords(2 * static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != 2) throw Error(ErrorKind::InvalidInput, "polygon vertices must be planar");
    coords.segment<2>(2 * i) = points[i];
  }
  return closed_polygon(std::move(coords));
}

SimplicialSurface SimplicialSurface::closed_polygon(NodalField coordinates) {
  const int n = static_cast<int>(coordinates.size() / 2);
  if (n < 3) throw Error(ErrorKind::InvalidInput, "a closed polygon needs at least 3 vertices");
  std::vector<Element> edges(n);
  for (int i = 0; i < n; ++i) edges[i] = {i, (i + 1) % n, -1};
  return SimplicialSurface(1, std::move(coordinates), std::move(edges));
}

SimplicialSurface SimplicialSurface::triangle_mesh(NodalField coordinates,
                                                   std::vector<Element> triangles) {
  if (triangles.empty()) throw Error(ErrorKind::InvalidInput, "triangle mesh has no elements");
  return SimplicialSurface(2, std::move(coordinates), std::move(triangles));
}

SimplicialSurface SimplicialSurface::with_coordinates(NodalField coordinates) const {
  if (coordinates.size() != coords_.size())
    throw Error(ErrorKind::InvalidInput, "coordinate vector does not match the mesh");
  SimplicialSurface copy = *this;
  if (!coordinates.allFinite()) throw Error(ErrorKind::InvalidInput, "vertex coordinates are not finite");
  copy.coords_ = std::move(coordinates);
  return copy;
}

LocalVector SimplicialSurface::gather(const NodalField& field, int t) const {
  const int c = components();
  LocalVector local(nodes_per_element() * c);
  const Element& e = elements_[t];
  for (int a = 0; a < nodes_per_element(); ++a) local.segment(a * c, c) = field.segment(e[a] * c, c);
  return local;
}

void require_aligned(const NodalField& field, const SimplicialSurface& surface, const char* what) {
  if (field.size() != surface.unknown_count()) {
    std::ostringstream msg;
    msg << what << " has " << field.size() << " entries, mesh has " << surface.unknown_count();
    throw Error(ErrorKind::InvalidInput, msg.str());
  }
  if (!field.allFinite()) throw Error(ErrorKind::InvalidInput, std::string(what) + " is not finite");
}

namespace {

int levi_civita(int w, int u, int v) {
  if (w == u || u == v || w == v) return 0;
  return ((u - w + 3) % 3 == 1) ? 1 : -1;
}

double kron(int a, int b) { return a == b ? 1.0 : 0.0; }

}  // namespace

ElementNormalMap element_normal_map(int dim, const LocalVector& x) {
  ElementNormalMap map;
  map.dim = dim;
  if (dim == 1) {
    if (x.size() != 4) throw Error(ErrorKind::InvalidInput, "segment needs 4 local coordinates");
    map.normal = Vec(2);
    map.normal << x(1) - x(3), x(2) - x(0);
    map.jacobian = LocalJacobian::Zero(2, 4);
    // Columns (j, s) = X_00, X_01, X_10, X_11 (zero-based component index).
    map.jacobian(1, 0) = -1.0;
    map.jacobian(0, 1) = 1.0;
    map.jacobian(1, 2) = 1.0;
    map.jacobian(0, 3) = -1.0;
    for (auto& h : map.hessian) h = LocalMatrix::Zero(4, 4);
    return map;
  }
  if (dim != 2) throw Error(ErrorKind::InvalidInput, "element dimension must be 1 or 2");
  if (x.size() != 9) throw Error(ErrorKind::InvalidInput, "triangle needs 9 local coordinates");

  const Eigen::Vector3d e1 = x.segment<3>(3) - x.segment<3>(0);
  const Eigen::Vector3d e2 = x.segment<3>(6) - x.segment<3>(0);
  map.normal = Vec(3);
  map.normal = e1.cross(e2);
  map.jacobian = LocalJacobian::Zero(3, 9);
  for (auto& h : map.hessian) h = LocalMatrix::Zero(9, 9);
  for (int w = 0; w < 3; ++w) {
    for (int j = 0; j < 3; ++j) {
      const double d1j = kron(1, j) - kron(0, j);
      const double d2j = kron(2, j) - kron(0, j);
      for (int s = 0; s < 3; ++s) {
        double value = 0.0;
        for (int u = 0; u < 3; ++u)
          for (int v = 0; v < 3; ++v) {
            const int eps = levi_civita(w, u, v);
            if (eps == 0) continue;
            value += eps * (d1j * kron(s, u) * e2(v) + d2j * kron(s, v) * e1(u));
          }
        map.jacobian(w, 3 * j + s) = value;
        for (int l = 0; l < 3; ++l) {
          const double d1l = kron(1, l) - kron(0, l);
          const double d2l = kron(2, l) - kron(0, l);
          for (int t = 0; t < 3; ++t)
            map.hessian[w](3 * j + s, 3 * l + t) =
                d1j * d2l * levi_civita(w, s, t) + d2j * d1l * levi_civita(w, t, s);
        }
      }
    }
  }
  return map;
}

Vec vertex_normal(const SimplicialSurface& surface, int i) {
  if (surface.dim() != 1) throw Error(ErrorKind::Unsupported, "vertex normals are implemented for curves only");
  const int n = surface.vertex_count();
  if (i < 0 || i >= n) throw Error(ErrorKind::InvalidInput, "vertex index out of range");
  const int prev = (i + n - 1) % n;
  const double threshold = degeneracy_threshold(surface);
  Vec sum = Vec::Zero(2);
  for (int t : {prev, i}) {
    const Vec r = element_normal_map(1, surface.gather(surface.coordinates(), t)).normal;
    if (r.norm() < threshold) throw Error(ErrorKind::NearSingular, "degenerate edge at vertex normal");
    sum += r;  // |R| (R / |R|)
  }
  const double len = sum.norm();
  if (len < threshold) throw Error(ErrorKind::NearSingular, "incident edges cancel at vertex normal");
  // R is the inward normal for counterclockwise curves.
  return -sum / len;
}

double mesh_size(const SimplicialSurface& surface) {
  double h = 0.0;
  const int k = surface.nodes_per_element();
  for (const Element& e : surface.elements())
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) h = std::max(h, (surface.vertex(e[a]) - surface.vertex(e[b])).norm());
  return h;
}

double degeneracy_threshold(const SimplicialSurface& surface) {
  Vec lo = surface.vertex(0), hi = surface.vertex(0);
  for (int i = 1; i < surface.vertex_count(); ++i) {
    lo = lo.cwiseMin(surface.vertex(i));
    hi = hi.cwiseMax(surface.vertex(i));
  }
  return 1e-12 * (hi - lo).norm();
}

bool is_nondegenerate(const SimplicialSurface& surface) {
  const double threshold = degeneracy_threshold(surface);
  for (int t = 0; t < surface.element_count(); ++t) {
    const Vec r = element_normal_map(surface.dim(), surface.gather(surface.coordinates(), t)).normal;
    if (!(r.norm() >= threshold) || r.norm() == 0.0) return false;
  }
  return true;
}

void require_nondegenerate(const SimplicialSurface& surface) {
  if (!is_nondegenerate(surface)) throw Error(ErrorKind::NearSingular, "mesh has a degenerate element");
}

Eigen::VectorXd lumped_weights(const SimplicialSurface& surface) {
  if (surface.dim() != 1) throw Error(ErrorKind::Unsupported, "lumped weights are implemented for curves only");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(surface.vertex_count());
  for (const Element& e : surface.elements()) {
    const double len = (surface.vertex(e[1]) - surface.vertex(e[0])).norm();
    w(e[0]) += 0.5 * len;
    w(e[1]) += 0.5 * len;
  }
  return w;
}

double enclosed_area(const SimplicialSurface& surface) {
  if (surface.dim() != 1) throw Error(ErrorKind::Unsupported, "enclosed area is defined for curves only");
  double twice = 0.0;
  for (const Element& e : surface.elements()) {
    const Vec a = surface.vertex(e[0]);
    const Vec b = surface.vertex(e[1]);
    twice += a(0) * b(1) - b(0) * a(1);
  }
  return 0.5 * twice;
}

SimplicialSurface read_mesh(std::istream& in) {
  int dim = 0, n = 0, m = 0;
  if (!(in >> dim >> n >> m)) throw Error(ErrorKind::Io, "mesh header must be 'd n_vertices n_elements'");
  if (dim != 1 && dim != 2) throw Error(ErrorKind::InvalidInput, "mesh dimension must be 1 or 2");
  if (n < 3 || m < 1) throw Error(ErrorKind::InvalidInput, "mesh is too small");
  const int c = dim + 1;
  NodalField coords(c * n);
  for (int i = 0; i < c * n; ++i)
    if (!(in >> coords(i))) throw Error(ErrorKind::Io, "truncated vertex block in mesh file");
  std::vector<Element> elements(m, Element{-1, -1, -1});
  for (int t = 0; t < m; ++t)
    for (int a = 0; a < c; ++a)
      if (!(in >> elements[t][a])) throw Error(ErrorKind::Io, "truncated element block in mesh file");
  if (dim == 2) return SimplicialSurface::triangle_mesh(std::move(coords), std::move(elements));

  SimplicialSurface polygon = SimplicialSurface::closed_polygon(std::move(coords));
  if (m != n) throw Error(ErrorKind::InvalidInput, "closed polygon needs as many edges as vertices");
  for (int t = 0; t < m; ++t)
    if (elements[t][0] != t || elements[t][1] != (t + 1) % n)
      throw Error(ErrorKind::InvalidInput, "polygon edges must be (i, i+1 mod n) in order");
  return polygon;
}

void write_mesh(std::ostream& out, const SimplicialSurface& surface) {
  const int c = surface.components();
  out << surface.dim() << ' ' << surface.vertex_count() << ' ' << surface.element_count() << '\n';
  for (int i = 0; i < surface.vertex_count(); ++i) {
    for (int k = 0; k < c; ++k)
      out << (k ? " " : "") << detail::format_double(surface.coordinates()(c * i + k));
    out << '\n';
  }
  for (const Element& e : surface.elements()) {
    for (int a = 0; a < c; ++a) out << (a ? " " : "") << e[a];
    out << '\n';
  }
}

void write_snapshot_csv(std::ostream& out, const SimplicialSurface& surface) {
  if (surface.dim() != 1) throw Error(ErrorKind::Unsupported, "CSV snapshots are defined for curves only");
  for (int i = 0; i < surface.vertex_count(); ++i)
    out << detail::format_double(surface.coordinates()(2 * i)) << ','
        << detail::format_double(surface.coordinates()(2 * i + 1)) << '\n';
}

}  // namespace anisoflow
