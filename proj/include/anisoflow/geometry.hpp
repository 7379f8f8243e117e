#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "anisoflow/anisotropy.hpp"

namespace anisoflow {

/// Per-vertex vectors in R^{d+1}, stored vertex-major: entry (d+1)*vertex + component.
using NodalField = Eigen::VectorXd;

// Element-local quantities. A simplex has d+1 nodes with d+1 components each,
// flattened node-major, so at most 9 local unknowns.
using LocalVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 9, 1>;
using LocalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 9, 9>;
using LocalJacobian = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 9>;

using Element = std::array<int, 3>;

/// Closed polygon (d = 1) or triangle mesh (d = 2) with vertex coordinates.
class SimplicialSurface {
 public:
  /// Cyclic polygon, element i = (i, i+1 mod n). Stored counterclockwise by convention.
  static SimplicialSurface closed_polygon(std::span<const Vec> points);
  static SimplicialSurface closed_polygon(NodalField coordinates);
  static SimplicialSurface triangle_mesh(NodalField coordinates, std::vector<Element> triangles);

  int dim() const { return dim_; }
  int components() const { return dim_ + 1; }
  int nodes_per_element() const { return dim_ + 1; }
  int vertex_count() const { return static_cast<int>(coords_.size()) / components(); }
  int element_count() const { return static_cast<int>(elements_.size()); }
  int unknown_count() const { return static_cast<int>(coords_.size()); }

  const NodalField& coordinates() const { return coords_; }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(int t) const { return elements_[t]; }
  Vec vertex(int i) const { return coords_.segment(components() * i, components()); }

  /// Same connectivity, new vertex positions.
  SimplicialSurface with_coordinates(NodalField coordinates) const;

  /// Local node vector of element t taken from a field aligned with this surface.
  LocalVector gather(const NodalField& field, int t) const;

 private:
  SimplicialSurface(int dim, NodalField coordinates, std::vector<Element> elements);

  int dim_ = 1;
  NodalField coords_;
  std::vector<Element> elements_;
};

/// Throws InvalidInput unless `field` has one (d+1)-vector per vertex, all finite.
void require_aligned(const NodalField& field, const SimplicialSurface& surface, const char* what);

/// Element normal map R and its derivatives with respect to the element's
/// node coordinates. d = 1: R = (X02 - X12, X11 - X01), the edge rotated by
/// +90 degrees. d = 2: R = (X1 - X0) x (X2 - X0). R is at most quadratic, so
/// third derivatives vanish identically and are not stored.
struct ElementNormalMap {
  int dim = 1;
  Vec normal;                          // R
  LocalJacobian jacobian;              // (w, js) -> dR_w / dX_js
  std::array<LocalMatrix, 3> hessian;  // [w](js, lt) -> d2R_w / dX_js dX_lt, zero for d = 1

  bool is_linear() const { return dim == 1; }
};

ElementNormalMap element_normal_map(int dim, const LocalVector& corners);

/// Outward unit normal at vertex i of a counterclockwise closed polygon:
/// length-weighted mean of the incident element normals.
Vec vertex_normal(const SimplicialSurface& surface, int i);

/// Largest element diameter.
double mesh_size(const SimplicialSurface& surface);

/// Elements whose normal map is shorter than 1e-12 times the bounding box
/// diagonal are degenerate.
double degeneracy_threshold(const SimplicialSurface& surface);
bool is_nondegenerate(const SimplicialSurface& surface);
void require_nondegenerate(const SimplicialSurface& surface);

/// Lumped-mass vertex weights (half the length of the incident edges), d = 1.
Eigen::VectorXd lumped_weights(const SimplicialSurface& surface);

/// Signed enclosed area of a closed polygon (positive for counterclockwise).
double enclosed_area(const SimplicialSurface& surface);

// Text mesh format: header "d n_vertices n_elements", then one vertex per line
// (d+1 coordinates), then one element per line (d+1 vertex indices).
SimplicialSurface read_mesh(std::istream& in);
void write_mesh(std::ostream& out, const SimplicialSurface& surface);

/// One "x,y" row per vertex, no header.
void write_snapshot_csv(std::ostream& out, const SimplicialSurface& surface);

}  // namespace anisoflow
