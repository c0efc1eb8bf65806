#pragma once

#include "polyperturb/common.hpp"

#include <vector>

namespace polyperturb {

/// Halfspace {x : <u,x> <= b} with unit outer normal u.
struct Halfspace {
  Vec u;
  double b = 0.0;
};

/// d-simplex embedded in R^n, stored as its d+1 affinely independent points.
struct Simplex {
  std::vector<Vec> points;

  int dim() const { return static_cast<int>(points.size()) - 1; }
  int ambient_dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
  Vec centroid() const;
  /// d-dimensional volume; by convention 1 for a point (counting measure).
  double volume() const;
  double diameter() const;
};

/// Proper face of a polytope together with an orthonormal chart of its affine hull.
/// Chart: y in R^dim  <->  origin + basis*y, with basis^T basis = I.
struct Face {
  int dim = 0;
  std::vector<int> vertices;          // sorted indices into Polytope::vertices()
  std::vector<int> tight_halfspaces;  // halfspaces tight on the whole face
  Mat basis;                          // n x dim, orthonormal columns
  Vec origin;                         // relative-interior point (vertex centroid)

  Vec chart_coords(const Vec& x) const { return basis.transpose() * (x - origin); }
  Vec chart_point(const Vec& y) const { return origin + basis * y; }
};

class FaceLattice {
public:
  FaceLattice() = default;
  explicit FaceLattice(std::vector<std::vector<Face>> by_dim) : by_dim_(std::move(by_dim)) {}

  const std::vector<Face>& faces(int d) const { return by_dim_.at(d); }
  int max_dim() const { return static_cast<int>(by_dim_.size()) - 1; }

private:
  std::vector<std::vector<Face>> by_dim_;  // index d = face dimension, d = 0..n-1
};

/// Full-dimensional bounded convex polytope in R^n, 2 <= n <= 4, with both an
/// irredundant V-representation and H-representation plus an eagerly built face
/// lattice. Immutable after construction.
class Polytope {
public:
  static Polytope from_vertices(std::vector<Vec> points, double eps = kGeomEps,
                                int vertex_cap = kVertexCap);
  static Polytope from_halfspaces(std::vector<Halfspace> halfspaces, double eps = kGeomEps,
                                  int vertex_cap = kVertexCap);

  int dim() const { return dim_; }
  double eps() const { return eps_; }
  const std::vector<Vec>& vertices() const { return vertices_; }
  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }
  const FaceLattice& face_lattice() const { return lattice_; }
  const std::vector<Face>& faces(int d) const { return lattice_.faces(d); }
  /// Facets ordered so that facets()[i] is tight exactly on halfspaces()[i].
  const std::vector<Face>& facets() const { return lattice_.faces(dim_ - 1); }

  bool contains(const Vec& x, double tol) const;
  Vec vertex_centroid() const;

private:
  Polytope() = default;
  void build_lattice();

  int dim_ = 0;
  double eps_ = kGeomEps;
  std::vector<Vec> vertices_;
  std::vector<Halfspace> halfspaces_;
  FaceLattice lattice_;
};

/// Simplices partitioning P (fan from the vertex centroid, recursive over faces).
std::vector<Simplex> triangulate(const Polytope& P);

/// Simplices partitioning the face F (ambient coordinates).
std::vector<Simplex> triangulate_face(const Polytope& P, const Face& F);

/// Deterministic unit vector v with |<u_i,v>| >= delta for all facet normals.
/// Candidates come from a fixed Halton-based sphere sequence offset by seed.
Vec generic_direction(const Polytope& P, int seed, double delta = kGenericMin,
                      int max_attempts = 512);

/// Affine rank of a point set (dimension of its affine hull).
int affine_rank(const std::vector<Vec>& points, double tol);

/// Orthonormal basis of span{p_i - p_0}, sign-canonicalized for determinism.
Mat affine_basis(const std::vector<Vec>& points, double tol);

}  // namespace polyperturb
