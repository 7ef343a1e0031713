#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace maforge {

using Point = Eigen::VectorXd;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Halfspace a.x <= b of the polytope's affine hull, stored in ambient
/// coordinates (a is orthogonal to the lineality directions).
struct Facet {
  Point normal;
  double offset = 0.0;
  std::vector<int> vertices;
};

/// Compact convex polytope in V-representation.
///
/// Faces are enumerated by brute force over supporting hyperplanes of the
/// affine hull, which is adequate for the handful of vertices used here
/// (at most 64, in practice at most 8). The polytope may be degenerate:
/// its affine dimension d can be smaller than the ambient dimension n.
class Polytope {
 public:
  int ambient_dim() const { return n_; }
  int intrinsic_dim() const { return d_; }
  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<Facet>& facets() const { return facets_; }

  /// Generators of the normal cone at vertex q: outward facet normals of the
  /// facets through q, followed by +/- an orthonormal basis of the
  /// orthogonal complement of the affine hull.
  const std::vector<Point>& normal_cone_generators(int q) const { return cones_.at(q); }

  /// Orthonormal basis (columns) of the direction space of the affine hull.
  const Eigen::MatrixXd& span_basis() const { return span_; }

  /// tau_geo: 1e-9 times the bounding-box diameter (1e-9 for a point).
  double tolerance() const { return tol_; }

  /// Smallest face containing all vertices in `mask` (bit i = vertex i).
  std::uint64_t face_closure(std::uint64_t mask) const;

  /// Affine dimension of the vertices selected by `mask`.
  int face_dim(std::uint64_t mask) const;

  friend Polytope make_polytope(const std::vector<Point>& points);

 private:
  int n_ = 0;
  int d_ = 0;
  double tol_ = 1e-9;
  std::vector<Point> vertices_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<Facet> facets_;
  std::vector<std::vector<Point>> cones_;
  Eigen::MatrixXd span_;
};

/// Builds a polytope from a point cloud; non-extremal points are dropped.
Polytope make_polytope(const std::vector<Point>& points);

/// P*(x) = max over vertices of y.x, the support function.
double support_value(const Polytope& p, const Point& x);

/// Index of the first vertex attaining the support value.
int support_vertex(const Polytope& p, const Point& x);

struct DualPolytope {
  Polytope bounded;  // the d-dimensional dual, embedded in the span of P
  int free_dim = 0;  // n - d
};

/// {P* <= 1} = R^{n-d} x bounded. Requires 0 in the relative interior.
DualPolytope dual_polytope(const Polytope& p);

struct Stratum {
  int level = 0;
  std::uint64_t component = 0;  // vertex mask of the face whose normal cone holds x
  bool contact_permitted = false;
};

/// Locates x in the normal-fan stratification {Sigma_l}. Near-ties are
/// resolved toward the lower level.
Stratum classify_sigma(const Polytope& p, const Point& x);

bool normal_cone_contains(const Polytope& p, int q, const Point& x);

struct Affine {
  Point gradient;
  double offset = 0.0;  // L(x) = gradient.x - offset
  double operator()(const Point& x) const { return gradient.dot(x) - offset; }
};

struct Segment {
  Point a;
  Point b;
};

/// Affine pieces L_i for the Y-shaped obstacle: grad L_i = delta * g_i where
/// g_i is the far endpoint of segment i (common vertex moved to the origin),
/// and {L_i = 0} is tangent to B_{1-r0} at (1-r0) g_i/|g_i|. Throws when the
/// caps B_1 cap {L_i >= 0} are not pairwise disjoint.
std::vector<Affine> y_obstacle_affines(const std::vector<Segment>& segments, double delta,
                                       double r0);

/// Far endpoints of the segments after moving the common vertex to 0.
std::vector<Point> segment_directions(const std::vector<Segment>& segments);

// Catalog: point, segment, triangle, square, tetrahedron, cube, simplex4.
Polytope polytope_preset(const std::string& name, int n);
std::vector<std::string> polytope_preset_names();

/// Text format: "n d V E", V vertex rows, E edge index pairs.
void write_polytope(std::ostream& os, const Polytope& p);
Polytope read_polytope(std::istream& is);

std::vector<Segment> read_segments(std::istream& is);

}  // namespace maforge
