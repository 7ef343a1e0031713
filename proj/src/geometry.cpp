#include "maforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace maforge {

namespace {

int numeric_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return r;
}

// Calls f on every k-subset of {0..n-1}.
template <typename F>
void for_each_subset(int n, int k, F&& f) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  if (k > n) return;
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

Polytope make_polytope(const std::vector<Point>& points) {
  if (points.empty()) throw GeometryError("make_polytope: empty point set");
  const int n = static_cast<int>(points.front().size());
  if (n < 1) throw GeometryError("make_polytope: zero-dimensional ambient space");
  for (const auto& p : points) {
    if (p.size() != n) throw GeometryError("make_polytope: mixed dimensions");
    if (!p.allFinite()) throw GeometryError("make_polytope: non-finite coordinate");
  }

  Point lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diam = (hi - lo).norm();
  const double tol = 1e-9 * (diam > 0 ? diam : 1.0);

  std::vector<Point> pts;
  for (const auto& p : points) {
    bool dup = std::any_of(pts.begin(), pts.end(),
                           [&](const Point& q) { return (q - p).norm() <= tol; });
    if (!dup) pts.push_back(p);
  }
  if (pts.size() > 64) throw GeometryError("make_polytope: more than 64 points");

  Point centroid = Point::Zero(n);
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Eigen::MatrixXd centered(n, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) centered.col(i) = pts[i] - centroid;

  Polytope poly;
  poly.n_ = n;
  poly.tol_ = tol;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullU);
  int d = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++d;
  poly.d_ = d;
  poly.span_ = svd.matrixU().leftCols(d);
  const Eigen::MatrixXd complement = svd.matrixU().rightCols(n - d);

  auto finish_cones = [&](Polytope& p) {
    p.cones_.assign(p.vertices_.size(), {});
    for (std::size_t q = 0; q < p.vertices_.size(); ++q) {
      for (const auto& f : p.facets_)
        if (std::find(f.vertices.begin(), f.vertices.end(), static_cast<int>(q)) !=
            f.vertices.end())
          p.cones_[q].push_back(f.normal);
      for (int j = 0; j < complement.cols(); ++j) {
        p.cones_[q].push_back(complement.col(j));
        p.cones_[q].push_back(-complement.col(j));
      }
    }
  };

  if (d == 0) {
    poly.vertices_ = {pts.front()};
    finish_cones(poly);
    return poly;
  }

  // Local coordinates in the affine hull.
  std::vector<Eigen::VectorXd> z;
  for (const auto& p : pts) z.push_back(poly.span_.transpose() * (p - centroid));
  const int np = static_cast<int>(pts.size());

  struct LocalFacet {
    Eigen::VectorXd a;
    double b;
    std::uint64_t on;
  };
  std::vector<LocalFacet> local;

  if (d == 1) {
    int imin = 0, imax = 0;
    for (int i = 1; i < np; ++i) {
      if (z[i](0) < z[imin](0)) imin = i;
      if (z[i](0) > z[imax](0)) imax = i;
    }
    Eigen::VectorXd neg(1), pos(1);
    neg << -1.0;
    pos << 1.0;
    local.push_back({neg, -z[imin](0), std::uint64_t{1} << imin});
    local.push_back({pos, z[imax](0), std::uint64_t{1} << imax});
  } else {
    for_each_subset(np, d, [&](const std::vector<int>& idx) {
      Eigen::MatrixXd diffs(d - 1, d);
      for (int r = 1; r < d; ++r) diffs.row(r - 1) = (z[idx[r]] - z[idx[0]]).transpose();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(diffs);
      lu.setThreshold(1e-10);
      Eigen::MatrixXd ker = lu.kernel();
      if (ker.cols() != 1) return;
      Eigen::VectorXd a = ker.col(0).normalized();
      double b = a.dot(z[idx[0]]);
      int above = 0, below = 0;
      for (int i = 0; i < np; ++i) {
        double s = a.dot(z[i]) - b;
        if (s > tol) ++above;
        if (s < -tol) ++below;
      }
      if (above && below) return;
      if (above) {
        a = -a;
        b = -b;
      }
      for (const auto& f : local)
        if ((f.a - a).norm() <= 1e-8 && std::abs(f.b - b) <= tol) return;
      std::uint64_t on = 0;
      for (int i = 0; i < np; ++i)
        if (std::abs(a.dot(z[i]) - b) <= tol) on |= std::uint64_t{1} << i;
      local.push_back({a, b, on});
    });
  }

  // A point is a vertex iff the facets through it have normals of full rank d.
  std::vector<int> keep;
  for (int i = 0; i < np; ++i) {
    std::vector<Eigen::VectorXd> normals;
    for (const auto& f : local)
      if (f.on >> i & 1u) normals.push_back(f.a);
    Eigen::MatrixXd m(d, normals.size());
    for (std::size_t j = 0; j < normals.size(); ++j) m.col(j) = normals[j];
    if (numeric_rank(m, 1e-9) == d) keep.push_back(i);
  }

  std::vector<int> new_index(np, -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    new_index[keep[k]] = static_cast<int>(k);
    poly.vertices_.push_back(pts[keep[k]]);
  }
  for (const auto& f : local) {
    Facet facet;
    facet.normal = poly.span_ * f.a;
    facet.offset = f.b + facet.normal.dot(centroid);
    for (int i = 0; i < np; ++i)
      if ((f.on >> i & 1u) && new_index[i] >= 0) facet.vertices.push_back(new_index[i]);
    poly.facets_.push_back(std::move(facet));
  }

  const int nv = static_cast<int>(poly.vertices_.size());
  for (int i = 0; i < nv; ++i)
    for (int j = i + 1; j < nv; ++j) {
      if (d == 1) {
        poly.edges_.emplace_back(i, j);
        continue;
      }
      std::vector<Point> normals;
      for (const auto& f : poly.facets_) {
        bool has_i = std::find(f.vertices.begin(), f.vertices.end(), i) != f.vertices.end();
        bool has_j = std::find(f.vertices.begin(), f.vertices.end(), j) != f.vertices.end();
        if (has_i && has_j) normals.push_back(f.normal);
      }
      Eigen::MatrixXd m(n, normals.size());
      for (std::size_t k = 0; k < normals.size(); ++k) m.col(k) = normals[k];
      if (numeric_rank(m, 1e-9) == d - 1) poly.edges_.emplace_back(i, j);
    }

  finish_cones(poly);
  return poly;
}

std::uint64_t Polytope::face_closure(std::uint64_t mask) const {
  const int nv = static_cast<int>(vertices_.size());
  const std::uint64_t all = nv == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << nv) - 1;
  if (mask == 0 || d_ == 0) return mask & all;
  std::uint64_t result = all;
  bool any = false;
  for (const auto& f : facets_) {
    std::uint64_t fm = 0;
    for (int v : f.vertices) fm |= std::uint64_t{1} << v;
    if ((fm & mask) == mask) {
      result &= fm;
      any = true;
    }
  }
  return any ? result : all;
}

int Polytope::face_dim(std::uint64_t mask) const {
  const int nv = static_cast<int>(vertices_.size());
  std::vector<Point> sel;
  for (int i = 0; i < nv; ++i)
    if (mask >> i & 1u) sel.push_back(vertices_[i]);
  if (sel.size() <= 1) return 0;
  Eigen::MatrixXd m(n_, sel.size() - 1);
  for (std::size_t i = 1; i < sel.size(); ++i) m.col(i - 1) = sel[i] - sel[0];
  return numeric_rank(m, tol_);
}

double support_value(const Polytope& p, const Point& x) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : p.vertices()) best = std::max(best, v.dot(x));
  return best;
}

int support_vertex(const Polytope& p, const Point& x) {
  int arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.vertices().size(); ++i) {
    double s = p.vertices()[i].dot(x);
    if (s > best) {
      best = s;
      arg = static_cast<int>(i);
    }
  }
  return arg;
}

DualPolytope dual_polytope(const Polytope& p) {
  const int n = p.ambient_dim();
  const int d = p.intrinsic_dim();
  DualPolytope out;
  out.free_dim = n - d;
  if (d == 0) {
    if (p.vertices().front().norm() > p.tolerance())
      throw GeometryError("dual_polytope: origin is not in the relative interior");
    out.bounded = make_polytope({Point::Zero(n)});
    return out;
  }
  // The origin must lie in the affine hull and strictly inside every facet.
  const Point& v0 = p.vertices().front();
  Point off_span = v0 - p.span_basis() * (p.span_basis().transpose() * v0);
  if (off_span.norm() > p.tolerance())
    throw GeometryError("dual_polytope: affine hull does not pass through the origin");
  std::vector<Point> dual_vertices;
  for (const auto& f : p.facets()) {
    if (f.offset <= p.tolerance())
      throw GeometryError("dual_polytope: origin is not in the relative interior");
    dual_vertices.push_back(f.normal / f.offset);
  }
  out.bounded = make_polytope(dual_vertices);
  return out;
}

Stratum classify_sigma(const Polytope& p, const Point& x) {
  const int n = p.ambient_dim();
  const int d = p.intrinsic_dim();
  const double scale = std::max(1.0, x.norm());
  const double tau = p.tolerance() * scale;
  if (d == n && x.norm() <= tau)
    throw GeometryError("classify_sigma: the apex x = 0 is not in any stratum");

  const auto& v = p.vertices();
  std::vector<double> s(v.size());
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s[i] = v[i].dot(x);
    if (s[i] > best) {
      best = s[i];
      arg = static_cast<int>(i);
    }
  }
  std::uint64_t active = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double gap = best - s[i];
    double sep = (v[i] - v[arg]).norm();
    if (gap <= tau * std::max(sep, 1.0)) active |= std::uint64_t{1} << i;
  }
  Stratum st;
  st.component = p.face_closure(active);
  st.level = n - p.face_dim(st.component);
  st.contact_permitted = 2 * st.level > n;
  return st;
}

bool normal_cone_contains(const Polytope& p, int q, const Point& x) {
  const auto& v = p.vertices();
  const double tau = p.tolerance() * std::max(1.0, x.norm());
  const double sq = v.at(q).dot(x);
  for (const auto& y : v)
    if (y.dot(x) > sq + tau) return false;
  return true;
}

std::vector<Point> segment_directions(const std::vector<Segment>& segments) {
  if (segments.empty()) throw GeometryError("segment list is empty");
  const auto& s0 = segments.front();
  const double tol = 1e-9 * std::max(1.0, (s0.b - s0.a).norm());
  auto shared_by_all = [&](const Point& c) {
    return std::all_of(segments.begin(), segments.end(), [&](const Segment& s) {
      return (s.a - c).norm() <= tol || (s.b - c).norm() <= tol;
    });
  };
  Point common;
  if (shared_by_all(s0.a))
    common = s0.a;
  else if (shared_by_all(s0.b))
    common = s0.b;
  else
    throw GeometryError("segments do not share a common vertex");
  std::vector<Point> dirs;
  for (const auto& s : segments) {
    Point far = (s.a - common).norm() <= tol ? Point(s.b - common) : Point(s.a - common);
    if (far.norm() <= tol) throw GeometryError("degenerate segment");
    dirs.push_back(far);
  }
  return dirs;
}

std::vector<Affine> y_obstacle_affines(const std::vector<Segment>& segments, double delta,
                                       double r0) {
  if (segments.size() < 2) throw GeometryError("y_obstacle_affines: need at least 2 segments");
  if (!(delta > 0)) throw GeometryError("y_obstacle_affines: delta must be positive");
  if (!(r0 > 0 && r0 < 1)) throw GeometryError("y_obstacle_affines: r0 must lie in (0,1)");
  auto dirs = segment_directions(segments);
  const double cap_level = 1.0 - r0;
  for (std::size_t i = 0; i < dirs.size(); ++i)
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      Point gi = dirs[i].normalized(), gj = dirs[j].normalized();
      if ((gi - gj).norm() < 1e-9)
        throw GeometryError("y_obstacle_affines: segments point in the same direction");
      // The caps {g.x >= 1-r0} in the closed unit ball meet iff the unit
      // bisector reaches that level.
      if (0.5 * (gi + gj).norm() >= cap_level)
        throw GeometryError("y_obstacle_affines: caps overlap (r0 too large for these directions)");
    }
  std::vector<Affine> out;
  for (const auto& g : dirs) out.push_back({delta * g, delta * g.norm() * cap_level});
  return out;
}

namespace {

Point embed_last(int n, std::initializer_list<double> coords) {
  const int k = static_cast<int>(coords.size());
  if (n < k) throw GeometryError("preset needs ambient dimension >= " + std::to_string(k));
  Point p = Point::Zero(n);
  int i = n - k;
  for (double c : coords) p(i++) = c;
  return p;
}

}  // namespace

std::vector<std::string> polytope_preset_names() {
  return {"point", "segment", "triangle", "square", "tetrahedron", "cube", "simplex4"};
}

Polytope polytope_preset(const std::string& name, int n) {
  if (n < 1) throw GeometryError("preset needs n >= 1");
  std::vector<Point> v;
  if (name == "point") {
    v.push_back(Point::Zero(n));
  } else if (name == "segment") {
    v.push_back(embed_last(n, {1.0}));
    v.push_back(embed_last(n, {-1.0}));
  } else if (name == "triangle") {
    const double pi = std::acos(-1.0);
    for (int i = 0; i < 3; ++i) {
      double t = pi / 2 + 2 * pi * i / 3;
      v.push_back(embed_last(n, {std::cos(t), std::sin(t)}));
    }
  } else if (name == "square") {
    const double s = 1.0 / std::sqrt(2.0);
    for (double a : {-s, s})
      for (double b : {-s, s}) v.push_back(embed_last(n, {a, b}));
  } else if (name == "tetrahedron") {
    const double s = 1.0 / std::sqrt(3.0);
    v.push_back(embed_last(n, {s, s, s}));
    v.push_back(embed_last(n, {s, -s, -s}));
    v.push_back(embed_last(n, {-s, s, -s}));
    v.push_back(embed_last(n, {-s, -s, s}));
  } else if (name == "cube") {
    for (int m = 0; m < (1 << n); ++m) {
      Point p(n);
      for (int i = 0; i < n; ++i) p(i) = (m >> i & 1) ? 1.0 : -1.0;
      v.push_back(p);
    }
  } else if (name == "simplex4") {
    if (n != 4) throw GeometryError("simplex4 preset requires n = 4");
    // Standard simplex in R^5, centered and expressed in an orthonormal basis
    // of the hyperplane sum(x) = 0.
    Eigen::MatrixXd e = Eigen::MatrixXd::Identity(5, 5);
    e.array() -= 0.2;
    Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(e).householderQ();
    Eigen::MatrixXd q = basis.leftCols(4);
    for (int i = 0; i < 5; ++i) {
      Point p = q.transpose() * e.col(i);
      v.push_back(p.normalized());
    }
  } else {
    throw GeometryError("unknown polytope preset '" + name + "'");
  }
  return make_polytope(v);
}

void write_polytope(std::ostream& os, const Polytope& p) {
  os << p.ambient_dim() << ' ' << p.intrinsic_dim() << ' ' << p.vertices().size() << ' '
     << p.edges().size() << '\n';
  os.precision(17);
  for (const auto& v : p.vertices()) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v(i);
    os << '\n';
  }
  for (const auto& [a, b] : p.edges()) os << a << ' ' << b << '\n';
}

Polytope read_polytope(std::istream& is) {
  int n = 0, d = 0, nv = 0, ne = 0;
  if (!(is >> n >> d >> nv >> ne) || n < 1 || nv < 1)
    throw GeometryError("read_polytope: bad header");
  std::vector<Point> v(nv, Point(n));
  for (auto& p : v)
    for (int i = 0; i < n; ++i)
      if (!(is >> p(i))) throw GeometryError("read_polytope: truncated vertex list");
  for (int e = 0; e < ne; ++e) {
    int a, b;
    if (!(is >> a >> b)) throw GeometryError("read_polytope: truncated edge list");
  }
  Polytope poly = make_polytope(v);
  if (poly.intrinsic_dim() != d || static_cast<int>(poly.vertices().size()) != nv)
    throw GeometryError("read_polytope: header disagrees with the vertex set");
  return poly;
}

std::vector<Segment> read_segments(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double x;
    while (ls >> x) row.push_back(x);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  std::vector<Segment> segs;
  for (const auto& r : rows) {
    if (r.size() % 2 != 0 || r.empty())
      throw GeometryError("read_segments: each row needs 2n coordinates");
    const int n = static_cast<int>(r.size() / 2);
    Segment s{Point(n), Point(n)};
    for (int i = 0; i < n; ++i) {
      s.a(i) = r[i];
      s.b(i) = r[n + i];
    }
    segs.push_back(std::move(s));
  }
  if (segs.empty()) throw GeometryError("read_segments: no segments");
  return segs;
}

}  // namespace maforge
