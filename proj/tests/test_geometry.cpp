#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "maforge/geometry.hpp"

using namespace maforge;

namespace {

Point vec(std::initializer_list<double> c) {
  Point p(static_cast<int>(c.size()));
  int i = 0;
  for (double v : c) p(i++) = v;
  return p;
}

Point random_point(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Point p(n);
  for (int i = 0; i < n; ++i) p(i) = g(rng);
  return p;
}

bool same_vertex_set(const std::vector<Point>& a, const std::vector<Point>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (const auto& p : a) {
    bool found = false;
    for (const auto& q : b) found = found || (p - q).norm() <= tol;
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("make_polytope on the catalog shapes") {
  SUBCASE("single point") {
    const Polytope p = make_polytope({Point::Zero(3)});
    CHECK(p.intrinsic_dim() == 0);
    CHECK(p.edges().empty());
    CHECK(p.vertices().size() == 1);
  }
  SUBCASE("segment between +-e3") {
    const Polytope p = make_polytope({vec({0, 0, 1}), vec({0, 0, -1})});
    CHECK(p.intrinsic_dim() == 1);
    CHECK(p.edges().size() == 1);
    CHECK(p.vertices().size() == 2);
  }
  SUBCASE("regular tetrahedron") {
    const Polytope p = polytope_preset("tetrahedron", 3);
    CHECK(p.intrinsic_dim() == 3);
    CHECK(p.edges().size() == 6);
    CHECK(p.facets().size() == 4);
  }
  SUBCASE("cube and simplex4") {
    CHECK(polytope_preset("cube", 3).edges().size() == 12);
    CHECK(polytope_preset("simplex4", 4).edges().size() == 10);
    CHECK(polytope_preset("square", 2).edges().size() == 4);
  }
  SUBCASE("redundant points are dropped") {
    const Polytope p = make_polytope({vec({1, 0}), vec({-1, 0}), vec({0, 1}), vec({0, -1}),
                                      vec({0.1, 0.2}), vec({0.5, 0})});
    CHECK(p.vertices().size() == 4);
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(make_polytope({}), GeometryError); }
  SUBCASE("unknown preset") { CHECK_THROWS_AS(polytope_preset("dodecahedron", 3), GeometryError); }
}

TEST_CASE("every edge midpoint lies on a facet and off the vertex set") {
  for (const char* name : {"tetrahedron", "cube", "triangle", "square"}) {
    const int n = std::string(name) == "triangle" || std::string(name) == "square" ? 2 : 3;
    const Polytope p = polytope_preset(name, n);
    for (const auto& [i, j] : p.edges()) {
      const Point mid = 0.5 * (p.vertices()[i] + p.vertices()[j]);
      bool on_facet = false;
      for (const auto& f : p.facets())
        on_facet = on_facet || std::abs(f.normal.dot(mid) - f.offset) <= 1e-12;
      CHECK(on_facet);
      for (const auto& v : p.vertices()) CHECK((v - mid).norm() > 1e-6);
    }
  }
}

TEST_CASE("support_value examples") {
  std::mt19937_64 rng(3);
  const Polytope point = polytope_preset("point", 3);
  const Polytope seg = polytope_preset("segment", 3);
  const Polytope cube = polytope_preset("cube", 3);
  for (int s = 0; s < 100; ++s) {
    const Point x = random_point(rng, 3);
    CHECK(support_value(point, x) == 0.0);
    CHECK(support_value(seg, x) == doctest::Approx(std::abs(x(2))).epsilon(1e-14));
    CHECK(support_value(cube, x) == doctest::Approx(x.lpNorm<1>()).epsilon(1e-14));
  }
}

TEST_CASE("support_value is one-homogeneous and convex") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(0.0, 10.0);
  for (const char* name : {"tetrahedron", "cube", "segment", "triangle"}) {
    const Polytope p = polytope_preset(name, 3);
    for (int s = 0; s < 1000; ++s) {
      const Point x = random_point(rng, 3), y = random_point(rng, 3);
      const double l = lam(rng);
      CHECK(support_value(p, l * x) == doctest::Approx(l * support_value(p, x)).epsilon(1e-14));
      CHECK(support_value(p, 0.5 * (x + y)) <=
            0.5 * (support_value(p, x) + support_value(p, y)) + 1e-14);
    }
  }
}

TEST_CASE("dual_polytope examples") {
  SUBCASE("segment: bounded factor [-1,1] on the last axis, free factor R^{n-1}") {
    const DualPolytope d = dual_polytope(polytope_preset("segment", 3));
    CHECK(d.free_dim == 2);
    CHECK(same_vertex_set(d.bounded.vertices(), {vec({0, 0, 1}), vec({0, 0, -1})}, 1e-12));
  }
  SUBCASE("regular tetrahedron: dual vertices are -3 q") {
    const Polytope t = polytope_preset("tetrahedron", 3);
    const DualPolytope d = dual_polytope(t);
    CHECK(d.free_dim == 0);
    std::vector<Point> expect;
    for (const auto& q : t.vertices()) expect.push_back(-3.0 * q);
    CHECK(same_vertex_set(d.bounded.vertices(), expect, 1e-9));
  }
  SUBCASE("cube: cross-polytope") {
    const DualPolytope d = dual_polytope(polytope_preset("cube", 3));
    std::vector<Point> expect;
    for (int i = 0; i < 3; ++i)
      for (double s : {1.0, -1.0}) {
        Point e = Point::Zero(3);
        e(i) = s;
        expect.push_back(e);
      }
    CHECK(same_vertex_set(d.bounded.vertices(), expect, 1e-12));
  }
  SUBCASE("origin outside the relative interior") {
    CHECK_THROWS_AS(dual_polytope(make_polytope({vec({1, 0}), vec({2, 0}), vec({1, 1})})),
                    GeometryError);
  }
}

TEST_CASE("dual of the dual returns the polytope") {
  for (const auto& [name, n] : {std::pair{"tetrahedron", 3}, {"cube", 3}, {"square", 2},
                                {"triangle", 2}, {"simplex4", 4}}) {
    const Polytope p = polytope_preset(name, n);
    const Polytope back = dual_polytope(dual_polytope(p).bounded).bounded;
    CHECK_MESSAGE(same_vertex_set(back.vertices(), p.vertices(), 1e-9 * 10), name);
  }
}

TEST_CASE("classify_sigma examples") {
  const Polytope t = polytope_preset("tetrahedron", 3);
  std::set<std::uint64_t> rays, sectors;
  for (std::size_t i = 0; i < 4; ++i) {
    const Stratum s = classify_sigma(t, -t.vertices()[i]);
    CHECK(s.level == 1);
    CHECK_FALSE(s.contact_permitted);
    rays.insert(s.component);
    for (std::size_t j = i + 1; j < 4; ++j) {
      const Stratum e = classify_sigma(t, -(t.vertices()[i] + t.vertices()[j]));
      CHECK(e.level == 2);
      CHECK(e.contact_permitted);
      sectors.insert(e.component);
    }
  }
  CHECK(rays.size() == 4);
  CHECK(sectors.size() == 6);
  CHECK(classify_sigma(t, t.vertices()[0]).level == 3);

  const Polytope seg = polytope_preset("segment", 3);
  const Stratum plane = classify_sigma(seg, vec({1.0, 2.0, 0.0}));
  CHECK(plane.level == 2);
  CHECK(plane.contact_permitted);
  CHECK(classify_sigma(seg, vec({0.3, 0.1, 0.5})).level == 3);
  CHECK_THROWS_AS(classify_sigma(t, Point::Zero(3)), GeometryError);
}

TEST_CASE("strata partition slope space and P* is affine inside each") {
  std::mt19937_64 rng(11);
  for (const auto& [name, n] : {std::pair{"tetrahedron", 3}, {"cube", 3}, {"segment", 3},
                                {"simplex4", 4}}) {
    const Polytope p = polytope_preset(name, n);
    int chords = 0;
    for (int s = 0; s < 10000; ++s) {
      const Point x = random_point(rng, n);
      const Stratum sx = classify_sigma(p, x);
      REQUIRE(sx.level >= n - p.intrinsic_dim());
      REQUIRE(sx.level <= n);
      CHECK(sx.contact_permitted == (2 * sx.level > n));
      const Point y = x + random_point(rng, n, 0.05);
      if (y.norm() == 0.0) continue;
      const Stratum sy = classify_sigma(p, y);
      if (sy.level != sx.level || sy.component != sx.component) continue;
      ++chords;
      const double scale = 1.0 + x.norm() + y.norm();
      const double mid = support_value(p, 0.5 * (x + y));
      CHECK(std::abs(mid - 0.5 * (support_value(p, x) + support_value(p, y))) <= 1e-12 * scale);
    }
    CHECK(chords > 1000);
  }
}

TEST_CASE("normal cones") {
  const Polytope seg = polytope_preset("segment", 3);
  const int top = seg.vertices()[0](2) > 0 ? 0 : 1;
  CHECK(normal_cone_contains(seg, top, vec({0.2, -1.0, 0.5})));
  CHECK_FALSE(normal_cone_contains(seg, top, vec({0.2, -1.0, -0.5})));
  std::mt19937_64 rng(13);
  for (const char* name : {"tetrahedron", "cube", "segment"}) {
    const Polytope p = polytope_preset(name, 3);
    for (std::size_t q = 0; q < p.vertices().size(); ++q)
      CHECK(normal_cone_contains(p, static_cast<int>(q), Point::Zero(3)));
    for (int s = 0; s < 2000; ++s) {
      const Point x = random_point(rng, 3);
      bool covered = false;
      for (std::size_t q = 0; q < p.vertices().size(); ++q)
        covered = covered || normal_cone_contains(p, static_cast<int>(q), x);
      CHECK(covered);
      CHECK(normal_cone_contains(p, support_vertex(p, x), x));
    }
  }
}

TEST_CASE("y_obstacle_affines") {
  auto segs_to = [](const std::vector<Point>& ends) {
    std::vector<Segment> out;
    for (const auto& e : ends) out.push_back({Point::Zero(e.size()), e});
    return out;
  };
  auto caps_disjoint = [](const std::vector<Affine>& L, int n) {
    std::mt19937_64 rng(17);
    for (int s = 0; s < 20000; ++s) {
      Point x = random_point(rng, n);
      x *= std::pow(std::uniform_real_distribution<double>(0, 1)(rng), 1.0 / n) / x.norm();
      int above = 0;
      for (const auto& l : L) above += l(x) >= 0;
      if (above > 1) return false;
    }
    return true;
  };
  SUBCASE("planar Y at 120 degrees") {
    std::vector<Point> ends;
    for (int i = 0; i < 3; ++i) {
      const double t = 2 * M_PI * i / 3;
      ends.push_back(vec({std::cos(t), std::sin(t), 0.0}));
    }
    const auto L = y_obstacle_affines(segs_to(ends), 0.2, 0.2);
    REQUIRE(L.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK((L[i].gradient - 0.2 * ends[i]).norm() <= 1e-14);
      // {L_i = 0} touches B_{1-r0} at (1 - r0) g_i.
      CHECK(L[i](0.8 * ends[i]) == doctest::Approx(0.0).epsilon(1e-14));
    }
    CHECK(caps_disjoint(L, 3));
  }
  SUBCASE("two opposite segments") {
    const auto L = y_obstacle_affines(segs_to({vec({0, 0, 1}), vec({0, 0, -1})}), 0.5, 0.2);
    CHECK(L.size() == 2);
    CHECK(caps_disjoint(L, 3));
  }
  SUBCASE("regular-triangle configuration with a lifted vertex") {
    const double c = std::sqrt(3.0) / 2;
    const auto L = y_obstacle_affines(
        segs_to({vec({c, 0, 0.5}), vec({-c / 2, 0.75, 0.5}), vec({-c / 2, -0.75, 0.5})}), 0.3, 0.2);
    CHECK(L.size() == 3);
    CHECK(caps_disjoint(L, 3));
  }
  SUBCASE("overlapping caps and bad input") {
    const auto close = segs_to({vec({1, 0, 0}), vec({std::cos(0.3), std::sin(0.3), 0})});
    CHECK_THROWS_AS(y_obstacle_affines(close, 0.2, 0.5), GeometryError);
    CHECK_THROWS_AS(y_obstacle_affines(segs_to({vec({1, 0, 0})}), 0.2, 0.2), GeometryError);
  }
}

TEST_CASE("polytope and segment text formats") {
  const Polytope t = polytope_preset("tetrahedron", 3);
  std::stringstream ss;
  write_polytope(ss, t);
  const Polytope back = read_polytope(ss);
  CHECK(back.intrinsic_dim() == 3);
  CHECK(back.edges().size() == 6);
  CHECK(same_vertex_set(back.vertices(), t.vertices(), 1e-15));

  std::stringstream segs("# center to tips\n0 0 0  1 0 0\n0 0 0  0 1 0  # second\n");
  const auto s = read_segments(segs);
  CHECK(s.size() == 2);
  CHECK(s[1].b(1) == 1.0);
  std::stringstream bad("0 0 0 1 0\n");
  CHECK_THROWS_AS(read_segments(bad), GeometryError);
}
