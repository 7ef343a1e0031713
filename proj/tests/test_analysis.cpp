#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "maforge/analysis.hpp"
#include "maforge/barriers.hpp"

using namespace maforge;

namespace {

Point vec(std::initializer_list<double> c) {
  Point p(static_cast<int>(c.size()));
  int i = 0;
  for (double v : c) p(i++) = v;
  return p;
}

std::vector<std::size_t> nodes_where(const TensorGrid& g, const std::function<bool(const Point&)>& pred) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.boundary_distance(i) >= 2 && pred(g.point(i))) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("subgradient dimension of kinks") {
  const TensorGrid g(3, 1.0, 21);
  const auto plane = nodes_where(g, [](const Point& x) { return x(0) == 0.0; });
  const auto line = nodes_where(g, [](const Point& x) { return x(0) == 0.0 && x(1) == 0.0; });
  const auto off = nodes_where(g, [](const Point& x) { return std::abs(x(0)) > 0.3 && std::abs(x(1)) > 0.3; });
  const ScalarField ridge = sample_field(g, [](const Point& x) { return std::abs(x(0)) + 0.5 * x.squaredNorm(); });
  for (int d : subgradient_dim_check(ridge, plane, 0.5)) CHECK(d == 1);
  for (int d : subgradient_dim_check(ridge, off, 0.5)) CHECK(d == 0);
  const ScalarField corner = sample_field(g, [](const Point& x) { return std::abs(x(0)) + std::abs(x(1)); });
  for (int d : subgradient_dim_check(corner, line, 0.5)) CHECK(d == 2);
  const ScalarField smooth = sample_field(g, [](const Point& x) { return 0.5 * x.squaredNorm(); });
  for (int d : subgradient_dim_check(smooth, plane, 0.5)) CHECK(d == 0);
}

TEST_CASE("sublevel volumes of a paraboloid match the calibration") {
  const TensorGrid g(2, 1.0, 201);
  const ScalarField f = sample_field(g, [](const Point& x) { return 0.5 * x.squaredNorm(); });
  const SublevelCheck c = sublevel_volume_check(f, {Affine{vec({0, 0}), -0.2}, Affine{vec({0.1, 0.2}), -0.1}});
  CHECK(c.calibration == doctest::Approx(2 * M_PI));
  CHECK(c.passed());
  for (const auto& cut : c.cuts) CHECK(cut.ratio == doctest::Approx(c.calibration).epsilon(0.03));
  CHECK_THROWS_AS(sublevel_volume_check(f, {Affine{vec({0, 0}), -0.6}}), DomainError);
  // A flat piece has far too little volume for its depth.
  const ScalarField flat = sample_field(g, [](const Point& x) { return 5 * x.norm(); });
  CHECK_FALSE(sublevel_volume_check(flat, {Affine{vec({0, 0}), -0.05}}).passed());
}

TEST_CASE("asymptotic fit of W_3") {
  std::vector<std::pair<double, double>> s;
  for (int i = 0; i <= 40; ++i) {
    const double r = 2.4 + 1.2 * i / 40;
    s.emplace_back(r, W_radial(3, r));
  }
  const AsymptoticFit fit = asymptotic_fit(s);
  CHECK_FALSE(fit.indeterminate);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(fit.kappa == doctest::Approx(radial_constant(3)).epsilon(0.01));
  CHECK(fit.kappa < 0);

  std::vector<std::pair<double, double>> q;
  for (int i = 0; i <= 10; ++i) q.emplace_back(2.0 + 0.1 * i, 0.5 * std::pow(2.0 + 0.1 * i, 2) - 0.7);
  const AsymptoticFit flat = asymptotic_fit(q);
  CHECK(flat.indeterminate);
  CHECK(flat.kappa == doctest::Approx(-0.7));
  CHECK_THROWS_AS(asymptotic_fit(std::vector<std::pair<double, double>>(3, {1.0, 1.0})),
                  std::invalid_argument);

  const auto means = radial_means(s, 2.4, 3.6, 4);
  CHECK(means.size() == 4);
  for (std::size_t k = 1; k < means.size(); ++k) CHECK(means[k].first > means[k - 1].first);
}

TEST_CASE("vertex orbits under grid symmetries") {
  CHECK(vertex_orbits(polytope_preset("tetrahedron", 3)).size() == 1);
  CHECK(vertex_orbits(polytope_preset("cube", 3)).size() == 1);
  CHECK(vertex_orbits(polytope_preset("segment", 3)).size() == 1);
  const auto lopsided = vertex_orbits(make_polytope({vec({1, 0}), vec({0, 2}), vec({-3, -3})}));
  CHECK(lopsided.size() == 3);
}

TEST_CASE("distance to segments") {
  const std::vector<std::pair<Point, Point>> segs{{vec({0, 0}), vec({1, 0})}, {vec({0, 0}), vec({0, 1})}};
  CHECK(distance_to_segments(vec({0.5, 0.5}), segs) == doctest::Approx(0.5));
  CHECK(distance_to_segments(vec({2, 0}), segs) == doctest::Approx(1.0));
  CHECK(distance_to_segments(vec({-1, -1}), segs) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("contact set and Dirac mass of the 2D point run") {
  const Polytope point = polytope_preset("point", 2);
  const SolveResult r = polytope_pipeline(point, 2, 4.0, 65, 0.6);
  const ContactSet K = contact_set(r, &point, default_contact_tolerance(r));
  CHECK(K.components.size() == 1);
  const auto a = dirac_coefficients(K, r.pieces.size());
  REQUIRE(a.size() == 1);
  CHECK(a[0] == doctest::Approx(M_PI).epsilon(0.1));
  CHECK(contact_boundary(K).size() < K.node_count);
  CHECK(default_slope_threshold(r) == 0.5);
}

TEST_CASE("verification report") {
  VerificationReport rep;
  rep.add("alpha", 1.0, 2.0, true, "fine");
  CHECK(rep.passed());
  rep.add("beta", std::nan(""), 0.0, false);
  CHECK_FALSE(rep.passed());
  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["passed"] == false);
  CHECK(j["checks"].size() == 2);
  CHECK(j["checks"][0]["name"] == "alpha");
  CHECK(j["checks"][1]["value"].is_null());
  const std::string s = rep.summary();
  CHECK(s.rfind("PASS alpha", 0) == 0);
  CHECK(s.find("(fine)") != std::string::npos);
  CHECK(s.find("FAIL beta") != std::string::npos);
}
