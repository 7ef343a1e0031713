#include <doctest.h>

#include <cmath>
#include <random>

#include "maforge/legendre.hpp"
#include "maforge/runner.hpp"

using namespace maforge;

namespace {

std::vector<double> linspace(double a, double b, int k) {
  std::vector<double> out(k);
  for (int i = 0; i < k; ++i) out[i] = a + (b - a) * i / (k - 1);
  return out;
}

}  // namespace

TEST_CASE("1D transform of a three-point parabola") {
  const Transform1D t = llt_1d({-1, 0, 1}, {1, 0, 1}, {-2, 0, 2});
  CHECK(t.values == std::vector<double>{1, 0, 1});
  CHECK(t.argmax == std::vector<int>{0, 1, 2});
  // Tie at slope 1 between nodes 1 and 2 goes to the smaller index.
  const Transform1D tie = llt_1d({-1, 0, 1}, {1, 0, 1}, {1});
  CHECK(tie.values[0] == 0.0);
  CHECK(tie.argmax[0] == 1);
  CHECK_THROWS_AS(llt_1d({0, 0}, {1, 1}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(llt_1d({}, {}, {0}), std::invalid_argument);
}

TEST_CASE("1D transform agrees with brute force on non-convex data") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int s = 0; s < 50; ++s) {
    const auto x = linspace(-2, 2, 41);
    std::vector<double> v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = x[i] * x[i] * u(rng) + u(rng);
    const auto p = linspace(-5, 5, 57);
    const Transform1D t = llt_1d(x, v, p);
    for (std::size_t j = 0; j < p.size(); ++j) {
      double best = -1e300;
      for (std::size_t i = 0; i < x.size(); ++i) best = std::max(best, p[j] * x[i] - v[i]);
      CHECK(t.values[j] == doctest::Approx(best).epsilon(1e-14));
      CHECK(p[j] * x[t.argmax[j]] - v[t.argmax[j]] == doctest::Approx(best).epsilon(1e-14));
    }
  }
}

TEST_CASE("nD transform agrees with brute force and reverses order") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TensorGrid g(2, 1.0, 15);
  const TensorGrid dual(2, 3.0, 13);
  const ScalarField f = sample_field(g, [&](const Point& x) { return x.squaredNorm() + 0.2 * u(rng); });
  ScalarField above = f;
  for (double& v : above.values) v += 0.1 * (1 + u(rng));
  const Conjugate c = legendre_with_argmax(f, dual, false);
  const ScalarField ca = legendre_nd(above, dual, false);
  for (std::size_t j = 0; j < dual.size(); ++j) {
    const Point p = dual.point(j);
    std::size_t arg = 0;
    CHECK(c.values[j] == doctest::Approx(conjugate_at(f, p, &arg)).epsilon(1e-13));
    CHECK(p.dot(g.point(c.argmax[j])) - f[c.argmax[j]] == doctest::Approx(c.values[j]).epsilon(1e-13));
    CHECK(ca[j] <= c.values[j]);
  }
}

TEST_CASE("biconjugate of a double well is its convex envelope") {
  const TensorGrid g(1, 2.0, 81);
  const ScalarField f = sample_field(g, [](const Point& x) { return std::pow(x(0) * x(0) - 1, 2); });
  // Dual spacing below the smallest slope increment of f outside [-1, 1].
  const TensorGrid dual(1, 30.0, 4001);
  const ScalarField ff = legendre_nd(legendre_nd(f, dual), g, false);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.point(i)(0);
    const double envelope = std::abs(x) <= 1 ? 0.0 : f[i];
    CHECK(ff[i] <= f[i] + 1e-12);
    CHECK(ff[i] == doctest::Approx(envelope).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("involution and Fenchel-Young on a convex field") {
  const TensorGrid g(2, 1.5, 33);
  const ScalarField f = sample_field(g, [](const Point& x) {
    return 0.5 * x.squaredNorm() + std::abs(x(0) - 0.3 * x(1));
  });
  const ScalarField ff = biconjugate(f);
  const double lip = max_forward_slope(f);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(ff[i] - f[i]) <= g.spacing() * lip);
  const DualGrid dual = default_dual_grid(f);
  const Conjugate c = legendre_with_argmax(f, dual);
  for (std::size_t j = 0; j < dual.size(); j += 7) {
    const Point p = dual.point(j);
    for (std::size_t i = 0; i < g.size(); i += 11) CHECK(f[i] + c.values[j] >= p.dot(g.point(i)) - 1e-12);
    CHECK(f[c.argmax[j]] + c.values[j] == doctest::Approx(p.dot(g.point(c.argmax[j]))).epsilon(1e-13));
  }
}

TEST_CASE("refined conjugate removes the staircase error on smooth data") {
  const TensorGrid g(3, 2.0, 17);
  const ScalarField f = sample_field(g, [](const Point& x) { return 0.5 * x.squaredNorm(); });
  const TensorGrid dual(3, 1.0, 11);
  const Conjugate raw = legendre_with_argmax(f, dual, false);
  const Conjugate refined = refined_legendre(f, dual, false);
  double raw_err = 0.0, refined_err = 0.0;
  for (std::size_t j = 0; j < dual.size(); ++j) {
    const double exact = 0.5 * dual.point(j).squaredNorm();
    raw_err = std::max(raw_err, std::abs(raw.values[j] - exact));
    refined_err = std::max(refined_err, std::abs(refined.values[j] - exact));
    CHECK(refined_conjugate_at(f, dual.point(j)) == doctest::Approx(refined.values[j]).epsilon(1e-12));
  }
  CHECK(raw_err > 1e-3);
  CHECK(refined_err <= 1e-12);
}

TEST_CASE("dual grids") {
  const TensorGrid g(2, 2.0, 21);
  const ScalarField f = sample_field(g, [](const Point& x) { return 0.5 * x.squaredNorm(); });
  CHECK(max_forward_slope(f) == doctest::Approx(1.9));
  const DualGrid d = default_dual_grid(f);
  CHECK(d.half_width() == doctest::Approx(1.25 * 1.9));
  CHECK(d.points_per_axis() == 21);
  CHECK_THROWS_AS(legendre_nd(f, TensorGrid(2, 1.0, 21)), CoverageError);
  Point a(2);
  a << 0.5, -1.0;
  const DualGrid al = aligned_dual_grid(f, {a});
  CHECK(al.half_width() >= d.half_width());
  CHECK(al.point(al.nearest(a)).isApprox(a, 1e-12));
}

TEST_CASE("fast transform self-test") {
  const VerificationReport rep = legendre_self_test(2000, 3);
  CHECK(rep.passed());
  CHECK(rep.checks.size() >= 5);
}
