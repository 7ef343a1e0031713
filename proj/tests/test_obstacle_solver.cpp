#include <doctest.h>

#include <cmath>

#include "maforge/barriers.hpp"
#include "maforge/obstacle_solver.hpp"

using namespace maforge;

namespace {

ObstacleProblemSpec quadratic_spec(int n, int m, SweepMode mode) {
  const TensorGrid g(n, 1.0, m);
  auto q = [](const Point& x) { return 0.5 * x.squaredNorm() + 0.3 * x(0) - 0.1; };
  ObstacleProblemSpec s;
  s.boundary_data = sample_field(g, q);
  s.initial = sample_field(g, [&](const Point& x) { return q(x) + 1.0; });
  s.obstacle = sample_field(g, [&](const Point& x) { return q(x) - 10.0; });
  s.tol_r = 1e-5;
  s.mode = mode;
  s.ma = MAConfig::standard(n);
  return s;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("sweep mode names") {
  CHECK(parse_sweep_mode("gauss-seidel") == SweepMode::GaussSeidel);
  CHECK(parse_sweep_mode("jacobi") == SweepMode::Jacobi);
  CHECK(parse_sweep_mode(to_string(SweepMode::Jacobi)) == SweepMode::Jacobi);
  CHECK_THROWS_AS(parse_sweep_mode("sor"), std::invalid_argument);
}

TEST_CASE("quadratic boundary data is reproduced") {
  for (SweepMode mode : {SweepMode::GaussSeidel, SweepMode::Jacobi}) {
    const ObstacleProblemSpec s = quadratic_spec(2, 17, mode);
    const SolveResult r = solve_obstacle(s);
    CHECK(r.monotone);
    CHECK(max_abs_diff(r.u_star, s.boundary_data) <= 1e-3);
    CHECK(r.final_update < s.tol_r * std::pow(r.u_star.grid.spacing(), 2) / 8);
    CHECK(r.max_excess <= 1e-3);
  }
}

TEST_CASE("solver invariants on the 2D point run") {
  const Polytope point = polytope_preset("point", 2);
  const SolveResult r = polytope_pipeline(point, 2, 4.0, 33, 0.6);
  const TensorGrid& g = r.u_star.grid;
  const double h = g.spacing();
  CHECK(r.monotone);
  CHECK(r.final_update < r.tol_r * h * h / 8);
  for (std::size_t i = 1; i < r.update_history.size(); ++i) CHECK(r.update_history[i] >= 0.0);
  std::size_t contact = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(r.u_star[i] >= r.obstacle[i] - 1e-12);
    CHECK(r.u_star[i] <= r.upper[i] + 1e-12);
    const double rad = g.point(i).norm();
    const bool touch = r.u_star[i] - r.obstacle[i] <= 10 * r.tol_r * h * h;
    if (touch) {
      ++contact;
      CHECK(rad <= 1.0 + 2 * h);
    }
    if (rad <= 1.0 - 2 * h) CHECK(touch);
  }
  CHECK(contact > 0);
  // Far from the contact set u* follows W_2 up to the boundary layer.
  const std::size_t far = g.nearest(Point::Constant(2, 2.0));
  CHECK(std::abs(r.u_star[far] - W_value(2, g.point(far))) <= 0.1);
}

TEST_CASE("Jacobi sweeps are deterministic and respect the grid symmetry") {
  const Polytope square = polytope_preset("square", 2);
  PipelineOptions opts;
  opts.mode = SweepMode::Jacobi;
  const SolveResult a = polytope_pipeline(square, 2, 4.0, 25, 0.6, opts);
  const SolveResult b = polytope_pipeline(square, 2, 4.0, 25, 0.6, opts);
  CHECK(a.u_star.values == b.u_star.values);
  CHECK(a.iterations == b.iterations);
  const TensorGrid& g = a.u_star.grid;
  const int m = g.points_per_axis();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index k = g.unflatten(i);
    CHECK(a.u_star[i] == a.u_star[g.flatten({m - 1 - k[0], k[1], 0, 0})]);
    CHECK(a.u_star[i] == a.u_star[g.flatten({k[1], k[0], 0, 0})]);
  }
  const SolveResult gs = polytope_pipeline(square, 2, 4.0, 25, 0.6);
  CHECK(max_abs_diff(a.u_star, gs.u_star) <= 1e-3 * g.spacing() * g.spacing() * 50);
}

TEST_CASE("solver errors") {
  ObstacleProblemSpec s = quadratic_spec(2, 17, SweepMode::GaussSeidel);
  s.max_sweeps = 2;
  CHECK_THROWS_AS(solve_obstacle(s), SolverError);
  try {
    solve_obstacle(s);
  } catch (const SolverError& e) {
    CHECK(e.history().size() == 2);
  }
  ObstacleProblemSpec low = quadratic_spec(2, 17, SweepMode::GaussSeidel);
  low.initial.values[low.initial.grid.nearest(Point::Zero(2))] = -20.0;
  CHECK_THROWS_AS(solve_obstacle(low), std::invalid_argument);
  CHECK_THROWS_AS(polytope_pipeline(polytope_preset("point", 2), 3, 4.0, 17, 0.6),
                  std::invalid_argument);
  CHECK_THROWS_AS(polytope_pipeline(polytope_preset("point", 2), 2, 4.0, 17, 0.0),
                  std::invalid_argument);
}
