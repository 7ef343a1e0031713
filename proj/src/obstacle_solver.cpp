#include "maforge/obstacle_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "maforge/barriers.hpp"

namespace maforge {

std::string to_string(SweepMode m) { return m == SweepMode::Jacobi ? "jacobi" : "gauss-seidel"; }

SweepMode parse_sweep_mode(const std::string& s) {
  if (s == "jacobi") return SweepMode::Jacobi;
  if (s == "gauss-seidel" || s == "gs") return SweepMode::GaussSeidel;
  throw std::invalid_argument("unknown sweep mode: " + s);
}

double local_solve(const ScalarField& f, std::size_t node, const MAConfig& cfg) {
  FrameStencil st(f.grid, cfg);
  if (!st.fits(node)) throw std::out_of_range("local_solve: stencil leaves the grid");
  return st.local_solve(f.values.data(), node);
}

namespace {

int color_of(const TensorGrid& g, std::size_t idx) {
  Index i = g.unflatten(idx);
  int c = 0;
  for (int k = g.dim() - 1; k >= 0; --k) c = 3 * c + i[k] % 3;
  return c;
}

struct SweepStats {
  double max_update = 0.0;
  bool increased = false;
};

}  // namespace

SolveResult solve_obstacle(const ObstacleProblemSpec& spec) {
  const TensorGrid& g = spec.obstacle.grid;
  if (!(spec.boundary_data.grid == g) || !(spec.initial.grid == g))
    throw std::invalid_argument("solve_obstacle: fields live on different grids");
  const FrameStencil stencil(g, spec.ma);
  const int width = stencil.width();
  const double* psi = spec.obstacle.values.data();

  SolveResult res;
  res.u_star = spec.initial;
  res.obstacle = spec.obstacle;
  res.ma = spec.ma;
  res.pinned_width = width;
  res.tol_r = spec.tol_r;
  auto& u = res.u_star.values;
  std::vector<std::vector<std::size_t>> colors(static_cast<std::size_t>(std::pow(3, g.dim())));
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.boundary_distance(i) < width) {
      if (spec.boundary_data[i] < psi[i] - 1e-12)
        throw std::invalid_argument("solve_obstacle: boundary data below the obstacle");
      u[i] = spec.boundary_data[i];
      res.u_star.pinned[i] = 1;
    } else {
      if (u[i] < psi[i] - 1e-12)
        throw std::invalid_argument("solve_obstacle: initial field below the obstacle");
      u[i] = std::max(u[i], psi[i]);
      colors[color_of(g, i)].push_back(i);
    }
  }
  // Contact nodes never detach while u decreases, so they drop out of the
  // sweep lists as they are found.
  const double threshold = spec.tol_r * g.spacing() * g.spacing() / (4.0 * g.dim());
  std::vector<double> next;
  std::vector<std::size_t> all;
  if (spec.mode == SweepMode::Jacobi) {
    for (const auto& c : colors) all.insert(all.end(), c.begin(), c.end());
    std::sort(all.begin(), all.end());
    next = u;
  }
  const int workers = worker_count();
  std::vector<SweepStats> stats(workers);

  auto relax = [&](const double* src, std::size_t node, double& dst, SweepStats& st) {
    const double old = src[node];
    double c = stencil.local_solve(src, node);
    double v = std::max(psi[node], std::min(old, c));
    if (v > old) st.increased = true;
    st.max_update = std::max(st.max_update, old - v);
    dst = v;
  };

  bool converged = false;
  for (int sweep = 0; sweep < spec.max_sweeps; ++sweep) {
    std::fill(stats.begin(), stats.end(), SweepStats{});
    if (spec.mode == SweepMode::GaussSeidel) {
      for (auto& list : colors) {
        parallel_chunks(list.size(), [&](std::size_t lo, std::size_t hi, int w) {
          for (std::size_t k = lo; k < hi; ++k) relax(u.data(), list[k], u[list[k]], stats[w]);
        });
        std::erase_if(list, [&](std::size_t i) { return u[i] <= psi[i]; });
      }
    } else {
      parallel_chunks(all.size(), [&](std::size_t lo, std::size_t hi, int w) {
        for (std::size_t k = lo; k < hi; ++k) relax(u.data(), all[k], next[all[k]], stats[w]);
      });
      for (std::size_t i : all) u[i] = next[i];
      std::erase_if(all, [&](std::size_t i) { return u[i] <= psi[i]; });
    }
    SweepStats total;
    for (const auto& s : stats) {
      total.max_update = std::max(total.max_update, s.max_update);
      total.increased = total.increased || s.increased;
    }
    if (total.increased) res.monotone = false;
    res.update_history.push_back(total.max_update);
    res.iterations = sweep + 1;
    res.final_update = total.max_update;
    if (total.max_update < threshold) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw SolverError("solve_obstacle: no convergence in " + std::to_string(spec.max_sweeps) +
                          " sweeps (last update " + std::to_string(res.final_update) + ")",
                      res.update_history);

  double resid = 0.0, excess = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (res.u_star.pinned[i]) continue;
    double mh = stencil.apply(u.data(), i);
    resid = std::max(resid, std::abs(std::min(u[i] - psi[i], 1.0 - mh)));
    excess = std::max(excess, mh - 1.0);
  }
  res.final_residual = resid;
  res.max_excess = excess;
  return res;
}

namespace {

ScalarField sample_W(const TensorGrid& g, double shift) {
  const int n = g.dim();
  // W_n is radial; tabulate it once per distinct squared radius.
  ScalarField out(g);
  std::vector<std::pair<double, std::size_t>> radii(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) radii[i] = {g.point(i).squaredNorm(), i};
  std::sort(radii.begin(), radii.end());
  double last_r2 = -1.0, last_v = 0.0;
  for (const auto& [r2, i] : radii) {
    if (r2 != last_r2) {
      last_r2 = r2;
      last_v = W_radial(n, std::sqrt(r2));
    }
    out[i] = last_v + shift;
  }
  return out;
}

}  // namespace

SolveResult polytope_pipeline(const Polytope& omega, int n, double R, int m, double eps,
                              const PipelineOptions& opts) {
  if (omega.ambient_dim() != n) throw std::invalid_argument("polytope_pipeline: dimension mismatch");
  if (!(eps > 0)) throw std::invalid_argument("polytope_pipeline: eps must be positive");
  TensorGrid g(n, R, m);
  ScalarField upper = sample_W(g, eps);
  ScalarField support(g);
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    support[i] = support_value(omega, g.point(i));
    if (support[i] > 0.0) delta = std::min(delta, upper[i] / support[i]);
  }
  if (!std::isfinite(delta)) delta = 1.0;  // P* = 0: the obstacle vanishes for any scale
  delta *= 0.9;
  if (!(delta > 0)) throw std::invalid_argument("polytope_pipeline: no admissible obstacle scale");

  ObstacleProblemSpec spec;
  spec.obstacle = ScalarField(g);
  for (std::size_t i = 0; i < g.size(); ++i) spec.obstacle[i] = delta * support[i];
  spec.boundary_data = sample_W(g, -opts.beta);
  for (std::size_t i = 0; i < g.size(); ++i)
    spec.boundary_data[i] = std::max(spec.boundary_data[i], spec.obstacle[i]);
  spec.initial = upper;
  spec.tol_r = opts.tol_r;
  spec.max_sweeps = opts.max_sweeps;
  spec.mode = opts.mode;
  spec.ma = MAConfig::standard(n);

  SolveResult res = solve_obstacle(spec);
  res.lower = spec.boundary_data;
  res.upper = upper;
  for (const auto& q : omega.vertices()) res.pieces.push_back(Affine{delta * q, 0.0});
  res.params.kind = "polytope";
  res.params.delta = delta;
  res.params.eps = eps;
  res.params.eps_tilde = eps;
  res.params.beta = opts.beta;
  res.params.R = R;
  res.params.m = m;
  return res;
}

double y_auto_delta(const std::vector<Segment>& segments, const TensorGrid& g, double eps_tilde,
                    double r0) {
  const auto dirs = segment_directions(segments);
  ScalarField upper = sample_W(g, eps_tilde);
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.point(i);
    for (const auto& d : dirs) {
      double slope = d.dot(x) - d.norm() * (1.0 - r0);
      if (slope > 0.0) delta = std::min(delta, upper[i] / slope);
    }
  }
  return 0.9 * delta;
}

SolveResult y_pipeline(const std::vector<Segment>& segments, int n, double R, int m, double eps,
                       double eps_tilde, double r0, const PipelineOptions& opts, double delta,
                       const std::function<bool(const SolveResult&)>& accept, int max_retries) {
  if (segments.size() < 2) throw std::invalid_argument("y_pipeline: need at least two segments");
  if (!(eps > 0) || !(eps_tilde > 0)) throw std::invalid_argument("y_pipeline: eps must be positive");
  TensorGrid g(n, R, m);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const double d = delta > 0 ? delta : y_auto_delta(segments, g, eps_tilde, r0);
    const auto affines = y_obstacle_affines(segments, d, r0);
    ScalarField W = sample_W(g, 0.0);
    ScalarField phi(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      Point x = g.point(i);
      const double base = std::max(W[i] - eps, 0.0);
      double v = base;
      int active = 0;
      for (const auto& L : affines) {
        double l = L(x);
        v = std::max(v, l);
        if (l >= base) ++active;
      }
      if (active > 1)
        throw GeometryError("y_pipeline: the sets {phi = L_i} overlap at a grid node");
      phi[i] = v;
    }
    ObstacleProblemSpec spec;
    spec.obstacle = phi;
    spec.boundary_data = phi;
    spec.initial = W;
    for (auto& v : spec.initial.values) v += eps_tilde;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (spec.initial[i] < phi[i]) throw GeometryError("y_pipeline: obstacle above W_n + eps_tilde");
    spec.tol_r = opts.tol_r;
    spec.max_sweeps = opts.max_sweeps;
    spec.mode = opts.mode;
    spec.ma = MAConfig::standard(n);

    SolveResult res = solve_obstacle(spec);
    res.lower = phi;
    res.upper = spec.initial;
    res.pieces.push_back(Affine{Point::Zero(n), 0.0});
    for (const auto& L : affines) res.pieces.push_back(L);
    res.params.kind = "y-graph";
    res.params.delta = d;
    res.params.eps = eps;
    res.params.eps_tilde = eps_tilde;
    res.params.r0 = r0;
    res.params.R = R;
    res.params.m = m;
    res.params.attempts = attempt + 1;
    if (!accept || accept(res)) return res;
    eps *= 0.5;
    eps_tilde *= 0.5;
  }
  throw SolverError("y_pipeline: contact topology check failed after " +
                        std::to_string(max_retries) + " retries",
                    {});
}

}  // namespace maforge
