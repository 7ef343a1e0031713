#include "maforge/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace maforge {

namespace {

// Lower convex hull of (x, v) over strictly increasing x; collinear points
// are dropped so every kept point is a strict vertex.
void lower_hull(const double* x, const double* v, std::ptrdiff_t vstride, int n,
                std::vector<int>& hull) {
  hull.clear();
  for (int i = 0; i < n; ++i) {
    const double vi = v[i * vstride];
    while (hull.size() >= 2) {
      int a = hull[hull.size() - 2], b = hull.back();
      double cross = (x[b] - x[a]) * (vi - v[a * vstride]) - (v[b * vstride] - v[a * vstride]) * (x[i] - x[a]);
      if (cross <= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }
}

// One pencil of the transform. Slopes must be nondecreasing.
void transform_pencil(const double* x, const double* v, std::ptrdiff_t vstride, int nx,
                      const double* p, int np, double* out, std::ptrdiff_t ostride,
                      int* arg, std::vector<int>& hull) {
  lower_hull(x, v, vstride, nx, hull);
  std::size_t k = 0;
  for (int j = 0; j < np; ++j) {
    double best = p[j] * x[hull[k]] - v[hull[k] * vstride];
    while (k + 1 < hull.size()) {
      double next = p[j] * x[hull[k + 1]] - v[hull[k + 1] * vstride];
      if (next > best) {
        best = next;
        ++k;
      } else {
        break;
      }
    }
    out[j * ostride] = best;
    arg[j] = hull[k];
  }
}

std::vector<double> axis_coords(const TensorGrid& g) {
  std::vector<double> c(g.points_per_axis());
  for (int i = 0; i < g.points_per_axis(); ++i) c[i] = g.coord(i);
  return c;
}

}  // namespace

Transform1D llt_1d(const std::vector<double>& x, const std::vector<double>& v,
                   const std::vector<double>& slopes) {
  if (x.empty() || x.size() != v.size()) throw std::invalid_argument("llt_1d: empty or mismatched input");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw std::invalid_argument("llt_1d: positions must increase strictly");
  std::vector<int> order(slopes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return slopes[a] < slopes[b]; });
  std::vector<double> sorted(slopes.size());
  for (std::size_t j = 0; j < order.size(); ++j) sorted[j] = slopes[order[j]];

  std::vector<double> vals(slopes.size());
  std::vector<int> args(slopes.size());
  std::vector<int> hull;
  transform_pencil(x.data(), v.data(), 1, static_cast<int>(x.size()), sorted.data(),
                   static_cast<int>(sorted.size()), vals.data(), 1, args.data(), hull);
  Transform1D out;
  out.values.resize(slopes.size());
  out.argmax.resize(slopes.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.values[order[j]] = vals[j];
    out.argmax[order[j]] = args[j];
  }
  return out;
}

double max_forward_slope(const ScalarField& f) {
  const auto& g = f.grid;
  const int m = g.points_per_axis();
  double best = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    Lattice e{};
    e[a] = 1;
    const std::ptrdiff_t o = g.offset(e);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.unflatten(i)[a] == m - 1) continue;
      best = std::max(best, std::abs(f.values[i + o] - f.values[i]));
    }
  }
  return best / g.spacing();
}

DualGrid default_dual_grid(const ScalarField& f, int m, double margin) {
  double s = max_forward_slope(f);
  if (s <= 0.0) s = 1.0;
  return DualGrid(f.grid.dim(), margin * s, m > 0 ? m : f.grid.points_per_axis());
}

DualGrid aligned_dual_grid(const ScalarField& f, const std::vector<Point>& anchors, double margin) {
  const DualGrid base = default_dual_grid(f, 0, margin);
  double c = 0.0;
  for (const auto& a : anchors) c = std::max(c, a.cwiseAbs().maxCoeff());
  if (c <= 0.0) return base;
  const int k = std::max(1, static_cast<int>(std::lround(c / base.spacing())));
  const double s = c / k;
  for (const auto& a : anchors)
    for (int i = 0; i < a.size(); ++i)
      if (std::abs(a(i) / s - std::round(a(i) / s)) > 1e-9) return base;
  const int half = static_cast<int>(std::ceil(base.half_width() / s - 1e-9));
  return DualGrid(f.grid.dim(), half * s, 2 * half + 1);
}

Conjugate legendre_with_argmax(const ScalarField& f, const TensorGrid& target,
                               bool check_coverage) {
  const TensorGrid& g = f.grid;
  const int n = g.dim();
  if (target.dim() != n) throw std::invalid_argument("legendre_nd: dimension mismatch");
  for (double v : f.values)
    if (!std::isfinite(v)) throw std::invalid_argument("legendre_nd: non-finite input");
  if (check_coverage) {
    double s = max_forward_slope(f);
    if (s > target.half_width() * (1.0 + 1e-9) + 1e-12)
      throw CoverageError("legendre_nd: dual grid half-width " + std::to_string(target.half_width()) +
                          " below slope range " + std::to_string(s));
  }
  const std::vector<double> xs = axis_coords(g);
  const std::vector<double> ps = axis_coords(target);
  const int mp = g.points_per_axis(), md = target.points_per_axis();

  std::array<int, 4> dims{1, 1, 1, 1};
  for (int a = 0; a < n; ++a) dims[a] = mp;
  // F holds max over transformed axes of (sum p_k x_k - f); start with -f.
  std::vector<double> F(f.values.size());
  for (std::size_t i = 0; i < F.size(); ++i) F[i] = -f.values[i];
  std::vector<std::uint32_t> arg(F.size());
  std::iota(arg.begin(), arg.end(), 0u);

  for (int a = 0; a < n; ++a) {
    std::size_t inner = 1, outer = 1;
    for (int k = 0; k < a; ++k) inner *= dims[k];
    for (int k = a + 1; k < n; ++k) outer *= dims[k];
    std::vector<double> G(inner * md * outer);
    std::vector<std::uint32_t> garg(G.size());
    const std::size_t pencils = inner * outer;
    parallel_chunks(pencils, [&](std::size_t lo, std::size_t hi, int) {
      std::vector<double> v(mp);
      std::vector<int> hull, local(md);
      for (std::size_t q = lo; q < hi; ++q) {
        const std::size_t i = q % inner, o = q / inner;
        const std::size_t src = o * mp * inner + i, dst = o * md * inner + i;
        for (int t = 0; t < mp; ++t) v[t] = -F[src + t * inner];
        transform_pencil(xs.data(), v.data(), 1, mp, ps.data(), md, G.data() + dst,
                         static_cast<std::ptrdiff_t>(inner), local.data(), hull);
        for (int j = 0; j < md; ++j) garg[dst + j * inner] = arg[src + local[j] * inner];
      }
    });
    F.swap(G);
    arg.swap(garg);
    dims[a] = md;
  }
  Conjugate out{ScalarField(target), std::move(arg)};
  out.values.values = std::move(F);
  return out;
}

ScalarField legendre_nd(const ScalarField& f, const TensorGrid& target, bool check_coverage) {
  return legendre_with_argmax(f, target, check_coverage).values;
}

ScalarField biconjugate(const ScalarField& f) {
  ScalarField star = legendre_nd(f, default_dual_grid(f));
  return legendre_nd(star, f.grid);
}

ScalarField build_solution(const ScalarField& u_star, const DualGrid& dual) {
  return legendre_nd(u_star, dual);
}

double conjugate_at(const ScalarField& f, const Point& p, std::size_t* argmax) {
  const auto& g = f.grid;
  const int n = g.dim(), m = g.points_per_axis();
  if (p.size() != n) throw std::invalid_argument("conjugate_at: dimension mismatch");
  std::vector<double> xs = axis_coords(g);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t where = 0;
  Index i{};
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += p(k) * xs[i[k]];
    double val = s - f.values[idx];
    if (val > best) {
      best = val;
      where = idx;
    }
    for (int k = 0; k < n; ++k) {
      if (++i[k] < m) break;
      i[k] = 0;
    }
  }
  if (argmax) *argmax = where;
  return best;
}

namespace {

double refine_at(const ScalarField& f, std::size_t node, const Point& p, double raw) {
  const auto& g = f.grid;
  const int n = g.dim();
  if (g.boundary_distance(node) < 1) return raw;
  const double h = g.spacing();
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd H(n, n);
  auto at = [&](const Lattice& e) { return f.values[node + g.offset(e)]; };
  const double c = f.values[node];
  for (int a = 0; a < n; ++a) {
    Lattice ea{};
    ea[a] = 1;
    Lattice ma{};
    ma[a] = -1;
    grad(a) = (at(ea) - at(ma)) / (2 * h);
    H(a, a) = (at(ea) + at(ma) - 2 * c) / (h * h);
    for (int b = a + 1; b < n; ++b) {
      Lattice pp{}, pm{}, mp{}, mm{};
      pp[a] = 1, pp[b] = 1;
      pm[a] = 1, pm[b] = -1;
      mp[a] = -1, mp[b] = 1;
      mm[a] = -1, mm[b] = -1;
      H(a, b) = H(b, a) = (at(pp) - at(pm) - at(mp) + at(mm)) / (4 * h * h);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  if (eig.eigenvalues().minCoeff() <= 1e-8 * std::max(1.0, eig.eigenvalues().maxCoeff())) return raw;
  Eigen::VectorXd r = p - grad;
  Eigen::VectorXd step = eig.eigenvectors() *
                         (eig.eigenvalues().cwiseInverse().asDiagonal() * (eig.eigenvectors().transpose() * r));
  if (step.lpNorm<Eigen::Infinity>() > h) return raw;
  return p.dot(g.point(node)) - c + 0.5 * r.dot(step);
}

}  // namespace

double refined_conjugate_at(const ScalarField& f, const Point& p) {
  std::size_t node = 0;
  const double raw = conjugate_at(f, p, &node);
  return refine_at(f, node, p, raw);
}

Conjugate refined_legendre(const ScalarField& f, const TensorGrid& target, bool check_coverage) {
  Conjugate c = legendre_with_argmax(f, target, check_coverage);
  parallel_for(target.size(), [&](std::size_t i) {
    c.values[i] = refine_at(f, c.argmax[i], target.point(i), c.values[i]);
  });
  return c;
}

}  // namespace maforge
