#include "maforge/barriers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace maforge {

namespace {

using boost::math::quadrature::gauss_kronrod;

// Substituting t = (s^n - 1)^{1/n} removes the square-root-type singularity of
// the integrand at s = 1: ds = t^{n-1} (1 + t^n)^{1/n - 1} dt.
double W_integrand(int n, double t) {
  const double tn = std::pow(t, n);
  return tn * std::pow(1.0 + tn, 1.0 / n - 1.0);
}

}  // namespace

BarrierParams make_barrier_params(int n, int k) {
  if (n < 1) throw std::invalid_argument("barrier: n must be >= 1");
  if (k < 0 || 2 * k >= n) throw std::invalid_argument("barrier: need 0 <= k < n/2");
  BarrierParams p;
  p.n = n;
  p.k = k;
  p.gamma = 2.0 * (n - k) / (n - 2.0 * k);
  p.C = std::pow(p.gamma / 2.0, 1.0 - static_cast<double>(k) / n) *
        std::pow(p.gamma - 1.0, 1.0 / n);
  return p;
}

double W_radial(int n, double r) {
  if (r <= 1.0) return 0.0;
  if (n == 1) return 0.5 * (r - 1.0) * (r - 1.0);
  const double T = std::pow(std::pow(r, n) - 1.0, 1.0 / n);
  return gauss_kronrod<double, 31>::integrate([n](double t) { return W_integrand(n, t); }, 0.0,
                                              T, 20, 1e-13);
}

double W_value(int n, const Point& x) { return W_radial(n, x.norm()); }

double W_gradient_norm(int n, const Point& x) {
  const double r = x.norm();
  return r <= 1.0 ? 0.0 : std::pow(std::pow(r, n) - 1.0, 1.0 / n);
}

Point W_gradient(int n, const Point& x) {
  const double r = x.norm();
  if (r <= 1.0) return Point::Zero(x.size());
  return x * (W_gradient_norm(n, x) / r);
}

double eval_w(const BarrierParams& p, const Point& x, const Point& y) {
  if (p.k == 0) return 0.5 * x.squaredNorm();
  const double r = x.norm();
  const double t = y.norm();
  if (r == 0.0) return t / p.C;
  const double rg = std::pow(r, p.gamma);
  if (t <= rg) return 0.5 * (rg + t * t / rg) / p.C;
  return t / p.C;
}

double eval_w(const BarrierParams& p, const Point& z) {
  const int nx = p.n - p.k;
  return eval_w(p, Point(z.head(nx)), Point(z.tail(p.k)));
}

double w_determinant(const BarrierParams& p, const Point& z) {
  if (p.k == 0) return 1.0;
  const int nx = p.n - p.k;
  const double r = z.head(nx).norm();
  const double t = z.tail(p.k).norm();
  const double rg = std::pow(r, p.gamma);
  if (!(t < rg)) return 0.0;
  const double s = t / rg;
  return std::pow(1.0 - s * s, p.n - p.k);
}

double W_determinant(int, const Point& x) { return x.norm() > 1.0 ? 1.0 : 0.0; }

double radial_constant(int n) {
  if (n < 3) throw std::invalid_argument("radial_constant: needs n >= 3");
  // W(R0) - R0^2/2 plus the tail integral of (s^n-1)^{1/n} - s over [R0, inf),
  // mapped to [0, 1] by s = R0 / tau.
  const double R0 = 2.0;
  auto tail = [n, R0](double tau) {
    if (tau <= 0.0) return n == 3 ? -1.0 / (3.0 * R0) : 0.0;
    const double s = R0 / tau;
    const double g = s * std::expm1(std::log1p(-std::pow(s, -n)) / n);
    return g * R0 / (tau * tau);
  };
  const double t = gauss_kronrod<double, 31>::integrate(tail, 0.0, 1.0, 20, 1e-13);
  return W_radial(n, R0) - 0.5 * R0 * R0 + t;
}

ModelValues eval_models(int n, const Point& x) {
  if (x.size() != n) throw std::invalid_argument("eval_models: dimension mismatch");
  ModelValues m;
  const double r = x.norm();
  m.V = r + std::pow(r, n + 1);
  if (n >= 2) {
    const double rho = x.head(n - 1).norm();
    const double xn = x(n - 1);
    m.E = rho + std::pow(rho, 0.5 * n) * (1.0 + xn * xn);
  }
  return m;
}

double w_clearance(const BarrierParams& p, const Point& z) {
  const int nx = p.n - p.k;
  const double r = z.head(nx).norm();
  if (p.k == 0) return std::numeric_limits<double>::infinity();
  const double t = z.tail(p.k).norm();
  // First-order distance from (r, t) to the graph t = r^gamma.
  const double slope = p.gamma * std::pow(r, p.gamma - 1.0);
  const double branch = std::abs(t - std::pow(r, p.gamma)) / std::sqrt(1.0 + slope * slope);
  return std::min(branch, r);
}

double W_clearance(int, const Point& x) { return std::abs(x.norm() - 1.0); }

namespace {

template <typename F, typename D, typename Clear>
BarrierCheck run_check(const std::vector<Point>& samples, double rel_step, F&& f, D&& det,
                       Clear&& clearance) {
  BarrierCheck out;
  for (const auto& x : samples) {
    const double h = rel_step * x.norm();
    if (!(h > 0) || clearance(x) < 5 * h)
      throw std::invalid_argument("barrier check: sample violates the 5h clearance");
    BarrierSample row;
    row.x = x;
    row.analytic = det(x);
    row.fd = fd_hessian(f, x, h).determinant();
    row.rel_err = std::abs(row.fd - row.analytic) / std::max(std::abs(row.analytic), 1.0);
    out.max_rel_err = std::max(out.max_rel_err, row.rel_err);
    out.rows.push_back(std::move(row));
  }
  return out;
}

template <typename Clear>
std::vector<Point> sample_points(int n, int count, std::uint64_t seed, double rel_step,
                                 Clear&& clearance) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Point> out;
  while (static_cast<int>(out.size()) < count) {
    Point x(n);
    for (int i = 0; i < n; ++i) x(i) = u(rng);
    const double h = rel_step * x.norm();
    // Keep a comfortable margin beyond the 5h precondition so that the O(h^2)
    // truncation error stays well below the check tolerance.
    if (x.norm() > 0.1 && clearance(x) >= 50 * h) out.push_back(x);
  }
  return out;
}

}  // namespace

BarrierCheck check_w_determinant(const BarrierParams& p, const std::vector<Point>& samples,
                                 double rel_step) {
  return run_check(
      samples, rel_step, [&](const Point& z) { return eval_w(p, z); },
      [&](const Point& z) { return w_determinant(p, z); },
      [&](const Point& z) { return w_clearance(p, z); });
}

BarrierCheck check_W_determinant(int n, const std::vector<Point>& samples, double rel_step) {
  return run_check(
      samples, rel_step, [&](const Point& x) { return W_value(n, x); },
      [&](const Point& x) { return W_determinant(n, x); },
      [&](const Point& x) { return W_clearance(n, x); });
}

std::vector<Point> sample_w_points(const BarrierParams& p, int count, std::uint64_t seed,
                                   double rel_step) {
  return sample_points(p.n, count, seed, rel_step,
                       [&](const Point& z) { return w_clearance(p, z); });
}

std::vector<Point> sample_W_points(int n, int count, std::uint64_t seed, double rel_step) {
  return sample_points(n, count, seed, rel_step,
                       [&](const Point& x) { return W_clearance(n, x); });
}

}  // namespace maforge
