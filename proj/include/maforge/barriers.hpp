#pragma once

#include <cstdint>
#include <vector>

#include "maforge/geometry.hpp"

namespace maforge {

/// Parameters of the cylindrical supersolution w_{n,k} on R^{n-k} x R^k.
struct BarrierParams {
  int n = 3;
  int k = 1;
  double gamma = 2.0;  // 2(n-k)/(n-2k)
  double C = 1.0;      // (gamma/2)^{1-k/n} (gamma-1)^{1/n}
};

/// Validates 0 <= k < n/2 and fills in gamma and C.
BarrierParams make_barrier_params(int n, int k);

/// Radial profile of W_n: integral over [0, r] of (s^n - 1)_+^{1/n}.
double W_radial(int n, double r);
double W_value(int n, const Point& x);
/// |grad W_n| = (|x|^n - 1)_+^{1/n}.
double W_gradient_norm(int n, const Point& x);
Point W_gradient(int n, const Point& x);

/// w_{n,k}(x, y) for x in R^{n-k}, y in R^k. For k = 0 this is |x|^2/2.
double eval_w(const BarrierParams& p, const Point& x, const Point& y);
/// Same, with z = (x, y) packed into one point of R^n.
double eval_w(const BarrierParams& p, const Point& z);

/// Closed-form Monge-Ampere density of w_{n,k}: (1 - s^2)^{n-k} on {t < r^gamma}.
double w_determinant(const BarrierParams& p, const Point& z);
/// Closed-form density of W_n: indicator of |x| > 1.
double W_determinant(int n, const Point& x);

/// lim_{R -> inf} (W_n(R) - R^2/2), n >= 3.
double radial_constant(int n);

struct ModelValues {
  double E = 0.0;  // rho + rho^{n/2} (1 + x_n^2), rho = |x'|
  double V = 0.0;  // r + r^{n+1}
};
ModelValues eval_models(int n, const Point& x);

struct BarrierSample {
  Point x;
  double analytic = 0.0;
  double fd = 0.0;
  double rel_err = 0.0;
};

struct BarrierCheck {
  double max_rel_err = 0.0;
  std::vector<BarrierSample> rows;
};

/// Distance proxies to the singular surfaces where the determinant identity
/// has a distributional part. Samples need clearance >= 5h.
double w_clearance(const BarrierParams& p, const Point& z);
double W_clearance(int n, const Point& x);

/// Central-difference Hessian determinant with step rel_step * |x| against the
/// closed form. The error is |fd - analytic| / max(|analytic|, 1). Throws
/// std::invalid_argument when a sample violates the clearance precondition.
BarrierCheck check_w_determinant(const BarrierParams& p, const std::vector<Point>& samples,
                                 double rel_step = 1e-3);
BarrierCheck check_W_determinant(int n, const std::vector<Point>& samples,
                                 double rel_step = 1e-3);

/// Deterministic clearance-respecting samples in the box [-2, 2]^n.
std::vector<Point> sample_w_points(const BarrierParams& p, int count, std::uint64_t seed,
                                   double rel_step = 1e-3);
std::vector<Point> sample_W_points(int n, int count, std::uint64_t seed, double rel_step = 1e-3);

/// Central-difference Hessian used by the determinant checks.
template <typename F>
Eigen::MatrixXd fd_hessian(F&& f, const Point& x, double h) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd H(n, n);
  const double f0 = f(x);
  for (int i = 0; i < n; ++i) {
    Point xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    H(i, i) = (f(xp) - 2 * f0 + f(xm)) / (h * h);
    for (int j = i + 1; j < n; ++j) {
      Point a = x, b = x, c = x, d = x;
      a(i) += h, a(j) += h;
      b(i) += h, b(j) -= h;
      c(i) -= h, c(j) += h;
      d(i) -= h, d(j) -= h;
      H(i, j) = H(j, i) = (f(a) - f(b) - f(c) + f(d)) / (4 * h * h);
    }
  }
  return H;
}

}  // namespace maforge
