#include "maforge/ma_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace maforge {

double ma_h(const ScalarField& f, std::size_t node, const MAConfig& cfg) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& fr : cfg.frames) {
    double prod = 1.0;
    for (int k = 0; k < f.grid.dim(); ++k) {
      double d = second_difference(f, node, fr.dirs[k]);
      prod *= cfg.clip_negative ? std::max(d, 0.0) : d;
    }
    best = std::min(best, prod);
  }
  return best;
}

FrameStencil::FrameStencil(const TensorGrid& g, const MAConfig& cfg)
    : grid_(g), n_(g.dim()), width_(stencil_width(cfg.frames)), clip_(cfg.clip_negative) {
  if (cfg.frames.empty() || cfg.frames.size() > 64)
    throw std::invalid_argument("FrameStencil: need between 1 and 64 frames");
  const double h2 = g.spacing() * g.spacing();
  for (const auto& fr : cfg.frames) {
    FrameData d{};
    d.weight_product = 1.0;
    for (int k = 0; k < n_; ++k) {
      int len2 = dot(fr.dirs[k], fr.dirs[k], n_);
      d.dirs[k] = {g.offset(fr.dirs[k]), 0.5 * h2 * len2};
      d.weight_product *= d.dirs[k].weight;
    }
    d.weight_root = std::pow(d.weight_product, 1.0 / n_);
    frames_.push_back(d);
  }
}

double FrameStencil::apply(const double* u, std::size_t node) const {
  const double c = u[node];
  double best = std::numeric_limits<double>::infinity();
  for (const auto& fr : frames_) {
    double prod = 1.0;
    for (int k = 0; k < n_; ++k) {
      const auto& d = fr.dirs[k];
      double s = (0.5 * (u[node + d.offset] + u[node - d.offset]) - c) / d.weight;
      prod *= clip_ ? std::max(s, 0.0) : s;
    }
    best = std::min(best, prod);
  }
  return best;
}

double frame_root(const double* a, int n, double K) {
  return frame_root(a, n, K, std::pow(K, 1.0 / n));
}

double frame_root(const double* a, int n, double K, double Kr) {
  if (n == 1) return a[0] - K;
  if (n == 2) {
    double half = 0.5 * (a[0] - a[1]);
    return 0.5 * (a[0] + a[1]) - std::sqrt(half * half + K);
  }
  double lo = a[0], mean = 0.0;
  for (int k = 0; k < n; ++k) {
    lo = std::min(lo, a[k]);
    mean += a[k];
  }
  mean /= n;
  // With x = mean - c and d_i = a_i - mean, prod (a_i - c) is the monic
  // polynomial in x with elementary symmetric coefficients of d (e1 = 0).
  double d[4] = {0, 0, 0, 0};
  for (int k = 0; k < n; ++k) d[k] = a[k] - mean;
  double e2 = 0, e3 = 0, e4 = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      e2 += d[i] * d[j];
      for (int k = j + 1; k < n; ++k) {
        e3 += d[i] * d[j] * d[k];
        for (int l = k + 1; l < n; ++l) e4 += d[i] * d[j] * d[k] * d[l];
      }
    }
  // The polynomial is convex and increasing right of -min(d), and its root
  // is at most K^(1/n) + mean - lo, so Newton descends monotonically.
  double x = Kr + (mean - lo);
  const double tol = 1e-14 * (std::abs(mean) + Kr);
  for (int it = 0; it < 100; ++it) {
    double F, dF;
    if (n == 3) {
      F = x * (x * x + e2) + e3 - K;
      dF = 3 * x * x + e2;
    } else {
      const double x2 = x * x;
      F = x2 * (x2 + e2) + e3 * x + e4 - K;
      dF = x * (4 * x2 + 2 * e2) + e3;
    }
    const double step = F / dF;
    if (!(step > 0.0)) break;
    x -= step;
    if (step <= tol) break;
  }
  return mean - x;
}

double FrameStencil::local_solve(const double* u, std::size_t node) const {
  const std::size_t nf = frames_.size();
  double a[64][4];
  std::size_t first = 0;
  double first_upper = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& fr = frames_[f];
    double mean = 0.0;
    for (int k = 0; k < n_; ++k) {
      const auto& d = fr.dirs[k];
      a[f][k] = 0.5 * (u[node + d.offset] + u[node - d.offset]);
      mean += a[f][k];
    }
    // mean(a) - K^(1/n) bounds the root from above (AM-GM); start from the
    // frame with the smallest bound, it usually binds.
    const double upper = mean / n_ - fr.weight_root;
    if (upper < first_upper) {
      first_upper = upper;
      first = f;
    }
  }
  double answer = frame_root(a[first], n_, frames_[first].weight_product, frames_[first].weight_root);
  for (std::size_t f = 0; f < nf; ++f) {
    if (f == first) continue;
    // The frame's product is decreasing in c, so its root is >= answer
    // exactly when the product at answer still reaches K.
    double prod = 1.0;
    bool above = true;
    for (int k = 0; k < n_; ++k) {
      const double t = a[f][k] - answer;
      if (!(t > 0.0)) {
        above = false;
        break;
      }
      prod *= t;
    }
    if (above && prod >= frames_[f].weight_product) continue;
    answer = std::min(answer, frame_root(a[f], n_, frames_[f].weight_product, frames_[f].weight_root));
  }
  if (!std::isfinite(answer)) throw std::runtime_error("local_solve: non-finite neighbors");
  return answer;
}

double ma_measure(const Conjugate& conj, const TensorGrid& primal,
                  const std::vector<std::uint8_t>& region) {
  if (region.size() != primal.size()) throw std::invalid_argument("ma_measure: region size mismatch");
  for (std::size_t i = 0; i < region.size(); ++i)
    if (region[i] && primal.boundary_distance(i) == 0)
      throw std::invalid_argument("ma_measure: region touches the grid boundary");
  std::size_t count = 0;
  for (std::uint32_t a : conj.argmax)
    if (region[a]) ++count;
  return static_cast<double>(count) * conj.values.grid.cell_volume();
}

double ma_measure(const ScalarField& f, const std::vector<std::uint8_t>& region, const DualGrid& dual) {
  return ma_measure(legendre_with_argmax(f, dual), f.grid, region);
}

}  // namespace maforge
