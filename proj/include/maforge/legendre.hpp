#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "maforge/grid.hpp"

namespace maforge {

/// Slope-space grid. Same machinery as the primal grid.
using DualGrid = TensorGrid;

class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Transform1D {
  std::vector<double> values;
  std::vector<int> argmax;
};

/// values[j] = max_i (slopes[j] * x[i] - v[i]) in O(|x| + |slopes|) time.
/// Ties go to the smaller index i.
Transform1D llt_1d(const std::vector<double>& x, const std::vector<double>& v,
                   const std::vector<double>& slopes);

/// Conjugate values together with the primal node attaining each maximum.
struct Conjugate {
  ScalarField values;
  std::vector<std::uint32_t> argmax;
};

/// Largest |forward difference| / h over every axis and node.
double max_forward_slope(const ScalarField& f);

/// Dual box of half-width margin * max_forward_slope(f); m defaults to the
/// primal points per axis.
DualGrid default_dual_grid(const ScalarField& f, int m = 0, double margin = 1.25);

/// Default dual grid with the spacing adjusted so that every anchor is a
/// node, when the anchor coordinates share a common step; the default grid
/// otherwise.
DualGrid aligned_dual_grid(const ScalarField& f, const std::vector<Point>& anchors,
                           double margin = 1.25);

/// Discrete Legendre transform by iterated 1D transforms, one axis at a time.
/// Throws CoverageError when check_coverage is set and the target box is
/// narrower than the slopes of f.
Conjugate legendre_with_argmax(const ScalarField& f, const TensorGrid& target,
                               bool check_coverage = true);
ScalarField legendre_nd(const ScalarField& f, const TensorGrid& target,
                        bool check_coverage = true);

/// f** back on f's grid (through the default dual grid).
ScalarField biconjugate(const ScalarField& f);

/// u = (u*)^* on the given dual grid.
ScalarField build_solution(const ScalarField& u_star, const DualGrid& dual);

/// Exact discrete conjugate at one slope, by scanning all nodes.
double conjugate_at(const ScalarField& f, const Point& p, std::size_t* argmax = nullptr);

/// conjugate_at plus a second-order correction from a local quadratic model
/// of f around the maximizing node. Falls back to the raw value where the
/// model is not positive definite or its maximizer leaves the node's cell.
double refined_conjugate_at(const ScalarField& f, const Point& p);

/// Fast transform followed by the local quadratic correction at each
/// maximizer; argmax is that of the raw transform.
Conjugate refined_legendre(const ScalarField& f, const TensorGrid& target,
                           bool check_coverage = true);

}  // namespace maforge
