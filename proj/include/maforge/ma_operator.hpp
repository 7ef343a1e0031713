#pragma once

#include <cstdint>
#include <vector>

#include "maforge/grid.hpp"
#include "maforge/legendre.hpp"

namespace maforge {

struct MAConfig {
  std::vector<Frame> frames;
  bool clip_negative = true;

  static MAConfig standard(int n) { return MAConfig{frame_set(n), true}; }
};

/// Frame-minimum wide-stencil operator:
/// min over frames of prod_i max(second difference along e_i, 0).
double ma_h(const ScalarField& f, std::size_t node, const MAConfig& cfg);

/// Frame offsets and weights resolved against one grid, for the inner loops
/// of the solver. With a_i the mean of the two neighbors along e_i and
/// w_i = h^2 |e_i|^2 / 2, the second difference is (a_i - u) / w_i.
class FrameStencil {
 public:
  FrameStencil(const TensorGrid& g, const MAConfig& cfg);

  int width() const { return width_; }
  const TensorGrid& grid() const { return grid_; }
  /// True when every frame's stencil at the node stays inside the grid.
  bool fits(std::size_t node) const { return grid_.boundary_distance(node) >= width_; }

  double apply(const double* u, std::size_t node) const;

  /// Smallest center value c with operator value <= 1 given the neighbors:
  /// the per-frame root of prod (a_i - c) = prod w_i, minimized over frames.
  double local_solve(const double* u, std::size_t node) const;

 private:
  struct Dir {
    std::ptrdiff_t offset;
    double weight;
  };
  struct FrameData {
    std::array<Dir, 4> dirs;
    double weight_product;
    double weight_root;  // weight_product^(1/n)
  };
  TensorGrid grid_;
  int n_;  // frames_ holds at most 64 entries
  int width_;
  bool clip_;
  std::vector<FrameData> frames_;
};

/// Root c < min(a) of prod_i (a_i - c) = K (K > 0).
double frame_root(const double* a, int n, double K);
double frame_root(const double* a, int n, double K, double K_root);

/// Volume of the subgradient image of `region` (a node mask on f's grid):
/// dual cells of `dual` whose maximizing primal node lies in the region.
/// Throws when the region contains a grid boundary node.
double ma_measure(const ScalarField& f, const std::vector<std::uint8_t>& region, const DualGrid& dual);

/// Same, from a precomputed conjugate.
double ma_measure(const Conjugate& conj, const TensorGrid& primal,
                  const std::vector<std::uint8_t>& region);

}  // namespace maforge
