#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "maforge/geometry.hpp"

namespace maforge {

/// Integer lattice direction; only the first dim() entries are used.
using Lattice = std::array<int, 4>;
using Index = std::array<int, 4>;

/// Tensor-product grid on [-R, R]^n with m (odd) points per axis, so the
/// origin is always a node. Axis 0 varies fastest in the flat index.
class TensorGrid {
 public:
  TensorGrid() = default;
  TensorGrid(int dim, double half_width, int points_per_axis);

  int dim() const { return dim_; }
  double half_width() const { return R_; }
  int points_per_axis() const { return m_; }
  double spacing() const { return h_; }
  std::size_t size() const { return size_; }
  double cell_volume() const;

  /// Bit-reproducible: (i - (m-1)/2) * h.
  double coord(int i) const { return (i - center_) * h_; }
  Index unflatten(std::size_t idx) const;
  std::size_t flatten(const Index& i) const;
  std::ptrdiff_t offset(const Lattice& e) const;
  Point point(std::size_t idx) const;
  /// Lattice distance from the node to the nearest box face.
  int boundary_distance(std::size_t idx) const;
  /// Index of the node nearest to x (clamped to the box).
  std::size_t nearest(const Point& x) const;

  bool operator==(const TensorGrid& o) const {
    return dim_ == o.dim_ && R_ == o.R_ && m_ == o.m_;
  }

 private:
  int dim_ = 0;
  double R_ = 0.0;
  int m_ = 0;
  int center_ = 0;
  double h_ = 0.0;
  std::size_t size_ = 0;
  std::array<std::ptrdiff_t, 4> stride_{};
};

/// Node values of a function on a TensorGrid. `pinned` marks Dirichlet nodes.
struct ScalarField {
  TensorGrid grid;
  std::vector<double> values;
  std::vector<std::uint8_t> pinned;

  ScalarField() = default;
  explicit ScalarField(const TensorGrid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill), pinned(g.size(), 0) {}

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

ScalarField sample_field(const TensorGrid& g, const std::function<double(const Point&)>& f);

/// (f(x + he) + f(x - he) - 2 f(x)) / (h|e|)^2. Throws std::out_of_range when
/// the stencil leaves the grid.
double second_difference(const ScalarField& f, std::size_t node, const Lattice& e);

struct Frame {
  std::vector<Lattice> dirs;
};

/// Orthogonal integer frames for the wide-stencil operator. Always starts with
/// the axis frame; closed under the hyperoctahedral symmetries of the grid.
std::vector<Frame> frame_set(int n);

/// Largest |component| over all frame directions.
int stencil_width(const std::vector<Frame>& frames);

int dot(const Lattice& a, const Lattice& b, int n);

/// CSV dump: x1..xn followed by one column per named field.
void write_fields_csv(std::ostream& os, const TensorGrid& g,
                      const std::vector<std::pair<std::string, const std::vector<double>*>>& cols);

/// Legacy VTK STRUCTURED_POINTS (ASCII); requires a 3D grid.
void write_fields_vtk(std::ostream& os, const TensorGrid& g, const std::string& title,
                      const std::vector<std::pair<std::string, const std::vector<double>*>>& cols);

/// Worker count from MA_FORGE_THREADS, else hardware concurrency.
int worker_count();

/// Splits [0, count) into contiguous chunks, one per worker, and calls
/// fn(lo, hi, worker) on each. Returns the number of workers used; chunk
/// boundaries depend only on count and the worker count.
int parallel_chunks(std::size_t count,
                    const std::function<void(std::size_t, std::size_t, int)>& fn);

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace maforge
