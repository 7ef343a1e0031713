#include "maforge/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace maforge {

TensorGrid::TensorGrid(int dim, double half_width, int points_per_axis)
    : dim_(dim), R_(half_width), m_(points_per_axis) {
  if (dim < 1 || dim > 4) throw std::invalid_argument("TensorGrid: dimension must be 1..4");
  if (!(half_width > 0)) throw std::invalid_argument("TensorGrid: half-width must be positive");
  if (m_ < 3 || m_ % 2 == 0)
    throw std::invalid_argument("TensorGrid: points per axis must be odd and >= 3");
  center_ = (m_ - 1) / 2;
  h_ = 2.0 * R_ / (m_ - 1);
  size_ = 1;
  for (int k = 0; k < 4; ++k) {
    stride_[k] = k < dim_ ? static_cast<std::ptrdiff_t>(size_) : 0;
    if (k < dim_) size_ *= static_cast<std::size_t>(m_);
  }
}

double TensorGrid::cell_volume() const { return std::pow(h_, dim_); }

Index TensorGrid::unflatten(std::size_t idx) const {
  Index i{};
  for (int k = 0; k < dim_; ++k) {
    i[k] = static_cast<int>(idx % m_);
    idx /= m_;
  }
  return i;
}

std::size_t TensorGrid::flatten(const Index& i) const {
  std::size_t idx = 0;
  for (int k = dim_ - 1; k >= 0; --k) idx = idx * m_ + static_cast<std::size_t>(i[k]);
  return idx;
}

std::ptrdiff_t TensorGrid::offset(const Lattice& e) const {
  std::ptrdiff_t o = 0;
  for (int k = 0; k < dim_; ++k) o += e[k] * stride_[k];
  return o;
}

Point TensorGrid::point(std::size_t idx) const {
  Point p(dim_);
  for (int k = 0; k < dim_; ++k) {
    p(k) = coord(static_cast<int>(idx % m_));
    idx /= m_;
  }
  return p;
}

int TensorGrid::boundary_distance(std::size_t idx) const {
  int best = m_;
  for (int k = 0; k < dim_; ++k) {
    int i = static_cast<int>(idx % m_);
    idx /= m_;
    best = std::min({best, i, m_ - 1 - i});
  }
  return best;
}

std::size_t TensorGrid::nearest(const Point& x) const {
  Index i{};
  for (int k = 0; k < dim_; ++k) {
    long v = std::lround(x(k) / h_) + center_;
    i[k] = static_cast<int>(std::clamp<long>(v, 0, m_ - 1));
  }
  return flatten(i);
}

ScalarField sample_field(const TensorGrid& g, const std::function<double(const Point&)>& f) {
  ScalarField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g.point(i));
  return out;
}

double second_difference(const ScalarField& f, std::size_t node, const Lattice& e) {
  const auto& g = f.grid;
  Index i = g.unflatten(node);
  int len2 = 0;
  for (int k = 0; k < g.dim(); ++k) {
    if (i[k] + e[k] < 0 || i[k] + e[k] >= g.points_per_axis() || i[k] - e[k] < 0 ||
        i[k] - e[k] >= g.points_per_axis())
      throw std::out_of_range("second_difference: stencil leaves the grid");
    len2 += e[k] * e[k];
  }
  if (len2 == 0) throw std::invalid_argument("second_difference: zero direction");
  const std::ptrdiff_t o = g.offset(e);
  const double h = g.spacing();
  return (f.values[node + o] + f.values[node - o] - 2.0 * f.values[node]) / (h * h * len2);
}

int dot(const Lattice& a, const Lattice& b, int n) {
  int s = 0;
  for (int k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

namespace {

Lattice unit(int k) {
  Lattice e{};
  e[k] = 1;
  return e;
}

Lattice combo(std::initializer_list<std::pair<int, int>> terms) {
  Lattice e{};
  for (auto [k, c] : terms) e[k] += c;
  return e;
}

}  // namespace

std::vector<Frame> frame_set(int n) {
  std::vector<Frame> frames;
  Frame axis;
  for (int k = 0; k < n; ++k) axis.dirs.push_back(unit(k));
  switch (n) {
    case 1:
      frames.push_back(axis);
      break;
    case 2:
      frames.push_back(axis);
      frames.push_back({{combo({{0, 1}, {1, 1}}), combo({{0, 1}, {1, -1}})}});
      break;
    case 3: {
      frames.push_back(axis);
      // One axis together with the diagonal pair of the complementary plane.
      for (int i = 0; i < 3; ++i) {
        int j = (i + 1) % 3, k = (i + 2) % 3;
        frames.push_back({{unit(i), combo({{j, 1}, {k, 1}}), combo({{j, 1}, {k, -1}})}});
      }
      // A body diagonal d completed by the orthogonal pair
      // (e_a - e_b, e_a + e_b - 2 e_c) in sign-adjusted coordinates; all three
      // choices of c keep the set closed under coordinate permutations.
      for (int sy : {1, -1})
        for (int sz : {1, -1}) {
          std::array<int, 3> s{1, sy, sz};
          Lattice d = combo({{0, s[0]}, {1, s[1]}, {2, s[2]}});
          for (int c = 0; c < 3; ++c) {
            int a = (c + 1) % 3, b = (c + 2) % 3;
            frames.push_back({{d, combo({{a, s[a]}, {b, -s[b]}}),
                               combo({{a, s[a]}, {b, s[b]}, {c, -2 * s[c]}})}});
          }
        }
      break;
    }
    case 4: {
      frames.push_back(axis);
      const int pairs[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
      for (const auto& p : pairs) {
        Lattice a1 = combo({{p[0], 1}, {p[1], 1}}), a2 = combo({{p[0], 1}, {p[1], -1}});
        Lattice b1 = combo({{p[2], 1}, {p[3], 1}}), b2 = combo({{p[2], 1}, {p[3], -1}});
        frames.push_back({{a1, a2, b1, b2}});
        frames.push_back({{unit(p[0]), unit(p[1]), b1, b2}});
        frames.push_back({{a1, a2, unit(p[2]), unit(p[3])}});
      }
      break;
    }
    default:
      throw std::invalid_argument("frame_set: unsupported dimension " + std::to_string(n));
  }
  return frames;
}

int stencil_width(const std::vector<Frame>& frames) {
  int w = 0;
  for (const auto& f : frames)
    for (const auto& e : f.dirs)
      for (int c : e) w = std::max(w, std::abs(c));
  return w;
}

void write_fields_csv(
    std::ostream& os, const TensorGrid& g,
    const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
  for (int k = 0; k < g.dim(); ++k) os << (k ? "," : "") << 'x' << (k + 1);
  for (const auto& [name, _] : cols) os << ',' << name;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point p = g.point(i);
    for (int k = 0; k < g.dim(); ++k) os << (k ? "," : "") << p(k);
    for (const auto& [_, v] : cols) os << ',' << (*v)[i];
    os << '\n';
  }
}

void write_fields_vtk(
    std::ostream& os, const TensorGrid& g, const std::string& title,
    const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
  if (g.dim() != 3) throw std::invalid_argument("VTK export needs a 3D grid");
  const int m = g.points_per_axis();
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET STRUCTURED_POINTS\n";
  os << "DIMENSIONS " << m << ' ' << m << ' ' << m << '\n';
  os.precision(17);
  os << "ORIGIN " << g.coord(0) << ' ' << g.coord(0) << ' ' << g.coord(0) << '\n';
  os << "SPACING " << g.spacing() << ' ' << g.spacing() << ' ' << g.spacing() << '\n';
  os << "POINT_DATA " << g.size() << '\n';
  for (const auto& [name, v] : cols) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < g.size(); ++i) os << (*v)[i] << '\n';
  }
}

int worker_count() {
  if (const char* env = std::getenv("MA_FORGE_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int parallel_chunks(std::size_t count,
                    const std::function<void(std::size_t, std::size_t, int)>& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(worker_count(), count / 4096 + 1));
  if (workers == 1) {
    fn(0, count, 0);
    return 1;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t lo = std::min(count, w * chunk), hi = std::min(count, lo + chunk);
    pool.emplace_back([lo, hi, w, &fn] { fn(lo, hi, static_cast<int>(w)); });
  }
  for (auto& t : pool) t.join();
  return static_cast<int>(workers);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  parallel_chunks(count, [&](std::size_t lo, std::size_t hi, int) {
    for (std::size_t i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace maforge
