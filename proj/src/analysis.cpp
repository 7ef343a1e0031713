#include "maforge/analysis.hpp"
#include "maforge/ma_operator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <json.hpp>

namespace maforge {

namespace {

std::vector<Lattice> ball_offsets(int n, int radius) {
  std::vector<Lattice> out;
  Lattice e{};
  const int side = 2 * radius + 1;
  int total = 1;
  for (int k = 0; k < n; ++k) total *= side;
  for (int t = 0; t < total; ++t) {
    int rest = t, len2 = 0;
    for (int k = 0; k < n; ++k) {
      e[k] = rest % side - radius;
      rest /= side;
      len2 += e[k] * e[k];
    }
    if (len2 > 0 && len2 <= radius * radius) out.push_back(e);
  }
  return out;
}

std::vector<Lattice> box_offsets(int n, int radius) {
  std::vector<Lattice> out;
  const int side = 2 * radius + 1;
  int total = 1;
  for (int k = 0; k < n; ++k) total *= side;
  for (int t = 0; t < total; ++t) {
    Lattice e{};
    int rest = t;
    for (int k = 0; k < n; ++k) {
      e[k] = rest % side - radius;
      rest /= side;
    }
    out.push_back(e);
  }
  return out;
}

bool inside(const TensorGrid& g, std::size_t node, const Lattice& e) {
  Index i = g.unflatten(node);
  for (int k = 0; k < g.dim(); ++k) {
    int v = i[k] + e[k];
    if (v < 0 || v >= g.points_per_axis()) return false;
  }
  return true;
}

NodeStratum stratum_of(const Polytope& omega, const Point& x) {
  try {
    Stratum s = classify_sigma(omega, x);
    return {s.level, s.component};
  } catch (const GeometryError&) {
    return {0, (std::uint64_t{1} << omega.vertices().size()) - 1};
  }
}

}  // namespace

double default_contact_tolerance(const SolveResult& r) {
  const double h = r.u_star.grid.spacing();
  return 10.0 * r.tol_r * h * h;
}

ContactSet contact_set(const SolveResult& r, const Polytope* omega, double tol_c) {
  const TensorGrid& g = r.u_star.grid;
  const int n = g.dim();
  ContactSet K;
  K.grid = g;
  K.tol_c = tol_c;
  K.mask.assign(g.size(), 0);
  K.active.assign(g.size(), 0);
  const std::size_t P = r.pieces.size();
  if (P == 0 || P > 64) throw std::invalid_argument("contact_set: need between 1 and 64 pieces");
  double slope_scale = 1.0;
  for (const auto& L : r.pieces) slope_scale = std::max(slope_scale, L.gradient.norm());

  K.min_boundary_distance = g.points_per_axis();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (r.u_star[i] - r.obstacle[i] > tol_c) continue;
    const Point x = g.point(i);
    const double tau = 1e-9 * slope_scale * std::max(1.0, x.norm());
    std::uint64_t act = 0;
    for (std::size_t j = 0; j < P; ++j)
      if (r.pieces[j](x) >= r.obstacle[i] - tau) act |= std::uint64_t{1} << j;
    if (!act) {
      ++K.far_contact;
      continue;
    }
    K.mask[i] = 1;
    K.active[i] = act;
    ++K.node_count;
    K.min_boundary_distance = std::min(K.min_boundary_distance, g.boundary_distance(i));
  }
  if (K.node_count > 0 && K.min_boundary_distance <= 2)
    throw DomainError("contact set comes within 2h of the domain boundary");

  if (omega) {
    K.stratum.assign(g.size(), NodeStratum{});
    std::vector<std::uint8_t> need(g.size(), 0);
    const auto near = ball_offsets(n, 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!K.mask[i]) continue;
      need[i] = 1;
      for (const auto& e : near)
        if (inside(g, i, e)) need[i + g.offset(e)] = 1;
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      if (need[i]) K.stratum[i] = stratum_of(*omega, g.point(i));
  }

  // Components: face-connected nodes sharing a piece.
  std::vector<std::vector<int>> owner(g.size());
  const auto ball = ball_offsets(n, 2);
  for (std::size_t j = 0; j < P; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    std::vector<std::uint8_t> seen(g.size(), 0);
    for (std::size_t s = 0; s < g.size(); ++s) {
      if (!K.mask[s] || !(K.active[s] & bit) || seen[s]) continue;
      ContactComponent c;
      c.piece = static_cast<int>(j);
      c.min_boundary_distance = g.points_per_axis();
      std::deque<std::size_t> queue{s};
      seen[s] = 1;
      while (!queue.empty()) {
        std::size_t i = queue.front();
        queue.pop_front();
        c.nodes.push_back(i);
        for (int k = 0; k < n; ++k)
          for (int sgn : {-1, 1}) {
            Lattice e{};
            e[k] = sgn;
            if (!inside(g, i, e)) continue;
            std::size_t y = i + g.offset(e);
            if (K.mask[y] && (K.active[y] & bit) && !seen[y]) {
              seen[y] = 1;
              queue.push_back(y);
            }
          }
      }
      std::sort(c.nodes.begin(), c.nodes.end());
      const int id = static_cast<int>(K.components.size());
      for (std::size_t i : c.nodes) {
        c.volume += g.cell_volume() / std::popcount(K.active[i]);
        c.min_boundary_distance = std::min(c.min_boundary_distance, g.boundary_distance(i));
        owner[i].push_back(id);
        if (!omega) continue;
        const NodeStratum st = K.stratum[i];
        if (std::find(c.levels_touched.begin(), c.levels_touched.end(), st.level) == c.levels_touched.end())
          c.levels_touched.push_back(st.level);
        if (std::find(c.levels_with_ball.begin(), c.levels_with_ball.end(), st.level) !=
            c.levels_with_ball.end())
          continue;
        int same = 0;
        bool full = true;
        for (const auto& e : ball) {
          if (!inside(g, i, e)) {
            full = false;
            break;
          }
          std::size_t y = i + g.offset(e);
          if (!(K.stratum[y] == st)) continue;
          ++same;
          if (!K.mask[y]) {
            full = false;
            break;
          }
        }
        if (full && same > 0) c.levels_with_ball.push_back(st.level);
      }
      std::sort(c.levels_touched.begin(), c.levels_touched.end());
      std::sort(c.levels_with_ball.begin(), c.levels_with_ball.end());
      K.components.push_back(std::move(c));
    }
  }

  const std::size_t C = K.components.size();
  K.meets.assign(C, std::vector<std::uint8_t>(C, 0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (owner[i].empty()) continue;
    for (int a : owner[i])
      for (int b : owner[i])
        if (a != b) K.meets[a][b] = 1;
    for (int k = 0; k < n; ++k) {
      Lattice e{};
      e[k] = 1;
      if (!inside(g, i, e)) continue;
      std::size_t y = i + g.offset(e);
      for (int a : owner[i])
        for (int b : owner[y])
          if (a != b) K.meets[a][b] = K.meets[b][a] = 1;
    }
  }
  return K;
}

std::vector<double> dirac_coefficients(const ContactSet& K, std::size_t piece_count) {
  std::vector<double> a(piece_count, 0.0);
  for (const auto& c : K.components) a.at(c.piece) += c.volume;
  return a;
}

StratumLaw check_stratum_law(const ContactSet& K, const Polytope& omega) {
  if (K.stratum.empty()) throw std::invalid_argument("check_stratum_law: contact set has no strata");
  const int n = omega.ambient_dim();
  const std::size_t V = omega.vertices().size();
  StratumLaw law;
  std::map<std::uint64_t, bool> has_ball;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << V); ++mask) {
    if (omega.face_closure(mask) != mask) continue;
    const int level = n - omega.face_dim(mask);
    if (level == 0) continue;  // the apex
    if (2 * level > n) has_ball[mask] = false;
  }
  law.strata_checked = has_ball.size();
  const auto ball = ball_offsets(n, 2);
  const TensorGrid& g = K.grid;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!K.mask[i]) continue;
    const NodeStratum st = K.stratum[i];
    if (2 * st.level <= n) {
      ++law.forbidden_contact;
      continue;
    }
    auto it = has_ball.find(st.face);
    if (it == has_ball.end() || it->second) continue;
    int same = 0;
    bool full = true;
    for (const auto& e : ball) {
      if (!inside(g, i, e)) {
        full = false;
        break;
      }
      std::size_t y = i + g.offset(e);
      if (!(K.stratum[y] == st)) continue;
      ++same;
      if (!K.mask[y]) {
        full = false;
        break;
      }
    }
    if (full && same > 0) it->second = true;
  }
  for (const auto& [mask, ok] : has_ball)
    if (!ok) law.missing_interior.push_back(mask);
  return law;
}

std::vector<std::vector<int>> vertex_orbits(const Polytope& omega) {
  const int n = omega.ambient_dim();
  const auto& v = omega.vertices();
  const int V = static_cast<int>(v.size());
  std::vector<int> parent(V);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  const double tol = 1e-9 * std::max(1.0, omega.tolerance() * 1e9);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    for (int signs = 0; signs < (1 << n); ++signs) {
      std::vector<int> image(V, -1);
      bool ok = true;
      for (int a = 0; a < V && ok; ++a) {
        Point y(n);
        for (int k = 0; k < n; ++k) y(k) = ((signs >> k) & 1 ? -1.0 : 1.0) * v[a](perm[k]);
        for (int b = 0; b < V; ++b)
          if ((v[b] - y).norm() <= tol) image[a] = b;
        ok = image[a] >= 0;
      }
      if (!ok) continue;
      for (int a = 0; a < V; ++a) parent[find(a)] = find(image[a]);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::map<int, std::vector<int>> groups;
  for (int a = 0; a < V; ++a) groups[find(a)].push_back(a);
  std::vector<std::vector<int>> out;
  for (auto& [_, members] : groups) out.push_back(members);
  return out;
}

std::vector<std::pair<Point, Point>> singular_segments(const SolveResult& r, const Polytope* omega) {
  std::vector<std::pair<Point, Point>> segs;
  if (r.params.kind == "y-graph") {
    for (std::size_t j = 1; j < r.pieces.size(); ++j)
      segs.emplace_back(r.pieces[0].gradient, r.pieces[j].gradient);
    return segs;
  }
  if (!omega) throw std::invalid_argument("singular_segments: polytope mode needs Omega");
  for (const auto& [a, b] : omega->edges()) segs.emplace_back(r.pieces[a].gradient, r.pieces[b].gradient);
  if (segs.empty())
    for (const auto& L : r.pieces) segs.emplace_back(L.gradient, L.gradient);
  return segs;
}

double distance_to_segments(const Point& p, const std::vector<std::pair<Point, Point>>& segs) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : segs) {
    Point d = b - a;
    double len2 = d.squaredNorm();
    double t = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - a - t * d).norm());
  }
  return best;
}

SingularSetReport singular_set_report(const SolveResult& r, const Conjugate& conj,
                                      const std::vector<std::pair<Point, Point>>& segs,
                                      bool affine_mode, int samples_per_segment) {
  SingularSetReport rep;
  const ScalarField& u = conj.values;
  rep.lipschitz = max_forward_slope(u);
  for (const auto& [a, b] : segs) {
    std::vector<double> ts, vs;
    for (int s = 0; s < samples_per_segment; ++s) {
      double t = samples_per_segment > 1 ? double(s) / (samples_per_segment - 1) : 0.0;
      Point p = a + t * (b - a);
      double v = conjugate_at(r.u_star, p);
      ts.push_back(t);
      vs.push_back(v);
      rep.max_abs_on_gamma = std::max(rep.max_abs_on_gamma, std::abs(v));
    }
    if (!affine_mode) continue;
    // Least-squares line through (t, u).
    const double N = static_cast<double>(ts.size());
    const double mt = std::accumulate(ts.begin(), ts.end(), 0.0) / N;
    const double mv = std::accumulate(vs.begin(), vs.end(), 0.0) / N;
    double stt = 0, stv = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      stt += (ts[k] - mt) * (ts[k] - mt);
      stv += (ts[k] - mt) * (vs[k] - mv);
    }
    const double beta = stt > 0 ? stv / stt : 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k)
      worst = std::max(worst, std::abs(vs[k] - (mv + beta * (ts[k] - mt))));
    rep.segment_residuals.push_back(worst);
    rep.max_affine_residual = std::max(rep.max_affine_residual, worst);
  }

  // Laplacian profile over dyadic shells around the singular set, and the
  // operator value away from it.
  const TensorGrid& g = u.grid;
  const int n = g.dim();
  const double H = g.spacing();
  double reach = 0.0;
  for (const auto& [a, b] : segs) reach = std::max({reach, a.norm(), b.norm()});
  const double outer_limit = std::max(0.5 * reach, 4.0 * H);
  for (double d = 2 * H; 2 * d <= outer_limit + 1e-12; d *= 2) rep.shells.push_back({d, 2 * d, 0.0, 0});

  const MAConfig cfg = MAConfig::standard(n);
  const int width = stencil_width(cfg.frames);
  const TensorGrid& primal = r.u_star.grid;
  std::vector<std::uint8_t> solved(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    solved[i] = primal.boundary_distance(conj.argmax[i]) > r.pinned_width;
  const auto box = box_offsets(n, width);
  std::vector<double> devs;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int bd = g.boundary_distance(i);
    if (bd < width || !solved[i]) continue;
    bool clean = true;
    for (const auto& e : box)
      if (inside(g, i, e) && !solved[i + g.offset(e)]) {
        clean = false;
        break;
      }
    if (!clean) continue;
    const Point p = g.point(i);
    const double dist = distance_to_segments(p, segs);
    double lap = 0.0;
    for (int k = 0; k < n; ++k) {
      Lattice e{};
      e[k] = 1;
      lap += second_difference(u, i, e);
    }
    if (!std::isfinite(lap)) rep.laplacian_finite = false;
    for (auto& s : rep.shells)
      if (dist >= s.inner && dist < s.outer) {
        s.max_scaled_laplacian = std::max(s.max_scaled_laplacian, dist * lap);
        ++s.nodes;
      }
    if (dist > 4 * H) devs.push_back(std::abs(ma_h(u, i, cfg) - 1.0));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : rep.shells) {
    if (s.nodes == 0) continue;
    lo = std::min(lo, s.max_scaled_laplacian);
    hi = std::max(hi, s.max_scaled_laplacian);
  }
  rep.shell_ratio = (std::isfinite(lo) && lo > 0) ? hi / lo : 0.0;
  rep.ma_nodes = devs.size();
  if (!devs.empty()) {
    std::sort(devs.begin(), devs.end());
    rep.ma_max_deviation = devs.back();
    rep.ma_p99_deviation = devs[static_cast<std::size_t>(0.99 * (devs.size() - 1))];
  }
  return rep;
}

MassBalance mass_balance(const SolveResult& r, const ScalarField& u, const std::vector<double>& a,
                         double radius) {
  const TensorGrid& g = u.grid;
  const int n = g.dim();
  MassBalance mb;
  mb.radius = radius;
  mb.ball = std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0) * std::pow(radius, n);
  mb.dirac_total = std::accumulate(a.begin(), a.end(), 0.0);
  std::vector<std::uint8_t> region(g.size(), 0);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    region[i] = g.point(i).norm() <= radius;
    inside += region[i];
  }
  mb.ball_discrete = static_cast<double>(inside) * g.cell_volume();
  const Conjugate back = legendre_with_argmax(u, r.u_star.grid, false);
  mb.measured = ma_measure(back, g, region);
  mb.relative_error = mb.dirac_total > 0
                          ? std::abs(mb.measured - mb.ball_discrete - mb.dirac_total) / mb.dirac_total
                          : std::numeric_limits<double>::infinity();
  return mb;
}

double mass_radius(const SolveResult& r, double dual_spacing) {
  double reach = 0.0;
  for (const auto& L : r.pieces) reach = std::max(reach, L.gradient.norm());
  return std::max(1.5 * reach, 5.0 * dual_spacing);
}

namespace {

struct LogFit {
  double slope = 0, intercept = 0, unexplained = 1, rms = 0;
};

LogFit fit_log(const std::vector<std::pair<double, double>>& rg, double kappa) {
  const double N = static_cast<double>(rg.size());
  double mx = 0, my = 0;
  std::vector<double> xs, ys;
  for (const auto& [r, gv] : rg) {
    xs.push_back(std::log(r));
    ys.push_back(std::log(std::abs(gv - kappa)));
    mx += xs.back();
    my += ys.back();
  }
  mx /= N;
  my /= N;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  LogFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double e = ys[k] - (f.intercept + f.slope * xs[k]);
    sse += e * e;
  }
  f.unexplained = syy > 0 ? sse / syy : 1.0;
  f.rms = std::sqrt(sse / N);
  return f;
}

}  // namespace

AsymptoticFit asymptotic_fit(const std::vector<std::pair<double, double>>& samples) {
  AsymptoticFit out;
  out.samples = samples.size();
  if (samples.size() < 4) throw std::invalid_argument("asymptotic_fit: need at least 4 samples");
  std::vector<std::pair<double, double>> rg;
  double gmin = std::numeric_limits<double>::infinity(), gmax = -gmin, amax = 0;
  for (const auto& [r, v] : samples) {
    double gv = v - 0.5 * r * r;
    rg.emplace_back(r, gv);
    gmin = std::min(gmin, gv);
    gmax = std::max(gmax, gv);
    amax = std::max(amax, std::abs(gv));
  }
  const double range = gmax - gmin;
  if (range <= 1e-10 * (1.0 + amax)) {
    out.indeterminate = true;
    out.kappa = 0.5 * (gmin + gmax);
    out.slope = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  // kappa = gmin - e^s (tail above the constant) or gmax + e^s (below).
  LogFit best_fit;
  double best_kappa = 0.0, best_score = std::numeric_limits<double>::infinity();
  for (int side : {-1, 1}) {
    auto kappa_of = [&](double s) { return side < 0 ? gmin - std::exp(s) : gmax + std::exp(s); };
    auto score = [&](double s) { return fit_log(rg, kappa_of(s)).unexplained; };
    const double s_lo = std::log(1e-6 * range), s_hi = std::log(1e3 * range);
    double s0 = s_lo, f0 = std::numeric_limits<double>::infinity();
    const int scan = 60;
    for (int k = 0; k <= scan; ++k) {
      double s = s_lo + (s_hi - s_lo) * k / scan;
      double f = score(s);
      if (f < f0) {
        f0 = f;
        s0 = s;
      }
    }
    const double step = (s_hi - s_lo) / scan;
    auto [s_best, f_best] = boost::math::tools::brent_find_minima(
        score, std::max(s_lo, s0 - step), std::min(s_hi, s0 + step), 40);
    if (f_best < best_score) {
      best_score = f_best;
      best_kappa = kappa_of(s_best);
      best_fit = fit_log(rg, best_kappa);
    }
  }
  out.kappa = best_kappa;
  out.slope = best_fit.slope;
  out.intercept = best_fit.intercept;
  out.rms = best_fit.rms;
  return out;
}

std::vector<std::pair<double, double>> radial_means(const std::vector<std::pair<double, double>>& samples,
                                                   double r_lo, double r_hi, int bins) {
  std::vector<double> rs(bins, 0.0), gs(bins, 0.0), ws(bins, 0.0);
  for (const auto& [r, v] : samples) {
    if (r < r_lo || r > r_hi) continue;
    const int b = std::min(bins - 1, static_cast<int>((r - r_lo) / (r_hi - r_lo) * bins));
    rs[b] += r;
    gs[b] += v - 0.5 * r * r;
    ws[b] += 1.0;
  }
  std::vector<std::pair<double, double>> out;
  for (int b = 0; b < bins; ++b) {
    if (ws[b] == 0.0) continue;
    const double r = rs[b] / ws[b];
    out.emplace_back(r, gs[b] / ws[b] + 0.5 * r * r);
  }
  return out;
}

AsymptoticFit asymptotic_fit(const ScalarField& f) {
  const TensorGrid& g = f.grid;
  const double lo = 0.6 * g.half_width(), hi = 0.9 * g.half_width();
  std::vector<std::pair<double, double>> samples;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.point(i).norm();
    if (r >= lo && r <= hi) samples.emplace_back(r, f[i]);
  }
  const int bins = std::max(4, static_cast<int>(std::ceil((hi - lo) / g.spacing())));
  return asymptotic_fit(radial_means(samples, lo, hi, bins));
}

std::vector<std::pair<double, double>> conjugate_annulus_samples(const ScalarField& f, double r_lo,
                                                                 double r_hi, int count,
                                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(r_lo, r_hi);
  const int n = f.grid.dim();
  std::vector<std::pair<double, double>> out;
  for (int s = 0; s < count; ++s) {
    Point p(n);
    for (int k = 0; k < n; ++k) p(k) = gauss(rng);
    const double r = unif(rng);
    p *= r / p.norm();
    out.emplace_back(r, refined_conjugate_at(f, p));
  }
  return out;
}

bool SublevelCheck::passed() const {
  return std::all_of(cuts.begin(), cuts.end(), [](const SublevelCut& c) { return c.passed; });
}

SublevelCheck sublevel_volume_check(const ScalarField& f, const std::vector<Affine>& cuts) {
  const TensorGrid& g = f.grid;
  const int n = g.dim();
  SublevelCheck out;
  out.calibration = std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0) * std::pow(2.0, 0.5 * n);
  for (const auto& L : cuts) {
    SublevelCut c;
    double lowest = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = f[i] - L(g.point(i));
      if (v >= 0.0) continue;
      if (g.boundary_distance(i) == 0) throw DomainError("sublevel set reaches the grid boundary");
      ++count;
      lowest = std::min(lowest, v);
    }
    c.volume = static_cast<double>(count) * g.cell_volume();
    c.depth = -lowest;
    c.ratio = c.depth > 0 ? c.volume / std::pow(c.depth, 0.5 * n) : std::numeric_limits<double>::infinity();
    c.passed = c.depth <= 0 || c.ratio >= out.calibration / 10.0;
    out.cuts.push_back(c);
  }
  return out;
}

std::vector<Affine> tilted_cuts(const ScalarField& f, const std::vector<std::size_t>& anchors,
                                int count, std::uint64_t seed) {
  const TensorGrid& g = f.grid;
  const int n = g.dim();
  const double h = g.spacing();
  std::vector<std::size_t> usable;
  for (std::size_t a : anchors)
    if (g.boundary_distance(a) >= 1) usable.push_back(a);
  if (usable.empty()) throw std::invalid_argument("tilted_cuts: no interior anchors");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  std::uniform_real_distribution<double> tilt(-0.1, 0.1), lift(0.02, 0.2);
  std::vector<Affine> cuts;
  for (int c = 0; c < count; ++c) {
    const std::size_t a = usable[pick(rng)];
    Point grad(n);
    for (int k = 0; k < n; ++k) {
      Lattice e{};
      e[k] = 1;
      grad(k) = (f[a + g.offset(e)] - f[a - g.offset(e)]) / (2 * h) + tilt(rng);
    }
    const Point x0 = g.point(a);
    cuts.push_back(Affine{grad, grad.dot(x0) - f[a] - lift(rng)});
  }
  return cuts;
}

std::vector<std::size_t> contact_boundary(const ContactSet& K) {
  const TensorGrid& g = K.grid;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!K.mask[i]) continue;
    bool edge = false;
    for (int k = 0; k < g.dim() && !edge; ++k)
      for (int s : {-1, 1}) {
        Lattice e{};
        e[k] = s;
        if (inside(g, i, e) && !K.mask[i + g.offset(e)]) edge = true;
      }
    if (edge) out.push_back(i);
  }
  return out;
}

namespace {

// Lattice directions with entries in {-1, 0, 1}, one per +/- pair; at most
// two nonzero entries when n = 4.
std::vector<Lattice> slope_directions(int n) {
  std::vector<Lattice> dirs;
  int total = 1;
  for (int k = 0; k < n; ++k) total *= 3;
  for (int t = 1; t < total; ++t) {
    Lattice e{};
    int rest = t, nonzero = 0, first = 0;
    for (int k = 0; k < n; ++k) {
      e[k] = rest % 3 - 1;
      rest /= 3;
      if (e[k] && !nonzero) first = e[k];
      nonzero += e[k] != 0;
    }
    if (first < 0 || (n >= 4 && nonzero > 2)) continue;
    dirs.push_back(e);
  }
  return dirs;
}

void for_each_subset(int total, int k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == total - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

std::vector<int> subgradient_dim_check(const ScalarField& u_star,
                                       const std::vector<std::size_t>& points, double tau_slope) {
  const TensorGrid& g = u_star.grid;
  const int n = g.dim();
  const double h = g.spacing();
  const auto dirs = slope_directions(n);
  // Halfspaces xi . a <= b from one-sided difference quotients along +/-e.
  std::vector<Point> normals;
  for (const auto& e : dirs)
    for (int sg : {1, -1}) {
      Point a(n);
      for (int k = 0; k < n; ++k) a(k) = sg * e[k];
      normals.push_back(a);
    }
  const int H = static_cast<int>(normals.size());
  for (std::size_t p : points)
    if (g.boundary_distance(p) < 1) throw std::invalid_argument("subgradient_dim_check: boundary point");
  std::vector<int> dims(points.size(), 0);
  parallel_for(points.size(), [&](std::size_t t) {
    const std::size_t p = points[t];
    std::vector<double> b(H);
    for (int j = 0; j < H; ++j) {
      Lattice e{};
      for (int k = 0; k < n; ++k) e[k] = static_cast<int>(normals[j](k));
      b[j] = (u_star[p + g.offset(e)] - u_star[p]) / h;
    }
    double scale = 1.0;
    for (double v : b) scale = std::max(scale, std::abs(v));
    const double tol = 1e-9 * scale;
    std::vector<Point> verts;
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd rhs(n);
    for_each_subset(H, n, [&](const std::vector<int>& idx) {
      for (int r = 0; r < n; ++r) {
        A.row(r) = normals[idx[r]].transpose();
        rhs(r) = b[idx[r]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (lu.rank() < n) return;
      Point xi = lu.solve(rhs);
      for (int j = 0; j < H; ++j)
        if (normals[j].dot(xi) > b[j] + tol) return;
      verts.push_back(xi);
    });
    if (verts.size() < 2) return;
    Eigen::MatrixXd V(verts.size(), n);
    for (std::size_t r = 0; r < verts.size(); ++r) V.row(r) = verts[r].transpose();
    Eigen::RowVectorXd mean = V.colwise().mean();
    V.rowwise() -= mean;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeThinV);
    const Eigen::MatrixXd proj = V * svd.matrixV();
    int count = 0;
    for (int k = 0; k < proj.cols(); ++k)
      if (proj.col(k).maxCoeff() - proj.col(k).minCoeff() > tau_slope) ++count;
    dims[t] = count;
  });
  return dims;
}

double default_slope_threshold(const SolveResult& r) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < r.pieces.size(); ++a)
    for (std::size_t b = a + 1; b < r.pieces.size(); ++b)
      best = std::min(best, (r.pieces[a].gradient - r.pieces[b].gradient).norm());
  return std::isfinite(best) ? 0.5 * best : 0.5;
}

void VerificationReport::add(std::string name, double value, double threshold, bool passed,
                             std::string detail) {
  checks.push_back({std::move(name), value, threshold, passed, std::move(detail)});
}

bool VerificationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string VerificationReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed();
  j["manifest"] = manifest;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j["checks"].push_back({{"name", c.name},
                           {"value", num(c.value)},
                           {"threshold", num(c.threshold)},
                           {"passed", c.passed},
                           {"detail", c.detail}});
  }
  return j.dump(2);
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(34) << c.name << " value="
       << std::setprecision(6) << c.value << " threshold=" << c.threshold;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << '\n';
  }
  return os.str();
}

}  // namespace maforge
