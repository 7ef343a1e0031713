#include "maforge/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace maforge {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("bad number for '" + key + "': " + v);
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("bad integer for '" + key + "': " + v);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> pick(const std::vector<std::size_t>& from, std::size_t count,
                              std::uint64_t seed) {
  std::vector<std::size_t> out = from;
  if (out.size() <= count) return out;
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  out.resize(count);
  std::sort(out.begin(), out.end());
  return out;
}

bool is_y(const RunConfig& cfg) { return cfg.mode == "y-graph"; }

// Central piece 0 meets every external piece; external pieces are disjoint
// from each other; one component per piece.
int y_topology_violations(const ContactSet& K, std::size_t pieces, std::string& detail) {
  std::vector<std::vector<std::size_t>> by_piece(pieces);
  for (std::size_t c = 0; c < K.components.size(); ++c)
    by_piece[K.components[c].piece].push_back(c);
  int bad = 0;
  for (std::size_t p = 0; p < pieces; ++p)
    if (by_piece[p].size() != 1) ++bad;
  if (bad == 0) {
    const std::size_t center = by_piece[0][0];
    for (std::size_t p = 1; p < pieces; ++p) {
      if (!K.meets[center][by_piece[p][0]]) ++bad;
      for (std::size_t q = p + 1; q < pieces; ++q)
        if (K.meets[by_piece[p][0]][by_piece[q][0]]) ++bad;
    }
  }
  std::ostringstream os;
  os << K.components.size() << " components over " << pieces << " pieces";
  detail = os.str();
  return bad;
}

void check_point_run(RunArtifacts& a, VerificationReport& rep) {
  const SolveResult& r = a.result;
  const TensorGrid& g = r.u_star.grid;
  const int n = g.dim();
  const double h = g.spacing();

  double lo = INFINITY, hi = -INFINITY, w_max = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    if (x.norm() > 2.0) continue;
    const double w = W_value(n, x);
    const double d = r.u_star[i] - w;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    w_max = std::max(w_max, std::abs(w));
  }
  const double rel = 0.5 * (hi - lo) / w_max;
  std::ostringstream shift;
  shift << "shift " << 0.5 * (hi + lo);
  rep.add("w_recovery", rel, 0.03, rel <= 0.03, shift.str());

  std::vector<Point> contact, ball;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    if (a.contact.mask[i]) contact.push_back(x);
    if (x.norm() <= 1.0) ball.push_back(x);
  }
  double haus = contact.empty() ? INFINITY : 0.0;
  if (!contact.empty()) {
    for (const auto& x : contact) haus = std::max(haus, std::max(x.norm() - 1.0, 0.0));
    for (const auto& y : ball) {
      double best = INFINITY;
      for (const auto& x : contact) best = std::min(best, (x - y).norm());
      haus = std::max(haus, best);
    }
  }
  rep.add("contact_hausdorff", haus / h, 3.0, haus <= 3.0 * h, "distance to B_1 in units of h");

  const double ball_volume = 4.0 * std::numbers::pi / 3.0;
  if (n == 3 && !a.dirac.empty()) {
    const double err = std::abs(a.dirac[0] - ball_volume) / ball_volume;
    std::ostringstream os;
    os << "a0 = " << a.dirac[0];
    rep.add("dirac_ball_volume", err, 0.10, err <= 0.10, os.str());
  }
}

void check_segment_run(RunArtifacts& a, VerificationReport& rep) {
  const ContactSet& K = a.contact;
  const TensorGrid& g = K.grid;
  const int n = g.dim();
  const int center = (g.points_per_axis() - 1) / 2;
  if (n == 2) {
    int gap = g.points_per_axis();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (K.mask[i]) gap = std::min(gap, std::abs(g.unflatten(i)[n - 1] - center));
    const bool ok = K.components.size() == 2 && gap > 4;
    std::ostringstream os;
    os << K.components.size() << " components";
    rep.add("plane_separation", gap, 4, ok, os.str());
    return;
  }
  int plane_nodes = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (K.mask[i] && g.unflatten(i)[n - 1] == center) ++plane_nodes;
  bool ball = false;
  for (const auto& c : K.components)
    ball = ball || std::count(c.levels_with_ball.begin(), c.levels_with_ball.end(), n - 1) > 0;
  const bool meet = K.components.size() == 2 && K.meets[0][1];
  std::ostringstream os;
  os << K.components.size() << " components, " << (meet ? "meeting" : "apart")
     << (ball ? ", contact ball in the plane" : ", no contact ball in the plane");
  rep.add("plane_contact", plane_nodes, 0, meet && ball && plane_nodes > 0, os.str());
}

}  // namespace

RunConfig read_config(std::istream& is, RunConfig base) {
  RunConfig c = std::move(base);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key == "mode") c.mode = v;
    else if (key == "n") c.n = parse_int<int>(key, v);
    else if (key == "preset") c.preset = v;
    else if (key == "vertex_file") c.vertex_file = v;
    else if (key == "segments_file") c.segments_file = v;
    else if (key == "R") c.R = parse_double(key, v);
    else if (key == "m") c.m = parse_int<int>(key, v);
    else if (key == "eps") c.eps = parse_double(key, v);
    else if (key == "eps_tilde") c.eps_tilde = parse_double(key, v);
    else if (key == "r0") c.r0 = parse_double(key, v);
    else if (key == "beta") c.beta = parse_double(key, v);
    else if (key == "tol_r") c.tol_r = parse_double(key, v);
    else if (key == "max_sweeps") c.max_sweeps = parse_int<int>(key, v);
    else if (key == "sweep") c.sweep = v;
    else if (key == "out_dir") c.out_dir = v;
    else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, v);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return c;
}

void write_config(std::ostream& os, const RunConfig& c) {
  os << "mode = " << c.mode << '\n'
     << "n = " << c.n << '\n'
     << "preset = " << c.preset << '\n';
  if (!c.vertex_file.empty()) os << "vertex_file = " << c.vertex_file << '\n';
  if (!c.segments_file.empty()) os << "segments_file = " << c.segments_file << '\n';
  os << "R = " << format_double(c.R) << '\n' << "m = " << c.m << '\n';
  if (c.eps) os << "eps = " << format_double(*c.eps) << '\n';
  if (c.eps_tilde) os << "eps_tilde = " << format_double(*c.eps_tilde) << '\n';
  if (c.r0) os << "r0 = " << format_double(*c.r0) << '\n';
  os << "beta = " << format_double(c.beta) << '\n'
     << "tol_r = " << format_double(c.tol_r) << '\n'
     << "max_sweeps = " << c.max_sweeps << '\n'
     << "sweep = " << c.sweep << '\n'
     << "out_dir = " << c.out_dir << '\n'
     << "seed = " << c.seed << '\n';
}

void validate_config(const RunConfig& c) {
  static const std::vector<std::string> modes{"polytope", "y-graph", "barrier-check",
                                              "legendre-test"};
  if (std::find(modes.begin(), modes.end(), c.mode) == modes.end())
    throw ConfigError("unknown mode '" + c.mode + "'");
  if (c.n < 2 || c.n > 4) throw ConfigError("n must be 2, 3 or 4");
  if (c.m < 5 || c.m % 2 == 0) throw ConfigError("m must be odd and at least 5");
  if (c.n == 4 && c.m > 33) throw ConfigError("n = 4 supports m <= 33");
  if (!(c.R > 0)) throw ConfigError("R must be positive");
  if (!(c.tol_r > 0)) throw ConfigError("tol_r must be positive");
  if (c.max_sweeps <= 0) throw ConfigError("max_sweeps must be positive");
  if (!(c.beta >= 0)) throw ConfigError("beta must be non-negative");
  for (const auto& [name, v] : {std::pair{"eps", c.eps}, {"eps_tilde", c.eps_tilde}, {"r0", c.r0}})
    if (v && !(*v > 0)) throw ConfigError(std::string(name) + " must be positive");
  if (c.r0 && !(*c.r0 < 1)) throw ConfigError("r0 must be below 1");
  try {
    parse_sweep_mode(c.sweep);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (c.mode == "y-graph" && c.segments_file.empty())
    throw ConfigError("y-graph mode needs segments_file");
  if (c.mode == "polytope" && c.vertex_file.empty()) {
    const auto names = polytope_preset_names();
    if (std::find(names.begin(), names.end(), c.preset) == names.end())
      throw ConfigError("unknown preset '" + c.preset + "'");
  }
}

RunArtifacts execute_run(const RunConfig& cfg) {
  validate_config(cfg);
  if (cfg.mode != "polytope" && cfg.mode != "y-graph")
    throw ConfigError("execute_run handles polytope and y-graph modes");
  RunArtifacts a;
  a.config = cfg;
  PipelineOptions opts;
  opts.tol_r = cfg.tol_r;
  opts.max_sweeps = cfg.max_sweeps;
  opts.mode = parse_sweep_mode(cfg.sweep);
  opts.beta = cfg.beta;

  try {
    if (is_y(cfg)) {
      std::ifstream in(cfg.segments_file);
      if (!in) throw ConfigError("cannot open segments file " + cfg.segments_file);
      a.segments = read_segments(in);
      for (const auto& s : a.segments)
        if (s.a.size() != cfg.n || s.b.size() != cfg.n)
          throw ConfigError("segment dimension does not match n");
    } else if (!cfg.vertex_file.empty()) {
      std::ifstream in(cfg.vertex_file);
      if (!in) throw ConfigError("cannot open vertex file " + cfg.vertex_file);
      a.omega = read_polytope(in);
      if (a.omega->ambient_dim() != cfg.n) throw ConfigError("vertex dimension does not match n");
    } else {
      a.omega = polytope_preset(cfg.preset, cfg.n);
    }
  } catch (const GeometryError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (is_y(cfg)) {
    a.result = y_pipeline(a.segments, cfg.n, cfg.R, cfg.m, cfg.eps.value_or(kYEps),
                          cfg.eps_tilde.value_or(kYEpsTilde), cfg.r0.value_or(kYR0), opts);
  } else {
    a.result = polytope_pipeline(*a.omega, cfg.n, cfg.R, cfg.m, cfg.eps.value_or(kPolytopeEps), opts);
  }
  a.solve_seconds = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  a.tol_c = default_contact_tolerance(a.result);
  std::vector<Point> anchors;
  for (const auto& L : a.result.pieces) anchors.push_back(L.gradient);
  a.u = refined_legendre(a.result.u_star, aligned_dual_grid(a.result.u_star, anchors));
  a.u_primal = refined_legendre(a.result.u_star, a.result.u_star.grid, false).values;
  a.report = verify_run(a);
  a.analysis_seconds = seconds_since(t1);
  return a;
}

VerificationReport verify_run(RunArtifacts& a) {
  VerificationReport rep;
  rep.manifest = "manifest.json";
  const SolveResult& r = a.result;
  const TensorGrid& g = r.u_star.grid;
  const int n = g.dim();
  const bool y = is_y(a.config);
  const Polytope* omega = a.omega ? &*a.omega : nullptr;

  const double stop = r.tol_r * g.spacing() * g.spacing() / (4.0 * n);
  rep.add("solver_converged", r.final_update, stop, r.final_update < stop && r.monotone,
          std::to_string(r.iterations) + " sweeps");

  try {
    a.contact = contact_set(r, omega, a.tol_c);
  } catch (const DomainError& e) {
    rep.add("contact_compact", 0, 2, false, e.what());
    return rep;
  }
  const ContactSet& K = a.contact;
  rep.add("contact_compact", K.min_boundary_distance, 2, K.min_boundary_distance > 2,
          "lattice distance to the box boundary");

  if (y) {
    std::string detail;
    const int bad = y_topology_violations(K, r.pieces.size(), detail);
    rep.add("contact_topology", bad, 0, bad == 0, detail);
  } else {
    const StratumLaw law = check_stratum_law(K, *omega);
    std::ostringstream os;
    os << K.components.size() << " components, " << law.strata_checked << " strata checked, "
       << law.missing_interior.size() << " missing, " << law.forbidden_contact << " forbidden";
    rep.add("contact_strata", static_cast<double>(law.missing_interior.size() + law.forbidden_contact), 0,
            law.passed(), os.str());
  }

  a.dirac = dirac_coefficients(K, r.pieces.size());
  const double a_min = a.dirac.empty() ? 0.0 : *std::min_element(a.dirac.begin(), a.dirac.end());
  {
    std::ostringstream os;
    for (std::size_t q = 0; q < a.dirac.size(); ++q) os << (q ? " " : "a = ") << a.dirac[q];
    rep.add("dirac_positive", a_min, 0, a_min > 0, os.str());
  }
  if (!y) {
    double spread = 0.0;
    for (const auto& orbit : vertex_orbits(*omega)) {
      double lo = INFINITY, hi = -INFINITY, sum = 0.0;
      for (int q : orbit) {
        lo = std::min(lo, a.dirac[q]);
        hi = std::max(hi, a.dirac[q]);
        sum += a.dirac[q];
      }
      if (orbit.size() > 1 && sum > 0) spread = std::max(spread, (hi - lo) / (sum / orbit.size()));
    }
    rep.add("dirac_orbit_symmetry", spread, 0.02, spread <= 0.02, "relative spread within orbits");
  }

  // For n = 2 the gap between contact components carries mass onto the open
  // edges, so the Dirac balance and smoothness off the skeleton do not hold.
  if (n >= 3) {
    const MassBalance mb =
        mass_balance(r, a.u.values, a.dirac, mass_radius(r, a.u.values.grid.spacing()));
    std::ostringstream os;
    os << "radius " << mb.radius << ", measured " << mb.measured << ", ball " << mb.ball_discrete
       << ", dirac " << mb.dirac_total;
    rep.add("mass_accounting", mb.relative_error, 0.05, mb.relative_error <= 0.05, os.str());
  }

  a.singular = singular_set_report(r, a.u, singular_segments(r, omega), y);
  const SingularSetReport& s = a.singular;
  const double scale = a.u.values.grid.spacing() * s.lipschitz;
  if (y) {
    const double ratio = s.max_affine_residual / scale;
    rep.add("segment_affine", ratio, 5, ratio <= 5, "residual in units of h Lip(u)");
  } else {
    const double ratio = s.max_abs_on_gamma / scale;
    rep.add("gamma_zero_level", ratio, 5, ratio <= 5, "max |u| on the skeleton in units of h Lip(u)");
  }
  rep.add("laplacian_profile", s.shell_ratio, 2, s.shell_ratio <= 2,
          std::to_string(s.shells.size()) + " shells");
  rep.add("laplacian_finite", s.laplacian_finite ? 1 : 0, 1, s.laplacian_finite);
  if (n >= 3) {
    std::ostringstream os;
    os << s.ma_nodes << " nodes, p99 " << s.ma_p99_deviation;
    rep.add("ma_away_from_gamma", s.ma_max_deviation, 0.05, s.ma_max_deviation <= 0.05, os.str());
  }

  if (n >= 3) {
    const double R = g.half_width();
    const AsymptoticFit fs = asymptotic_fit(r.u_star);
    const AsymptoticFit fu = asymptotic_fit(radial_means(
        conjugate_annulus_samples(r.u_star, 0.6 * R, 0.9 * R, 3000, a.config.seed), 0.6 * R, 0.9 * R, 12));
    const double target = 2.0 - n;
    std::ostringstream ds, du;
    ds << "kappa " << fs.kappa << ", rms " << fs.rms;
    du << "kappa " << fu.kappa << ", rms " << fu.rms;
    rep.add("asymptotic_slope_ustar", fs.slope, target,
            !fs.indeterminate && std::abs(fs.slope - target) <= 0.3, ds.str());
    rep.add("asymptotic_slope_u", fu.slope, target,
            !fu.indeterminate && std::abs(fu.slope - target) <= 0.3, du.str());
    rep.add("asymptotic_constant_negative", fs.kappa, 0, !fs.indeterminate && fs.kappa < 0);
  }

  if (!y && a.config.vertex_file.empty() && a.config.preset == "point") check_point_run(a, rep);
  if (!y && a.config.vertex_file.empty() && a.config.preset == "segment") check_segment_run(a, rep);

  const auto boundary = contact_boundary(K);
  const auto probes = pick(boundary, 100, a.config.seed);
  const auto dims = subgradient_dim_check(r.u_star, probes, default_slope_threshold(r));
  const int dim_max = dims.empty() ? 0 : *std::max_element(dims.begin(), dims.end());
  rep.add("subgradient_dim", dim_max, 0.5 * n, !probes.empty() && 2 * dim_max < n,
          std::to_string(probes.size()) + " points of the contact boundary");

  try {
    const SublevelCheck sl = sublevel_volume_check(r.u_star, tilted_cuts(r.u_star, boundary, 20, a.config.seed));
    double worst = INFINITY;
    for (const auto& c : sl.cuts) worst = std::min(worst, c.ratio);
    rep.add("sublevel_volume", worst, sl.calibration / 10, sl.passed(),
            std::to_string(sl.cuts.size()) + " tilted cuts");
  } catch (const DomainError& e) {
    rep.add("sublevel_volume", 0, 0, false, e.what());
  }
  return rep;
}

std::vector<double> stratum_ids(const RunArtifacts& a) {
  const TensorGrid& g = a.result.u_star.grid;
  std::vector<double> out(g.size(), -1.0);
  if (a.omega) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point x = g.point(i);
      out[i] = x.norm() <= a.omega->tolerance() ? 0.0 : classify_sigma(*a.omega, x).level;
    }
    return out;
  }
  const auto& pieces = a.result.pieces;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    double best = -INFINITY;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
      const double v = pieces[p](x);
      if (v > best) best = v, out[i] = static_cast<double>(p);
    }
    if (a.result.obstacle[i] > best + 1e-12) out[i] = -1.0;
  }
  return out;
}

namespace {

struct FieldColumns {
  std::vector<double> contact;
  std::vector<double> stratum;
  std::vector<std::pair<std::string, const std::vector<double>*>> cols;
};

FieldColumns field_columns(const RunArtifacts& a) {
  FieldColumns f;
  const SolveResult& r = a.result;
  f.contact.resize(r.u_star.values.size());
  for (std::size_t i = 0; i < f.contact.size(); ++i)
    f.contact[i] = r.u_star[i] - r.obstacle[i] <= a.tol_c ? 1.0 : 0.0;
  f.stratum = stratum_ids(a);
  f.cols = {{"u_star", &r.u_star.values},
            {"u", &a.u_primal.values},
            {"psi", &r.obstacle.values},
            {"contact", &f.contact},
            {"stratum", &f.stratum}};
  return f;
}

}  // namespace

void write_fields_csv(std::ostream& os, const RunArtifacts& a) {
  const FieldColumns f = field_columns(a);
  maforge::write_fields_csv(os, a.result.u_star.grid, f.cols);
}

std::string manifest_json(const RunArtifacts& a) {
  const RunConfig& c = a.config;
  const SolveResult& r = a.result;
  nlohmann::json j;
  j["config"] = {{"mode", c.mode},       {"n", c.n},
                 {"preset", c.preset},   {"vertex_file", c.vertex_file},
                 {"segments_file", c.segments_file},
                 {"R", c.R},             {"m", c.m},
                 {"beta", c.beta},       {"tol_r", c.tol_r},
                 {"max_sweeps", c.max_sweeps},
                 {"sweep", c.sweep},     {"out_dir", c.out_dir},
                 {"seed", c.seed}};
  j["parameters"] = {{"delta", r.params.delta},
                     {"eps", r.params.eps},
                     {"eps_tilde", r.params.eps_tilde},
                     {"r0", r.params.r0},
                     {"beta", r.params.beta},
                     {"attempts", r.params.attempts},
                     {"h", r.u_star.grid.spacing()},
                     {"tol_c", a.tol_c},
                     {"pinned_width", r.pinned_width},
                     {"dual_half_width", a.u.values.grid.half_width()},
                     {"dual_points_per_axis", a.u.values.grid.points_per_axis()},
                     {"threads", worker_count()}};
  j["solver"] = {{"iterations", r.iterations},
                 {"final_update", r.final_update},
                 {"final_residual", r.final_residual},
                 {"max_excess", r.max_excess},
                 {"monotone", r.monotone},
                 {"update_history", r.update_history}};
  nlohmann::json pieces = nlohmann::json::array();
  for (std::size_t p = 0; p < r.pieces.size(); ++p) {
    const auto& L = r.pieces[p];
    pieces.push_back({{"gradient", std::vector<double>(L.gradient.data(), L.gradient.data() + L.gradient.size())},
                      {"offset", L.offset},
                      {"dirac", p < a.dirac.size() ? a.dirac[p] : 0.0}});
  }
  j["pieces"] = pieces;
  j["contact"] = {{"nodes", a.contact.node_count},
                  {"components", a.contact.components.size()},
                  {"far_contact", a.contact.far_contact}};
  j["timings"] = {{"solve_seconds", a.solve_seconds}, {"analysis_seconds", a.analysis_seconds}};
  j["report"] = nlohmann::json::parse(a.report.to_json());
  j["files"] = {"config.ini", "fields.csv", "report.json"};
  if (r.u_star.grid.dim() == 3) j["files"].push_back("fields.vtk");
  return j.dump(2);
}

void write_artifacts(const RunArtifacts& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("config.ini");
    write_config(os, a.config);
  }
  const FieldColumns f = field_columns(a);
  {
    auto os = open("fields.csv");
    maforge::write_fields_csv(os, a.result.u_star.grid, f.cols);
  }
  if (a.result.u_star.grid.dim() == 3) {
    auto os = open("fields.vtk");
    write_fields_vtk(os, a.result.u_star.grid, "maforge " + a.config.mode, f.cols);
  }
  {
    auto os = open("report.json");
    os << a.report.to_json() << '\n';
  }
  {
    auto os = open("manifest.json");
    os << manifest_json(a) << '\n';
  }
}

FieldTable read_fields_csv(std::istream& is) {
  FieldTable t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(trim(cell));
  }
  int n = 0;
  while (n < static_cast<int>(header.size()) && header[n] == "x" + std::to_string(n + 1)) ++n;
  if (n < 1 || n > 4) throw std::runtime_error("CSV lacks coordinate columns x1..xn");
  std::vector<std::vector<double>> cols(header.size());
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= cols.size()) throw std::runtime_error("CSV row " + std::to_string(row) + " too long");
      cols[k].push_back(parse_double(header[k], trim(cell)));
      ++k;
    }
    if (k != cols.size()) throw std::runtime_error("CSV row " + std::to_string(row) + " too short");
  }
  const std::size_t rows = cols[0].size();
  const int m = static_cast<int>(std::lround(std::pow(static_cast<double>(rows), 1.0 / n)));
  std::size_t expect = 1;
  for (int k = 0; k < n; ++k) expect *= m;
  if (m < 2 || expect != rows) throw std::runtime_error("CSV rows do not form a full grid");
  const double R = *std::max_element(cols[0].begin(), cols[0].end());
  t.grid = TensorGrid(n, R, m);
  for (std::size_t i = 0; i < rows; ++i) {
    const Point p = t.grid.point(i);
    for (int k = 0; k < n; ++k)
      if (std::abs(p(k) - cols[k][i]) > 1e-9 * (1 + R))
        throw std::runtime_error("CSV coordinates do not match the grid at row " + std::to_string(i + 2));
  }
  for (std::size_t k = n; k < header.size(); ++k) {
    t.names.push_back(header[k]);
    t.columns.push_back(std::move(cols[k]));
  }
  return t;
}

std::vector<BarrierRun> barrier_checks(int samples, std::uint64_t seed, double rel_step) {
  std::vector<BarrierRun> out;
  for (const auto& [n, k] : {std::pair{3, 1}, {4, 1}}) {
    const BarrierParams p = make_barrier_params(n, k);
    out.push_back({"w_" + std::to_string(n) + "_" + std::to_string(k),
                   check_w_determinant(p, sample_w_points(p, samples, seed, rel_step), rel_step)});
  }
  for (int n : {2, 3, 4})
    out.push_back({"W_" + std::to_string(n),
                   check_W_determinant(n, sample_W_points(n, samples, seed, rel_step), rel_step)});
  return out;
}

void write_barrier_csv(std::ostream& os, const std::vector<BarrierRun>& runs) {
  os << "model,point,analytic_det,fd_det,rel_err\n";
  os.precision(17);
  for (const auto& run : runs)
    for (const auto& row : run.check.rows) {
      os << run.model << ',';
      for (int k = 0; k < row.x.size(); ++k) os << (k ? " " : "") << row.x(k);
      os << ',' << row.analytic << ',' << row.fd << ',' << row.rel_err << '\n';
    }
}

VerificationReport barrier_report(const std::vector<BarrierRun>& runs, double tolerance) {
  VerificationReport rep;
  for (const auto& run : runs)
    rep.add("barrier_" + run.model, run.check.max_rel_err, tolerance,
            run.check.max_rel_err <= tolerance, std::to_string(run.check.rows.size()) + " samples");
  return rep;
}

VerificationReport legendre_self_test(int samples, std::uint64_t seed) {
  VerificationReport rep;
  std::mt19937_64 rng(seed);

  // Non-convex input: the discrete transform is a max over all nodes either way.
  for (int n = 1; n <= 3; ++n) {
    const TensorGrid g(n, 1.5, 33);
    const ScalarField f = sample_field(g, [](const Point& x) {
      return 0.5 * x.squaredNorm() + 0.3 * std::cos(2.0 * x(0)) + 0.2 * x.lpNorm<1>();
    });
    const DualGrid dual = default_dual_grid(f);
    const ScalarField fast = legendre_nd(f, dual);
    std::vector<Point> xs(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) xs[i] = g.point(i);
    std::vector<double> err(dual.size(), 0.0);
    parallel_for(dual.size(), [&](std::size_t j) {
      const Point p = dual.point(j);
      double best = -INFINITY;
      for (std::size_t i = 0; i < g.size(); ++i) best = std::max(best, p.dot(xs[i]) - f[i]);
      err[j] = std::abs(best - fast[j]) / (1.0 + std::abs(best));
    });
    const double worst = *std::max_element(err.begin(), err.end());
    rep.add("legendre_bruteforce_" + std::to_string(n) + "d", worst, 1e-12, worst <= 1e-12,
            std::to_string(g.size()) + " nodes");
  }

  const TensorGrid g(3, 1.5, 33);
  const ScalarField f = sample_field(g, [](const Point& x) {
    return 0.5 * x.squaredNorm() + 0.25 * std::abs(x(0)) + 0.1 * std::exp(x(1));
  });
  const DualGrid dual = default_dual_grid(f);
  const Conjugate c = legendre_with_argmax(f, dual);
  const ScalarField ff = biconjugate(f);
  const double lip = max_forward_slope(f);
  std::uniform_int_distribution<std::size_t> node(0, g.size() - 1), slope(0, dual.size() - 1);

  double inv = 0.0;
  for (int s = 0; s < samples; ++s) {
    const std::size_t i = node(rng);
    inv = std::max(inv, std::abs(ff[i] - f[i]));
  }
  const double inv_scale = g.spacing() * lip;
  rep.add("legendre_involution", inv / inv_scale, 1.0, inv <= inv_scale,
          "max |f** - f| in units of h Lip(f)");

  double gap_min = INFINITY, eq_max = 0.0;
  for (int s = 0; s < samples; ++s) {
    const std::size_t i = node(rng), j = slope(rng);
    const Point x = g.point(i), p = dual.point(j);
    const double scale = 1.0 + std::abs(p.dot(x));
    gap_min = std::min(gap_min, (f[i] + c.values[j] - p.dot(x)) / scale);
    const std::size_t k = c.argmax[j];
    const Point xk = g.point(k);
    eq_max = std::max(eq_max, std::abs(f[k] + c.values[j] - p.dot(xk)) / (1.0 + std::abs(p.dot(xk))));
  }
  rep.add("fenchel_young_inequality", gap_min, -1e-12, gap_min >= -1e-12,
          "min (f(x) + f*(p) - x.p) over random pairs");
  rep.add("fenchel_young_equality", eq_max, 1e-12, eq_max <= 1e-12, "at the maximizing node");
  return rep;
}

}  // namespace maforge
