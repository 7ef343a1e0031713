#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maforge/geometry.hpp"
#include "maforge/grid.hpp"
#include "maforge/legendre.hpp"
#include "maforge/obstacle_solver.hpp"

namespace maforge {

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stratum label of a node: level and face mask, or level 0 at the apex.
struct NodeStratum {
  int level = -1;  // -1 when no polytope is attached
  std::uint64_t face = 0;
  bool operator==(const NodeStratum&) const = default;
};

struct ContactComponent {
  int piece = 0;  // index into SolveResult::pieces
  std::vector<std::size_t> nodes;
  double volume = 0.0;  // tie nodes split evenly between pieces
  std::vector<int> levels_touched;
  /// Levels in which the component holds a node whose 2h-ball of
  /// same-stratum nodes is entirely contact.
  std::vector<int> levels_with_ball;
  int min_boundary_distance = 0;
};

/// Contact set K = {u* - psi <= tol_c}, split into connected pieces.
///
/// A contact node belongs to every affine piece attaining the obstacle
/// there (ties belong to several). Components are face-connected sets of
/// nodes sharing a piece; two components meet when they share a node or
/// hold face-adjacent nodes. Contact where no piece is active (the W_n - eps
/// part of the Y obstacle) is counted separately and left out of K.
struct ContactSet {
  TensorGrid grid;
  double tol_c = 0.0;
  std::vector<std::uint8_t> mask;         // contact on an affine piece
  std::vector<std::uint64_t> active;      // piece mask per contact node
  std::vector<NodeStratum> stratum;       // filled in polytope mode
  std::vector<ContactComponent> components;
  std::vector<std::vector<std::uint8_t>> meets;
  std::size_t far_contact = 0;  // contact with no active piece
  std::size_t node_count = 0;
  int min_boundary_distance = 0;
};

/// 10 tol_r h^2: ten times the residual scale of the stopping rule.
double default_contact_tolerance(const SolveResult& r);

/// Throws DomainError when contact comes within 2h of the box boundary.
ContactSet contact_set(const SolveResult& r, const Polytope* omega, double tol_c);

/// Volume of K inside the normal cone of each piece (ties split evenly).
std::vector<double> dirac_coefficients(const ContactSet& K, std::size_t piece_count);

struct StratumLaw {
  /// Strata with level > n/2 that lack a contact 2h-ball, as face masks.
  std::vector<std::uint64_t> missing_interior;
  std::size_t strata_checked = 0;
  /// Contact nodes classified at level <= n/2 (apex included).
  std::size_t forbidden_contact = 0;
  bool passed() const { return missing_interior.empty() && forbidden_contact == 0; }
};

StratumLaw check_stratum_law(const ContactSet& K, const Polytope& omega);

/// Vertex orbits under the signed coordinate permutations that map the
/// vertex set to itself (these are symmetries of the grid as well).
std::vector<std::vector<int>> vertex_orbits(const Polytope& omega);

struct ShellProfile {
  double inner = 0.0;
  double outer = 0.0;
  double max_scaled_laplacian = 0.0;  // max of dist * Laplacian_h u
  std::size_t nodes = 0;
};

struct SingularSetReport {
  double max_abs_on_gamma = 0.0;     // polytope mode: max |u| on delta * Gamma_1
  double max_affine_residual = 0.0;  // Y mode: worst affine-fit residual per segment
  std::vector<double> segment_residuals;
  double lipschitz = 0.0;
  std::vector<ShellProfile> shells;
  double shell_ratio = 0.0;  // max / min over non-empty shells
  double ma_max_deviation = 0.0;  // max |ma_h(u) - 1| away from the singular set
  double ma_p99_deviation = 0.0;
  std::size_t ma_nodes = 0;
  bool laplacian_finite = true;
};

/// Points of the singular set: delta * edges of Omega, or the segments
/// from 0 to grad L_i in Y mode (pieces 1..M).
std::vector<std::pair<Point, Point>> singular_segments(const SolveResult& r, const Polytope* omega);

/// Distance from p to the union of segments.
double distance_to_segments(const Point& p, const std::vector<std::pair<Point, Point>>& segs);

/// u must be the conjugate of r.u_star. Derivative checks use only dual
/// nodes whose stencil maximizers lie in the solved part of the primal box.
SingularSetReport singular_set_report(const SolveResult& r, const Conjugate& u,
                                      const std::vector<std::pair<Point, Point>>& segs,
                                      bool affine_mode, int samples_per_segment = 25);

struct MassBalance {
  double radius = 0.0;
  double measured = 0.0;       // Monge-Ampere measure of u on the dual nodes in B_radius
  double ball = 0.0;           // |B_radius|
  double ball_discrete = 0.0;  // dual cell volume times the dual nodes in B_radius
  double dirac_total = 0.0;    // sum of a_q
  double relative_error = 0.0;  // |measured - ball_discrete - dirac_total| / dirac_total
};

/// Compares the Monge-Ampere measure of u over the dual nodes in B_radius,
/// measured on the primal grid of r, with the volume of their dual cells
/// plus the Dirac masses.
MassBalance mass_balance(const SolveResult& r, const ScalarField& u, const std::vector<double>& a,
                         double radius);

/// Radius used for mass accounting: 1.5 times the largest |grad piece|,
/// and at least five dual spacings.
double mass_radius(const SolveResult& r, double dual_spacing);

struct AsymptoticFit {
  double kappa = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
  std::size_t samples = 0;
  bool indeterminate = false;
};

/// Fits log|g(r) - kappa| = intercept + slope * log r with kappa chosen
/// jointly, where g = value - r^2/2. Samples are (r, value).
AsymptoticFit asymptotic_fit(const std::vector<std::pair<double, double>>& samples);

/// Same, over radial means of the nodes of f in 0.6R <= |x| <= 0.9R.
AsymptoticFit asymptotic_fit(const ScalarField& f);

/// Averages g = value - r^2/2 over `bins` equal radial bins of [r_lo, r_hi]
/// and returns (mean r, mean g + mean r^2/2) per non-empty bin. Spherical
/// means cancel harmonic corrections from the box faces.
std::vector<std::pair<double, double>> radial_means(const std::vector<std::pair<double, double>>& samples,
                                                   double r_lo, double r_hi, int bins);

/// Refined conjugate values of f at random points of the annulus
/// [r_lo, r_hi], as (|p|, f*(p)).
std::vector<std::pair<double, double>> conjugate_annulus_samples(const ScalarField& f, double r_lo,
                                                                 double r_hi, int count,
                                                                 std::uint64_t seed);

struct SublevelCut {
  double volume = 0.0;
  double depth = 0.0;  // |min (f - l)|
  double ratio = 0.0;  // volume / depth^(n/2)
  bool passed = false;
};

struct SublevelCheck {
  double calibration = 0.0;  // paraboloid constant omega_n 2^(n/2)
  std::vector<SublevelCut> cuts;
  bool passed() const;
};

/// volume{f < l} >= (calibration / 10) |min(f - l)|^(n/2) for each affine cut.
/// Throws DomainError when a sublevel set reaches the grid boundary.
SublevelCheck sublevel_volume_check(const ScalarField& f, const std::vector<Affine>& cuts);

/// Cuts tangent to f at random contact-boundary nodes, tilted slightly and
/// raised by a small height.
std::vector<Affine> tilted_cuts(const ScalarField& f, const std::vector<std::size_t>& anchors,
                                int count, std::uint64_t seed);

/// Contact nodes with a face neighbor outside the contact set.
std::vector<std::size_t> contact_boundary(const ContactSet& K);

/// Estimated dim of the subdifferential at each node. One-sided difference
/// quotients along lattice directions bound the subdifferential by slabs;
/// the count is the number of principal extents of that polytope above
/// tau_slope.
std::vector<int> subgradient_dim_check(const ScalarField& u_star,
                                       const std::vector<std::size_t>& points, double tau_slope);

/// Half the smallest gradient jump between distinct pieces (the size of a
/// genuine kink); falls back to 0.5 when there is a single piece.
double default_slope_threshold(const SolveResult& r);

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerificationReport {
  std::vector<Check> checks;
  std::string manifest;

  void add(std::string name, double value, double threshold, bool passed, std::string detail = {});
  bool passed() const;
  std::string to_json() const;
  std::string summary() const;
};

}  // namespace maforge
