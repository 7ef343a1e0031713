#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maforge/analysis.hpp"
#include "maforge/barriers.hpp"
#include "maforge/geometry.hpp"
#include "maforge/legendre.hpp"
#include "maforge/obstacle_solver.hpp"

namespace maforge {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string mode = "polytope";  // polytope | y-graph | barrier-check | legendre-test
  int n = 3;
  std::string preset = "tetrahedron";
  std::string vertex_file;    // overrides preset when set
  std::string segments_file;  // y-graph mode
  double R = 4.0;
  int m = 33;
  std::optional<double> eps;
  std::optional<double> eps_tilde;
  std::optional<double> r0;
  double beta = 0.0;
  double tol_r = 1e-3;
  int max_sweeps = 40000;
  std::string sweep = "gauss-seidel";
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  bool operator==(const RunConfig&) const = default;
};

// Defaults applied when the overrides are unset.
inline constexpr double kPolytopeEps = 0.6;
inline constexpr double kYEps = 0.1;
inline constexpr double kYEpsTilde = 0.4;
inline constexpr double kYR0 = 0.2;

/// key = value lines; '#' starts a comment; unknown keys are errors.
RunConfig read_config(std::istream& is, RunConfig base = {});
void write_config(std::ostream& os, const RunConfig& cfg);
/// Rejects inconsistent settings with ConfigError.
void validate_config(const RunConfig& cfg);

struct RunArtifacts {
  RunConfig config;
  SolveResult result;
  std::optional<Polytope> omega;
  std::vector<Segment> segments;
  Conjugate u;           // Legendre transform of u_star on the aligned dual grid
  ScalarField u_primal;  // the same transform sampled on the primal grid
  double tol_c = 0.0;
  ContactSet contact;
  std::vector<double> dirac;
  SingularSetReport singular;
  VerificationReport report;
  double solve_seconds = 0.0;
  double analysis_seconds = 0.0;
};

/// Solves, transforms and verifies one polytope or y-graph run. Throws
/// ConfigError on bad input and SolverError when the solver stalls.
RunArtifacts execute_run(const RunConfig& cfg);

/// Checks on a finished run, in a fixed order.
VerificationReport verify_run(RunArtifacts& a);

/// Per-node stratum id written to the exports: the level of the normal-fan
/// stratum in polytope mode, the active obstacle piece (or -1) in y-graph mode.
std::vector<double> stratum_ids(const RunArtifacts& a);

/// fields.csv, fields.vtk (n = 3), report.json, manifest.json, config.ini.
void write_artifacts(const RunArtifacts& a, const std::filesystem::path& dir);

void write_fields_csv(std::ostream& os, const RunArtifacts& a);
std::string manifest_json(const RunArtifacts& a);

/// Reads a fields CSV produced by write_fields_csv back into named columns on
/// its grid (the grid is recovered from the coordinate columns).
struct FieldTable {
  TensorGrid grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};
FieldTable read_fields_csv(std::istream& is);

struct BarrierRun {
  std::string model;  // w_3_1, w_4_1, W_2, W_3, W_4
  BarrierCheck check;
};

/// Determinant checks of the barrier family at `samples` points each.
std::vector<BarrierRun> barrier_checks(int samples, std::uint64_t seed, double rel_step = 1e-3);
/// Rows: model, point, analytic_det, fd_det, rel_err.
void write_barrier_csv(std::ostream& os, const std::vector<BarrierRun>& runs);
VerificationReport barrier_report(const std::vector<BarrierRun>& runs, double tolerance = 0.02);

/// Fast transform against brute force on 33-per-axis grids in 1D to 3D,
/// then involution and Fenchel-Young on `samples` random points.
VerificationReport legendre_self_test(int samples, std::uint64_t seed);

}  // namespace maforge
