#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maforge/geometry.hpp"
#include "maforge/grid.hpp"
#include "maforge/ma_operator.hpp"

namespace maforge {

enum class SweepMode { GaussSeidel, Jacobi };

std::string to_string(SweepMode m);
SweepMode parse_sweep_mode(const std::string& s);

struct ObstacleProblemSpec {
  ScalarField obstacle;
  /// Values on the pinned band of nodes within the stencil width of the box
  /// faces; must dominate the obstacle there.
  ScalarField boundary_data;
  /// Starting field; should be a discrete supersolution above the obstacle.
  ScalarField initial;
  double tol_r = 1e-3;
  int max_sweeps = 40000;
  SweepMode mode = SweepMode::GaussSeidel;
  MAConfig ma;
};

struct RunParameters {
  std::string kind;  // "polytope" or "y-graph"
  double delta = 0.0;
  double eps = 0.0;
  double eps_tilde = 0.0;
  double beta = 0.0;
  double r0 = 0.0;
  double R = 0.0;
  int m = 0;
  int attempts = 1;
};

struct SolveResult {
  ScalarField u_star;
  ScalarField obstacle;
  ScalarField lower;  // comparison function from below (boundary data function)
  ScalarField upper;  // starting supersolution
  /// Affine pieces whose maximum forms the flat part of the obstacle:
  /// delta*q.x per vertex q, or 0 followed by L_1..L_M.
  std::vector<Affine> pieces;
  double tol_r = 0.0;
  int iterations = 0;
  double final_update = 0.0;
  double final_residual = 0.0;  // max |min(u - psi, 1 - ma_h)| over solved nodes
  double max_excess = 0.0;      // max (ma_h - 1) over solved nodes
  bool monotone = true;
  std::vector<double> update_history;
  RunParameters params;
  MAConfig ma;
  int pinned_width = 0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Center value making the frame-minimum operator equal 1, given the
/// neighbors currently stored in f.
double local_solve(const ScalarField& f, std::size_t node, const MAConfig& cfg);

/// Projected sweeps u <- max(psi, min(u, local_solve(u))) until the largest
/// update drops below tol_r * h^2 / (4n). Throws SolverError on reaching
/// max_sweeps.
SolveResult solve_obstacle(const ObstacleProblemSpec& spec);

struct PipelineOptions {
  double tol_r = 1e-3;
  int max_sweeps = 40000;
  SweepMode mode = SweepMode::GaussSeidel;
  /// Boundary data is W_n - beta.
  double beta = 0.0;
};

/// Obstacle delta*P* with delta = 0.9 inf (W_n + eps)/P* over the grid,
/// boundary data W_n - beta, start W_n + eps.
SolveResult polytope_pipeline(const Polytope& omega, int n, double R, int m, double eps,
                              const PipelineOptions& opts = {});

/// Obstacle and boundary data phi = max{W_n - eps, 0, L_1..L_M}, start
/// W_n + eps_tilde. delta <= 0 picks the largest scale with L_i below the
/// start, times 0.9. When `accept` rejects a result, eps and eps_tilde are
/// halved and the solve repeated, up to max_retries times.
SolveResult y_pipeline(const std::vector<Segment>& segments, int n, double R, int m, double eps,
                       double eps_tilde, double r0, const PipelineOptions& opts = {},
                       double delta = 0.0,
                       const std::function<bool(const SolveResult&)>& accept = {},
                       int max_retries = 4);

/// Scale used by y_pipeline when delta is not given.
double y_auto_delta(const std::vector<Segment>& segments, const TensorGrid& g, double eps_tilde,
                    double r0);

}  // namespace maforge
