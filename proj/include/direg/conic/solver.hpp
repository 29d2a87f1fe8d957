#pragma once

#include "direg/conic/problem.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

namespace direg::conic {

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIters, Numerical };

std::string to_string(SolveStatus s);

struct SolverOptions {
  double eps_abs = 1e-9;
  double eps_rel = 1e-9;
  double eps_infeas = 1e-9;
  int max_iters = 100000;
  /// A max_iters result whose relative_error is at most this is still usable
  /// (see ConicSolution::acceptable).
  double accept_tol = 1e-6;
  double time_limit = 0.0;  // seconds, 0 = none

  double alpha = 1.5;  // over-relaxation
  double rho_x = 1e-6;
  double scale = 0.1;  // initial dual step scale
  bool adaptive_scale = true;
  int anderson_memory = 10;  // 0 disables acceleration
  int check_interval = 10;
  int equilibration_passes = 25;

  /// When set, the starting iterate is randomly perturbed (solutions must not
  /// depend on it).  Unset: the deterministic standard start.
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  /// When non-empty, the problem is written there as JSON before solving.
  std::string dump_path;
};

/// x, y, s are the unscaled primal/dual/slack vectors.  For infeasible
/// problems the certificate is returned instead: y with A'y = 0, b'y = -1,
/// y in K* (primal infeasible), or x, s with Ax + s = 0, c'x = -1, s in K
/// (dual infeasible).  Residuals are infinity-norms in the original scaling.
struct ConicSolution {
  SolveStatus status = SolveStatus::Numerical;
  Eigen::VectorXd x, y, s;
  double primal_objective = 0.0;  // c'x
  double dual_objective = 0.0;    // -b'y
  double primal_residual = 0.0;   // ||Ax + s - b||
  double dual_residual = 0.0;     // ||A'y + c||
  double gap = 0.0;               // |c'x + b'y|
  /// max of the two residuals and the gap, each divided by 1 + its scale.
  double relative_error = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double solve_time = 0.0;
  double final_scale = 0.0;

  bool optimal() const { return status == SolveStatus::Optimal; }
  /// Optimal, or stopped at the iteration cap with the best iterate within tol.
  bool acceptable(double tol) const {
    return optimal() || (status == SolveStatus::MaxIters && relative_error <= tol);
  }
};

/// Operator splitting on the homogeneous self-dual embedding: Douglas-Rachford
/// iterations alternating a cached quasi-definite linear solve with the cone
/// projection, with Ruiz equilibration, adaptive dual scaling and
/// safeguarded Anderson acceleration.  Deterministic for fixed inputs.
ConicSolution solve_conic(const ConicProblem& problem, const SolverOptions& options = {});

}  // namespace direg::conic
