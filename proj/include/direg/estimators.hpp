#pragma once

// Point estimators mapping relative frequencies to physical behaviors.

#include "direg/bell.hpp"
#include "direg/conic/solver.hpp"

#include <optional>
#include <string>

namespace direg {

enum class Method { Projection, ML, LS, L1, LInf };

std::string to_string(Method m);
/// projection, ml, ls, l1, linf
Method method_from_string(const std::string& name);

/// The nonsignaling polytope, or the level-l moment relaxation.
struct Target {
  enum class Kind { Nonsignaling, Relaxation } kind = Kind::Nonsignaling;
  int level = 1;

  static Target nonsignaling() { return {}; }
  static Target relaxation(int level) { return {Kind::Relaxation, level}; }
  bool operator==(const Target&) const = default;
};

std::string to_string(const Target& t);
/// ns, q1, q2
Target target_from_string(const std::string& name);

struct EstimateResult {
  Behavior p_reg = Behavior::uniform(Scenario::chsh());
  Method method = Method::Projection;
  Target target;
  /// KL(f || p_reg) in bits for ML, ||f - p_reg||_p for the norm methods.
  double objective = 0.0;
  /// False for the p = 1, infinity methods, whose minimizers need not be unique.
  bool unique = true;
  /// Projection only: some entry of p_reg is negative.
  bool unphysical = false;
  std::optional<conic::ConicSolution> solution;
};

/// argmin KL(f || P) over the target, one exponential cone per cell with a
/// nonzero count.  Setting weights are the actual N_xy / N.
EstimateResult estimate_ml(const FrequencyTable& f, const Target& target, const conic::SolverOptions& options = {});
/// Same with uniform setting weights.
EstimateResult estimate_ml(const Behavior& f, const Target& target, const conic::SolverOptions& options = {});

/// argmin ||f - P||_2 over the target (second-order cone epigraph).
EstimateResult estimate_ls(const Behavior& f, const Target& target, const conic::SolverOptions& options = {});

/// One minimizer of ||f - P||_p, p in {L1, LInf}, over the target.
EstimateResult estimate_pnorm(const Behavior& f, Norm p, const Target& target,
                              const conic::SolverOptions& options = {});

/// Nonsignaling projection (the target is ignored).
EstimateResult estimate_projection(const Behavior& f);

/// Dispatch on the method.  ML uses the table's own setting weights.
EstimateResult estimate(const FrequencyTable& f, Method method, const Target& target,
                        const conic::SolverOptions& options = {});
EstimateResult estimate(const Behavior& f, Method method, const Target& target,
                        const conic::SolverOptions& options = {});

/// (1 - eps) P + eps * uniform, 0 <= eps <= 1.
Behavior restore_feasibility(const Behavior& p, double eps);

struct RestoredBehavior {
  Behavior behavior;
  double eps = 0.0;
};

/// Smallest eps in {0, 1e-9, 2e-9, 4e-9, ...} for which the mixture passes
/// check_membership at `level` with margin tolerance `tol`.  Throws
/// InfeasibleInput once eps would exceed `max_eps`.
RestoredBehavior restore_feasibility_auto(const Behavior& p, int level, double max_eps = 1e-6, double tol = 1e-9,
                                          const conic::SolverOptions& options = {});

}  // namespace direg
