#include "direg/error.hpp"
#include "direg/npa.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <limits>
#include <mutex>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace direg {

namespace {

void check_scenario(const MomentStructure& ms, const Scenario& s) {
  if (!(ms.scenario == s)) throw ValidationError("moment relaxation: behavior scenario does not match");
}

// Rows behavior(x) - target = 0; returns the index of the first row.
int pin_behavior(conic::ProblemBuilder& builder, const MomentEmbedding& emb, const Eigen::VectorXd& target) {
  const int first = builder.num_rows();
  std::vector<conic::AffineExpr> rows;
  for (std::size_t i = 0; i < emb.behavior.size(); ++i) rows.push_back(emb.behavior[i] - target[static_cast<Eigen::Index>(i)]);
  builder.add_zero(rows);
  return first;
}

conic::AffineExpr negativity_objective(const std::vector<conic::AffineExpr>& minus, const MomentStructure& ms,
                                       NegativityObjective objective) {
  const int side = ms.side;
  if (objective == NegativityObjective::IdentityEntry) return minus[0];
  conic::AffineExpr out;
  for (int r = 0; r < side; ++r) out += minus[static_cast<std::size_t>(conic::psd_index(r, r, side))];
  return out;
}

}  // namespace

conic::ConicProblem feasibility_problem(const MomentStructure& ms, const std::optional<Behavior>& p) {
  conic::ProblemBuilder builder;
  const MomentEmbedding emb = add_moment_matrix(builder, ms);
  if (p) {
    check_scenario(ms, p->scenario());
    pin_behavior(builder, emb, p->values());
  }
  return builder.build();
}

FeasibilityResult check_membership(const Behavior& p, int level, const conic::SolverOptions& options, double tol) {
  const MomentStructure& ms = moment_structure(p.scenario(), level);
  check_scenario(ms, p.scenario());
  // max t s.t. chi - t I >= 0, t <= 0: always strictly feasible and bounded,
  // unlike the bare feasibility problem on boundary points.  The cap keeps
  // interior points from turning into a slow max-min-eigenvalue problem.
  conic::ProblemBuilder builder;
  const int t = builder.add_variables(1);
  const conic::AffineExpr tv = conic::AffineExpr::variable(t);
  const MomentEmbedding emb = add_moment_matrix_shifted(builder, ms, tv);
  pin_behavior(builder, emb, p.values());
  builder.add_nonneg({-1.0 * tv});
  builder.set_objective(-1.0 * tv);

  FeasibilityResult out;
  out.solution = conic::solve_conic(builder.build(), options);
  if (out.solution.status == conic::SolveStatus::PrimalInfeasible) {
    out.margin = -std::numeric_limits<double>::infinity();
    return out;
  }
  if (!out.solution.acceptable(options.accept_tol)) {
    throw SolverError("membership: solver stopped with status " + conic::to_string(out.solution.status));
  }
  out.margin = std::min(0.0, out.solution.x[t]);
  out.feasible = out.margin >= -tol;
  return out;
}

RelaxationMaximum relaxation_maximum(const BellFunctional& f, int level, const conic::SolverOptions& options) {
  const MomentStructure& ms = moment_structure(f.scenario, level);
  conic::ProblemBuilder builder;
  const MomentEmbedding emb = add_moment_matrix(builder, ms);
  const Eigen::VectorXd coef = f.effective_coefficients();
  conic::AffineExpr objective;
  for (std::size_t i = 0; i < emb.behavior.size(); ++i) objective -= coef[static_cast<Eigen::Index>(i)] * emb.behavior[i];
  builder.set_objective(objective);

  RelaxationMaximum out;
  out.solution = conic::solve_conic(builder.build(), options);
  if (!out.solution.acceptable(options.accept_tol)) {
    throw SolverError("relaxation maximum: solver stopped with status " + conic::to_string(out.solution.status));
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(emb.behavior.size()));
  for (std::size_t i = 0; i < emb.behavior.size(); ++i) p[static_cast<Eigen::Index>(i)] = emb.behavior[i].evaluate(out.solution.x);
  out.maximizer = Behavior(f.scenario, p);
  out.value = evaluate_functional(f, out.maximizer);
  return out;
}

conic::SolverOptions negativity_solver_options() {
  conic::SolverOptions o;
  o.scale = 30.0;
  o.adaptive_scale = false;
  return o;
}

NegativityResult negativity_bound(const Behavior& p, int level, NegativityObjective objective,
                                  const conic::SolverOptions& options) {
  const MomentStructure& ms = moment_structure(p.scenario(), level);
  conic::ProblemBuilder builder;
  const MomentEmbedding emb = add_moment_matrix(builder, ms);
  const int pin = pin_behavior(builder, emb, p.values());
  const auto minus = add_negativity_split(builder, ms, emb);
  builder.set_objective(negativity_objective(minus, ms, objective));

  NegativityResult out{.bound = 0.0, .level = level, .source = p, .dual_beta = {}, .dual_offset = 0.0, .accept_tol = options.accept_tol, .solution = {}};
  out.solution = conic::solve_conic(builder.build(), options);
  if (out.solution.status == conic::SolveStatus::PrimalInfeasible) {
    throw InfeasibleInput("behavior outside the level-" + std::to_string(level) +
                          " relaxation; regularize first (see restore_feasibility)");
  }
  if (!out.solution.acceptable(options.accept_tol)) {
    std::ostringstream msg;
    msg << "negativity bound: solver stopped with status " << conic::to_string(out.solution.status) << " at relative error "
        << out.solution.relative_error << " (accepting " << options.accept_tol
        << "); raise the iteration cap or accept_tol";
    throw SolverError(msg.str());
  }
  if (!out.solution.optimal()) {
    spdlog::warn("negativity bound: iteration cap reached, using iterate with relative error {:.1e}",
                 out.solution.relative_error);
  }
  out.bound = std::max(0.0, out.solution.primal_objective);
  out.dual_beta = out.solution.y.segment(pin, static_cast<Eigen::Index>(p.size()));
  out.dual_offset = out.solution.dual_objective - out.dual_beta.dot(p.values());
  return out;
}

double negativity_from_chsh(double s, double tol) {
  const double qmax = 2.0 * std::numbers::sqrt2;
  if (s > qmax + tol) {
    std::ostringstream msg;
    msg << "CHSH value " << s << " exceeds the quantum maximum 2 sqrt2; no negativity estimate";
    throw InfeasibleInput(msg.str());
  }
  return std::max(0.0, (std::min(s, qmax) - 2.0) / (4.0 * std::numbers::sqrt2 - 4.0));
}

NegativityWitness witness_from_dual(const NegativityResult& result, std::optional<double> alpha) {
  if (!result.solution.acceptable(result.accept_tol)) {
    throw SolverError("witness extraction needs an optimal negativity solve");
  }
  const double nu = result.solution.dual_objective;
  const double a = alpha.value_or(0.99 * nu);
  if (!(a >= 0.0) || !(a < nu)) {
    std::ostringstream msg;
    msg << "witness level alpha = " << a << " must lie in [0, " << nu << ")";
    throw ValidationError(msg.str());
  }
  NegativityWitness w;
  w.alpha = a;
  w.threshold = a - result.dual_offset;
  w.functional.name = "negativity_witness";
  w.functional.scenario = result.source.scenario();
  w.functional.beta = result.dual_beta;
  return w;
}

double slice_radius(const Behavior& center, const Eigen::VectorXd& direction, const SliceOptions& options) {
  const MomentStructure& ms = moment_structure(center.scenario(), options.level);
  if (!check_membership(center, options.level, options.solver).feasible) {
    throw InfeasibleInput("slice: center lies outside the set");
  }
  if (direction.size() != static_cast<Eigen::Index>(center.size())) {
    throw ValidationError("slice: direction has the wrong dimension");
  }
  conic::ProblemBuilder builder;
  const int t = builder.add_variables(1);
  const conic::AffineExpr tv = conic::AffineExpr::variable(t);
  const MomentEmbedding emb = add_moment_matrix(builder, ms);
  std::vector<conic::AffineExpr> rows;
  for (std::size_t i = 0; i < emb.behavior.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows.push_back(emb.behavior[i] - center.values()[k] - direction[k] * tv);
  }
  builder.add_zero(rows);
  builder.add_nonneg({tv});
  if (options.set == SliceSet::BoundedNegativity) {
    const auto minus = add_negativity_split(builder, ms, emb);
    builder.add_nonneg({options.nu - negativity_objective(minus, ms, options.objective)});
  }
  builder.set_objective(-1.0 * tv);
  const conic::ConicSolution sol = conic::solve_conic(builder.build(), options.solver);
  if (sol.status == conic::SolveStatus::PrimalInfeasible) throw InfeasibleInput("slice: center lies outside the set");
  if (!sol.acceptable(options.solver.accept_tol)) throw SolverError("slice: solver stopped with status " + conic::to_string(sol.status));
  return std::max(0.0, sol.x[t]);
}

std::vector<SlicePoint> slice_boundary(const Behavior& center, const Eigen::VectorXd& d1, const Eigen::VectorXd& d2,
                                       const std::vector<double>& angles, const SliceOptions& options) {
  moment_structure(center.scenario(), options.level);  // validate and warm the cache once
  std::vector<SlicePoint> out(angles.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto worker = [&] {
    for (std::size_t i = next++; i < angles.size(); i = next++) {
      out[i].angle = angles[i];
      try {
        out[i].radius = slice_radius(center, std::cos(angles[i]) * d1 + std::sin(angles[i]) * d2, options);
      } catch (const SolverError& e) {
        spdlog::warn("slice angle {}: {}", angles[i], e.what());
        out[i].status = conic::SolveStatus::Numerical;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned threads = std::clamp(std::thread::hardware_concurrency(), 1u, 8u);
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace direg
