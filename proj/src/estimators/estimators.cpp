#include "direg/estimators.hpp"

#include "direg/error.hpp"
#include "direg/npa.hpp"
#include "direg/projection.hpp"

#include <spdlog/spdlog.h>

#include <sstream>

namespace direg {

namespace {

using conic::AffineExpr;

// Behavior entries as affine expressions over the target's variables, with
// the target's constraints already added.
std::vector<AffineExpr> add_target(conic::ProblemBuilder& builder, const Scenario& s, const Target& target) {
  if (target.kind == Target::Kind::Relaxation) {
    return add_moment_matrix(builder, moment_structure(s, target.level)).behavior;
  }
  const int first = builder.add_variables(static_cast<int>(s.dimension()));
  std::vector<AffineExpr> p;
  for (std::size_t i = 0; i < s.dimension(); ++i) p.push_back(AffineExpr::variable(first + static_cast<int>(i)));
  const auto at = [&](int a, int b, int x, int y) { return p[s.index(a, b, x, y)]; };

  std::vector<AffineExpr> eq;
  for (int x = 0; x < s.inputs_a; ++x) {
    for (int y = 0; y < s.inputs_b; ++y) {
      AffineExpr total(-1.0);
      for (int a = 0; a < s.outputs_a; ++a)
        for (int b = 0; b < s.outputs_b; ++b) total += at(a, b, x, y);
      eq.push_back(total);
    }
  }
  // Alice's marginal does not depend on y, Bob's not on x (last outcome implied).
  for (int x = 0; x < s.inputs_a; ++x) {
    for (int a = 0; a + 1 < s.outputs_a; ++a) {
      for (int y = 1; y < s.inputs_b; ++y) {
        AffineExpr d;
        for (int b = 0; b < s.outputs_b; ++b) d += at(a, b, x, y) - at(a, b, x, 0);
        eq.push_back(d);
      }
    }
  }
  for (int y = 0; y < s.inputs_b; ++y) {
    for (int b = 0; b + 1 < s.outputs_b; ++b) {
      for (int x = 1; x < s.inputs_a; ++x) {
        AffineExpr d;
        for (int a = 0; a < s.outputs_a; ++a) d += at(a, b, x, y) - at(a, b, 0, y);
        eq.push_back(d);
      }
    }
  }
  builder.add_zero(eq);
  builder.add_nonneg(p);
  return p;
}

// First-order iterates sit up to ~1e-8 outside the nonnegative orthant.  Clip
// those entries and renormalize each setting; the change is far below the
// solver accuracy and keeps the physicality contract exact.
Behavior polish(const Behavior& p) {
  Eigen::VectorXd v = p.values().cwiseMax(0.0);
  const Scenario& s = p.scenario();
  const Eigen::Index block = s.outputs_a * s.outputs_b;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(s.settings()); ++k) {
    const double total = v.segment(k * block, block).sum();
    if (total > 0) v.segment(k * block, block) /= total;
  }
  return Behavior(s, std::move(v));
}

Behavior evaluate_behavior(const Scenario& s, const std::vector<AffineExpr>& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) v[static_cast<Eigen::Index>(i)] = p[i].evaluate(x);
  return polish(Behavior(s, std::move(v)));
}

conic::ConicSolution solve_checked(const conic::ProblemBuilder& builder, const conic::SolverOptions& options,
                                   const char* what) {
  conic::ConicSolution sol = conic::solve_conic(builder.build(), options);
  if (!sol.acceptable(options.accept_tol)) {
    std::ostringstream msg;
    msg << what << ": solver stopped with status " << conic::to_string(sol.status) << " after " << sol.iterations
        << " iterations (relative error " << sol.relative_error << ")";
    throw SolverError(msg.str());
  }
  if (!sol.optimal()) {
    spdlog::warn("{}: iteration cap reached, using iterate with relative error {:.1e}", what, sol.relative_error);
  }
  return sol;
}

// Norm estimators also accept unphysical (e.g. projected) inputs; ML needs
// nonnegative frequencies.
void check_input(const Behavior& f, const Target& target, bool nonnegative) {
  validate(f.scenario());
  if (target.kind == Target::Kind::Relaxation) moment_structure(f.scenario(), target.level);
  if (f.normalization_error() > 1e-9) throw ValidationError("estimator: frequencies must be normalized per setting");
  if (nonnegative && f.min_entry() < 0) throw ValidationError("estimator: frequencies must be nonnegative");
}

// argmax sum_i w_i log P_i over the target.
EstimateResult ml(const Behavior& rel, const Eigen::VectorXd& weights, const Target& target,
                  const conic::SolverOptions& options) {
  check_input(rel, target, true);
  conic::ProblemBuilder builder;
  const std::vector<AffineExpr> p = add_target(builder, rel.scenario(), target);
  std::vector<std::array<AffineExpr, 3>> cones;
  AffineExpr objective;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double w = weights[static_cast<Eigen::Index>(i)];
    if (w <= 0) continue;
    const AffineExpr u = AffineExpr::variable(builder.add_variables(1));
    cones.push_back({u, AffineExpr(1.0), p[i]});
    objective -= w * u;
  }
  builder.add_exp(cones);
  builder.set_objective(objective);

  EstimateResult out;
  out.method = Method::ML;
  out.target = target;
  out.solution = solve_checked(builder, options, "ML estimate");
  out.p_reg = evaluate_behavior(rel.scenario(), p, out.solution->x);
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Projection: return "projection";
    case Method::ML: return "ml";
    case Method::LS: return "ls";
    case Method::L1: return "l1";
    case Method::LInf: return "linf";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::Projection, Method::ML, Method::LS, Method::L1, Method::LInf}) {
    if (to_string(m) == name) return m;
  }
  throw ValidationError("unknown method '" + name + "' (expected projection, ml, ls, l1 or linf)");
}

std::string to_string(const Target& t) {
  return t.kind == Target::Kind::Nonsignaling ? "ns" : "q" + std::to_string(t.level);
}

Target target_from_string(const std::string& name) {
  if (name == "ns") return Target::nonsignaling();
  if (name == "q1") return Target::relaxation(1);
  if (name == "q2") return Target::relaxation(2);
  throw ValidationError("unknown target '" + name + "' (expected ns, q1 or q2)");
}

EstimateResult estimate_ml(const FrequencyTable& f, const Target& target, const conic::SolverOptions& options) {
  EstimateResult out = ml(f.relative_frequencies(), f.joint_weights(), target, options);
  out.objective = kl_divergence(f, out.p_reg);
  return out;
}

EstimateResult estimate_ml(const Behavior& f, const Target& target, const conic::SolverOptions& options) {
  EstimateResult out = ml(f, f.values() / static_cast<double>(f.scenario().settings()), target, options);
  out.objective = kl_divergence(f, out.p_reg);
  return out;
}

EstimateResult estimate_ls(const Behavior& f, const Target& target, const conic::SolverOptions& options) {
  check_input(f, target, false);
  conic::ProblemBuilder builder;
  const std::vector<AffineExpr> p = add_target(builder, f.scenario(), target);
  const AffineExpr t = AffineExpr::variable(builder.add_variables(1));
  std::vector<AffineExpr> soc{t};
  for (std::size_t i = 0; i < p.size(); ++i) soc.push_back(f.values()[static_cast<Eigen::Index>(i)] - p[i]);
  builder.add_soc(soc);
  builder.set_objective(t);

  EstimateResult out;
  out.method = Method::LS;
  out.target = target;
  out.solution = solve_checked(builder, options, "LS estimate");
  out.p_reg = evaluate_behavior(f.scenario(), p, out.solution->x);
  out.objective = lp_distance(f, out.p_reg, Norm::L2);
  return out;
}

EstimateResult estimate_pnorm(const Behavior& f, Norm norm, const Target& target,
                              const conic::SolverOptions& options) {
  if (norm == Norm::L2) return estimate_ls(f, target, options);
  check_input(f, target, false);
  conic::ProblemBuilder builder;
  const std::vector<AffineExpr> p = add_target(builder, f.scenario(), target);
  const int n = static_cast<int>(p.size());
  const int first = builder.add_variables(norm == Norm::L1 ? n : 1);
  std::vector<AffineExpr> bounds;
  AffineExpr objective;
  for (int i = 0; i < n; ++i) {
    const AffineExpr e = AffineExpr::variable(norm == Norm::L1 ? first + i : first);
    const AffineExpr r = f.values()[i] - p[static_cast<std::size_t>(i)];
    bounds.push_back(e - r);
    bounds.push_back(e + r);
    if (norm == Norm::L1) objective += e;
  }
  if (norm == Norm::LInf) objective = AffineExpr::variable(first);
  builder.add_nonneg(bounds);
  builder.set_objective(objective);

  EstimateResult out;
  out.method = norm == Norm::L1 ? Method::L1 : Method::LInf;
  out.target = target;
  out.unique = false;
  out.solution = solve_checked(builder, options, "p-norm estimate");
  out.p_reg = evaluate_behavior(f.scenario(), p, out.solution->x);
  out.objective = lp_distance(f, out.p_reg, norm);
  return out;
}

EstimateResult estimate_projection(const Behavior& f) {
  const ProjectionResult r = project(f);
  EstimateResult out;
  out.method = Method::Projection;
  out.p_reg = r.p_ns;
  out.objective = r.p_si.norm();
  out.unphysical = r.unphysical;
  return out;
}

EstimateResult estimate(const FrequencyTable& f, Method method, const Target& target,
                        const conic::SolverOptions& options) {
  if (method == Method::ML) return estimate_ml(f, target, options);
  return estimate(f.relative_frequencies(), method, target, options);
}

EstimateResult estimate(const Behavior& f, Method method, const Target& target, const conic::SolverOptions& options) {
  switch (method) {
    case Method::Projection: return estimate_projection(f);
    case Method::ML: return estimate_ml(f, target, options);
    case Method::LS: return estimate_ls(f, target, options);
    case Method::L1: return estimate_pnorm(f, Norm::L1, target, options);
    case Method::LInf: return estimate_pnorm(f, Norm::LInf, target, options);
  }
  throw ValidationError("estimate: unknown method");
}

Behavior restore_feasibility(const Behavior& p, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("restore_feasibility: eps must lie in [0, 1]");
  if (eps == 0.0) return p;
  return mix(p, Behavior::uniform(p.scenario()), eps);
}

RestoredBehavior restore_feasibility_auto(const Behavior& p, int level, double max_eps, double tol,
                                          const conic::SolverOptions& options) {
  double eps = 0.0;
  for (;;) {
    const Behavior q = restore_feasibility(p, eps);
    if (check_membership(q, level, options, tol).feasible) return {q, eps};
    if (eps >= max_eps) break;
    eps = eps == 0.0 ? 1e-9 : std::min(2.0 * eps, max_eps);
  }
  std::ostringstream msg;
  msg << "restore_feasibility: behavior still outside the level-" << level << " relaxation at eps = " << max_eps;
  throw InfeasibleInput(msg.str());
}

}  // namespace direg
