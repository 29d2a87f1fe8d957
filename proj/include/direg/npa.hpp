#pragma once

// Local-level moment-matrix relaxations of the quantum set for binary-outcome
// bipartite scenarios.
//
// Each party keeps one projector A_x = A_{0|x} per input (the other outcome is
// 1 - A_x).  A party's monomials of level l are the words in those projectors
// of length <= l with no letter repeated back to back (A_x^2 = A_x).  The
// moment matrix is indexed by pairs (Alice word, Bob word):
//
//   chi[(i,k),(j,l)] = < (A_i^dag A_j) (x) (B_k^dag B_l) >
//
// and is taken real symmetric, which loses nothing for real behaviors.

#include "direg/bell.hpp"
#include "direg/conic/solver.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace direg {

/// Sequence of input labels; the empty word is the identity.
using Word = std::vector<int>;

/// Product u^dag v reduced with A_x^2 = A_x.
Word reduce_product(const Word& u, const Word& v);

/// One scalar of the relaxation: <wa (x) wb>, identified with its adjoint
/// <rev(wa) (x) rev(wb)>; the stored key is the lexicographically smaller.
using MomentKey = std::pair<Word, Word>;

struct MomentStructure {
  Scenario scenario;
  int level = 1;
  std::vector<Word> alice;
  std::vector<Word> bob;
  int side = 0;
  /// Class of entry (r, c), row-major side x side; symmetric.
  std::vector<int> entry_class;
  std::vector<MomentKey> class_keys;
  int identity_class = 0;
  /// P(flat index) as an affine function of the class values (variable k = class k).
  std::vector<conic::AffineExpr> behavior_map;

  int num_classes() const { return static_cast<int>(class_keys.size()); }
  int row(int alice_index, int bob_index) const { return alice_index * static_cast<int>(bob.size()) + bob_index; }
  int class_of(int r, int c) const { return entry_class[static_cast<std::size_t>(r * side + c)]; }
  /// Class of the entry that (r, c) moves to under partial transposition on Bob's factor.
  int transposed_class_of(int r, int c) const;
};

/// Levels 1 and 2, binary outcomes, at most 4 inputs per party.
MomentStructure build_moment_structure(const Scenario& scenario, int level);

/// Shared cache (structures are immutable once built).
const MomentStructure& moment_structure(const Scenario& scenario, int level);

/// Conic-variable view of a moment matrix added to a problem.
struct MomentEmbedding {
  std::vector<conic::AffineExpr> classes;   // one per class; the identity class is the constant 1
  std::vector<conic::AffineExpr> behavior;  // one per flat behavior index
  int first_row = 0;                        // first row of the psd block
};

/// Adds one variable per non-identity class and the constraint chi >= 0.
MomentEmbedding add_moment_matrix(conic::ProblemBuilder& builder, const MomentStructure& ms);
/// Same, with the constraint chi - shift * I >= 0.
MomentEmbedding add_moment_matrix_shifted(conic::ProblemBuilder& builder, const MomentStructure& ms,
                                          const conic::AffineExpr& shift);

/// Adds chi_minus >= 0 and chi^{T_B} + chi_minus >= 0 and returns the matrix
/// entries chi_minus(r, c), r >= c, at position psd_index(r, c, side).
std::vector<conic::AffineExpr> add_negativity_split(conic::ProblemBuilder& builder, const MomentStructure& ms,
                                                    const MomentEmbedding& emb);

/// Quantity minimized over chi_minus.
enum class NegativityObjective {
  IdentityEntry,  // the <1 (x) 1> diagonal entry of chi_minus
  Trace,          // tr(chi_minus) over the whole projector-word basis
};

/// chi >= 0 with every P(a,b|x,y) pinned to `p` by a zero block, or with the
/// behavior left free when `p` is empty.  Objective 0.
conic::ConicProblem feasibility_problem(const MomentStructure& ms, const std::optional<Behavior>& p);

struct FeasibilityResult {
  bool feasible = false;
  /// Largest t <= 0 with chi - t I >= 0 for some moment matrix consistent
  /// with p (0 inside the set); -infinity when no moment matrix matches p.
  double margin = 0.0;
  conic::ConicSolution solution;
};

/// p is accepted when its margin is at least -tol.
FeasibilityResult check_membership(const Behavior& p, int level, const conic::SolverOptions& options = {},
                                   double tol = 1e-7);

struct RelaxationMaximum {
  double value = 0.0;
  Behavior maximizer = Behavior::uniform(Scenario::chsh());
  conic::ConicSolution solution;
};

/// max of the functional over the level-l relaxation (behavior left free).
RelaxationMaximum relaxation_maximum(const BellFunctional& f, int level, const conic::SolverOptions& options = {});

struct NegativityResult {
  double bound = 0.0;
  int level = 1;
  Behavior source = Behavior::uniform(Scenario::chsh());
  /// Duals of the behavior-pinning rows and the remaining dual objective:
  /// for every P in the relaxation, bound(P) >= dual_beta . P + dual_offset.
  Eigen::VectorXd dual_beta;
  double dual_offset = 0.0;
  double accept_tol = 1e-6;
  conic::ConicSolution solution;
};

/// Solver settings for the negativity SDP: a fixed dual scale of 30, which
/// converges several times faster on these degenerate problems than the
/// residual-balancing adaptation.
conic::SolverOptions negativity_solver_options();

/// Lower bound on the negativity of any state producing p.  Throws
/// InfeasibleInput when p is outside the level-l relaxation and SolverError
/// when the solve is not acceptable at options.accept_tol.
NegativityResult negativity_bound(const Behavior& p, int level,
                                  NegativityObjective objective = NegativityObjective::IdentityEntry,
                                  const conic::SolverOptions& options = negativity_solver_options());

/// max(0, (S - 2) / (4 sqrt2 - 4)); throws InfeasibleInput for S > 2 sqrt2 + tol.
double negativity_from_chsh(double s, double tol = 1e-9);

/// sum beta P <= threshold holds for every P in the relaxation whose
/// negativity bound is at most alpha.
struct NegativityWitness {
  BellFunctional functional;
  double threshold = 0.0;
  double alpha = 0.0;
};

/// Witness from the duals of an optimal solve.  alpha defaults to 0.99 of the
/// bound and must be below it so that the source violates the witness.
NegativityWitness witness_from_dual(const NegativityResult& result, std::optional<double> alpha = std::nullopt);

enum class SliceSet { Relaxation, BoundedNegativity };

struct SliceOptions {
  SliceSet set = SliceSet::Relaxation;
  int level = 1;
  double nu = 0.0;  // negativity cap for BoundedNegativity
  NegativityObjective objective = NegativityObjective::IdentityEntry;
  conic::SolverOptions solver = negativity_solver_options();
};

struct SlicePoint {
  double angle = 0.0;
  double radius = 0.0;
  conic::SolveStatus status = conic::SolveStatus::Optimal;
};

/// Largest t >= 0 with center + t (cos a d1 + sin a d2) in the chosen set.
/// d1, d2 are difference vectors (e.g. P_target - center).  Throws
/// InfeasibleInput when the center is outside the set.
double slice_radius(const Behavior& center, const Eigen::VectorXd& direction, const SliceOptions& options);

std::vector<SlicePoint> slice_boundary(const Behavior& center, const Eigen::VectorXd& d1, const Eigen::VectorXd& d2,
                                       const std::vector<double>& angles, const SliceOptions& options);

}  // namespace direg
