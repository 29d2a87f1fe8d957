#pragma once

#include "direg/conic/cone.hpp"

#include <Eigen/Sparse>
#include <json.hpp>

#include <utility>
#include <vector>

namespace direg::conic {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// minimize c'x  subject to  A x + s = b,  s in K.
/// Dual: maximize -b'y  subject to  A'y + c = 0,  y in K*.
struct ConicProblem {
  Eigen::VectorXd c;
  SparseMatrix A;
  Eigen::VectorXd b;
  ConeSpec cones;

  int num_variables() const { return static_cast<int>(c.size()); }
  int num_constraints() const { return static_cast<int>(b.size()); }
};

void validate(const ConicProblem& p);

/// Sparse-triplet JSON:
///   {"c": [...], "b": [...], "A": {"m": .., "n": .., "rows": [...], "cols": [...], "vals": [...]},
///    "cones": [{"type": "zero", "size": 3}, {"type": "psd", "size": 4}, ...]}
nlohmann::json to_json(const ConicProblem& p);
ConicProblem problem_from_json(const nlohmann::json& j);

/// Affine expression constant + sum coef * x[var].
struct AffineExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  AffineExpr() = default;
  AffineExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
  static AffineExpr variable(int index, double coef = 1.0) {
    AffineExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator-=(const AffineExpr& o);
  AffineExpr& operator*=(double k);
  double evaluate(const Eigen::VectorXd& x) const;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double k, AffineExpr a);

/// Incremental construction: blocks are emitted in the order added, each
/// block constraining a list of affine expressions to lie in one cone.
class ProblemBuilder {
 public:
  /// Adds `count` variables, returns the index of the first.
  int add_variables(int count);
  int num_variables() const { return num_vars_; }

  void add_block(const Cone& cone, const std::vector<AffineExpr>& rows);
  void add_zero(const std::vector<AffineExpr>& rows) { add_block({ConeKind::Zero, static_cast<int>(rows.size())}, rows); }
  void add_nonneg(const std::vector<AffineExpr>& rows) {
    add_block({ConeKind::Nonneg, static_cast<int>(rows.size())}, rows);
  }
  void add_soc(const std::vector<AffineExpr>& rows) { add_block({ConeKind::Soc, static_cast<int>(rows.size())}, rows); }
  /// Symmetric matrix given by its lower-triangle entries m[i][j], i >= j (sqrt2 scaling applied here).
  void add_psd(const std::vector<std::vector<AffineExpr>>& lower);
  /// Triples (u, v, w), v exp(u / v) <= w.
  void add_exp(const std::vector<std::array<AffineExpr, 3>>& triples);

  void set_objective(const AffineExpr& objective);

  /// Row index where the next block starts.
  int num_rows() const { return static_cast<int>(b_.size()); }

  ConicProblem build() const;

 private:
  int num_vars_ = 0;
  std::vector<Eigen::Triplet<double>> triplets_;
  std::vector<double> b_;
  ConeSpec cones_;
  AffineExpr objective_;
};

}  // namespace direg::conic
