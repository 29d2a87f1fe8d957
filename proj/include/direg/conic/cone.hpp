#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace direg::conic {

enum class ConeKind { Zero, Nonneg, Soc, Psd, Exp };

/// One block of a product cone.  `size` is the dimension for zero, nonneg
/// and soc blocks, the matrix side for psd blocks and the number of triples
/// for exp blocks.
///
/// soc: (t, x) with ||x|| <= t.
/// psd: symmetric X stored as its lower triangle column by column (equivalently
///      the upper triangle row by row), off-diagonal entries multiplied by sqrt2.
/// exp: triples (u, v, w) in the closure of {v > 0, v exp(u / v) <= w}.
struct Cone {
  ConeKind kind = ConeKind::Zero;
  int size = 0;

  int dimension() const;
  bool operator==(const Cone&) const = default;
};

using ConeSpec = std::vector<Cone>;

int dimension(const ConeSpec& cones);
void validate(const ConeSpec& cones);
std::string to_string(ConeKind kind);
ConeKind cone_kind_from_string(const std::string& name);

/// Euclidean projection onto the product cone (blockwise).
Eigen::VectorXd project_cone(const Eigen::VectorXd& v, const ConeSpec& cones);
/// Euclidean projection onto the dual cone (zero blocks become free).
Eigen::VectorXd project_dual_cone(const Eigen::VectorXd& v, const ConeSpec& cones);

/// In-place blockwise projections used by the solver.
void project_cone_inplace(Eigen::Ref<Eigen::VectorXd> v, const ConeSpec& cones);
void project_dual_cone_inplace(Eigen::Ref<Eigen::VectorXd> v, const ConeSpec& cones);

/// Projection of (u, v, w) onto the closed exponential cone.  Throws
/// SolverError when the root finder fails.
std::array<double, 3> project_exp(const std::array<double, 3>& z);

bool in_exp_cone(const std::array<double, 3>& z, double tol);
/// Dual cone {u < 0, -u exp(v / u) <= e w} plus its boundary rays.
bool in_exp_dual_cone(const std::array<double, 3>& z, double tol);

/// Distance-style membership test for any block type (used by tests and
/// certificate checks): true when ||v - proj(v)|| <= tol.
bool in_cone(const Eigen::VectorXd& v, const ConeSpec& cones, double tol);
bool in_dual_cone(const Eigen::VectorXd& v, const ConeSpec& cones, double tol);

/// PSD vectorization helpers.
int psd_index(int i, int j, int side);  // position of X(i, j), i >= j
Eigen::VectorXd vectorize_symmetric(const Eigen::MatrixXd& m);
Eigen::MatrixXd unvectorize_symmetric(const Eigen::Ref<const Eigen::VectorXd>& v, int side);

}  // namespace direg::conic
