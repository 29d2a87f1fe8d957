#pragma once

// Orthogonal projection of (possibly signaling) frequency vectors onto the
// affine space of nonsignaling behaviors.

#include "direg/bell.hpp"

namespace direg {

/// Generalized correlators with c_{ia} = k [i == a] - 1, i = 0..k-2:
///   <A^i_x> = sum_a c_{ia} P_A(a|x),  <A^i_x B^j_y> = sum_{ab} c_{ia} c_{jb} P(a,b|x,y),
/// where P_A(a|x) is averaged uniformly over Bob's inputs (and vice versa).
/// For binary outputs these are the usual +-1 correlators.
struct CorrelatorVector {
  Scenario scenario;
  Eigen::VectorXd alice;  // index x * (outputs_a - 1) + i
  Eigen::VectorXd bob;    // index y * (outputs_b - 1) + j
  Eigen::VectorXd joint;  // index ((x * inputs_b + y) * (outputs_a - 1) + i) * (outputs_b - 1) + j

  explicit CorrelatorVector(const Scenario& s);

  double& a(int i, int x) { return alice[x * (scenario.outputs_a - 1) + i]; }
  double& b(int j, int y) { return bob[y * (scenario.outputs_b - 1) + j]; }
  double& ab(int i, int j, int x, int y) { return joint[joint_index(i, j, x, y)]; }
  double a(int i, int x) const { return alice[x * (scenario.outputs_a - 1) + i]; }
  double b(int j, int y) const { return bob[y * (scenario.outputs_b - 1) + j]; }
  double ab(int i, int j, int x, int y) const { return joint[joint_index(i, j, x, y)]; }

  Eigen::Index dimension() const { return alice.size() + bob.size() + joint.size(); }

 private:
  Eigen::Index joint_index(int i, int j, int x, int y) const {
    return ((static_cast<Eigen::Index>(x) * scenario.inputs_b + y) * (scenario.outputs_a - 1) + i) *
               (scenario.outputs_b - 1) + j;
  }
};

CorrelatorVector correlators_from_behavior(const Behavior& p);
CorrelatorVector correlators_from_behavior(const FrequencyTable& f);

/// Inverse map; the result is nonsignaling by construction and may have
/// negative entries.
Behavior behavior_from_correlators(const CorrelatorVector& c);

struct ProjectionOperator {
  Scenario scenario;
  Eigen::MatrixXd matrix;  // orthogonal projector; Pi f is the projection of any normalized f
};

/// The linear part of the projection.  The 2x2x2 scenario uses the closed
/// form Pi = 1 - (1/16) sum_{(i,j,k,l) in I} i^{a+a'} j^{b+b'} k^{x+x'} l^{y+y'}
/// with I = {(+1,-1,-1,+-1), (-1,+1,+-1,-1)}; other scenarios compose the
/// correlator maps column by column.
ProjectionOperator projection_matrix(const Scenario& s);
/// Always the column-by-column construction (used to cross-check the closed form).
ProjectionOperator projection_matrix_from_correlators(const Scenario& s);

struct ProjectionResult {
  Behavior p_ns;          // Pi f
  Eigen::VectorXd p_si;   // f - Pi f
  bool unphysical = false;
  double min_entry = 0.0;
};

/// Nearest point (2-norm) of the nonsignaling affine space.  `tol` is the
/// negativity allowed before the output is flagged unphysical.
ProjectionResult project(const Behavior& f, double tol = 1e-12);
ProjectionResult project(const FrequencyTable& f, double tol = 1e-12);

}  // namespace direg
