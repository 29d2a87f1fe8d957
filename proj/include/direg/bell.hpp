#pragma once

// Bell-scenario data model: scenarios, behaviors, frequency tables, Bell
// functionals and the elementary operations on them.
//
// Every behavior-sized vector uses one flat layout: lexicographic (x, y, a, b),
// i.e. index = ((x * inputs_b + y) * outputs_a + a) * outputs_b + b.

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace direg {

struct Scenario {
  int inputs_a = 2;
  int inputs_b = 2;
  int outputs_a = 2;
  int outputs_b = 2;

  Scenario() = default;
  Scenario(int ia, int ib, int oa, int ob);

  /// The 2 inputs x 2 outputs per party scenario.
  static Scenario chsh() { return {}; }

  std::size_t dimension() const {
    return static_cast<std::size_t>(inputs_a) * inputs_b * outputs_a * outputs_b;
  }
  std::size_t settings() const { return static_cast<std::size_t>(inputs_a) * inputs_b; }
  std::size_t index(int a, int b, int x, int y) const {
    return ((static_cast<std::size_t>(x) * inputs_b + y) * outputs_a + a) * outputs_b + b;
  }
  /// Inverse of index(): returns {a, b, x, y}.
  std::array<int, 4> labels(std::size_t flat) const;

  bool symmetric() const { return inputs_a == inputs_b && outputs_a == outputs_b; }
  bool operator==(const Scenario&) const = default;
};

void validate(const Scenario& s);

/// Joint conditional distribution P(a,b|x,y), or any vector in that space
/// (relative frequencies, unphysical projections).  Nonsignaling and
/// nonnegativity are queried, never enforced.
class Behavior {
 public:
  Behavior(Scenario scenario, Eigen::VectorXd p);

  static Behavior uniform(const Scenario& s);
  /// P(a,b|x,y) = [a == a_of_x[x]] [b == b_of_y[y]].
  static Behavior deterministic(const Scenario& s, std::span<const int> a_of_x,
                                std::span<const int> b_of_y);
  /// P(a,b|x,y) = P_A(a|x) P_B(b|y) built from the (input-averaged) marginals of p.
  static Behavior product_of_marginals(const Behavior& p);

  const Scenario& scenario() const { return scenario_; }
  const Eigen::VectorXd& values() const { return p_; }
  std::size_t size() const { return static_cast<std::size_t>(p_.size()); }

  double operator()(int a, int b, int x, int y) const { return p_[scenario_.index(a, b, x, y)]; }
  double marginal_a(int a, int x, int y) const;
  double marginal_b(int b, int x, int y) const;

  double min_entry() const { return p_.minCoeff(); }
  /// max_{x,y} |sum_{a,b} P(a,b|x,y) - 1|
  double normalization_error() const;
  /// Normalized per setting and entries >= -tol.
  bool is_physical(double tol = 1e-9) const;

 private:
  Scenario scenario_;
  Eigen::VectorXd p_;
};

/// (1 - w) * p + w * q
Behavior mix(const Behavior& p, const Behavior& q, double w);

/// Integer coincidence counts N_{a,b,x,y} in the flat layout.
class FrequencyTable {
 public:
  FrequencyTable(Scenario scenario, std::vector<std::int64_t> counts);

  /// Counts round(P * n) per cell, each setting's remainder folded into its largest cell.
  static FrequencyTable from_behavior(const Behavior& p, std::int64_t n_per_setting);

  const Scenario& scenario() const { return scenario_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t count(int a, int b, int x, int y) const { return counts_[scenario_.index(a, b, x, y)]; }
  std::int64_t setting_total(int x, int y) const;
  std::int64_t total() const { return total_; }
  /// N_trials = min_{x,y} N_{x,y}
  std::int64_t trials() const;

  /// f(x,y) = N_{x,y} / N
  double setting_weight(int x, int y) const;
  /// f(a,b|x,y) as a (generally signaling) behavior.
  Behavior relative_frequencies() const;
  /// f(x,y) f(a,b|x,y) = N_{a,b,x,y} / N in the flat layout.
  Eigen::VectorXd joint_weights() const;

  bool operator==(const FrequencyTable&) const = default;

 private:
  Scenario scenario_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> setting_totals_;
  std::int64_t total_ = 0;
};

/// sum_{abxy} beta(a,b,x,y) w(x,y) P(a,b|x,y), with w = 1 unless setting
/// weights are given (functionals written on joint events P(a,b,x,y)).
struct BellFunctional {
  std::string name;
  Scenario scenario;
  Eigen::VectorXd beta;
  std::optional<Eigen::VectorXd> setting_weights;  // size inputs_a * inputs_b, index x * inputs_b + y
  std::optional<double> local_bound;

  /// beta with the setting weights folded in.
  Eigen::VectorXd effective_coefficients() const;
};

BellFunctional chsh_functional();
/// I_tau = sum_{x,y} (-1)^{xy} P(0,0|x,y) - tau sum_a [P(a,0|1,0) + P(0,a|0,1)]
BellFunctional tau_functional(double tau);
/// MDL witness with P(x,y) = 1/4:  l P(0,0,0,0) - h [P(0,1,0,1) + P(1,0,1,0) + P(0,0,1,1)]
BellFunctional mdl_functional(double l = 0.1, double h = 0.3);
/// Named lookup: chsh, tau125, mdl.
BellFunctional functional_by_name(const std::string& name);

/// Pure two-qubit state with binary projective measurements given by Bloch
/// vectors; outcome 0 is the +1 eigenspace of n.sigma.
struct QubitStrategy {
  std::array<std::complex<double>, 4> state;  // basis |00>, |01>, |10>, |11>
  std::vector<std::array<double, 3>> alice;   // per input, (x, y, z)
  std::vector<std::array<double, 3>> bob;
};

Behavior behavior_from_qubit_strategy(const QubitStrategy& strategy, double tol = 1e-9);

struct NonsignalingCheck {
  bool nonsignaling = false;
  double max_violation = 0.0;
};
NonsignalingCheck is_nonsignaling(const Behavior& p, double tol = 1e-9);

double evaluate_functional(const BellFunctional& f, const Behavior& p);

/// Maximum over local deterministic behaviors.  Throws when the number of
/// deterministic strategies exceeds `max_strategies`.
double local_bound(const BellFunctional& f, std::size_t max_strategies = 1u << 20);

/// D_KL(f || P) in bits, weighting each setting by f(x,y).  0 log 0 = 0 and
/// f > 0 where P = 0 gives +infinity.
double kl_divergence(const FrequencyTable& f, const Behavior& p);
/// Same divergence between two behaviors with uniform setting weights.
double kl_divergence(const Behavior& f, const Behavior& p);

enum class Norm { L1, L2, LInf };
double lp_distance(const Behavior& p1, const Behavior& p2, Norm norm);

/// sum_{a,b} P1(a,b|x,y) P2(a,b|x,y) > 0 for every setting.
bool strictly_nonorthogonal(const Behavior& p1, const Behavior& p2);

}  // namespace direg
