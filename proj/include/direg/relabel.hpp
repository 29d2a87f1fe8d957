#pragma once

#include "direg/bell.hpp"

#include <cstddef>
#include <vector>

namespace direg {

/// A relabeling of a bipartite scenario.  Applied to P it produces
///   P'(pi_a[x](a), pi_b[y](b) | sigma_a(x), sigma_b(y)) = P(a,b|x,y)
/// followed, when swap_parties is set, by exchanging the roles of Alice and Bob.
struct Relabeling {
  bool swap_parties = false;
  std::vector<int> inputs_a;                // sigma_a
  std::vector<int> inputs_b;                // sigma_b
  std::vector<std::vector<int>> outputs_a;  // pi_a[x], indexed by the original input
  std::vector<std::vector<int>> outputs_b;

  static Relabeling identity(const Scenario& s);
};

void validate(const Relabeling& r, const Scenario& s);

Relabeling inverse(const Relabeling& r);

/// Image of each flat index: out[i] is the position of entry i after relabeling.
std::vector<std::size_t> relabel_permutation(const Relabeling& r, const Scenario& s);

Scenario relabel(const Scenario& s, const Relabeling& r);
Eigen::VectorXd relabel(const Eigen::VectorXd& v, const Scenario& s, const Relabeling& r);
Behavior relabel(const Behavior& p, const Relabeling& r);
FrequencyTable relabel(const FrequencyTable& f, const Relabeling& r);
BellFunctional relabel(const BellFunctional& f, const Relabeling& r);

/// Every relabeling of the scenario (party swaps only when symmetric).
/// 128 elements for the 2222 scenario.
std::vector<Relabeling> all_relabelings(const Scenario& s);

}  // namespace direg
