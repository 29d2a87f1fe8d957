#include "direg/relabel.hpp"

#include "direg/error.hpp"

#include <algorithm>
#include <numeric>

namespace direg {

namespace {

std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

bool is_permutation_of(const std::vector<int>& p, int n) {
  if (p.size() != static_cast<std::size_t>(n)) return false;
  std::vector<int> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  return sorted == iota_vec(n);
}

std::vector<int> invert(const std::vector<int>& p) {
  std::vector<int> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<int>(i);
  return inv;
}

struct LocalPart {
  std::vector<int> inputs;
  std::vector<std::vector<int>> outputs;
};

LocalPart invert_local(const std::vector<int>& inputs, const std::vector<std::vector<int>>& outputs) {
  LocalPart out;
  out.inputs = invert(inputs);
  out.outputs.resize(outputs.size());
  for (std::size_t xp = 0; xp < inputs.size(); ++xp) {
    out.outputs[xp] = invert(outputs[static_cast<std::size_t>(out.inputs[xp])]);
  }
  return out;
}

// All permutations of {0..n-1} in lexicographic order.
std::vector<std::vector<int>> permutations(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> p = iota_vec(n);
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

// Cartesian product of `choices` repeated `count` times.
std::vector<std::vector<std::vector<int>>> per_input_choices(
    const std::vector<std::vector<int>>& choices, int count) {
  std::vector<std::vector<std::vector<int>>> out{{}};
  for (int i = 0; i < count; ++i) {
    std::vector<std::vector<std::vector<int>>> next;
    for (const auto& partial : out) {
      for (const auto& c : choices) {
        auto extended = partial;
        extended.push_back(c);
        next.push_back(std::move(extended));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

Relabeling Relabeling::identity(const Scenario& s) {
  Relabeling r;
  r.inputs_a = iota_vec(s.inputs_a);
  r.inputs_b = iota_vec(s.inputs_b);
  r.outputs_a.assign(static_cast<std::size_t>(s.inputs_a), iota_vec(s.outputs_a));
  r.outputs_b.assign(static_cast<std::size_t>(s.inputs_b), iota_vec(s.outputs_b));
  return r;
}

void validate(const Relabeling& r, const Scenario& s) {
  bool ok = is_permutation_of(r.inputs_a, s.inputs_a) && is_permutation_of(r.inputs_b, s.inputs_b) &&
            r.outputs_a.size() == static_cast<std::size_t>(s.inputs_a) &&
            r.outputs_b.size() == static_cast<std::size_t>(s.inputs_b);
  if (ok) {
    for (const auto& p : r.outputs_a) ok = ok && is_permutation_of(p, s.outputs_a);
    for (const auto& p : r.outputs_b) ok = ok && is_permutation_of(p, s.outputs_b);
  }
  if (!ok) throw ValidationError("relabeling: malformed permutation descriptor");
  if (r.swap_parties && !s.symmetric()) {
    throw ValidationError("relabeling: party swap requires a symmetric scenario");
  }
}

Relabeling inverse(const Relabeling& r) {
  const LocalPart a = invert_local(r.inputs_a, r.outputs_a);
  const LocalPart b = invert_local(r.inputs_b, r.outputs_b);
  Relabeling out;
  out.swap_parties = r.swap_parties;
  if (!r.swap_parties) {
    out.inputs_a = a.inputs;
    out.outputs_a = a.outputs;
    out.inputs_b = b.inputs;
    out.outputs_b = b.outputs;
  } else {
    // (swap . L)^-1 = swap . (L^-1 with the parties exchanged)
    out.inputs_a = b.inputs;
    out.outputs_a = b.outputs;
    out.inputs_b = a.inputs;
    out.outputs_b = a.outputs;
  }
  return out;
}

Scenario relabel(const Scenario& s, const Relabeling& r) {
  if (!r.swap_parties) return s;
  return Scenario(s.inputs_b, s.inputs_a, s.outputs_b, s.outputs_a);
}

std::vector<std::size_t> relabel_permutation(const Relabeling& r, const Scenario& s) {
  validate(r, s);
  const Scenario target = relabel(s, r);
  std::vector<std::size_t> image(s.dimension());
  for (std::size_t i = 0; i < s.dimension(); ++i) {
    const auto [a, b, x, y] = s.labels(i);
    const int a2 = r.outputs_a[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
    const int b2 = r.outputs_b[static_cast<std::size_t>(y)][static_cast<std::size_t>(b)];
    const int x2 = r.inputs_a[static_cast<std::size_t>(x)];
    const int y2 = r.inputs_b[static_cast<std::size_t>(y)];
    image[i] = r.swap_parties ? target.index(b2, a2, y2, x2) : target.index(a2, b2, x2, y2);
  }
  return image;
}

Eigen::VectorXd relabel(const Eigen::VectorXd& v, const Scenario& s, const Relabeling& r) {
  const auto image = relabel_permutation(r, s);
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[static_cast<Eigen::Index>(image[i])] = v[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Behavior relabel(const Behavior& p, const Relabeling& r) {
  return Behavior(relabel(p.scenario(), r), relabel(p.values(), p.scenario(), r));
}

FrequencyTable relabel(const FrequencyTable& f, const Relabeling& r) {
  const auto image = relabel_permutation(r, f.scenario());
  std::vector<std::int64_t> counts(f.counts().size());
  for (std::size_t i = 0; i < image.size(); ++i) counts[image[i]] = f.counts()[i];
  return FrequencyTable(relabel(f.scenario(), r), std::move(counts));
}

BellFunctional relabel(const BellFunctional& f, const Relabeling& r) {
  BellFunctional out = f;
  out.scenario = relabel(f.scenario, r);
  out.beta = relabel(f.beta, f.scenario, r);
  if (f.setting_weights) {
    const Scenario& s = f.scenario;
    Eigen::VectorXd w(f.setting_weights->size());
    for (int x = 0; x < s.inputs_a; ++x) {
      for (int y = 0; y < s.inputs_b; ++y) {
        const int x2 = r.inputs_a[static_cast<std::size_t>(x)];
        const int y2 = r.inputs_b[static_cast<std::size_t>(y)];
        const int k = r.swap_parties ? y2 * out.scenario.inputs_b + x2 : x2 * out.scenario.inputs_b + y2;
        w[k] = (*f.setting_weights)[x * s.inputs_b + y];
      }
    }
    out.setting_weights = w;
  }
  return out;
}

std::vector<Relabeling> all_relabelings(const Scenario& s) {
  const auto in_a = permutations(s.inputs_a);
  const auto in_b = permutations(s.inputs_b);
  const auto out_a = per_input_choices(permutations(s.outputs_a), s.inputs_a);
  const auto out_b = per_input_choices(permutations(s.outputs_b), s.inputs_b);
  std::vector<Relabeling> all;
  for (bool swap : {false, true}) {
    if (swap && !s.symmetric()) continue;
    for (const auto& ia : in_a)
      for (const auto& ib : in_b)
        for (const auto& oa : out_a)
          for (const auto& ob : out_b) all.push_back(Relabeling{swap, ia, ib, oa, ob});
  }
  return all;
}

}  // namespace direg
