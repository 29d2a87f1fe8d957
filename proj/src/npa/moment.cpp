#include "direg/error.hpp"
#include "direg/npa.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

namespace direg {

namespace {

Word reversed(const Word& w) { return Word(w.rbegin(), w.rend()); }

// Words of length <= level over `inputs` letters with no repeated neighbours,
// ordered by length, then lexicographically.
std::vector<Word> party_words(int inputs, int level) {
  std::vector<Word> out{{}};
  std::vector<Word> frontier{{}};
  for (int len = 1; len <= level; ++len) {
    std::vector<Word> next;
    for (const auto& w : frontier) {
      for (int x = 0; x < inputs; ++x) {
        if (!w.empty() && w.back() == x) continue;
        Word v = w;
        v.push_back(x);
        next.push_back(std::move(v));
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

MomentKey canonical_key(Word a, Word b) {
  MomentKey k{a, b};
  MomentKey adj{reversed(a), reversed(b)};
  return std::min(k, adj);
}

}  // namespace

Word reduce_product(const Word& u, const Word& v) {
  Word out;
  out.reserve(u.size() + v.size());
  for (auto it = u.rbegin(); it != u.rend(); ++it) {
    if (out.empty() || out.back() != *it) out.push_back(*it);
  }
  for (int x : v) {
    if (out.empty() || out.back() != x) out.push_back(x);
  }
  return out;
}

int MomentStructure::transposed_class_of(int r, int c) const {
  const int nb = static_cast<int>(bob.size());
  const int ra = r / nb, rb = r % nb, ca = c / nb, cb = c % nb;
  return class_of(ra * nb + cb, ca * nb + rb);
}

MomentStructure build_moment_structure(const Scenario& scenario, int level) {
  validate(scenario);
  if (scenario.outputs_a != 2 || scenario.outputs_b != 2) {
    throw ValidationError("moment relaxation: only binary outcomes are supported");
  }
  if (scenario.inputs_a > 4 || scenario.inputs_b > 4) {
    throw ValidationError("moment relaxation: at most 4 inputs per party");
  }
  if (level != 1 && level != 2) throw ValidationError("moment relaxation: level must be 1 or 2");

  MomentStructure ms;
  ms.scenario = scenario;
  ms.level = level;
  ms.alice = party_words(scenario.inputs_a, level);
  ms.bob = party_words(scenario.inputs_b, level);
  const int na = static_cast<int>(ms.alice.size());
  const int nb = static_cast<int>(ms.bob.size());
  ms.side = na * nb;
  ms.entry_class.assign(static_cast<std::size_t>(ms.side * ms.side), -1);

  std::map<MomentKey, int> index;
  const auto class_for = [&](const Word& wa, const Word& wb) {
    MomentKey key = canonical_key(wa, wb);
    auto [it, inserted] = index.try_emplace(key, static_cast<int>(ms.class_keys.size()));
    if (inserted) ms.class_keys.push_back(std::move(key));
    return it->second;
  };
  for (int r = 0; r < ms.side; ++r) {
    for (int c = 0; c < ms.side; ++c) {
      const Word wa = reduce_product(ms.alice[static_cast<std::size_t>(r / nb)], ms.alice[static_cast<std::size_t>(c / nb)]);
      const Word wb = reduce_product(ms.bob[static_cast<std::size_t>(r % nb)], ms.bob[static_cast<std::size_t>(c % nb)]);
      ms.entry_class[static_cast<std::size_t>(r * ms.side + c)] = class_for(wa, wb);
    }
  }
  ms.identity_class = ms.class_of(0, 0);

  const auto var = [](int k) { return conic::AffineExpr::variable(k); };
  ms.behavior_map.resize(scenario.dimension());
  for (std::size_t i = 0; i < scenario.dimension(); ++i) {
    const auto [a, b, x, y] = scenario.labels(i);
    const conic::AffineExpr pa = var(class_for({x}, {}));
    const conic::AffineExpr pb = var(class_for({}, {y}));
    const conic::AffineExpr pab = var(class_for({x}, {y}));
    conic::AffineExpr e;
    if (a == 0 && b == 0) e = pab;
    else if (a == 0) e = pa - pab;
    else if (b == 0) e = pb - pab;
    else e = 1.0 - pa - pb + pab;
    ms.behavior_map[i] = e;
  }
  return ms;
}

const MomentStructure& moment_structure(const Scenario& scenario, int level) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int, int, int>, std::unique_ptr<MomentStructure>> cache;
  const auto key = std::make_tuple(scenario.inputs_a, scenario.inputs_b, scenario.outputs_a, scenario.outputs_b, level);
  std::lock_guard lock(mu);
  auto& slot = cache[key];
  if (!slot) slot = std::make_unique<MomentStructure>(build_moment_structure(scenario, level));
  return *slot;
}

MomentEmbedding add_moment_matrix(conic::ProblemBuilder& builder, const MomentStructure& ms) {
  return add_moment_matrix_shifted(builder, ms, conic::AffineExpr(0.0));
}

MomentEmbedding add_moment_matrix_shifted(conic::ProblemBuilder& builder, const MomentStructure& ms,
                                          const conic::AffineExpr& shift) {
  MomentEmbedding emb;
  const int first = builder.add_variables(ms.num_classes() - 1);
  emb.classes.resize(static_cast<std::size_t>(ms.num_classes()));
  int next = first;
  for (int k = 0; k < ms.num_classes(); ++k) {
    emb.classes[static_cast<std::size_t>(k)] =
        k == ms.identity_class ? conic::AffineExpr(1.0) : conic::AffineExpr::variable(next++);
  }
  const auto substitute = [&](const conic::AffineExpr& e) {
    conic::AffineExpr out(e.constant);
    for (const auto& [k, coef] : e.terms) out += coef * emb.classes[static_cast<std::size_t>(k)];
    return out;
  };
  for (const auto& e : ms.behavior_map) emb.behavior.push_back(substitute(e));

  std::vector<std::vector<conic::AffineExpr>> lower(static_cast<std::size_t>(ms.side));
  for (int r = 0; r < ms.side; ++r) {
    for (int c = 0; c <= r; ++c) {
      conic::AffineExpr e = emb.classes[static_cast<std::size_t>(ms.class_of(r, c))];
      if (r == c && !shift.terms.empty()) e -= shift;
      lower[static_cast<std::size_t>(r)].push_back(std::move(e));
    }
  }
  emb.first_row = builder.num_rows();
  builder.add_psd(lower);
  return emb;
}

std::vector<conic::AffineExpr> add_negativity_split(conic::ProblemBuilder& builder, const MomentStructure& ms,
                                                    const MomentEmbedding& emb) {
  const int side = ms.side;
  // chi_minus is itself a moment matrix of a positive operator, seen through
  // the partial transposition: its (r, c) entry is a variable of the class at
  // the transposed position.
  const int first = builder.add_variables(ms.num_classes());
  std::vector<conic::AffineExpr> minus(static_cast<std::size_t>(side * (side + 1) / 2));
  std::vector<std::vector<conic::AffineExpr>> lower_minus(static_cast<std::size_t>(side));
  std::vector<std::vector<conic::AffineExpr>> lower_plus(static_cast<std::size_t>(side));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c <= r; ++c) {
      const int t = ms.transposed_class_of(r, c);
      const conic::AffineExpr m = conic::AffineExpr::variable(first + ms.class_of(r, c));
      minus[static_cast<std::size_t>(conic::psd_index(r, c, side))] = m;
      lower_minus[static_cast<std::size_t>(r)].push_back(m);
      lower_plus[static_cast<std::size_t>(r)].push_back(emb.classes[static_cast<std::size_t>(t)] + m);
    }
  }
  builder.add_psd(lower_minus);
  builder.add_psd(lower_plus);
  return minus;
}

}  // namespace direg
