#include "direg/bell.hpp"

#include "direg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace direg {

Scenario::Scenario(int ia, int ib, int oa, int ob)
    : inputs_a(ia), inputs_b(ib), outputs_a(oa), outputs_b(ob) {
  validate(*this);
}

std::array<int, 4> Scenario::labels(std::size_t flat) const {
  const int b = static_cast<int>(flat % outputs_b);
  flat /= outputs_b;
  const int a = static_cast<int>(flat % outputs_a);
  flat /= outputs_a;
  const int y = static_cast<int>(flat % inputs_b);
  const int x = static_cast<int>(flat / inputs_b);
  return {a, b, x, y};
}

void validate(const Scenario& s) {
  if (s.inputs_a < 1 || s.inputs_b < 1 || s.outputs_a < 1 || s.outputs_b < 1) {
    throw ValidationError("scenario: every input and output count must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Behavior

Behavior::Behavior(Scenario scenario, Eigen::VectorXd p) : scenario_(scenario), p_(std::move(p)) {
  validate(scenario_);
  if (static_cast<std::size_t>(p_.size()) != scenario_.dimension()) {
    throw ValidationError("behavior: expected " + std::to_string(scenario_.dimension()) +
                          " entries, got " + std::to_string(p_.size()));
  }
}

Behavior Behavior::uniform(const Scenario& s) {
  return Behavior(s, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.dimension()),
                                               1.0 / (s.outputs_a * s.outputs_b)));
}

Behavior Behavior::deterministic(const Scenario& s, std::span<const int> a_of_x,
                                 std::span<const int> b_of_y) {
  if (a_of_x.size() != static_cast<std::size_t>(s.inputs_a) ||
      b_of_y.size() != static_cast<std::size_t>(s.inputs_b)) {
    throw ValidationError("deterministic behavior: one outcome per input is required");
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.dimension()));
  for (int x = 0; x < s.inputs_a; ++x) {
    for (int y = 0; y < s.inputs_b; ++y) {
      if (a_of_x[x] < 0 || a_of_x[x] >= s.outputs_a || b_of_y[y] < 0 || b_of_y[y] >= s.outputs_b) {
        throw ValidationError("deterministic behavior: outcome label out of range");
      }
      p[s.index(a_of_x[x], b_of_y[y], x, y)] = 1.0;
    }
  }
  return Behavior(s, std::move(p));
}

Behavior Behavior::product_of_marginals(const Behavior& p) {
  const Scenario& s = p.scenario();
  Eigen::VectorXd out(static_cast<Eigen::Index>(s.dimension()));
  for (std::size_t i = 0; i < s.dimension(); ++i) {
    const auto [a, b, x, y] = s.labels(i);
    double pa = 0.0;
    for (int yy = 0; yy < s.inputs_b; ++yy) pa += p.marginal_a(a, x, yy);
    double pb = 0.0;
    for (int xx = 0; xx < s.inputs_a; ++xx) pb += p.marginal_b(b, xx, y);
    out[static_cast<Eigen::Index>(i)] = (pa / s.inputs_b) * (pb / s.inputs_a);
  }
  return Behavior(s, std::move(out));
}

double Behavior::marginal_a(int a, int x, int y) const {
  double sum = 0.0;
  for (int b = 0; b < scenario_.outputs_b; ++b) sum += (*this)(a, b, x, y);
  return sum;
}

double Behavior::marginal_b(int b, int x, int y) const {
  double sum = 0.0;
  for (int a = 0; a < scenario_.outputs_a; ++a) sum += (*this)(a, b, x, y);
  return sum;
}

double Behavior::normalization_error() const {
  const auto block = static_cast<Eigen::Index>(scenario_.outputs_a * scenario_.outputs_b);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < p_.size(); k += block) {
    worst = std::max(worst, std::abs(p_.segment(k, block).sum() - 1.0));
  }
  return worst;
}

bool Behavior::is_physical(double tol) const {
  return normalization_error() <= tol && min_entry() >= -tol;
}

Behavior mix(const Behavior& p, const Behavior& q, double w) {
  if (!(p.scenario() == q.scenario())) throw ValidationError("mix: scenario mismatch");
  return Behavior(p.scenario(), (1.0 - w) * p.values() + w * q.values());
}

// ---------------------------------------------------------------------------
// FrequencyTable

FrequencyTable::FrequencyTable(Scenario scenario, std::vector<std::int64_t> counts)
    : scenario_(scenario), counts_(std::move(counts)) {
  validate(scenario_);
  if (counts_.size() != scenario_.dimension()) {
    throw ValidationError("frequency table: expected " + std::to_string(scenario_.dimension()) +
                          " counts, got " + std::to_string(counts_.size()));
  }
  const std::size_t block = static_cast<std::size_t>(scenario_.outputs_a) * scenario_.outputs_b;
  setting_totals_.assign(scenario_.settings(), 0);
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] < 0) throw ValidationError("frequency table: negative count");
    setting_totals_[i / block] += counts_[i];
  }
  for (auto n : setting_totals_) {
    if (n <= 0) throw ValidationError("frequency table: every setting needs at least one trial");
    total_ += n;
  }
}

FrequencyTable FrequencyTable::from_behavior(const Behavior& p, std::int64_t n_per_setting) {
  if (n_per_setting < 1) throw ValidationError("from_behavior: n_per_setting must be >= 1");
  if (!p.is_physical(1e-9)) throw ValidationError("from_behavior: behavior is not physical");
  const Scenario& s = p.scenario();
  const std::size_t block = static_cast<std::size_t>(s.outputs_a) * s.outputs_b;
  std::vector<std::int64_t> counts(s.dimension(), 0);
  for (std::size_t start = 0; start < s.dimension(); start += block) {
    std::vector<double> frac(block);
    std::int64_t used = 0;
    for (std::size_t k = 0; k < block; ++k) {
      const double target = std::max(0.0, p.values()[static_cast<Eigen::Index>(start + k)]) *
                            static_cast<double>(n_per_setting);
      const auto whole = static_cast<std::int64_t>(std::floor(target));
      counts[start + k] = whole;
      frac[k] = target - static_cast<double>(whole);
      used += whole;
    }
    // Largest-remainder rounding so each setting sums to n_per_setting.
    std::vector<std::size_t> order(block);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return frac[i] > frac[j]; });
    for (std::size_t r = 0; used < n_per_setting; r = (r + 1) % block, ++used) {
      ++counts[start + order[r]];
    }
    for (; used > n_per_setting; --used) {
      // Only reachable through floating error; take from the largest cell.
      auto it = std::max_element(counts.begin() + static_cast<std::ptrdiff_t>(start),
                                 counts.begin() + static_cast<std::ptrdiff_t>(start + block));
      --*it;
    }
  }
  return FrequencyTable(s, std::move(counts));
}

std::int64_t FrequencyTable::setting_total(int x, int y) const {
  return setting_totals_[static_cast<std::size_t>(x) * scenario_.inputs_b + y];
}

std::int64_t FrequencyTable::trials() const {
  return *std::min_element(setting_totals_.begin(), setting_totals_.end());
}

double FrequencyTable::setting_weight(int x, int y) const {
  return static_cast<double>(setting_total(x, y)) / static_cast<double>(total_);
}

Behavior FrequencyTable::relative_frequencies() const {
  const std::size_t block = static_cast<std::size_t>(scenario_.outputs_a) * scenario_.outputs_b;
  Eigen::VectorXd f(static_cast<Eigen::Index>(counts_.size()));
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    f[static_cast<Eigen::Index>(i)] =
        static_cast<double>(counts_[i]) / static_cast<double>(setting_totals_[i / block]);
  }
  return Behavior(scenario_, std::move(f));
}

Eigen::VectorXd FrequencyTable::joint_weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(counts_.size()));
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Bell functionals

Eigen::VectorXd BellFunctional::effective_coefficients() const {
  if (!setting_weights) return beta;
  Eigen::VectorXd out = beta;
  for (std::size_t i = 0; i < scenario.dimension(); ++i) {
    const auto [a, b, x, y] = scenario.labels(i);
    out[static_cast<Eigen::Index>(i)] *= (*setting_weights)[x * scenario.inputs_b + y];
  }
  return out;
}

BellFunctional chsh_functional() {
  const Scenario s = Scenario::chsh();
  Eigen::VectorXd beta(16);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto [a, b, x, y] = s.labels(i);
    beta[static_cast<Eigen::Index>(i)] = ((a + b + x * y) % 2 == 0) ? 1.0 : -1.0;
  }
  return {"chsh", s, beta, std::nullopt, 2.0};
}

BellFunctional tau_functional(double tau) {
  const Scenario s = Scenario::chsh();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(16);
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) beta[s.index(0, 0, x, y)] += (x * y == 1) ? -1.0 : 1.0;
  }
  for (int a = 0; a < 2; ++a) {
    beta[s.index(a, 0, 1, 0)] -= tau;
    beta[s.index(0, a, 0, 1)] -= tau;
  }
  return {"tau", s, beta, std::nullopt, 0.0};
}

BellFunctional mdl_functional(double l, double h) {
  const Scenario s = Scenario::chsh();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(16);
  beta[s.index(0, 0, 0, 0)] = l;
  beta[s.index(0, 1, 0, 1)] = -h;
  beta[s.index(1, 0, 1, 0)] = -h;
  beta[s.index(0, 0, 1, 1)] = -h;
  return {"mdl", s, beta, Eigen::VectorXd::Constant(4, 0.25), std::nullopt};
}

BellFunctional functional_by_name(const std::string& name) {
  if (name == "chsh") return chsh_functional();
  if (name == "tau125") {
    auto f = tau_functional(1.25);
    f.name = "tau125";
    return f;
  }
  if (name == "mdl") return mdl_functional();
  throw ValidationError("unknown functional '" + name + "' (valid: chsh, tau125, mdl)");
}

// ---------------------------------------------------------------------------
// Qubit strategies

namespace {

using Mat2 = Eigen::Matrix2cd;

void check_unit(const std::array<double, 3>& n, double tol) {
  const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  if (std::abs(norm - 1.0) > tol) {
    throw ValidationError("qubit strategy: Bloch vector has norm " + std::to_string(norm));
  }
}

Mat2 projector(const std::array<double, 3>& n, int outcome) {
  const std::complex<double> i(0.0, 1.0);
  Mat2 ns;
  ns << n[2], n[0] - i * n[1], n[0] + i * n[1], -n[2];
  const double sign = outcome == 0 ? 1.0 : -1.0;
  return 0.5 * (Mat2::Identity() + sign * ns);
}

}  // namespace

Behavior behavior_from_qubit_strategy(const QubitStrategy& st, double tol) {
  double norm2 = 0.0;
  for (const auto& c : st.state) norm2 += std::norm(c);
  if (std::abs(std::sqrt(norm2) - 1.0) > tol) {
    throw ValidationError("qubit strategy: state is not normalized");
  }
  if (st.alice.empty() || st.bob.empty()) throw ValidationError("qubit strategy: no measurements");
  for (const auto& n : st.alice) check_unit(n, tol);
  for (const auto& n : st.bob) check_unit(n, tol);

  const Scenario s(static_cast<int>(st.alice.size()), static_cast<int>(st.bob.size()), 2, 2);
  Eigen::Vector4cd psi;
  psi << st.state[0], st.state[1], st.state[2], st.state[3];
  Eigen::VectorXd p(static_cast<Eigen::Index>(s.dimension()));
  for (std::size_t k = 0; k < s.dimension(); ++k) {
    const auto [a, b, x, y] = s.labels(k);
    const Mat2 pa = projector(st.alice[x], a);
    const Mat2 pb = projector(st.bob[y], b);
    Eigen::Matrix4cd op;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) op.block<2, 2>(2 * r, 2 * c) = pa(r, c) * pb;
    p[static_cast<Eigen::Index>(k)] = (psi.adjoint() * op * psi)(0, 0).real();
  }
  return Behavior(s, std::move(p));
}

// ---------------------------------------------------------------------------
// Checks and distances

NonsignalingCheck is_nonsignaling(const Behavior& p, double tol) {
  const Scenario& s = p.scenario();
  double worst = 0.0;
  for (int x = 0; x < s.inputs_a; ++x)
    for (int a = 0; a < s.outputs_a; ++a)
      for (int y = 1; y < s.inputs_b; ++y)
        worst = std::max(worst, std::abs(p.marginal_a(a, x, y) - p.marginal_a(a, x, 0)));
  for (int y = 0; y < s.inputs_b; ++y)
    for (int b = 0; b < s.outputs_b; ++b)
      for (int x = 1; x < s.inputs_a; ++x)
        worst = std::max(worst, std::abs(p.marginal_b(b, x, y) - p.marginal_b(b, 0, y)));
  return {worst <= tol, worst};
}

double evaluate_functional(const BellFunctional& f, const Behavior& p) {
  if (!(f.scenario == p.scenario()) || static_cast<std::size_t>(f.beta.size()) != p.size()) {
    throw ValidationError("evaluate_functional: scenario mismatch");
  }
  return f.effective_coefficients().dot(p.values());
}

double local_bound(const BellFunctional& f, std::size_t max_strategies) {
  const Scenario& s = f.scenario;
  const auto count = [](int outputs, int inputs) {
    double n = std::pow(static_cast<double>(outputs), inputs);
    return n;
  };
  const double na = count(s.outputs_a, s.inputs_a);
  const double nb = count(s.outputs_b, s.inputs_b);
  if (na > static_cast<double>(max_strategies) || nb > static_cast<double>(max_strategies)) {
    throw ValidationError("local_bound: too many deterministic strategies to enumerate; "
                          "supply the local bound explicitly");
  }
  const Eigen::VectorXd beta = f.effective_coefficients();
  // Enumerate Alice's strategies; Bob best-responds independently per input.
  std::vector<int> a_of_x(static_cast<std::size_t>(s.inputs_a), 0);
  double best = -std::numeric_limits<double>::infinity();
  for (auto k = static_cast<std::size_t>(na); k > 0; --k) {
    double value = 0.0;
    for (int y = 0; y < s.inputs_b; ++y) {
      double best_b = -std::numeric_limits<double>::infinity();
      for (int b = 0; b < s.outputs_b; ++b) {
        double v = 0.0;
        for (int x = 0; x < s.inputs_a; ++x) v += beta[s.index(a_of_x[x], b, x, y)];
        best_b = std::max(best_b, v);
      }
      value += best_b;
    }
    best = std::max(best, value);
    for (int x = 0; x < s.inputs_a; ++x) {  // odometer increment
      if (++a_of_x[x] < s.outputs_a) break;
      a_of_x[x] = 0;
    }
  }
  return best;
}

namespace {

double kl_bits(const Eigen::VectorXd& w, const Eigen::VectorXd& f, const Eigen::VectorXd& p) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (w[i] <= 0.0 || f[i] <= 0.0) continue;
    if (p[i] <= 0.0) return std::numeric_limits<double>::infinity();
    sum += w[i] * std::log2(f[i] / p[i]);
  }
  return sum;
}

}  // namespace

double kl_divergence(const FrequencyTable& f, const Behavior& p) {
  if (!(f.scenario() == p.scenario())) throw ValidationError("kl_divergence: scenario mismatch");
  const Behavior rel = f.relative_frequencies();
  return kl_bits(f.joint_weights(), rel.values(), p.values());
}

double kl_divergence(const Behavior& f, const Behavior& p) {
  if (!(f.scenario() == p.scenario())) throw ValidationError("kl_divergence: scenario mismatch");
  const Eigen::VectorXd w = f.values() / static_cast<double>(f.scenario().settings());
  return kl_bits(w, f.values(), p.values());
}

double lp_distance(const Behavior& p1, const Behavior& p2, Norm norm) {
  if (!(p1.scenario() == p2.scenario())) throw ValidationError("lp_distance: scenario mismatch");
  const Eigen::VectorXd d = p1.values() - p2.values();
  switch (norm) {
    case Norm::L1: return d.lpNorm<1>();
    case Norm::L2: return d.norm();
    case Norm::LInf: return d.lpNorm<Eigen::Infinity>();
  }
  return 0.0;
}

bool strictly_nonorthogonal(const Behavior& p1, const Behavior& p2) {
  if (!(p1.scenario() == p2.scenario())) {
    throw ValidationError("strictly_nonorthogonal: scenario mismatch");
  }
  const Scenario& s = p1.scenario();
  for (int x = 0; x < s.inputs_a; ++x) {
    for (int y = 0; y < s.inputs_b; ++y) {
      double overlap = 0.0;
      for (int a = 0; a < s.outputs_a; ++a)
        for (int b = 0; b < s.outputs_b; ++b) overlap += p1(a, b, x, y) * p2(a, b, x, y);
      if (!(overlap > 0.0)) return false;
    }
  }
  return true;
}

}  // namespace direg
