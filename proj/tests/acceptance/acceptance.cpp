// Acceptance checks: one PASS/FAIL line per criterion.  `--only N` runs a
// single criterion; the exit code is the number of failed criteria.

#include "direg/canonical.hpp"
#include "direg/conic/cone.hpp"
#include "direg/estimators.hpp"
#include "direg/montecarlo.hpp"
#include "direg/npa.hpp"
#include "direg/projection.hpp"
#include "direg/relabel.hpp"
#include "exp_oracle.hpp"
#include "fixtures.hpp"
#include "planted.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

using namespace direg;

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[fail] ";
    }
    detail << what << "; ";
  }
};

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double max_abs_diff(const Behavior& a, const Behavior& b) { return (a.values() - b.values()).lpNorm<Eigen::Infinity>(); }

const mc::SummaryRow& row(const std::vector<mc::SummaryRow>& rows, const std::string& est, std::int64_t n,
                          const std::string& metric) {
  for (const auto& r : rows) {
    if (r.estimator == est && r.n_trials == n && r.metric == metric) return r;
  }
  throw std::runtime_error("missing summary row " + est + " " + std::to_string(n) + " " + metric);
}

std::vector<mc::SummaryRow> study(const nlohmann::json& config) {
  const mc::StudyConfig cfg = mc::study_config_from_json(config);
  return mc::summarize(mc::run_study(cfg), mc::metric_truths(cfg));
}

void criterion1(Outcome& o) {
  const ProjectionResult r = project(fixtures::worked_frequency());
  const double err = (40.0 * r.p_ns.values() - fixtures::worked_projection_times_40()).lpNorm<Eigen::Infinity>() / 40.0;
  o.check(err <= 1e-12, "max entry error " + fmt6(err) + " (tol 1e-12)");
  o.check(std::abs(r.p_ns(1, 1, 1, 1) + 3.0 / 40.0) <= 1e-12, "P(1,1|1,1) = " + fmt6(r.p_ns(1, 1, 1, 1)) + " (-3/40)");
  o.check(r.unphysical, "flagged unphysical");
}

void criterion2(Outcome& o) {
  const double v = evaluate_functional(chsh_functional(), canonical_distribution("chsh"));
  o.check(std::abs(v - 2 * kSqrt2) <= 1e-12, "CHSH(P_CHSH) - 2sqrt2 = " + fmt6(v - 2 * kSqrt2) + " (tol 1e-12)");
  const double lb = local_bound(chsh_functional());
  o.check(lb == 2.0, "local bound " + fmt6(lb) + " (exactly 2)");
  const double q1 = relaxation_maximum(chsh_functional(), 1).value;
  o.check(std::abs(q1 - 2 * kSqrt2) <= 1e-5, "level-1 maximum - 2sqrt2 = " + fmt6(q1 - 2 * kSqrt2) + " (tol 1e-5)");
}

void criterion3(Outcome& o) {
  o.check(negativity_from_chsh(2.0) == 0.0, "closed form at S=2: " + fmt6(negativity_from_chsh(2.0)));
  const double top = negativity_from_chsh(2 * kSqrt2);
  o.check(std::abs(top - 0.5) <= 1e-12, "closed form at S=2sqrt2: " + fmt6(top));
  const Behavior chsh = canonical_distribution("chsh");
  const double l1 = negativity_bound(chsh, 1).bound;
  o.check(std::abs(l1 - top) <= 0.01, "P_CHSH level 1: " + fmt6(l1) + " (0.5 +- 0.01)");
  const double l2 = negativity_bound(chsh, 2).bound;
  o.detail << "(info: P_CHSH level 2: " << fmt6(l2) << "); ";
  const double tau = negativity_bound(canonical_distribution("tau125"), 2).bound;
  o.check(std::abs(tau - 0.38) <= 0.02, "P_tau1.25 level 2: " + fmt6(tau) + " (0.38 +- 0.02)");
}

void criterion4(Outcome& o) {
  const auto rows = study({{"source", "tau125"},
                           {"n_trials", {1000, 10000}},
                           {"reps", 200},
                           {"target", "q2"},
                           {"estimators", {"ml", "ls"}},
                           {"metrics", {"negativity:2"}},
                           {"seed", 2024}});
  const auto& ml3 = row(rows, "ml:q2", 1000, "negativity:2");
  const auto& ml4 = row(rows, "ml:q2", 10000, "negativity:2");
  const auto& ls3 = row(rows, "ls:q2", 1000, "negativity:2");
  const auto& ls4 = row(rows, "ls:q2", 10000, "negativity:2");
  o.detail << "means ML " << fmt6(ml3.mean) << " -> " << fmt6(ml4.mean) << ", LS " << fmt6(ls3.mean) << " -> "
           << fmt6(ls4.mean) << " (failed records " << ml3.failures + ml4.failures + ls3.failures + ls4.failures
           << "); ";
  o.check(ml4.mean > ml3.mean && ls4.mean > ls3.mean, "means rise with N");
  o.check(std::abs(ml4.mean - 0.38) <= 0.05, "ML mean at 1e4 within 0.05 of 0.38");
  o.check(ml4.mean >= ls4.mean, "ML mean >= LS mean at 1e4");
}

void criterion5(Outcome& o) {
  for (const char* source : {"chsh", "mdl"}) {
    const auto rows = study({{"source", source},
                             {"n_trials", {100, 1000, 10000, 100000, 1000000}},
                             {"reps", 200},
                             {"target", "q1"},
                             {"estimators", {"projection", "ls", "ml"}},
                             {"metrics", {"l1_to_truth"}},
                             {"seed", 11}});
    for (const char* est : {"projection", "ls:q1", "ml:q1"}) {
      const double s = mc::fit_slope(rows, est, "l1_to_truth");
      o.check(s >= -0.6 && s <= -0.4, std::string(source) + " " + est + " slope " + fmt6(s));
    }
  }
}

void criterion6(Outcome& o) {
  const auto bias = study({{"source", "chsh"},
                           {"n_trials", {10000}},
                           {"reps", 500},
                           {"target", "q1"},
                           {"estimators", {"projection", "ls", "ml"}},
                           {"metrics", {"bell:chsh"}},
                           {"seed", 5}});
  for (const char* est : {"ls:q1", "ml:q1"}) {
    const auto& r = row(bias, est, 10000, "bell:chsh");
    const double z = (2 * kSqrt2 - r.mean) / r.sem;
    o.check(z > 3, std::string(est) + " mean " + fmt6(r.mean) + " is " + fmt6(z) + " sem below 2sqrt2");
  }
  const auto& p = row(bias, "projection", 10000, "bell:chsh");
  const double zp = std::abs(p.mean - 2 * kSqrt2) / p.sem;
  o.check(zp <= 3, "projection mean " + fmt6(p.mean) + " is " + fmt6(zp) + " sem from 2sqrt2");

  const auto grid = study({{"source", "chsh"},
                           {"n_trials", {100, 1000, 10000, 100000}},
                           {"reps", 200},
                           {"target", "q1"},
                           {"estimators", {"projection", "ls", "ml"}},
                           {"metrics", {"bell:chsh"}},
                           {"seed", 6}});
  for (const char* est : {"projection", "ls:q1", "ml:q1"}) {
    const double s = mc::fit_slope(grid, est, "bell:chsh", mc::Statistic::Mse);
    o.check(s >= -1.2 && s <= -0.8, std::string(est) + " MSE slope " + fmt6(s));
  }
}

void criterion7(Outcome& o) {
  const Scenario sc = Scenario::chsh();
  const Target ns = Target::nonsignaling(), q1 = Target::relaxation(1), q2 = Target::relaxation(2);
  std::mt19937_64 rng(77);

  // Physicality and nonsignaling of every optimizing estimator.
  double worst_neg = 0, worst_norm = 0, worst_ns = 0;
  int outputs = 0;
  for (int k = 0; k < 12; ++k) {
    const Behavior src = canonical_distribution(k % 3 == 0 ? "chsh" : k % 3 == 1 ? "tau125" : "mdl");
    const FrequencyTable f = mc::sample_frequencies(src, k % 2 ? 50 : 2000, mc::derive_seed(77, 1, k));
    for (Method m : {Method::ML, Method::LS, Method::L1, Method::LInf}) {
      for (const Target& t : {ns, q1, q2}) {
        if (t == q2 && (m == Method::L1 || m == Method::LInf || k > 3)) continue;
        const Behavior p = estimate(f, m, t).p_reg;
        worst_neg = std::min(worst_neg, p.min_entry());
        worst_norm = std::max(worst_norm, p.normalization_error());
        worst_ns = std::max(worst_ns, is_nonsignaling(p, 1e-7).max_violation);
        ++outputs;
      }
    }
  }
  o.check(worst_neg >= -1e-9 && worst_norm <= 1e-9 && worst_ns <= 1e-7,
          std::to_string(outputs) + " outputs: min entry " + fmt6(worst_neg) + ", normalization " + fmt6(worst_norm) +
              ", signaling " + fmt6(worst_ns));

  // Uniqueness under perturbed starts.
  double worst_restart = 0;
  const FrequencyTable f = mc::sample_frequencies(canonical_distribution("tau125"), 300, 99);
  for (Method m : {Method::ML, Method::LS}) {
    for (const Target& t : {ns, q1}) {
      const Behavior base = estimate(f, m, t).p_reg;
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        conic::SolverOptions opt;
        opt.seed = seed;
        worst_restart = std::max(worst_restart, max_abs_diff(estimate(f, m, t, opt).p_reg, base));
      }
    }
  }
  o.check(worst_restart <= 1e-6, "10 restarts: max deviation " + fmt6(worst_restart));

  // Relabeling covariance.
  double worst_relabel = 0;
  const auto group = all_relabelings(sc);
  for (int k = 0; k < 10; ++k) {
    const Relabeling& g = group[std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng)];
    for (Method m : {Method::ML, Method::LS, Method::Projection}) {
      const Behavior a = relabel(estimate(f, m, q1).p_reg, g);
      const Behavior b = estimate(relabel(f, g), m, q1).p_reg;
      worst_relabel = std::max(worst_relabel, max_abs_diff(a, b));
    }
  }
  o.check(worst_relabel <= 1e-6, "relabeling: max deviation " + fmt6(worst_relabel));

  // LS sees only the nonsignaling part of f.
  double worst_ls_split = 0;
  for (int k = 0; k < 5; ++k) {
    const Behavior fr = k == 0 ? fixtures::worked_frequency().relative_frequencies() : fixtures::random_signaling(sc, rng);
    for (const Target& t : {ns, q1}) {
      worst_ls_split = std::max(worst_ls_split, max_abs_diff(estimate_ls(fr, t).p_reg, estimate_ls(project(fr).p_ns, t).p_reg));
    }
  }
  o.check(worst_ls_split <= 1e-6, "LS(f) vs LS(Pi f): " + fmt6(worst_ls_split));

  // ML optimality against 1e5 nonsignaling probes.
  const FrequencyTable w = fixtures::worked_frequency();
  const Behavior pml = estimate_ml(w, ns).p_reg;
  const double best = kl_divergence(w, pml);
  std::vector<Behavior> vertices;
  for (int m = 0; m < 16; ++m) {
    const std::vector<int> a{m & 1, m >> 1 & 1}, b{m >> 2 & 1, m >> 3 & 1};
    vertices.push_back(Behavior::deterministic(sc, a, b));
  }
  for (int g = 0; g < 8; ++g) {
    Eigen::VectorXd v(16);
    for (std::size_t i = 0; i < 16; ++i) {
      const auto [a, b, x, y] = sc.labels(i);
      v[static_cast<Eigen::Index>(i)] = ((a ^ b) == ((x & y) ^ ((g & 1) & x) ^ ((g >> 1 & 1) & y) ^ (g >> 2))) ? 0.5 : 0.0;
    }
    vertices.emplace_back(sc, v);
  }
  const Eigen::MatrixXd pi = projection_matrix(sc).matrix;
  std::exponential_distribution<double> e;
  std::normal_distribution<double> gauss;
  double gain = -1;
  for (int k = 0; k < 100000; ++k) {
    Eigen::VectorXd probe;
    if (k % 2 == 0) {
      probe = Eigen::VectorXd::Zero(16);
      double total = 0;
      for (const auto& v : vertices) {
        const double wgt = std::pow(e(rng), 4.0);
        probe += wgt * v.values();
        total += wgt;
      }
      probe /= total;
    } else {
      Eigen::VectorXd d(16);
      for (auto& x : d) x = gauss(rng);
      for (int s = 0; s < 4; ++s) d.segment(4 * s, 4).array() -= d.segment(4 * s, 4).mean();
      d = pi * d;
      probe = pml.values() + std::pow(10.0, -2.0 - 4.0 * std::uniform_real_distribution<double>()(rng)) * d;
      if (probe.minCoeff() < 0) continue;
    }
    gain = std::max(gain, best - kl_divergence(w, Behavior(sc, probe)));
  }
  o.check(gain <= 1e-7, "1e5 probes: best KL improvement " + fmt6(gain) + " bits");
}

void criterion8(Outcome& o) {
  using conic::ConeKind;
  std::mt19937_64 rng(8);
  const std::vector<conic::ConeSpec> classes{
      {{ConeKind::Zero, 3}, {ConeKind::Nonneg, 20}},
      {{ConeKind::Soc, 6}, {ConeKind::Soc, 5}, {ConeKind::Nonneg, 4}},
      {{ConeKind::Psd, 5}, {ConeKind::Zero, 2}},
      {{ConeKind::Exp, 6}, {ConeKind::Zero, 1}},
      {{ConeKind::Zero, 2}, {ConeKind::Nonneg, 5}, {ConeKind::Soc, 4}, {ConeKind::Psd, 4}, {ConeKind::Exp, 3}}};
  int good = 0, total = 0;
  double worst_obj = 0, worst_res = 0;
  for (const auto& cones : classes) {
    for (int k = 0; k < 40; ++k) {
      const auto pp = fixtures::planted_problem(cones, 3 + k % 8, rng);
      const conic::ConicSolution sol = conic::solve_conic(pp.problem);
      ++total;
      const double err = std::abs(sol.primal_objective - pp.optimum);
      const double res = std::max(sol.primal_residual, sol.dual_residual);
      if (sol.optimal()) {
        worst_obj = std::max(worst_obj, err);
        worst_res = std::max(worst_res, res);
      }
      if (sol.optimal() && err <= 1e-6 && res <= 1e-8) ++good;
    }
  }
  o.check(good == total, std::to_string(good) + "/" + std::to_string(total) + " planted problems (worst obj error " +
                             fmt6(worst_obj) + ", residual " + fmt6(worst_res) + ")");

  std::normal_distribution<double> g;
  double worst_moreau = 0;
  for (int t = 0; t < 1000; ++t) {
    const fixtures::Vec3 z{g(rng), g(rng), g(rng)};
    const auto p = conic::project_exp(z);
    const auto d = fixtures::oracle_project_exp_dual({-z[0], -z[1], -z[2]});
    const fixtures::Vec3 r{z[0] - p[0] + d[0], z[1] - p[1] + d[1], z[2] - p[2] + d[2]};
    worst_moreau = std::max({worst_moreau, std::sqrt(fixtures::dot3(r, r)), std::abs(fixtures::dot3(p, d))});
  }
  o.check(worst_moreau <= 1e-9, "exp-cone Moreau residual " + fmt6(worst_moreau) + " over 1000 points");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::err);

  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "worked projection regression", criterion1},
      {2, "CHSH anchors", criterion2},
      {3, "negativity anchors", criterion3},
      {4, "negativity study, tau1.25 source, level 2", criterion4},
      {5, "L1 convergence slopes", criterion5},
      {6, "CHSH bias direction and MSE slope", criterion6},
      {7, "estimator contracts", criterion7},
      {8, "solver suite", criterion8},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && only != c.id) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s: %s [%.1f s] %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.str().c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  if (only == 0 || only == 9) {
    std::printf("criterion 9 DECLARED: full-scale sweeps (R = 1e4, N up to 1e10) not run; criteria 4-6 are the scaled "
                "substitutes\n");
  }
  return failed;
}
