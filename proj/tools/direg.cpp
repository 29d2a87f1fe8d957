// direg: regularize Bell-experiment frequencies and bound entanglement.
//
// Exit codes: 0 success, 1 usage or invalid input, 2 solver failure,
// 3 input outside the requested set.

#include "direg/canonical.hpp"
#include "direg/error.hpp"
#include "direg/estimators.hpp"
#include "direg/json_io.hpp"
#include "direg/montecarlo.hpp"
#include "direg/npa.hpp"
#include "direg/projection.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>

using namespace direg;
using nlohmann::json;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("direg");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DI_REG_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("DI_REG_LOG={} not recognized; using warn", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw ValidationError("cannot write " + out);
  f << text;
}

void emit(const std::string& out, const json& j) { emit(out, j.dump(2) + "\n"); }

json solution_json(const conic::ConicSolution& s) {
  return {{"status", conic::to_string(s.status)}, {"iterations", s.iterations}, {"relative_error", s.relative_error}};
}


// Counts files keep their per-setting totals; behaviors and canonical names
// are used as relative frequencies with equal setting weights.
struct Input {
  std::optional<FrequencyTable> table;
  Behavior freq = Behavior::uniform(Scenario::chsh());
};

Input load_input(const std::string& name_or_path) {
  Input in;
  const auto& names = canonical_names();
  if (std::find(names.begin(), names.end(), name_or_path) == names.end() && read_json(name_or_path).contains("counts")) {
    in.table = frequencies_from_json(read_json(name_or_path));
    in.freq = in.table->relative_frequencies();
  } else {
    in.freq = load_behavior(name_or_path);
  }
  return in;
}

struct Common {
  std::string out;
  double eps = 0;
  int max_iters = 0;
  double accept_tol = 0;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--out", out, "Output file (default: stdout)");
    app->add_option("--eps", eps, "Solver tolerance eps_abs = eps_rel (default: 1e-9)")->check(CLI::PositiveNumber);
    app->add_option("--max-iters", max_iters, "Solver iteration cap")->check(CLI::PositiveNumber);
    app->add_option("--accept-tol", accept_tol, "Relative error at which an iteration-capped solve is still used (default: 1e-6)")
        ->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Randomize the solver start with this seed (results must not change)");
  }
};

conic::SolverOptions solver_options(conic::SolverOptions o, const Common& c) {
  if (c.eps > 0) o.eps_abs = o.eps_rel = c.eps;
  if (c.max_iters > 0) o.max_iters = c.max_iters;
  if (c.accept_tol > 0) o.accept_tol = c.accept_tol;
  o.seed = c.seed;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Regularize Bell-experiment frequencies into physical behaviors and bound entanglement.\n"
               "Behaviors accept a JSON file ({scenario, p} or {scenario, counts}) or a canonical name: "
               "chsh, chsh90, tau125, mdl, uniform."};
  app.require_subcommand(1);

  // estimate
  auto* est = app.add_subcommand("estimate", "Counts -> regularized behavior (JSON)");
  std::string est_in, est_method = "ml", est_target = "q1";
  Common est_c;
  est->add_option("--in", est_in, "Counts or behavior file, or canonical name")->required();
  est->add_option("--method", est_method, "projection | ml | ls | l1 | linf")->capture_default_str();
  est->add_option("--target", est_target, "ns | q1 | q2")->capture_default_str();
  est_c.add(est);

  // project
  auto* proj = app.add_subcommand("project", "Counts -> nonsignaling projection and signaling residual (JSON)");
  std::string proj_in;
  Common proj_c;
  proj->add_option("--in", proj_in, "Counts or behavior file, or canonical name")->required();
  proj->add_option("--out", proj_c.out, "Output file (default: stdout)");

  // negativity
  auto* neg = app.add_subcommand("negativity", "Behavior -> negativity lower bound and witness (JSON)");
  std::string neg_in;
  int neg_level = 2;
  bool neg_restore = false;
  std::optional<double> neg_alpha;
  double neg_max_restore = 1e-6;
  Common neg_c;
  neg->add_option("--in", neg_in, "Behavior file or canonical name")->required();
  neg->add_option("--level", neg_level, "Relaxation level (1 or 2)")->check(CLI::Range(1, 2))->capture_default_str();
  neg->add_flag("--restore", neg_restore, "Mix in the smallest white noise (eps = 1e-9, 2e-9, ...) that makes the input feasible");
  neg->add_option("--max-restore-eps", neg_max_restore, "Largest noise weight tried by --restore")->capture_default_str();
  neg->add_option("--alpha", neg_alpha, "Witness certifies negativity > alpha (default: 0.99 of the bound)");
  neg_c.add(neg);

  // bell
  auto* bell = app.add_subcommand("bell", "Behavior + functional -> value, local bound, relaxation maximum (JSON)");
  std::string bell_functional = "chsh", bell_behavior;
  int bell_level = 1;
  Common bell_c;
  bell->add_option("--functional", bell_functional, "chsh | tau125 | mdl, or a functional JSON file")->capture_default_str();
  bell->add_option("--behavior,--in", bell_behavior, "Behavior file or canonical name");
  bell->add_option("--level", bell_level, "Relaxation level of the quantum maximum")->check(CLI::Range(1, 2))->capture_default_str();
  bell_c.add(bell);

  // slice
  auto* slice = app.add_subcommand("slice", "Boundary of a 2D slice through a center behavior (CSV)");
  std::string sl_center = "uniform", sl_t1, sl_t2, sl_set = "relaxation";
  int sl_level = 1, sl_angles = 64;
  double sl_nu = 0.0;
  Common sl_c;
  slice->add_option("--center", sl_center, "Behavior inside the set")->capture_default_str();
  slice->add_option("--toward1", sl_t1, "Behavior fixing the first direction (minus center)")->required();
  slice->add_option("--toward2", sl_t2, "Behavior fixing the second direction (minus center)")->required();
  slice->add_option("--set", sl_set, "relaxation | negativity (relaxation points with bound <= --nu)")->capture_default_str();
  slice->add_option("--nu", sl_nu, "Negativity cap for --set negativity")->capture_default_str();
  slice->add_option("--level", sl_level, "Relaxation level")->check(CLI::Range(1, 2))->capture_default_str();
  slice->add_option("--angles", sl_angles, "Number of equally spaced angles")->check(CLI::PositiveNumber)->capture_default_str();
  sl_c.add(slice);

  // study
  auto* study = app.add_subcommand("study", "Monte Carlo study: config JSON -> records.csv, summary.csv, manifest.json");
  std::string st_config, st_out = "study_out";
  std::optional<int> st_jobs;
  std::optional<std::uint64_t> st_seed;
  bool st_resume = false;
  study->add_option("--in,--config", st_config, "Study config JSON")->required();
  study->add_option("--out", st_out, "Output directory")->capture_default_str();
  study->add_option("--jobs", st_jobs, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
  study->add_option("--seed", st_seed, "Master seed (overrides the config)");
  study->add_flag("--resume", st_resume, "Continue an interrupted run in --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*est) {
      const Input in = load_input(est_in);
      const Method method = method_from_string(est_method);
      const Target target = target_from_string(est_target);
      const auto opts = solver_options({}, est_c);
      const EstimateResult r = in.table ? estimate(*in.table, method, target, opts) : estimate(in.freq, method, target, opts);
      json j{{"method", to_string(r.method)},
             {"target", method == Method::Projection ? json(nullptr) : json(to_string(r.target))},
             {"p_reg", to_json(r.p_reg)},
             {"objective", r.objective},
             {"unique", r.unique},
             {"unphysical", r.unphysical},
             {"min_entry", r.p_reg.min_entry()}};
      if (r.solution) j["solver"] = solution_json(*r.solution);
      emit(est_c.out, j);
      spdlog::info("{} estimate to {}: objective {:.6g}", to_string(r.method), to_string(r.target), r.objective);
    } else if (*proj) {
      const Input in = load_input(proj_in);
      const ProjectionResult r = in.table ? project(*in.table) : project(in.freq);
      emit(proj_c.out, json{{"p_ns", to_json(r.p_ns)},
                            {"p_si", to_json(r.p_si)},
                            {"unphysical", r.unphysical},
                            {"min_entry", r.min_entry}});
    } else if (*neg) {
      Behavior p = load_behavior(neg_in);
      const auto opts = solver_options(negativity_solver_options(), neg_c);
      double restore_eps = 0.0;
      if (neg_restore) {
        const RestoredBehavior q = restore_feasibility_auto(p, neg_level, neg_max_restore, 1e-9, opts);
        p = q.behavior;
        restore_eps = q.eps;
      }
      NegativityResult r;
      try {
        r = negativity_bound(p, neg_level, NegativityObjective::IdentityEntry, opts);
      } catch (const InfeasibleInput& e) {
        throw InfeasibleInput(std::string(e.what()) + "; rerun with --restore to mix in white noise");
      }
      json j{{"bound", r.bound}, {"level", r.level}, {"restore_eps", restore_eps}, {"solver", solution_json(r.solution)}};
      if (r.bound > 0 && r.solution.acceptable(r.accept_tol)) {
        const NegativityWitness w = witness_from_dual(r, neg_alpha);
        j["witness"] = to_json(w.functional, w.threshold);
        j["witness"]["alpha"] = w.alpha;
        j["witness"]["value_at_input"] = evaluate_functional(w.functional, p);
      } else {
        j["witness"] = nullptr;
      }
      emit(neg_c.out, j);
    } else if (*bell) {
      const BellFunctional f = load_functional(bell_functional);
      const auto opts = solver_options({}, bell_c);
      json j{{"functional", f.name}};
      if (!bell_behavior.empty()) j["value"] = evaluate_functional(f, load_behavior(bell_behavior));
      j["local_bound"] = local_bound(f);
      const RelaxationMaximum m = relaxation_maximum(f, bell_level, opts);
      j["quantum_max"] = {{"level", bell_level}, {"value", m.value}, {"solver", solution_json(m.solution)}};
      emit(bell_c.out, j);
    } else if (*slice) {
      const Behavior center = load_behavior(sl_center);
      SliceOptions so;
      so.level = sl_level;
      if (sl_set == "negativity") {
        so.set = SliceSet::BoundedNegativity;
        so.nu = sl_nu;
      } else if (sl_set != "relaxation") {
        throw ValidationError("unknown --set '" + sl_set + "' (expected relaxation or negativity)");
      }
      so.solver = solver_options(so.solver, sl_c);
      const Eigen::VectorXd d1 = load_behavior(sl_t1).values() - center.values();
      const Eigen::VectorXd d2 = load_behavior(sl_t2).values() - center.values();
      std::vector<double> angles;
      for (int k = 0; k < sl_angles; ++k) angles.push_back(2 * std::numbers::pi * k / sl_angles);
      std::string csv = "angle,radius,x,y,status\n";
      for (const SlicePoint& pt : slice_boundary(center, d1, d2, angles, so)) {
        csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{}\n", pt.angle, pt.radius, pt.radius * std::cos(pt.angle),
                           pt.radius * std::sin(pt.angle), conic::to_string(pt.status));
      }
      emit(sl_c.out, csv);
    } else if (*study) {
      mc::StudyConfig cfg = mc::study_config_from_json(read_json(st_config));
      if (st_jobs) cfg.jobs = *st_jobs;
      if (st_seed) cfg.seed = *st_seed;
      const auto summary = mc::run_study_to_dir(cfg, st_out, st_resume);
      std::cout << mc::summary_csv_header() << "\n";
      for (const auto& r : summary) std::cout << mc::to_csv(r) << "\n";
    }
  } catch (const InfeasibleInput& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const SolverError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
