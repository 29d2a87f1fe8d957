#include "direg/montecarlo.hpp"

#include "direg/error.hpp"
#include "direg/json_io.hpp"
#include "direg/npa.hpp"
#include "direg/projection.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

namespace direg::mc {

namespace {

using nlohmann::json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

json solver_to_json(const conic::SolverOptions& o) {
  return {{"eps_abs", o.eps_abs},     {"eps_rel", o.eps_rel}, {"max_iters", o.max_iters},
          {"accept_tol", o.accept_tol}, {"scale", o.scale},   {"adaptive_scale", o.adaptive_scale}};
}

conic::SolverOptions solver_from_json(const json& j, conic::SolverOptions o) {
  o.eps_abs = j.value("eps_abs", o.eps_abs);
  o.eps_rel = j.value("eps_rel", o.eps_rel);
  o.max_iters = j.value("max_iters", o.max_iters);
  o.accept_tol = j.value("accept_tol", o.accept_tol);
  o.scale = j.value("scale", o.scale);
  o.adaptive_scale = j.value("adaptive_scale", o.adaptive_scale);
  return o;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Negativity of a (nominally feasible) estimate.  White noise is mixed in only
// when the direct solve rejects the point.
double negativity_metric(const Behavior& p, int level, const StudyConfig& cfg) {
  if (p.min_entry() < 0) return kNan;
  try {
    return negativity_bound(p, level, NegativityObjective::IdentityEntry, cfg.negativity_solver).bound;
  } catch (const Error&) {
  }
  try {
    const RestoredBehavior q = restore_feasibility_auto(p, level, cfg.max_restore_eps, 1e-9, cfg.negativity_solver);
    return negativity_bound(q.behavior, level, NegativityObjective::IdentityEntry, cfg.negativity_solver).bound;
  } catch (const Error& e) {
    spdlog::debug("negativity metric: {}", e.what());
    return kNan;
  }
}

struct Context {
  const StudyConfig& cfg;
  Behavior truth;
  std::vector<std::optional<BellFunctional>> functionals;
};

double metric_value(const Context& ctx, const MetricSpec& m, std::size_t k, const Behavior& p) {
  switch (m.kind) {
    case MetricSpec::Kind::L1ToTruth: return lp_distance(p, ctx.truth, Norm::L1);
    case MetricSpec::Kind::KlToTruth: return p.min_entry() < 0 ? kNan : kl_divergence(ctx.truth, p);
    case MetricSpec::Kind::Bell: return evaluate_functional(*ctx.functionals[k], p);
    case MetricSpec::Kind::Negativity: return negativity_metric(p, m.level, ctx.cfg);
  }
  return kNan;
}

std::vector<StudyRecord> run_task(const Context& ctx, std::size_t task) {
  const StudyConfig& cfg = ctx.cfg;
  const std::int64_t n = cfg.n_trials[task / static_cast<std::size_t>(cfg.reps)];
  const int rep = static_cast<int>(task % static_cast<std::size_t>(cfg.reps));
  const FrequencyTable f = sample_frequencies(ctx.truth, n, derive_seed(cfg.seed, static_cast<std::uint64_t>(n),
                                                                        static_cast<std::uint64_t>(rep)));
  std::vector<StudyRecord> out;
  for (const EstimatorSpec& e : cfg.estimators) {
    std::optional<Behavior> p;
    try {
      p = e.raw ? f.relative_frequencies() : estimate(f, e.method, e.target, cfg.solver).p_reg;
    } catch (const Error& err) {
      spdlog::warn("{} at N={} rep {}: {}", e.id(), n, rep, err.what());
    }
    for (std::size_t k = 0; k < cfg.metrics.size(); ++k) {
      const double v = p ? metric_value(ctx, cfg.metrics[k], k, *p) : kNan;
      out.push_back({e.id(), n, rep, cfg.metrics[k].id(), v});
    }
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n_trials, std::uint64_t rep) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ n_trials;
  h = splitmix64(s);
  s = h ^ rep;
  return splitmix64(s);
}

FrequencyTable sample_frequencies(const Behavior& p, std::int64_t n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw ValidationError("sample_frequencies: N_trials must be >= 1");
  if (p.min_entry() < -1e-12 || p.normalization_error() > 1e-9) {
    throw ValidationError("sample_frequencies: source behavior is unphysical");
  }
  if (is_nonsignaling(p, 1e-9).max_violation > 1e-9) throw ValidationError("sample_frequencies: source is signaling");
  const Scenario& s = p.scenario();
  const std::size_t block = static_cast<std::size_t>(s.outputs_a * s.outputs_b);
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> counts(s.dimension(), 0);
  for (std::size_t k = 0; k < s.settings(); ++k) {
    std::int64_t left = n_trials;
    double mass = 1.0;
    for (std::size_t c = 0; c + 1 < block && left > 0; ++c) {
      const double pc = std::max(0.0, p.values()[static_cast<Eigen::Index>(k * block + c)]);
      const double q = mass > 0 ? std::clamp(pc / mass, 0.0, 1.0) : 1.0;
      const std::int64_t draw = std::binomial_distribution<std::int64_t>(left, q)(rng);
      counts[k * block + c] = draw;
      left -= draw;
      mass -= pc;
    }
    counts[k * block + block - 1] += left;
  }
  return FrequencyTable(s, std::move(counts));
}

std::string EstimatorSpec::id() const {
  if (raw) return "raw";
  if (method == Method::Projection) return "projection";
  return to_string(method) + ":" + to_string(target);
}

EstimatorSpec EstimatorSpec::parse(const std::string& text, const Target& default_target) {
  EstimatorSpec e;
  if (text == "raw") {
    e.raw = true;
    return e;
  }
  const auto colon = text.find(':');
  e.method = method_from_string(text.substr(0, colon));
  e.target = colon == std::string::npos ? default_target : target_from_string(text.substr(colon + 1));
  return e;
}

std::string MetricSpec::id() const {
  switch (kind) {
    case Kind::L1ToTruth: return "l1_to_truth";
    case Kind::KlToTruth: return "kl_to_truth";
    case Kind::Bell: return "bell:" + functional;
    case Kind::Negativity: return "negativity:" + std::to_string(level);
  }
  return "?";
}

MetricSpec MetricSpec::parse(const std::string& text) {
  MetricSpec m;
  if (text == "l1_to_truth") return m;
  if (text == "kl_to_truth") {
    m.kind = Kind::KlToTruth;
    return m;
  }
  if (text.rfind("bell:", 0) == 0 && text.size() > 5) {
    m.kind = Kind::Bell;
    m.functional = text.substr(5);
    return m;
  }
  if (text == "negativity:1" || text == "negativity:2") {
    m.kind = Kind::Negativity;
    m.level = text.back() - '0';
    return m;
  }
  throw ValidationError("unknown metric '" + text +
                        "' (expected l1_to_truth, kl_to_truth, bell:<functional> or negativity:<1|2>)");
}

conic::SolverOptions StudyConfig::study_negativity_options() {
  conic::SolverOptions o = negativity_solver_options();
  o.eps_abs = o.eps_rel = 1e-7;
  o.max_iters = 20000;
  return o;
}

void StudyConfig::validate() const {
  if (reps < 1) throw ValidationError("study: reps must be >= 1");
  if (n_trials.empty()) throw ValidationError("study: empty N_trials grid");
  for (auto n : n_trials) {
    if (n < 1) throw ValidationError("study: N_trials entries must be >= 1");
  }
  if (estimators.empty()) throw ValidationError("study: no estimators");
  if (metrics.empty()) throw ValidationError("study: no metrics");
  if (jobs < 1) throw ValidationError("study: jobs must be >= 1");
  if (!(max_restore_eps >= 0 && max_restore_eps <= 1)) throw ValidationError("study: max_restore_eps outside [0, 1]");
}

StudyConfig study_config_from_json(const json& j) {
  StudyConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::vector<std::string> known{"source",  "n_trials", "reps", "estimators",        "target",
                                                "metrics", "seed",     "jobs", "solver",            "negativity_solver",
                                                "max_restore_eps"};
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ValidationError("study config: unknown key '" + it.key() + "'");
    }
  }
  try {
    cfg.source = j.value("source", cfg.source);
    if (j.contains("n_trials")) cfg.n_trials = j.at("n_trials").get<std::vector<std::int64_t>>();
    cfg.reps = j.value("reps", cfg.reps);
    const Target target = target_from_string(j.value("target", std::string("q1")));
    for (const auto& e : j.value("estimators", std::vector<std::string>{"projection", "ls", "ml"})) {
      cfg.estimators.push_back(EstimatorSpec::parse(e, target));
    }
    for (const auto& m : j.value("metrics", std::vector<std::string>{"l1_to_truth"})) {
      cfg.metrics.push_back(MetricSpec::parse(m));
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (j.contains("solver")) cfg.solver = solver_from_json(j.at("solver"), cfg.solver);
    if (j.contains("negativity_solver")) {
      cfg.negativity_solver = solver_from_json(j.at("negativity_solver"), cfg.negativity_solver);
    }
    cfg.max_restore_eps = j.value("max_restore_eps", cfg.max_restore_eps);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("study config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const StudyConfig& cfg) {
  json est = json::array(), met = json::array();
  for (const auto& e : cfg.estimators) est.push_back(e.id());
  for (const auto& m : cfg.metrics) met.push_back(m.id());
  return {{"source", cfg.source},
          {"n_trials", cfg.n_trials},
          {"reps", cfg.reps},
          {"estimators", est},
          {"metrics", met},
          {"seed", cfg.seed},
          {"jobs", cfg.jobs},
          {"solver", solver_to_json(cfg.solver)},
          {"negativity_solver", solver_to_json(cfg.negativity_solver)},
          {"max_restore_eps", cfg.max_restore_eps}};
}

std::map<std::string, double> metric_truths(const StudyConfig& cfg) {
  const Behavior truth = load_behavior(cfg.source);
  std::map<std::string, double> out;
  for (const auto& m : cfg.metrics) {
    double v = 0.0;
    if (m.kind == MetricSpec::Kind::Bell) v = evaluate_functional(load_functional(m.functional), truth);
    if (m.kind == MetricSpec::Kind::Negativity) {
      try {
        v = negativity_bound(truth, m.level).bound;
      } catch (const Error& e) {
        spdlog::warn("negativity of the source: {}", e.what());
        v = kNan;
      }
    }
    out[m.id()] = v;
  }
  return out;
}

std::size_t task_count(const StudyConfig& cfg) { return cfg.n_trials.size() * static_cast<std::size_t>(cfg.reps); }

std::vector<StudyRecord> run_study(const StudyConfig& cfg, const RecordSink& sink, std::size_t skip_tasks) {
  cfg.validate();
  Context ctx{cfg, load_behavior(cfg.source), {}};
  for (const auto& m : cfg.metrics) {
    ctx.functionals.push_back(m.kind == MetricSpec::Kind::Bell ? std::optional(load_functional(m.functional))
                                                                : std::nullopt);
  }
  // Structures are cached lazily; build them before the workers start.
  for (const auto& e : cfg.estimators) {
    if (!e.raw && e.target.kind == Target::Kind::Relaxation) moment_structure(ctx.truth.scenario(), e.target.level);
  }
  for (const auto& m : cfg.metrics) {
    if (m.kind == MetricSpec::Kind::Negativity) moment_structure(ctx.truth.scenario(), m.level);
  }

  const std::size_t total = task_count(cfg);
  const std::size_t first = std::min(skip_tasks, total);
  std::vector<std::optional<std::vector<StudyRecord>>> done(total - first);
  std::vector<StudyRecord> all;
  std::atomic<std::size_t> next{first};
  std::size_t flushed = first;
  std::mutex mu;
  std::exception_ptr failure;

  const auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= total) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        auto recs = run_task(ctx, t);
        std::lock_guard lock(mu);
        done[t - first] = std::move(recs);
        while (flushed < total && done[flushed - first]) {
          auto& r = *done[flushed - first];
          if (sink) sink(r);
          all.insert(all.end(), r.begin(), r.end());
          done[flushed - first]->clear();
          ++flushed;
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int width = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(total - first)));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < width; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return all;
}

double percentile(std::vector<double> values, double q) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return kNan;
  if (!(q > 0 && q <= 100)) throw ValidationError("percentile: q must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<SummaryRow> summarize(const std::vector<StudyRecord>& records,
                                  const std::map<std::string, double>& truths) {
  if (records.empty()) throw ValidationError("summarize: no records");
  std::vector<SummaryRow> rows;
  std::vector<std::vector<double>> values;
  std::map<std::tuple<std::string, std::int64_t, std::string>, std::size_t> index;
  for (const auto& r : records) {
    auto [it, fresh] = index.try_emplace({r.estimator, r.n_trials, r.metric}, rows.size());
    if (fresh) {
      SummaryRow row;
      row.estimator = r.estimator;
      row.n_trials = r.n_trials;
      row.metric = r.metric;
      rows.push_back(row);
      values.emplace_back();
    }
    values[it->second].push_back(r.value);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    SummaryRow& row = rows[g];
    std::vector<double> v;
    for (double x : values[g]) {
      if (std::isnan(x)) {
        ++row.failures;
      } else {
        v.push_back(x);
      }
    }
    row.count = static_cast<int>(v.size());
    if (v.empty()) {
      row.mean = row.p10 = row.p90 = row.mse = row.sem = kNan;
      continue;
    }
    const auto t = truths.find(row.metric);
    const double truth = t == truths.end() ? kNan : t->second;
    double sum = 0, sq = 0;
    for (double x : v) {
      sum += x;
      sq += (x - truth) * (x - truth);
    }
    const double n = static_cast<double>(v.size());
    row.mean = sum / n;
    row.mse = sq / n;
    double var = 0;
    for (double x : v) var += (x - row.mean) * (x - row.mean);
    row.sem = v.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    row.p10 = percentile(v, 10);
    row.p90 = percentile(v, 90);
  }
  return rows;
}

double fit_slope(const std::vector<SummaryRow>& summary, const std::string& estimator, const std::string& metric,
                 Statistic stat) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : summary) {
    if (r.estimator != estimator || r.metric != metric) continue;
    const double y = stat == Statistic::Mean ? r.mean : r.mse;
    if (std::isfinite(y) && y > 0) pts.emplace_back(std::log(static_cast<double>(r.n_trials)), std::log(y));
  }
  if (pts.size() < 2) throw ValidationError("fit_slope: need at least two grid points for " + estimator + " " + metric);
  double mx = 0, my = 0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0, sxx = 0;
  for (auto [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  if (sxx == 0) throw ValidationError("fit_slope: all grid points share one N_trials");
  return sxy / sxx;
}

std::string records_csv_header() { return "estimator,n_trials,rep,metric,value"; }

std::string to_csv(const StudyRecord& r) {
  return r.estimator + "," + std::to_string(r.n_trials) + "," + std::to_string(r.rep) + "," + r.metric + "," +
         format_double(r.value);
}

std::string summary_csv_header() { return "estimator,n_trials,metric,mean,p10,p90,mse,sem"; }

std::string to_csv(const SummaryRow& r) {
  return r.estimator + "," + std::to_string(r.n_trials) + "," + r.metric + "," + format_double(r.mean) + "," +
         format_double(r.p10) + "," + format_double(r.p90) + "," + format_double(r.mse) + "," + format_double(r.sem);
}

std::vector<StudyRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != records_csv_header()) {
    throw ValidationError(path.string() + ": missing records header");
  }
  std::vector<StudyRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw ValidationError(path.string() + ": malformed row '" + line + "'");
    try {
      out.push_back({cells[0], std::stoll(cells[1]), std::stoi(cells[2]), cells[3], std::stod(cells[4])});
    } catch (const std::logic_error&) {
      throw ValidationError(path.string() + ": malformed row '" + line + "'");
    }
  }
  return out;
}

std::vector<SummaryRow> run_study_to_dir(const StudyConfig& cfg, const std::filesystem::path& dir, bool resume) {
  cfg.validate();
  std::filesystem::create_directories(dir);
  const auto records_path = dir / "records.csv";
  const auto manifest_path = dir / "manifest.json";
  json config = to_json(cfg);
  config.erase("jobs");  // does not affect results
  const std::size_t per_task = cfg.estimators.size() * cfg.metrics.size();
  const std::size_t total = task_count(cfg);

  std::size_t skip = 0;
  std::vector<StudyRecord> kept;
  if (resume && std::filesystem::exists(manifest_path) && std::filesystem::exists(records_path)) {
    const json old = read_json(manifest_path);
    if (old.value("config", json()) == config) {
      skip = std::min<std::size_t>(old.value("tasks_done", std::size_t{0}), total);
      kept = read_records_csv(records_path);
      if (kept.size() < skip * per_task) skip = kept.size() / per_task;
      kept.resize(skip * per_task);
      spdlog::info("resuming study at task {} of {}", skip, total);
    } else {
      spdlog::warn("manifest in {} belongs to a different config; starting over", dir.string());
    }
  }

  const auto truths = metric_truths(cfg);
  json truth_json = json::object();
  for (const auto& [k, v] : truths) truth_json[k] = std::isfinite(v) ? json(v) : json(nullptr);
  json manifest{{"config", config}, {"truths", truth_json}, {"tasks_total", total}, {"tasks_done", skip},
                {"complete", false}};
  write_json(manifest_path, manifest);

  std::ofstream out(records_path, std::ios::trunc);
  out << records_csv_header() << "\n";
  for (const auto& r : kept) out << to_csv(r) << "\n";
  out.flush();
  std::size_t tasks_done = skip;
  const auto sink = [&](const std::vector<StudyRecord>& recs) {
    for (const auto& r : recs) out << to_csv(r) << "\n";
    out.flush();
    manifest["tasks_done"] = ++tasks_done;
    write_json(manifest_path, manifest);
  };
  auto fresh = run_study(cfg, sink, skip);
  out.close();
  kept.insert(kept.end(), fresh.begin(), fresh.end());

  const auto summary = summarize(kept, truths);
  std::ofstream s(dir / "summary.csv", std::ios::trunc);
  s << summary_csv_header() << "\n";
  int failures = 0;
  for (const auto& r : summary) {
    s << to_csv(r) << "\n";
    failures += r.failures;
  }
  manifest["complete"] = true;
  manifest["failed_records"] = failures;
  write_json(manifest_path, manifest);
  return summary;
}

}  // namespace direg::mc
