#pragma once

// Simulated Bell experiments: sample frequencies from a source behavior,
// regularize them and aggregate metrics over replications.

#include "direg/bell.hpp"
#include "direg/estimators.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace direg::mc {

/// One step of splitmix64: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed of replication `rep` at grid point `n_trials`: splitmix64 applied to
/// master, then n_trials and rep folded in.  Independent of run order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n_trials, std::uint64_t rep);

/// N_trials draws per setting from P(.,.|x,y), multinomial via successive
/// binomials on an mt19937_64 seeded with `seed`.  Throws ValidationError for
/// unphysical or signaling P.
FrequencyTable sample_frequencies(const Behavior& p, std::int64_t n_trials, std::uint64_t seed);

/// "raw" (the relative frequencies themselves), "projection", or
/// "method:target" such as "ml:q2".  A bare method uses the study target.
struct EstimatorSpec {
  bool raw = false;
  Method method = Method::Projection;
  Target target;

  std::string id() const;
  static EstimatorSpec parse(const std::string& text, const Target& default_target);
};

/// l1_to_truth, kl_to_truth, bell:<functional>, negativity:<level>.
struct MetricSpec {
  enum class Kind { L1ToTruth, KlToTruth, Bell, Negativity } kind = Kind::L1ToTruth;
  std::string functional;
  int level = 2;

  std::string id() const;
  static MetricSpec parse(const std::string& text);
};

struct StudyConfig {
  std::string source = "chsh";
  std::vector<std::int64_t> n_trials{100, 1000, 10000};
  int reps = 200;
  std::vector<EstimatorSpec> estimators;
  std::vector<MetricSpec> metrics;
  std::uint64_t seed = 1;
  int jobs = 1;
  conic::SolverOptions solver;
  /// Used by the negativity metric.
  conic::SolverOptions negativity_solver = study_negativity_options();
  /// Largest white-noise weight tried before a negativity value is reported as nan.
  double max_restore_eps = 1e-6;

  /// eps 1e-7, 20000 iterations, fixed scale: enough for mean negativities at
  /// the 1e-4 level and roughly 3x cheaper than the library default.
  static conic::SolverOptions study_negativity_options();
  void validate() const;
};

StudyConfig study_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StudyConfig& cfg);

/// A failed estimator or metric is recorded with value nan.
struct StudyRecord {
  std::string estimator;
  std::int64_t n_trials = 0;
  int rep = 0;
  std::string metric;
  double value = 0.0;

  bool operator==(const StudyRecord&) const = default;
};

struct SummaryRow {
  std::string estimator;
  std::int64_t n_trials = 0;
  std::string metric;
  double mean = 0.0, p10 = 0.0, p90 = 0.0, mse = 0.0, sem = 0.0;
  /// Finite values used and nan values skipped.
  int count = 0;
  int failures = 0;
};

/// Metric values of the source itself (0 for the distances).  MSE is taken
/// against these.
std::map<std::string, double> metric_truths(const StudyConfig& cfg);

using RecordSink = std::function<void(const std::vector<StudyRecord>&)>;

/// Runs grid points in order, replications in parallel over cfg.jobs threads.
/// All estimators of one (n_trials, rep) share the sampled table.  `sink`
/// receives each task's records in task order; the first `skip_tasks` tasks
/// are not run.  Returns all records produced.
std::vector<StudyRecord> run_study(const StudyConfig& cfg, const RecordSink& sink = {}, std::size_t skip_tasks = 0);

std::size_t task_count(const StudyConfig& cfg);

/// Nearest-rank percentile (0 < q <= 100) of finite values; nan when empty.
double percentile(std::vector<double> values, double q);

/// Groups by (estimator, n_trials, metric) in first-appearance order.
/// Throws ValidationError on an empty record set.
std::vector<SummaryRow> summarize(const std::vector<StudyRecord>& records, const std::map<std::string, double>& truths);

enum class Statistic { Mean, Mse };

/// Least-squares slope of log(stat) against log(n_trials) for one estimator
/// and metric.  Needs at least two grid points with positive finite stat.
double fit_slope(const std::vector<SummaryRow>& summary, const std::string& estimator, const std::string& metric,
                 Statistic stat = Statistic::Mean);

std::string records_csv_header();
std::string to_csv(const StudyRecord& r);
std::string summary_csv_header();
std::string to_csv(const SummaryRow& r);
std::vector<StudyRecord> read_records_csv(const std::filesystem::path& path);

/// Writes records.csv (streamed), summary.csv and manifest.json into `dir`.
/// With `resume`, a matching manifest's completed tasks are kept and skipped.
std::vector<SummaryRow> run_study_to_dir(const StudyConfig& cfg, const std::filesystem::path& dir, bool resume = false);

}  // namespace direg::mc
