#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchsearch/episode.hpp"

namespace sketchsearch {

/// One experimental condition: a JSON patch over the base episode config.
struct Arm {
  std::string name;
  nlohmann::json overrides = nlohmann::json::object();
  int episodes = 10;
  std::uint64_t base_seed = 1;  // episode i runs with seed base_seed + i
  std::map<std::string, std::string> axes;  // sweep coordinates, for marginals
};

struct ExperimentConfig {
  std::string name = "experiment";
  nlohmann::json base = nlohmann::json::object();
  std::vector<Arm> arms;
  std::optional<std::string> control;  // arm the others are tested against
  int threads = 1;
  bool write_logs = false;

  /// Arms expanded from a "sweep" block: the cartesian product of its axes.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  EpisodeConfig episode_config(const Arm& arm, int index) const;
};

/// Sets a dotted path ("human.eta") inside a JSON object.
void set_path(nlohmann::json& j, const std::string& dotted, const nlohmann::json& value);

struct RunMetrics {
  std::string arm;
  int episode = 0;
  std::uint64_t seed = 0;
  bool captured = false;
  std::optional<double> time_to_capture;
  int queries_asked = 0;
  int queries_answered = 0;
  int sketches = 0;
  int statements = 0;
  int decisions = 0;
  double reward = 0.0;
  std::string error;  // non-empty when the episode failed
};

std::string metrics_csv_header();
std::string to_csv(const RunMetrics& m);
RunMetrics metrics_from_csv(const std::string& line);
std::vector<RunMetrics> read_metrics(const std::filesystem::path& csv);

using Progress = std::function<void(const RunMetrics&, int done, int total)>;

/// Runs every episode of every arm, appending each row to
/// out_dir/metrics.csv as it finishes. Rows already present are kept and
/// their episodes skipped, so an interrupted batch resumes where it stopped.
/// Returns the full table in (arm, episode) order.
std::vector<RunMetrics> run_batch(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                  const Progress& progress = {});

/// In-memory variant without persistence.
std::vector<RunMetrics> run_batch(const ExperimentConfig& config);

/// One-sided Fisher exact test of p1 > p2 (hypergeometric upper tail).
/// Returns 1 when there are no successes or no failures at all.
double binomial_test(int k1, int n1, int k2, int n2);
/// Two-sided Fisher exact test: sum of tables no more likely than observed.
double binomial_test_two_sided(int k1, int n1, int k2, int n2);

struct ArmSummary {
  std::string arm;
  int runs = 0;
  int failures = 0;
  int captures = 0;
  double capture_ratio = 0.0;
  std::optional<double> mean_ttc;
  std::optional<double> median_ttc;
  double mean_queries = 0.0;
  double mean_answers = 0.0;
  double mean_sketches = 0.0;
};

ArmSummary summarize(const std::string& arm, const std::vector<RunMetrics>& rows);
/// One summary per arm, in first-appearance order.
std::vector<ArmSummary> summarize_by_arm(const std::vector<RunMetrics>& rows);

struct Comparison {
  std::string arm;
  std::string control;
  double p_greater = 1.0;    // one-sided, arm > control
  double p_two_sided = 1.0;
};

std::vector<Comparison> compare_to_control(const std::vector<ArmSummary>& summaries, const std::string& control);

/// Capture ratio pooled over every arm sharing each value of `axis`.
std::map<std::string, ArmSummary> marginal(const ExperimentConfig& config, const std::vector<RunMetrics>& rows,
                                           const std::string& axis);

/// Writes summary.csv (and comparisons.csv when a control is set) to out_dir.
void write_report(const ExperimentConfig& config, const std::vector<RunMetrics>& rows,
                  const std::filesystem::path& out_dir);

}  // namespace sketchsearch
