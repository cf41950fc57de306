#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tracetree/detection.hpp"
#include "tracetree/report.hpp"
#include "tracetree/synth.hpp"
#include "tracetree/trace_parse.hpp"
#include "tracetree/trace_tree.hpp"

namespace tracetree {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::vector<std::string> trace_files;  // explicit list wins over trace_dir
  std::string trace_dir;
  TimeUnit time_unit = TimeUnit::Microseconds;
  std::vector<RoleRule> role_rules = default_role_rules();
  int sigma_bits = 3;
  DetectionConfig detection;
  std::string report_out;
  std::string template_out;
  std::string ground_truth_path;
  bool lenient = true;
  std::size_t jobs = 0;  // 0 = available parallelism
  std::vector<std::pair<std::string, std::string>> task_config;
  std::optional<std::string> metric_summary;
  std::optional<ScenarioSpec> scenario;
  std::vector<FaultSpec> faults;
  std::string out_dir = ".";
};

/// Reads a run-config JSON document (schema in the README).
RunConfig load_run_config(const std::string& path);
void apply_config_json(RunConfig& config, const std::string& json_text);
void validate(const RunConfig& config);  // throws ConfigError

struct Corpus {
  std::vector<TraceEvent> events;  // event.id == index
  std::map<ThreadKey, std::string> thread_names;
  ParseStats stats;
  std::vector<std::string> files;
};

/// All *.json files in `dir`, ordered with embedded numbers compared
/// numerically so worker_10 follows worker_9.
std::vector<std::string> list_trace_files(const std::string& dir);
bool natural_less(std::string_view a, std::string_view b);

/// Parses files (concurrently up to `jobs`) and renumbers ids so the corpus
/// is one contiguous, file-ordered id space.
Corpus load_corpus(const std::vector<std::string>& files, TimeUnit unit,
                   std::size_t jobs);

struct DetectionOutput {
  AnalysisReport report;
  std::vector<AnomalyFinding> findings;
  std::vector<TraceTree> trees;  // canonical order, tree_id == index
  std::size_t cluster_count = 0;
};

/// Full pipeline: ingest, group, build trees, hash, detect, resolve, score
/// (when ground truth is configured), and write the report/template files
/// when their paths are set.
DetectionOutput run_detect(const RunConfig& config);

int cmd_detect(const RunConfig& config);  // 0 clean, 2 findings
int cmd_synth(const RunConfig& config);
int cmd_score(const RunConfig& config);  // report_out names the report to score
void dump_trees(const RunConfig& config, std::ostream& out);

}  // namespace tracetree
