#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tracetree/detection.hpp"
#include "tracetree/synth.hpp"
#include "tracetree/trace_model.hpp"

namespace tracetree {

/// A finding joined with everything a reader (or a downstream model) needs:
/// the original function name, the owning worker and thread domain.
struct ResolvedFinding {
  AnomalyFinding finding;
  std::string function_name;
  std::int64_t worker_pid = 0;
  std::int64_t tid = 0;
  ThreadRole domain = ThreadRole::Unknown;
  std::int64_t start_ns = 0;
  std::int64_t duration_ns = 0;
};

struct ReportDiagnostics {
  std::size_t total_events = 0;
  std::size_t skipped_events = 0;
  std::size_t unmatched_begin = 0;
  std::size_t unmatched_end = 0;
  std::size_t ignored_phases = 0;
  std::size_t crossing_intervals = 0;
};

struct AnalysisReport {
  std::vector<std::pair<std::string, std::string>> task_config;
  std::vector<ResolvedFinding> findings;  // canonical order
  std::optional<std::string> metric_summary;
  std::optional<Scores> scores;
  ReportDiagnostics diagnostics;
};

class ReportIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Renders the plain-text handoff document: task configuration, anomalous
/// events grouped by thread domain with original function names, then the
/// metric summary. Pure and byte-stable, so outputs can be pinned as golden
/// files.
std::string render_template(const AnalysisReport& report);

std::string report_to_json(const AnalysisReport& report);
AnalysisReport report_from_json(const std::string& text);

void write_report_json(const AnalysisReport& report, const std::string& path);
AnalysisReport read_report_json(const std::string& path);

}  // namespace tracetree
