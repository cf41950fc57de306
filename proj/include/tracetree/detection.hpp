#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tracetree/trace_model.hpp"
#include "tracetree/trace_tree.hpp"

namespace tracetree {

enum class Dimension { InterWorker, IntraWorker };
enum class CausalRole { RootCandidate, Propagated };
enum class FindingKind { DurationOutlier, StructuralDiscrepancy };

std::string_view to_string(Dimension d);
std::string_view to_string(CausalRole r);
std::string_view to_string(FindingKind k);

struct DetectionConfig {
  double lambda = 3.0;       // deviations of the population stddev to flag
  std::size_t min_group = 3;  // below this, groups are statistically silent
  bool inter_worker = true;
  bool intra_worker = true;

  void validate() const;  // throws std::invalid_argument
};

/// Statistics of the (str_id, layer, name) group a finding was tested in.
struct GroupStats {
  std::uint32_t str_id = 0;
  std::uint32_t layer = 0;
  std::string name;
  double mean_ns = 0.0;
  double stddev_ns = 0.0;
  std::size_t n = 0;
};

struct AnomalyFinding {
  EventId event_id = 0;
  std::uint32_t tree_id = 0;
  std::uint32_t node_index = 0;
  std::uint32_t depth = 0;
  Dimension dimension = Dimension::InterWorker;
  FindingKind kind = FindingKind::DurationOutlier;
  CausalRole causal_role = CausalRole::RootCandidate;
  double deviation = 0.0;  // |dur - mean| / stddev; 0 for structural findings
  GroupStats group;
};

struct DurationSample {
  EventId event_id = 0;
  std::int64_t duration_ns = 0;
};

struct FlaggedDuration {
  EventId event_id = 0;
  double deviation = 0.0;
};

/// Population mean / population standard deviation over `values`.
void mean_and_stddev(std::span<const std::int64_t> values, double& mean,
                     double& stddev);

/// Flags members whose duration deviates from the group's population mean
/// by at least lambda population standard deviations. Groups smaller than
/// min_group, or with zero spread, flag nothing.
std::vector<FlaggedDuration> flag_group(std::span<const DurationSample> samples,
                                        double lambda, std::size_t min_group);

/// Compares same-structure trees across workers (distinct pids): the k-th
/// occurrence of each structure per worker is placed side by side, walked
/// layer by layer with per-name duration tests, and checked for child-set
/// discrepancies against the member majority. Trees must carry str_ids.
std::vector<AnomalyFinding> detect_inter_worker(std::span<const TraceTree> trees,
                                                std::span<const TraceEvent> events,
                                                const DetectionConfig& cfg);

/// Compares repeated same-structure trees within one thread: all
/// occurrences of a structure are pooled and walked layer by layer with
/// per-name duration tests. `trees` must come from a single (pid, tid).
std::vector<AnomalyFinding> detect_intra_worker(std::span<const TraceTree> trees,
                                                std::span<const TraceEvent> events,
                                                const DetectionConfig& cfg);

/// A finding stays RootCandidate iff no other finding in the same tree sits
/// strictly below it; ancestors of flagged nodes become Propagated.
void isolate_deepest(std::vector<AnomalyFinding>& findings,
                     std::span<const TraceTree> trees);

/// Canonical order: (tree id, depth, start time, event id, dimension, kind).
void sort_findings(std::vector<AnomalyFinding>& findings,
                   std::span<const TraceEvent> events);

/// Runs the configured dimensions over a full corpus tree set (tree_id must
/// equal the index into `trees`), resolves causal roles across the combined
/// finding set, and returns findings in canonical order. `jobs` bounds the
/// worker threads used for per-thread detection tasks.
std::vector<AnomalyFinding> run_detection(std::span<const TraceTree> trees,
                                          std::span<const TraceEvent> events,
                                          const DetectionConfig& cfg,
                                          std::size_t jobs = 1);

}  // namespace tracetree
