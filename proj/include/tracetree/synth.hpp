#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tracetree/detection.hpp"
#include "tracetree/trace_model.hpp"

namespace tracetree {

struct KernelSpec {
  std::string name;
  std::int64_t base_ns = 0;
};

struct ModelShape {
  std::size_t layers = 4;
  std::vector<KernelSpec> kernels;  // one template shared by all layers
  std::int64_t collective_ns = 800'000;
  std::int64_t prep_ns = 300'000;
  std::int64_t launch_overhead_ns = 20'000;
  std::int64_t gap_ns = 8'000;
};

ModelShape default_model_shape();

/// Shape of a generated multi-worker run. Identical (spec, faults) input
/// reproduces byte-identical files: the noise source is mt19937_64 plus a
/// clamped Irwin-Hall(12) bell curve, so no libm-dependent sampling is
/// involved.
struct ScenarioSpec {
  std::size_t workers = 8;
  std::size_t iterations = 50;
  ModelShape model = default_model_shape();
  double jitter = 0.02;  // relative noise, hard-clamped at 2 sigma
  std::uint64_t seed = 1;

  void validate() const;  // throws SynthError
};

enum class FaultKind {
  GpuThrottle,
  BandwidthCongestion,
  MemoryPressure,
  TransientStall,
  DroppedKernel,
  GlobalPowerCap,
};

std::string_view to_string(FaultKind kind);
FaultKind fault_kind_from_string(std::string_view text);

inline constexpr int kAllWorkers = -1;

struct FaultSpec {
  FaultKind kind = FaultKind::GpuThrottle;
  int target = kAllWorkers;   // worker index, or kAllWorkers
  double magnitude = 0.0;     // duration multiplier, > 1
  std::int64_t delay_ns = 0;  // absolute alternative for TransientStall
  std::size_t window_begin = 0;  // [begin, end) iterations; 0,0 = whole run
  std::size_t window_end = 0;
  std::size_t layer = 0;   // site for TransientStall / DroppedKernel
  std::size_t kernel = 0;
};

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GroundTruthLabel {
  int worker = 0;
  EventId event_id = 0;
  FaultKind kind = FaultKind::GpuThrottle;
};

/// Fault origins plus the events whose durations shifted only as a side
/// effect (waits on slowed peers, stretched enclosing ops). Lenient scoring
/// treats flags on the propagated set as neither hits nor false alarms.
struct GroundTruth {
  std::vector<GroundTruthLabel> labels;
  std::vector<std::pair<int, EventId>> propagated;
};

void write_ground_truth(const GroundTruth& truth, const std::string& path);
GroundTruth read_ground_truth(const std::string& path);

struct SynthResult {
  std::vector<std::string> files;  // worker_<i>.trace.json, worker order
  std::string ground_truth_path;
  GroundTruth truth;
  std::size_t total_events = 0;
  std::unordered_map<EventId, std::uint32_t> iteration_of;  // every event
};

/// Writes one trace file per worker plus ground_truth.json into `out_dir`.
/// Event ids in the ground truth assume the files are later ingested in
/// worker order with cumulative id offsets, which is what the corpus
/// loader's natural path ordering produces.
SynthResult generate(const ScenarioSpec& spec, std::span<const FaultSpec> faults,
                     const std::string& out_dir);

class ScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scores {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 0.0;
  double fpr = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Event-level scoring of a finding set against ground truth. Findings
/// referencing ids outside [0, total_events) raise ScoreError.
Scores score(std::span<const AnomalyFinding> findings, const GroundTruth& truth,
             std::size_t total_events, bool lenient);

}  // namespace tracetree
