#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tracetree/trace_model.hpp"

namespace tracetree {

/// 64-bit structural fingerprint of a tree plus the cluster id assigned to
/// trees whose fingerprints fall within the configured Hamming distance.
struct StructuralSignature {
  std::uint64_t simhash = 0;
  std::uint32_t str_id = 0;
  std::uint32_t feature_count = 0;
};

struct TreeNode {
  EventId event_id = 0;
  std::int32_t parent = -1;  // node index within the tree; -1 for the root
  std::uint32_t depth = 0;
  std::vector<std::uint32_t> children;  // node indices, start-time order
};

/// Nested invocation structure of one thread's events. Nodes are stored in
/// preorder (parents before children, siblings by start time), so node 0 is
/// always the root.
struct TraceTree {
  std::uint32_t tree_id = 0;  // corpus-wide index, assigned by the pipeline
  std::int64_t pid = 0;
  std::int64_t tid = 0;
  ThreadRole role = ThreadRole::Unknown;
  std::vector<TreeNode> nodes;
  std::uint32_t max_depth = 0;
  std::optional<StructuralSignature> signature;

  const TreeNode& root() const { return nodes.front(); }
  EventId root_event() const { return nodes.front().event_id; }
};

struct TreeBuildResult {
  std::vector<TraceTree> trees;  // forest in root start-time order
  std::size_t crossing_intervals = 0;  // partially overlapping pairs seen
};

/// Builds the invocation forest for one thread group. PythonScheduling and
/// Unknown groups get nested trees from interval containment; CudaKernel,
/// NcclComm and System groups are flat, one single-node tree per event.
/// Requires group.events in nesting order (start asc, end desc).
TreeBuildResult build_trace_trees(const ThreadGroup& group);

/// Event ids at depth `layer`; empty beyond the deepest layer.
std::vector<EventId> layer(const TraceTree& tree, std::uint32_t layer);

}  // namespace tracetree
