#include "tracetree/trace_tree.hpp"

namespace tracetree {

namespace {

TreeBuildResult build_flat(const ThreadGroup& group) {
  TreeBuildResult result;
  result.trees.reserve(group.events.size());
  for (const TraceEvent& event : group.events) {
    TraceTree tree;
    tree.pid = group.pid;
    tree.tid = group.tid;
    tree.role = group.role;
    tree.nodes.push_back(TreeNode{event.id, -1, 0, {}});
    result.trees.push_back(std::move(tree));
  }
  return result;
}

TreeBuildResult build_nested(const ThreadGroup& group) {
  TreeBuildResult result;

  struct Open {
    std::uint32_t node = 0;
    std::int64_t end_ns = 0;
  };
  std::vector<Open> stack;
  TraceTree current;
  current.pid = group.pid;
  current.tid = group.tid;
  current.role = group.role;

  auto flush = [&result, &group, &current]() {
    if (!current.nodes.empty()) {
      result.trees.push_back(std::move(current));
      current = TraceTree{};
      current.pid = group.pid;
      current.tid = group.tid;
      current.role = group.role;
    }
  };

  for (const TraceEvent& event : group.events) {
    while (!stack.empty() && stack.back().end_ns <= event.start_ns) {
      stack.pop_back();
    }
    if (stack.empty()) {
      flush();
      current.nodes.push_back(TreeNode{event.id, -1, 0, {}});
      current.max_depth = 0;
    } else {
      const std::uint32_t parent = stack.back().node;
      if (event.end_ns() > stack.back().end_ns) {
        ++result.crossing_intervals;
      }
      const auto index = static_cast<std::uint32_t>(current.nodes.size());
      const std::uint32_t depth = current.nodes[parent].depth + 1;
      current.nodes.push_back(
          TreeNode{event.id, static_cast<std::int32_t>(parent), depth, {}});
      current.nodes[parent].children.push_back(index);
      if (depth > current.max_depth) current.max_depth = depth;
    }
    stack.push_back(
        Open{static_cast<std::uint32_t>(current.nodes.size() - 1), event.end_ns()});
  }
  flush();
  return result;
}

}  // namespace

TreeBuildResult build_trace_trees(const ThreadGroup& group) {
  switch (group.role) {
    case ThreadRole::CudaKernel:
    case ThreadRole::NcclComm:
    case ThreadRole::System:
      return build_flat(group);
    case ThreadRole::PythonScheduling:
    case ThreadRole::Unknown:
      return build_nested(group);
  }
  return build_nested(group);
}

std::vector<EventId> layer(const TraceTree& tree, std::uint32_t layer) {
  std::vector<EventId> ids;
  if (layer > tree.max_depth) return ids;
  for (const TreeNode& node : tree.nodes) {
    if (node.depth == layer) ids.push_back(node.event_id);
  }
  return ids;
}

}  // namespace tracetree
