#include "tracetree/detection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "tracetree/parallel.hpp"

namespace tracetree {

std::string_view to_string(Dimension d) {
  return d == Dimension::InterWorker ? "inter-worker" : "intra-worker";
}

std::string_view to_string(CausalRole r) {
  return r == CausalRole::RootCandidate ? "root-candidate" : "propagated";
}

std::string_view to_string(FindingKind k) {
  return k == FindingKind::DurationOutlier ? "duration" : "structural";
}

void DetectionConfig::validate() const {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be > 0");
  }
  if (min_group < 2) {
    throw std::invalid_argument("min_group must be >= 2");
  }
}

void mean_and_stddev(std::span<const std::int64_t> values, double& mean,
                     double& stddev) {
  mean = 0.0;
  stddev = 0.0;
  if (values.empty()) return;
  double sum = 0.0;
  for (std::int64_t v : values) sum += static_cast<double>(v);
  mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (std::int64_t v : values) {
    const double d = static_cast<double>(v) - mean;
    sq += d * d;
  }
  stddev = std::sqrt(sq / static_cast<double>(values.size()));
}

std::vector<FlaggedDuration> flag_group(std::span<const DurationSample> samples,
                                        double lambda, std::size_t min_group) {
  std::vector<FlaggedDuration> flagged;
  if (samples.size() < min_group) return flagged;

  std::vector<std::int64_t> durations;
  durations.reserve(samples.size());
  for (const DurationSample& s : samples) durations.push_back(s.duration_ns);

  double mean = 0.0;
  double stddev = 0.0;
  mean_and_stddev(durations, mean, stddev);
  if (!(stddev > 0.0)) return flagged;

  const double threshold = lambda * stddev;
  for (const DurationSample& s : samples) {
    const double dev = std::abs(static_cast<double>(s.duration_ns) - mean);
    if (dev >= threshold) {
      flagged.push_back(FlaggedDuration{s.event_id, dev / stddev});
    }
  }
  return flagged;
}

namespace {

struct NodeRef {
  std::uint32_t tree = 0;  // index into the trees span
  std::uint32_t node = 0;
};

std::uint32_t tree_str_id(const TraceTree& tree) {
  if (!tree.signature) {
    throw std::invalid_argument("detection requires trees with assigned str_ids");
  }
  return tree.signature->str_id;
}

// Layer-by-layer walk over a set of member trees: events at each layer are
// partitioned by function name and tested as one group. Used both for
// cross-worker occurrence groups and for within-worker repetition pools.
void duration_pass(std::span<const std::uint32_t> members,
                   std::span<const TraceTree> trees,
                   std::span<const TraceEvent> events,
                   const DetectionConfig& cfg, Dimension dimension,
                   std::uint32_t str_id,
                   std::vector<AnomalyFinding>& findings) {
  std::vector<NodeRef> current;
  current.reserve(members.size());
  for (std::uint32_t m : members) current.push_back(NodeRef{m, 0});

  std::uint32_t depth = 0;
  while (!current.empty()) {
    std::map<std::string_view, std::vector<std::size_t>> by_name;
    for (std::size_t i = 0; i < current.size(); ++i) {
      const TraceTree& tree = trees[current[i].tree];
      const TraceEvent& ev =
          events[static_cast<std::size_t>(tree.nodes[current[i].node].event_id)];
      by_name[ev.name].push_back(i);
    }

    for (const auto& [name, positions] : by_name) {
      if (positions.size() < cfg.min_group) continue;
      std::vector<std::int64_t> durations;
      durations.reserve(positions.size());
      for (std::size_t i : positions) {
        const TraceTree& tree = trees[current[i].tree];
        durations.push_back(
            events[static_cast<std::size_t>(tree.nodes[current[i].node].event_id)]
                .duration_ns);
      }
      double mean = 0.0;
      double stddev = 0.0;
      mean_and_stddev(durations, mean, stddev);
      if (!(stddev > 0.0)) continue;

      const double threshold = cfg.lambda * stddev;
      for (std::size_t j = 0; j < positions.size(); ++j) {
        const double dev =
            std::abs(static_cast<double>(durations[j]) - mean);
        if (dev < threshold) continue;
        const NodeRef ref = current[positions[j]];
        const TraceTree& tree = trees[ref.tree];
        AnomalyFinding finding;
        finding.event_id = tree.nodes[ref.node].event_id;
        finding.tree_id = tree.tree_id;
        finding.node_index = ref.node;
        finding.depth = depth;
        finding.dimension = dimension;
        finding.kind = FindingKind::DurationOutlier;
        finding.deviation = dev / stddev;
        finding.group = GroupStats{str_id, depth, std::string(name),
                                   mean, stddev, positions.size()};
        findings.push_back(std::move(finding));
      }
    }

    std::vector<NodeRef> next;
    for (const NodeRef& ref : current) {
      const TraceTree& tree = trees[ref.tree];
      for (std::uint32_t child : tree.nodes[ref.node].children) {
        next.push_back(NodeRef{ref.tree, child});
      }
    }
    current = std::move(next);
    ++depth;
  }
}

std::string child_name_key(const TraceTree& tree, std::uint32_t node,
                           std::span<const TraceEvent> events) {
  std::vector<std::string_view> names;
  names.reserve(tree.nodes[node].children.size());
  for (std::uint32_t child : tree.nodes[node].children) {
    names.push_back(
        events[static_cast<std::size_t>(tree.nodes[child].event_id)].name);
  }
  std::sort(names.begin(), names.end());
  std::string key;
  for (std::string_view n : names) {
    key.append(n);
    key.push_back('\x1f');
  }
  return key;
}

void recurse_children(const std::vector<NodeRef>& members,
                      const std::vector<bool>& eligible,
                      std::span<const TraceTree> trees,
                      std::span<const TraceEvent> events, std::uint32_t str_id,
                      std::vector<AnomalyFinding>& findings);

// Recursive majority vote on child-name multisets. Members whose multiset
// differs from the unique majority get a StructuralDiscrepancy at that
// node; ties flag nobody. Recursion continues through members that match
// the reference shape, aligning children by (name, occurrence index).
void structural_pass(const std::vector<NodeRef>& members,
                     const std::vector<bool>& eligible,
                     std::span<const TraceTree> trees,
                     std::span<const TraceEvent> events, std::uint32_t str_id,
                     std::vector<AnomalyFinding>& findings) {
  if (members.size() < 2) return;

  std::vector<std::string> keys(members.size());
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < members.size(); ++i) {
    keys[i] = child_name_key(trees[members[i].tree], members[i].node, events);
    ++counts[keys[i]];
  }
  if (counts.size() > 1) {
    std::size_t best = 0;
    for (const auto& [key, count] : counts) best = std::max(best, count);
    std::size_t holders = 0;
    std::string majority;
    for (const auto& [key, count] : counts) {
      if (count == best) {
        ++holders;
        if (majority.empty() || key < majority) majority = key;
      }
    }
    const bool unique = holders == 1;
    if (unique) {
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (keys[i] == majority || !eligible[i]) continue;
        const TraceTree& tree = trees[members[i].tree];
        AnomalyFinding finding;
        finding.event_id = tree.nodes[members[i].node].event_id;
        finding.tree_id = tree.tree_id;
        finding.node_index = members[i].node;
        finding.depth = tree.nodes[members[i].node].depth;
        finding.dimension = Dimension::InterWorker;
        finding.kind = FindingKind::StructuralDiscrepancy;
        finding.deviation = 0.0;
        finding.group = GroupStats{
            str_id, tree.nodes[members[i].node].depth,
            events[static_cast<std::size_t>(finding.event_id)].name, 0.0, 0.0,
            members.size()};
        findings.push_back(std::move(finding));
      }
    }
    // Recurse through the members that share the reference shape.
    std::vector<NodeRef> matching;
    std::vector<bool> matching_eligible;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (keys[i] == majority) {
        matching.push_back(members[i]);
        matching_eligible.push_back(eligible[i]);
      }
    }
    if (matching.size() < 2) return;
    recurse_children(matching, matching_eligible, trees, events, str_id,
                     findings);
    return;
  }

  recurse_children(members, eligible, trees, events, str_id, findings);
}

void recurse_children(const std::vector<NodeRef>& members,
                      const std::vector<bool>& eligible,
                      std::span<const TraceTree> trees,
                      std::span<const TraceEvent> events, std::uint32_t str_id,
                      std::vector<AnomalyFinding>& findings) {
  if (members.empty()) return;
  // Align children by (name, occurrence index) within each member.
  const TraceTree& first_tree = trees[members[0].tree];
  const TreeNode& first_node = first_tree.nodes[members[0].node];
  if (first_node.children.empty()) return;

  std::map<std::string_view, std::vector<std::vector<std::uint32_t>>> slots;
  // slots[name][member] = child node indices of that name, in order
  for (std::size_t i = 0; i < members.size(); ++i) {
    const TraceTree& tree = trees[members[i].tree];
    for (std::uint32_t child : tree.nodes[members[i].node].children) {
      std::string_view name =
          events[static_cast<std::size_t>(tree.nodes[child].event_id)].name;
      auto& per_member = slots[name];
      if (per_member.empty()) per_member.resize(members.size());
      per_member[i].push_back(child);
    }
  }
  for (const auto& [name, per_member] : slots) {
    std::size_t occurrences = 0;
    for (const auto& list : per_member) {
      occurrences = std::max(occurrences, list.size());
    }
    for (std::size_t occ = 0; occ < occurrences; ++occ) {
      std::vector<NodeRef> tuple;
      std::vector<bool> tuple_eligible;
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (occ < per_member[i].size()) {
          tuple.push_back(NodeRef{members[i].tree, per_member[i][occ]});
          tuple_eligible.push_back(eligible[i]);
        }
      }
      structural_pass(tuple, tuple_eligible, trees, events, str_id, findings);
    }
  }
}

std::vector<std::vector<std::uint32_t>> clusters_by_str_id(
    std::span<const TraceTree> trees) {
  std::uint32_t max_id = 0;
  for (const TraceTree& tree : trees) {
    max_id = std::max(max_id, tree_str_id(tree));
  }
  std::vector<std::vector<std::uint32_t>> clusters(
      trees.empty() ? 0 : max_id + 1);
  for (std::uint32_t i = 0; i < trees.size(); ++i) {
    clusters[tree_str_id(trees[i])].push_back(i);
  }
  return clusters;
}

}  // namespace

std::vector<AnomalyFinding> detect_inter_worker(std::span<const TraceTree> trees,
                                                std::span<const TraceEvent> events,
                                                const DetectionConfig& cfg) {
  cfg.validate();
  std::vector<AnomalyFinding> findings;
  if (trees.empty()) return findings;

  const auto clusters = clusters_by_str_id(trees);

  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& members = clusters[c];
    if (members.empty()) continue;

    // Per-worker occurrence sequences; member order within a pid follows
    // the span order, which the pipeline keeps as (tid, start time).
    std::map<std::int64_t, std::vector<std::uint32_t>> per_pid;
    for (std::uint32_t m : members) per_pid[trees[m].pid].push_back(m);

    std::size_t longest = 0;
    for (const auto& [pid, seq] : per_pid) {
      longest = std::max(longest, seq.size());
    }
    for (std::size_t occ = 0; occ < longest; ++occ) {
      std::vector<std::uint32_t> group;
      for (const auto& [pid, seq] : per_pid) {
        if (occ < seq.size()) group.push_back(seq[occ]);
      }
      if (group.size() < 2) continue;
      duration_pass(group, trees, events, cfg, Dimension::InterWorker,
                    static_cast<std::uint32_t>(c), findings);
      std::vector<NodeRef> roots;
      roots.reserve(group.size());
      for (std::uint32_t m : group) roots.push_back(NodeRef{m, 0});
      structural_pass(roots, std::vector<bool>(group.size(), true), trees,
                      events, static_cast<std::uint32_t>(c), findings);
    }
  }

  // Structural outliers often land in their own tiny cluster. Check them
  // against the largest cluster whose trees share the same root name.
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& members = clusters[c];
    if (members.empty() || members.size() >= cfg.min_group) continue;
    std::string_view root_name =
        events[static_cast<std::size_t>(trees[members[0]].root_event())].name;

    std::size_t best = clusters.size();
    for (std::size_t d = 0; d < clusters.size(); ++d) {
      if (d == c || clusters[d].size() < cfg.min_group) continue;
      std::string_view other_name =
          events[static_cast<std::size_t>(trees[clusters[d][0]].root_event())]
              .name;
      if (other_name != root_name) continue;
      if (best == clusters.size() || clusters[d].size() > clusters[best].size()) {
        best = d;
      }
    }
    if (best == clusters.size()) continue;

    // A bounded reference sample keeps the vote cheap for huge clusters.
    constexpr std::size_t kReferenceSample = 64;
    std::vector<NodeRef> nodes;
    std::vector<bool> eligible;
    for (std::size_t i = 0;
         i < std::min(kReferenceSample, clusters[best].size()); ++i) {
      nodes.push_back(NodeRef{clusters[best][i], 0});
      eligible.push_back(false);
    }
    for (std::uint32_t m : members) {
      nodes.push_back(NodeRef{m, 0});
      eligible.push_back(true);
    }
    structural_pass(nodes, eligible, trees, events,
                    static_cast<std::uint32_t>(c), findings);
  }

  isolate_deepest(findings, trees);
  return findings;
}

std::vector<AnomalyFinding> detect_intra_worker(std::span<const TraceTree> trees,
                                                std::span<const TraceEvent> events,
                                                const DetectionConfig& cfg) {
  cfg.validate();
  std::vector<AnomalyFinding> findings;
  if (trees.empty()) return findings;

  for (const TraceTree& tree : trees) {
    if (tree.pid != trees.front().pid || tree.tid != trees.front().tid) {
      throw std::invalid_argument(
          "detect_intra_worker expects trees from a single (pid, tid)");
    }
  }

  const auto clusters = clusters_by_str_id(trees);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& members = clusters[c];
    if (members.size() < cfg.min_group) continue;
    duration_pass(members, trees, events, cfg, Dimension::IntraWorker,
                  static_cast<std::uint32_t>(c), findings);
  }

  isolate_deepest(findings, trees);
  return findings;
}

void isolate_deepest(std::vector<AnomalyFinding>& findings,
                     std::span<const TraceTree> trees) {
  std::unordered_map<std::uint32_t, std::size_t> tree_index;
  tree_index.reserve(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    tree_index.emplace(trees[i].tree_id, i);
  }

  std::map<std::uint32_t, std::vector<AnomalyFinding*>> per_tree;
  for (AnomalyFinding& f : findings) per_tree[f.tree_id].push_back(&f);

  for (auto& [tree_id, list] : per_tree) {
    auto it = tree_index.find(tree_id);
    if (it == tree_index.end()) {
      throw std::invalid_argument("finding references a tree not in context");
    }
    const TraceTree& tree = trees[it->second];

    std::unordered_set<std::uint32_t> has_flagged_below;
    for (const AnomalyFinding* f : list) {
      std::int32_t p = tree.nodes[f->node_index].parent;
      while (p >= 0) {
        if (!has_flagged_below.insert(static_cast<std::uint32_t>(p)).second) {
          break;  // everything above is already marked
        }
        p = tree.nodes[static_cast<std::uint32_t>(p)].parent;
      }
    }
    for (AnomalyFinding* f : list) {
      f->causal_role = has_flagged_below.contains(f->node_index)
                           ? CausalRole::Propagated
                           : CausalRole::RootCandidate;
    }
  }
}

void sort_findings(std::vector<AnomalyFinding>& findings,
                   std::span<const TraceEvent> events) {
  auto start_of = [&events](const AnomalyFinding& f) {
    return events[static_cast<std::size_t>(f.event_id)].start_ns;
  };
  std::stable_sort(findings.begin(), findings.end(),
                   [&](const AnomalyFinding& a, const AnomalyFinding& b) {
                     if (a.tree_id != b.tree_id) return a.tree_id < b.tree_id;
                     if (a.depth != b.depth) return a.depth < b.depth;
                     const auto sa = start_of(a);
                     const auto sb = start_of(b);
                     if (sa != sb) return sa < sb;
                     if (a.event_id != b.event_id) return a.event_id < b.event_id;
                     if (a.dimension != b.dimension) {
                       return a.dimension < b.dimension;
                     }
                     return a.kind < b.kind;
                   });
}

std::vector<AnomalyFinding> run_detection(std::span<const TraceTree> trees,
                                          std::span<const TraceEvent> events,
                                          const DetectionConfig& cfg,
                                          std::size_t jobs) {
  cfg.validate();

  // Contiguous (pid, tid) ranges; the pipeline orders trees that way.
  struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
  };
  std::vector<Range> threads_ranges;
  for (std::size_t i = 0; i < trees.size();) {
    std::size_t j = i + 1;
    while (j < trees.size() && trees[j].pid == trees[i].pid &&
           trees[j].tid == trees[i].tid) {
      ++j;
    }
    threads_ranges.push_back(Range{i, j});
    i = j;
  }

  struct Task {
    bool inter = false;
    Range range;
  };
  std::vector<Task> tasks;
  if (cfg.inter_worker) tasks.push_back(Task{true, {0, trees.size()}});
  if (cfg.intra_worker) {
    for (const Range& r : threads_ranges) tasks.push_back(Task{false, r});
  }

  auto results = parallel_map<std::vector<AnomalyFinding>>(
      tasks.size(), jobs, [&](std::size_t i) {
        const Task& task = tasks[i];
        std::span<const TraceTree> slice =
            trees.subspan(task.range.begin, task.range.end - task.range.begin);
        return task.inter ? detect_inter_worker(slice, events, cfg)
                          : detect_intra_worker(slice, events, cfg);
      });

  std::vector<AnomalyFinding> merged;
  for (auto& part : results) {
    merged.insert(merged.end(), part.begin(), part.end());
  }
  isolate_deepest(merged, trees);
  sort_findings(merged, events);
  return merged;
}

}  // namespace tracetree
