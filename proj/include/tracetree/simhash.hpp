#pragma once

#include <cstdint>
#include <span>

#include "tracetree/trace_model.hpp"
#include "tracetree/trace_tree.hpp"

namespace tracetree {

/// SimHash over the multiset of (depth, function name) features, one per
/// node. Depends only on structure and names; never on timing. `events`
/// must be the id-indexed corpus table the tree refers into.
std::uint64_t simhash_tree(const TraceTree& tree,
                           std::span<const TraceEvent> events);

int hamming_distance(std::uint64_t a, std::uint64_t b);

/// Greedy leader clustering in input order: a tree joins the first cluster
/// whose representative (the cluster's first tree) lies within
/// `sigma_bits` Hamming distance, otherwise founds a new cluster. Fills in
/// each tree's signature. Returns the number of clusters.
std::size_t assign_str_ids(std::span<TraceTree> trees,
                           std::span<const TraceEvent> events, int sigma_bits);

}  // namespace tracetree
