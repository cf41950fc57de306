#include "tracetree/simhash.hpp"

#include <array>
#include <bit>
#include <stdexcept>

namespace tracetree {

namespace {

// FNV-1a, prefixed with a fixed seed so signatures are stable across runs
// and machines.
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
constexpr std::uint64_t kSignatureSeed = 0x51ab8f1c27d4e360ULL;

std::uint64_t fnv1a_step(std::uint64_t h, std::uint8_t byte) {
  return (h ^ byte) * kFnvPrime;
}

std::uint64_t feature_hash(std::uint32_t depth, std::string_view name) {
  std::uint64_t h = kFnvOffset;
  for (int shift = 0; shift < 64; shift += 8) {
    h = fnv1a_step(h, static_cast<std::uint8_t>(kSignatureSeed >> shift));
  }
  for (int shift = 0; shift < 32; shift += 8) {
    h = fnv1a_step(h, static_cast<std::uint8_t>(depth >> shift));
  }
  h = fnv1a_step(h, 0x1f);  // separator between depth and name bytes
  for (char c : name) {
    h = fnv1a_step(h, static_cast<std::uint8_t>(c));
  }
  return h;
}

}  // namespace

std::uint64_t simhash_tree(const TraceTree& tree,
                           std::span<const TraceEvent> events) {
  std::array<std::int64_t, 64> bit_sums{};
  for (const TreeNode& node : tree.nodes) {
    const TraceEvent& event = events[static_cast<std::size_t>(node.event_id)];
    const std::uint64_t h = feature_hash(node.depth, event.name);
    for (int bit = 0; bit < 64; ++bit) {
      bit_sums[bit] += ((h >> bit) & 1u) ? 1 : -1;
    }
  }
  std::uint64_t signature = 0;
  for (int bit = 0; bit < 64; ++bit) {
    if (bit_sums[bit] > 0) signature |= (1ULL << bit);
  }
  return signature;
}

int hamming_distance(std::uint64_t a, std::uint64_t b) {
  return std::popcount(a ^ b);
}

std::size_t assign_str_ids(std::span<TraceTree> trees,
                           std::span<const TraceEvent> events, int sigma_bits) {
  if (sigma_bits < 0 || sigma_bits > 64) {
    throw std::invalid_argument("sigma_bits must be in [0, 64]");
  }
  std::vector<std::uint64_t> representatives;
  for (TraceTree& tree : trees) {
    const std::uint64_t h = simhash_tree(tree, events);
    std::uint32_t str_id = 0;
    bool placed = false;
    for (std::size_t c = 0; c < representatives.size(); ++c) {
      if (hamming_distance(h, representatives[c]) <= sigma_bits) {
        str_id = static_cast<std::uint32_t>(c);
        placed = true;
        break;
      }
    }
    if (!placed) {
      str_id = static_cast<std::uint32_t>(representatives.size());
      representatives.push_back(h);
    }
    tree.signature = StructuralSignature{
        h, str_id, static_cast<std::uint32_t>(tree.nodes.size())};
  }
  return representatives.size();
}

}  // namespace tracetree
