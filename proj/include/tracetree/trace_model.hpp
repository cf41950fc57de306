#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tracetree {

using EventId = std::uint64_t;

/// One recorded function execution. Timestamps are normalized to
/// nanoseconds at parse time regardless of the source file's unit.
struct TraceEvent {
  EventId id = 0;
  std::string name;
  std::int64_t pid = 0;
  std::int64_t tid = 0;
  std::int64_t start_ns = 0;
  std::int64_t duration_ns = 0;
  std::vector<std::pair<std::string, std::string>> args;

  std::int64_t end_ns() const { return start_ns + duration_ns; }
};

enum class ThreadRole {
  PythonScheduling,
  CudaKernel,
  NcclComm,
  System,
  Unknown,
};

std::string_view to_string(ThreadRole role);
ThreadRole thread_role_from_string(std::string_view text);

/// Ordered, case-insensitive substring rule mapping a thread name to a role.
struct RoleRule {
  std::string pattern;
  ThreadRole role = ThreadRole::Unknown;
};

const std::vector<RoleRule>& default_role_rules();

/// First matching rule wins; empty names and unmatched names are Unknown.
ThreadRole classify_thread_role(std::string_view thread_name,
                                std::span<const RoleRule> rules);

struct ThreadKey {
  std::int64_t pid = 0;
  std::int64_t tid = 0;
  auto operator<=>(const ThreadKey&) const = default;
};

/// All events of one (pid, tid), ordered so that enclosing intervals come
/// first: start ascending, end descending, stable on ties.
struct ThreadGroup {
  std::int64_t pid = 0;
  std::int64_t tid = 0;
  ThreadRole role = ThreadRole::Unknown;
  std::string thread_name;
  std::vector<TraceEvent> events;
};

/// Comparator for the nesting order used throughout: (start asc, end desc).
bool nesting_order_less(const TraceEvent& a, const TraceEvent& b);

/// Sorts a copy of the event list into nesting order (stable).
void sort_nesting_order(std::vector<TraceEvent>& events);

/// Partitions events into per-(pid, tid) groups, each in nesting order,
/// with roles assigned from the thread-name metadata. Groups come back
/// ordered by (pid, tid).
std::vector<ThreadGroup> group_by_role(
    std::span<const TraceEvent> events,
    const std::map<ThreadKey, std::string>& thread_names,
    std::span<const RoleRule> rules);

}  // namespace tracetree
