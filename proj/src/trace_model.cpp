#include "tracetree/trace_model.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace tracetree {

std::string_view to_string(ThreadRole role) {
  switch (role) {
    case ThreadRole::PythonScheduling: return "PythonScheduling";
    case ThreadRole::CudaKernel: return "CudaKernel";
    case ThreadRole::NcclComm: return "NcclComm";
    case ThreadRole::System: return "System";
    case ThreadRole::Unknown: return "Unknown";
  }
  return "Unknown";
}

ThreadRole thread_role_from_string(std::string_view text) {
  if (text == "PythonScheduling") return ThreadRole::PythonScheduling;
  if (text == "CudaKernel") return ThreadRole::CudaKernel;
  if (text == "NcclComm") return ThreadRole::NcclComm;
  if (text == "System") return ThreadRole::System;
  if (text == "Unknown") return ThreadRole::Unknown;
  throw std::invalid_argument("unknown thread role: " + std::string(text));
}

const std::vector<RoleRule>& default_role_rules() {
  static const std::vector<RoleRule> rules = {
      {"python", ThreadRole::PythonScheduling},
      {"cuda", ThreadRole::CudaKernel},
      {"cupti", ThreadRole::CudaKernel},
      {"kernel", ThreadRole::CudaKernel},
      {"nccl", ThreadRole::NcclComm},
      {"sys", ThreadRole::System},
      {"io", ThreadRole::System},
  };
  return rules;
}

namespace {

bool contains_case_insensitive(std::string_view haystack, std::string_view needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  auto lower = [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  };
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (lower(haystack[i + j]) != lower(needle[j])) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace

ThreadRole classify_thread_role(std::string_view thread_name,
                                std::span<const RoleRule> rules) {
  if (thread_name.empty()) return ThreadRole::Unknown;
  for (const RoleRule& rule : rules) {
    if (contains_case_insensitive(thread_name, rule.pattern)) return rule.role;
  }
  return ThreadRole::Unknown;
}

bool nesting_order_less(const TraceEvent& a, const TraceEvent& b) {
  if (a.start_ns != b.start_ns) return a.start_ns < b.start_ns;
  return a.end_ns() > b.end_ns();
}

void sort_nesting_order(std::vector<TraceEvent>& events) {
  std::stable_sort(events.begin(), events.end(), nesting_order_less);
}

std::vector<ThreadGroup> group_by_role(
    std::span<const TraceEvent> events,
    const std::map<ThreadKey, std::string>& thread_names,
    std::span<const RoleRule> rules) {
  std::map<ThreadKey, std::vector<TraceEvent>> buckets;
  for (const TraceEvent& event : events) {
    buckets[ThreadKey{event.pid, event.tid}].push_back(event);
  }

  std::vector<ThreadGroup> groups;
  groups.reserve(buckets.size());
  for (auto& [key, bucket] : buckets) {
    ThreadGroup group;
    group.pid = key.pid;
    group.tid = key.tid;
    if (auto it = thread_names.find(key); it != thread_names.end()) {
      group.thread_name = it->second;
    }
    group.role = classify_thread_role(group.thread_name, rules);
    group.events = std::move(bucket);
    sort_nesting_order(group.events);
    groups.push_back(std::move(group));
  }
  return groups;
}

}  // namespace tracetree
