#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tracetree/trace_model.hpp"

namespace tracetree {

enum class TimeUnit { Nanoseconds, Microseconds };

std::string_view to_string(TimeUnit unit);
TimeUnit time_unit_from_string(std::string_view text);

/// Fatal file-level problems: unreadable file, invalid JSON, or a document
/// without a top-level `traceEvents` array.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParseStats {
  std::size_t complete_events = 0;
  std::size_t skipped_events = 0;   // entries with field errors (missing name, negative dur, ...)
  std::size_t unmatched_begin = 0;  // "B" entries left open at end of file
  std::size_t unmatched_end = 0;    // "E" entries with no open "B"
  std::size_t ignored_phases = 0;   // phases other than X / B / E / M

  void add(const ParseStats& other) {
    complete_events += other.complete_events;
    skipped_events += other.skipped_events;
    unmatched_begin += other.unmatched_begin;
    unmatched_end += other.unmatched_end;
    ignored_phases += other.ignored_phases;
  }
};

struct ParseResult {
  std::vector<TraceEvent> events;  // ids first_id .. first_id+n-1, in completion order
  std::map<ThreadKey, std::string> thread_names;  // from "M" thread_name metadata
  ParseStats stats;
};

/// Parses a Chrome Trace Event Format file. "X" entries become events
/// directly; "B"/"E" pairs are folded by per-(pid, tid) stack order, the
/// folded event being emitted at the position of its "E" entry. Timestamps
/// are converted to nanoseconds according to `unit`. Ids are assigned in
/// completion order starting from `first_id`.
ParseResult parse_trace_file(const std::string& path, TimeUnit unit,
                             EventId first_id = 0);

/// Same, over an in-memory JSON document.
ParseResult parse_trace_json(std::string_view text, TimeUnit unit,
                             EventId first_id = 0);

}  // namespace tracetree
