#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "test_support.hpp"
#include "tracetree/trace_model.hpp"
#include "tracetree/trace_parse.hpp"

using namespace tracetree;
using tracetree::testing::make_event;

TEST_CASE("classify_thread_role matches first rule, case-insensitive") {
  const auto& rules = default_role_rules();
  CHECK(classify_thread_role("python3.10 worker", rules) ==
        ThreadRole::PythonScheduling);
  CHECK(classify_thread_role("", rules) == ThreadRole::Unknown);
  CHECK(classify_thread_role("NCCL AllReduce poller", rules) ==
        ThreadRole::NcclComm);
  CHECK(classify_thread_role("CUDA stream 3", rules) == ThreadRole::CudaKernel);
  CHECK(classify_thread_role("no match here", rules) == ThreadRole::Unknown);

  // Ordered rules: an earlier pattern beats a later one.
  std::vector<RoleRule> ordered = {{"python", ThreadRole::PythonScheduling},
                                   {"py", ThreadRole::System}};
  CHECK(classify_thread_role("python", ordered) == ThreadRole::PythonScheduling);
  CHECK(classify_thread_role("pyro", ordered) == ThreadRole::System);
}

TEST_CASE("group_by_role partitions and orders events") {
  std::vector<TraceEvent> events;
  events.push_back(make_event(0, "a", 10, 5, 1, 1));
  events.push_back(make_event(1, "b", 0, 50, 1, 1));
  events.push_back(make_event(2, "c", 7, 1, 2, 9));
  events.push_back(make_event(3, "d", 0, 20, 1, 1));

  std::map<ThreadKey, std::string> names = {{{1, 1}, "python_main"},
                                            {{2, 9}, "cuda_stream"}};
  const auto groups = group_by_role(events, names, default_role_rules());
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].pid == 1);
  CHECK(groups[0].role == ThreadRole::PythonScheduling);
  CHECK(groups[1].role == ThreadRole::CudaKernel);
  CHECK(groups[0].events.size() + groups[1].events.size() == events.size());

  // Equal starts: the longer event comes first.
  CHECK(groups[0].events[0].id == 1);
  CHECK(groups[0].events[1].id == 3);
  CHECK(groups[0].events[2].id == 0);
}

TEST_CASE("group_by_role partition property on a random corpus") {
  std::mt19937_64 rng(42);
  std::vector<TraceEvent> events;
  for (std::size_t i = 0; i < 1000; ++i) {
    events.push_back(make_event(i, "f", static_cast<std::int64_t>(rng() % 10000),
                                static_cast<std::int64_t>(rng() % 100),
                                static_cast<std::int64_t>(rng() % 3),
                                static_cast<std::int64_t>(rng() % 4)));
  }
  const auto groups = group_by_role(events, {}, default_role_rules());

  std::multiset<EventId> seen;
  for (const ThreadGroup& group : groups) {
    CHECK(group.role == ThreadRole::Unknown);
    for (std::size_t i = 0; i < group.events.size(); ++i) {
      const TraceEvent& event = group.events[i];
      CHECK(event.pid == group.pid);
      CHECK(event.tid == group.tid);
      seen.insert(event.id);
      if (i > 0) {
        const TraceEvent& prev = group.events[i - 1];
        const bool ordered =
            prev.start_ns < event.start_ns ||
            (prev.start_ns == event.start_ns && prev.end_ns() >= event.end_ns());
        CHECK(ordered);
      }
    }
  }
  std::multiset<EventId> expected;
  for (const TraceEvent& event : events) expected.insert(event.id);
  CHECK(seen == expected);
}

TEST_CASE("parse_trace_file converts complete events") {
  const char* doc =
      R"({"traceEvents":[{"ph":"X","name":"matmul_fp16","pid":7,"tid":3,"ts":100,"dur":50}]})";
  const ParseResult result = parse_trace_json(doc, TimeUnit::Microseconds);
  REQUIRE(result.events.size() == 1);
  const TraceEvent& event = result.events[0];
  CHECK(event.name == "matmul_fp16");
  CHECK(event.pid == 7);
  CHECK(event.tid == 3);
  CHECK(event.start_ns == 100000);
  CHECK(event.duration_ns == 50000);
  CHECK(result.stats.skipped_events == 0);
}

TEST_CASE("parse handles empty traceEvents") {
  const ParseResult result =
      parse_trace_json(R"({"traceEvents":[]})", TimeUnit::Microseconds);
  CHECK(result.events.empty());
  CHECK(result.stats.skipped_events == 0);
}

TEST_CASE("parse folds B/E pairs by per-thread stack order") {
  const char* doc = R"({"traceEvents":[
    {"ph":"B","name":"outer","pid":1,"tid":1,"ts":10},
    {"ph":"B","name":"inner","pid":1,"tid":1,"ts":12},
    {"ph":"E","pid":1,"tid":1,"ts":20},
    {"ph":"E","pid":1,"tid":1,"ts":25},
    {"ph":"B","name":"other_thread","pid":1,"tid":2,"ts":5},
    {"ph":"E","pid":1,"tid":2,"ts":9}
  ]})";
  const ParseResult result = parse_trace_json(doc, TimeUnit::Microseconds);
  REQUIRE(result.events.size() == 3);

  // Fold oracle: replay B/E per thread as a stack; completion order gives
  // ids.
  struct Folded {
    std::string name;
    std::int64_t st, dur;
  };
  std::vector<Folded> expected = {{"inner", 12000, 8000},
                                  {"outer", 10000, 15000},
                                  {"other_thread", 5000, 4000}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(result.events[i].id == i);
    CHECK(result.events[i].name == expected[i].name);
    CHECK(result.events[i].start_ns == expected[i].st);
    CHECK(result.events[i].duration_ns == expected[i].dur);
  }
  CHECK(result.stats.unmatched_begin == 0);
  CHECK(result.stats.unmatched_end == 0);
}

TEST_CASE("parse counts unmatched begin/end and field errors") {
  const char* doc = R"({"traceEvents":[
    {"ph":"B","name":"left_open","pid":1,"tid":1,"ts":10},
    {"ph":"E","pid":2,"tid":2,"ts":50},
    {"ph":"X","name":"","pid":1,"tid":1,"ts":1,"dur":1},
    {"ph":"X","name":"neg","pid":1,"tid":1,"ts":5,"dur":-2},
    {"ph":"X","pid":1,"tid":1,"ts":5,"dur":2},
    {"ph":"C","name":"counter","pid":1,"tid":1,"ts":0},
    {"ph":"X","name":"good","pid":1,"tid":1,"ts":5,"dur":2}
  ]})";
  const ParseResult result = parse_trace_json(doc, TimeUnit::Microseconds);
  CHECK(result.events.size() == 1);
  CHECK(result.events[0].name == "good");
  CHECK(result.stats.skipped_events == 3);
  CHECK(result.stats.unmatched_begin == 1);
  CHECK(result.stats.unmatched_end == 1);
  CHECK(result.stats.ignored_phases == 1);
}

TEST_CASE("parse reads thread-name metadata and scalar args") {
  const char* doc = R"({"otherTopLevel":{"nested":[1,2,3]},"traceEvents":[
    {"ph":"M","name":"thread_name","pid":3,"tid":8,"args":{"name":"nccl_comm_0"}},
    {"ph":"M","name":"process_name","pid":3,"tid":8,"args":{"name":"worker"}},
    {"ph":"X","name":"op","pid":3,"tid":8,"ts":1,"dur":1,
     "args":{"stream":7,"kind":"allreduce","deep":{"x":1}}}
  ]})";
  const ParseResult result = parse_trace_json(doc, TimeUnit::Microseconds);
  REQUIRE(result.thread_names.size() == 1);
  CHECK(result.thread_names.at(ThreadKey{3, 8}) == "nccl_comm_0");
  REQUIRE(result.events.size() == 1);
  const auto& args = result.events[0].args;
  REQUIRE(args.size() == 2);
  CHECK(args[0].first == "stream");
  CHECK(args[0].second == "7");
  CHECK(args[1].second == "allreduce");
}

TEST_CASE("parse rejects malformed documents") {
  CHECK_THROWS_AS(parse_trace_json("not json", TimeUnit::Microseconds),
                  ParseError);
  CHECK_THROWS_AS(parse_trace_json(R"({"foo": 1})", TimeUnit::Microseconds),
                  ParseError);
  CHECK_THROWS_AS(parse_trace_json(R"([{"ph":"X"}])", TimeUnit::Microseconds),
                  ParseError);
  CHECK_THROWS_AS(
      parse_trace_file("/nonexistent/trace.json", TimeUnit::Microseconds),
      ParseError);
}

TEST_CASE("parse is deterministic and unit-consistent") {
  std::mt19937_64 rng(7);
  std::string doc = R"({"traceEvents":[)";
  for (int i = 0; i < 200; ++i) {
    if (i) doc += ",";
    doc += R"({"ph":"X","name":"f)" + std::to_string(rng() % 10) +
           R"(","pid":1,"tid":)" + std::to_string(rng() % 3) + R"(,"ts":)" +
           std::to_string(rng() % 100000) + R"(,"dur":)" +
           std::to_string(rng() % 1000) + "}";
  }
  doc += "]}";

  const ParseResult a = parse_trace_json(doc, TimeUnit::Microseconds);
  const ParseResult b = parse_trace_json(doc, TimeUnit::Microseconds);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].id == b.events[i].id);
    CHECK(a.events[i].start_ns == b.events[i].start_ns);
  }

  // Nanosecond parse of the same integers equals the microsecond parse
  // divided by 1000.
  const ParseResult ns = parse_trace_json(doc, TimeUnit::Nanoseconds);
  REQUIRE(ns.events.size() == a.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].start_ns == ns.events[i].start_ns * 1000);
    CHECK(a.events[i].duration_ns == ns.events[i].duration_ns * 1000);
  }
}

TEST_CASE("parse accepts fractional microsecond timestamps") {
  const char* doc =
      R"({"traceEvents":[{"ph":"X","name":"f","pid":1,"tid":1,"ts":1234.567,"dur":0.001}]})";
  const ParseResult result = parse_trace_json(doc, TimeUnit::Microseconds);
  REQUIRE(result.events.size() == 1);
  CHECK(result.events[0].start_ns == 1234567);
  CHECK(result.events[0].duration_ns == 1);
}
