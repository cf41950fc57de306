#include "tracetree/trace_parse.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <utility>

#include <json.hpp>

namespace tracetree {

std::string_view to_string(TimeUnit unit) {
  return unit == TimeUnit::Nanoseconds ? "ns" : "us";
}

TimeUnit time_unit_from_string(std::string_view text) {
  if (text == "ns") return TimeUnit::Nanoseconds;
  if (text == "us") return TimeUnit::Microseconds;
  throw std::invalid_argument("unknown time unit: " + std::string(text));
}

namespace {

using json = nlohmann::json;

// SAX handler for the Chrome Trace Event Format. Only the traceEvents
// array is materialized; everything else in the document is skipped
// without building a DOM, which keeps large files cheap to ingest.
class TraceEventSax {
 public:
  TraceEventSax(TimeUnit unit, EventId first_id, ParseResult& out)
      : scale_(unit == TimeUnit::Microseconds ? 1000.0 : 1.0),
        next_id_(first_id),
        out_(out) {}

  bool null() { return on_scalar_null(); }
  bool boolean(bool val) { return on_scalar_bool(val); }
  bool number_integer(json::number_integer_t val) {
    return on_scalar_number(static_cast<double>(val));
  }
  bool number_unsigned(json::number_unsigned_t val) {
    return on_scalar_number(static_cast<double>(val));
  }
  bool number_float(json::number_float_t val, const std::string&) {
    return on_scalar_number(val);
  }
  bool string(std::string& val) { return on_scalar_string(val); }
  bool binary(json::binary_t&) { return true; }

  bool start_object(std::size_t) {
    if (skip_depth_ > 0) {
      ++skip_depth_;
      return true;
    }
    switch (mode_) {
      case Mode::AtRoot:
        mode_ = Mode::InDoc;
        return true;
      case Mode::InDoc:
        begin_skip();
        ++skip_depth_;  // the object we just entered
        return true;
      case Mode::InEvents:
        pending_ = Pending{};
        mode_ = Mode::InEvent;
        return true;
      case Mode::InEvent:
        if (field_ == Field::Args) {
          mode_ = Mode::InArgs;
          return true;
        }
        begin_skip();
        ++skip_depth_;
        return true;
      case Mode::InArgs:
        // Nested structures inside args are dropped; only scalars are kept.
        begin_skip();
        ++skip_depth_;
        return true;
      default:
        error_ = "unexpected object";
        return false;
    }
  }

  bool key(std::string& val) {
    if (skip_depth_ > 0) return true;
    switch (mode_) {
      case Mode::InDoc:
        doc_key_is_events_ = (val == "traceEvents");
        return true;
      case Mode::InEvent:
        field_ = field_from_key(val);
        return true;
      case Mode::InArgs:
        args_key_ = std::move(val);
        return true;
      default:
        return true;
    }
  }

  bool end_object() {
    if (skip_depth_ > 0) {
      --skip_depth_;
      if (skip_depth_ == 0) mode_ = skip_return_;
      return true;
    }
    switch (mode_) {
      case Mode::InDoc:
        mode_ = Mode::Done;
        return true;
      case Mode::InEvent:
        finish_event();
        mode_ = Mode::InEvents;
        return true;
      case Mode::InArgs:
        mode_ = Mode::InEvent;
        field_ = Field::None;
        return true;
      default:
        error_ = "unexpected end of object";
        return false;
    }
  }

  bool start_array(std::size_t) {
    if (skip_depth_ > 0) {
      ++skip_depth_;
      return true;
    }
    switch (mode_) {
      case Mode::AtRoot:
        error_ = "top-level document is not an object with a traceEvents array";
        return false;
      case Mode::InDoc:
        if (doc_key_is_events_) {
          found_events_ = true;
          mode_ = Mode::InEvents;
          return true;
        }
        begin_skip();
        ++skip_depth_;
        return true;
      case Mode::InEvents:
        // Non-object array entry; treat it as an unusable event.
        ++out_.stats.skipped_events;
        begin_skip();
        ++skip_depth_;
        return true;
      case Mode::InEvent:
      case Mode::InArgs:
        begin_skip();
        ++skip_depth_;
        return true;
      default:
        error_ = "unexpected array";
        return false;
    }
  }

  bool end_array() {
    if (skip_depth_ > 0) {
      --skip_depth_;
      if (skip_depth_ == 0) mode_ = skip_return_;
      return true;
    }
    if (mode_ == Mode::InEvents) {
      mode_ = Mode::InDoc;
      doc_key_is_events_ = false;
      return true;
    }
    error_ = "unexpected end of array";
    return false;
  }

  bool parse_error(std::size_t position, const std::string&,
                   const nlohmann::detail::exception& ex) {
    error_ = "invalid JSON at byte " + std::to_string(position) + ": " + ex.what();
    return false;
  }

  void finalize() {
    for (const auto& [key, stack] : open_begins_) {
      out_.stats.unmatched_begin += stack.size();
    }
    out_.stats.complete_events = out_.events.size();
  }

  bool found_events() const { return found_events_; }
  const std::string& error() const { return error_; }

 private:
  enum class Mode { AtRoot, InDoc, InEvents, InEvent, InArgs, Done };
  enum class Field { None, Ph, Name, Pid, Tid, Ts, Dur, Args, Other };

  struct Pending {
    char ph = '\0';
    std::string name;
    bool has_name = false;
    std::int64_t pid = 0;
    bool has_pid = false;
    std::int64_t tid = 0;
    bool has_tid = false;
    double ts = 0.0;
    bool has_ts = false;
    double dur = 0.0;
    bool has_dur = false;
    std::vector<std::pair<std::string, std::string>> args;
  };

  struct OpenBegin {
    std::string name;
    std::int64_t start_ns = 0;
    std::vector<std::pair<std::string, std::string>> args;
  };

  static Field field_from_key(std::string_view key) {
    if (key == "ph") return Field::Ph;
    if (key == "name") return Field::Name;
    if (key == "pid") return Field::Pid;
    if (key == "tid") return Field::Tid;
    if (key == "ts") return Field::Ts;
    if (key == "dur") return Field::Dur;
    if (key == "args") return Field::Args;
    return Field::Other;
  }

  void begin_skip() { skip_return_ = mode_; }

  bool on_scalar_null() { return on_scalar(); }
  bool on_scalar_bool(bool val) {
    if (skip_depth_ == 0 && mode_ == Mode::InArgs) {
      pending_.args.emplace_back(std::move(args_key_), val ? "true" : "false");
      return true;
    }
    return on_scalar();
  }

  bool on_scalar_number(double val) {
    if (skip_depth_ > 0) return true;
    if (mode_ == Mode::InEvent) {
      switch (field_) {
        case Field::Pid:
          pending_.pid = static_cast<std::int64_t>(val);
          pending_.has_pid = true;
          break;
        case Field::Tid:
          pending_.tid = static_cast<std::int64_t>(val);
          pending_.has_tid = true;
          break;
        case Field::Ts:
          pending_.ts = val;
          pending_.has_ts = true;
          break;
        case Field::Dur:
          pending_.dur = val;
          pending_.has_dur = true;
          break;
        default:
          break;
      }
      field_ = Field::None;
      return true;
    }
    if (mode_ == Mode::InArgs) {
      double integral = 0.0;
      std::string text = std::modf(val, &integral) == 0.0 &&
                                 std::abs(val) < 9.0e15
                             ? std::to_string(static_cast<std::int64_t>(val))
                             : std::to_string(val);
      pending_.args.emplace_back(std::move(args_key_), std::move(text));
      return true;
    }
    return on_scalar();
  }

  bool on_scalar_string(std::string& val) {
    if (skip_depth_ > 0) return true;
    if (mode_ == Mode::InEvent) {
      switch (field_) {
        case Field::Ph:
          pending_.ph = val.empty() ? '\0' : val[0];
          if (val.size() != 1) pending_.ph = '\0';
          break;
        case Field::Name:
          pending_.name = std::move(val);
          pending_.has_name = true;
          break;
        default:
          break;
      }
      field_ = Field::None;
      return true;
    }
    if (mode_ == Mode::InArgs) {
      pending_.args.emplace_back(std::move(args_key_), std::move(val));
      return true;
    }
    return on_scalar();
  }

  bool on_scalar() {
    if (skip_depth_ > 0) return true;
    if (mode_ == Mode::InEvent || mode_ == Mode::InArgs) {
      field_ = Field::None;
      return true;
    }
    // Scalar value for an uninteresting document-level key.
    return true;
  }

  bool to_ns(double value, std::int64_t& out) const {
    double scaled = value * scale_;
    if (!(scaled >= 0.0) ||
        scaled > static_cast<double>(std::numeric_limits<std::int64_t>::max() / 2)) {
      return false;
    }
    out = std::llround(scaled);
    return true;
  }

  void emit(std::string name, std::int64_t pid, std::int64_t tid,
            std::int64_t start_ns, std::int64_t duration_ns,
            std::vector<std::pair<std::string, std::string>> args) {
    TraceEvent event;
    event.id = next_id_++;
    event.name = std::move(name);
    event.pid = pid;
    event.tid = tid;
    event.start_ns = start_ns;
    event.duration_ns = duration_ns;
    event.args = std::move(args);
    out_.events.push_back(std::move(event));
  }

  void finish_event() {
    Pending& p = pending_;
    switch (p.ph) {
      case 'X': {
        std::int64_t st = 0;
        std::int64_t dur = 0;
        if (!p.has_name || p.name.empty() || !p.has_pid || !p.has_tid ||
            !p.has_ts || !p.has_dur || !to_ns(p.ts, st) || !to_ns(p.dur, dur) ||
            st > std::numeric_limits<std::int64_t>::max() - dur) {
          ++out_.stats.skipped_events;
          return;
        }
        emit(std::move(p.name), p.pid, p.tid, st, dur, std::move(p.args));
        return;
      }
      case 'B': {
        std::int64_t st = 0;
        if (!p.has_name || p.name.empty() || !p.has_pid || !p.has_tid ||
            !p.has_ts || !to_ns(p.ts, st)) {
          ++out_.stats.skipped_events;
          return;
        }
        open_begins_[ThreadKey{p.pid, p.tid}].push_back(
            OpenBegin{std::move(p.name), st, std::move(p.args)});
        return;
      }
      case 'E': {
        std::int64_t ts = 0;
        if (!p.has_pid || !p.has_tid || !p.has_ts || !to_ns(p.ts, ts)) {
          ++out_.stats.skipped_events;
          return;
        }
        auto it = open_begins_.find(ThreadKey{p.pid, p.tid});
        if (it == open_begins_.end() || it->second.empty()) {
          ++out_.stats.unmatched_end;
          return;
        }
        OpenBegin begin = std::move(it->second.back());
        it->second.pop_back();
        if (ts < begin.start_ns) {
          ++out_.stats.skipped_events;
          return;
        }
        emit(std::move(begin.name), p.pid, p.tid, begin.start_ns,
             ts - begin.start_ns, std::move(begin.args));
        return;
      }
      case 'M': {
        if (p.has_name && p.name == "thread_name" && p.has_pid && p.has_tid) {
          for (auto& [key, value] : p.args) {
            if (key == "name") {
              out_.thread_names[ThreadKey{p.pid, p.tid}] = value;
              break;
            }
          }
        }
        return;
      }
      default:
        ++out_.stats.ignored_phases;
        return;
    }
  }

  double scale_;
  EventId next_id_;
  ParseResult& out_;

  Mode mode_ = Mode::AtRoot;
  Mode skip_return_ = Mode::InDoc;
  std::size_t skip_depth_ = 0;
  Field field_ = Field::None;
  bool doc_key_is_events_ = false;
  bool found_events_ = false;
  Pending pending_;
  std::string args_key_;
  std::map<ThreadKey, std::vector<OpenBegin>> open_begins_;
  std::string error_;
};

ParseResult parse_text(std::string_view text, TimeUnit unit, EventId first_id,
                       const std::string& origin) {
  ParseResult result;
  TraceEventSax handler(unit, first_id, result);
  bool ok = json::sax_parse(text.begin(), text.end(), &handler);
  if (!ok) {
    std::string detail = handler.error().empty() ? "parse failed" : handler.error();
    throw ParseError(origin + ": " + detail);
  }
  if (!handler.found_events()) {
    throw ParseError(origin + ": document has no traceEvents array");
  }
  handler.finalize();
  return result;
}

}  // namespace

ParseResult parse_trace_file(const std::string& path, TimeUnit unit,
                             EventId first_id) {
  std::ifstream input(path, std::ios::binary);
  if (!input.is_open()) {
    throw ParseError(path + ": cannot open file");
  }
  std::string text;
  std::error_code ec;
  auto size = std::filesystem::file_size(path, ec);
  if (!ec) text.reserve(static_cast<std::size_t>(size));
  text.assign(std::istreambuf_iterator<char>(input),
              std::istreambuf_iterator<char>());
  return parse_text(text, unit, first_id, path);
}

ParseResult parse_trace_json(std::string_view text, TimeUnit unit,
                             EventId first_id) {
  return parse_text(text, unit, first_id, "<memory>");
}

}  // namespace tracetree
