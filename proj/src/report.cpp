#include "tracetree/report.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace tracetree {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_deviation(const AnomalyFinding& finding) {
  if (finding.kind == FindingKind::StructuralDiscrepancy) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fx", finding.deviation);
  return buf;
}

void render_domain_section(std::string& out, ThreadRole domain,
                           const AnalysisReport& report) {
  out += "[";
  out += to_string(domain);
  out += "]\n";
  bool any = false;
  for (const ResolvedFinding& rf : report.findings) {
    if (rf.domain != domain) continue;
    any = true;
    out += "- function=\"";
    out += rf.function_name;
    out += "\" worker=";
    out += std::to_string(rf.worker_pid);
    out += " layer=";
    out += std::to_string(rf.finding.depth);
    out += " deviation=";
    out += format_deviation(rf.finding);
    out += " role=";
    out += to_string(rf.finding.causal_role);
    out += " kind=";
    out += to_string(rf.finding.kind);
    out += " dimension=";
    out += to_string(rf.finding.dimension);
    out += "\n";
  }
  if (!any) out += "(none)\n";
}

Dimension dimension_from_string(std::string_view text) {
  if (text == "inter-worker") return Dimension::InterWorker;
  if (text == "intra-worker") return Dimension::IntraWorker;
  throw ReportIoError("unknown dimension: " + std::string(text));
}

CausalRole causal_role_from_string(std::string_view text) {
  if (text == "root-candidate") return CausalRole::RootCandidate;
  if (text == "propagated") return CausalRole::Propagated;
  throw ReportIoError("unknown causal role: " + std::string(text));
}

FindingKind finding_kind_from_string(std::string_view text) {
  if (text == "duration") return FindingKind::DurationOutlier;
  if (text == "structural") return FindingKind::StructuralDiscrepancy;
  throw ReportIoError("unknown finding kind: " + std::string(text));
}

}  // namespace

std::string render_template(const AnalysisReport& report) {
  std::string out;
  out += "=== inference task configuration ===\n";
  if (report.task_config.empty()) {
    out += "(no task configuration provided)\n";
  } else {
    for (const auto& [key, value] : report.task_config) {
      out += key;
      out += ": ";
      out += value;
      out += "\n";
    }
  }
  out += "\n=== anomalous trace events ===\n";
  if (report.findings.empty()) {
    out += "no anomalous events detected\n";
  } else {
    constexpr std::array<ThreadRole, 4> kDomains = {
        ThreadRole::PythonScheduling, ThreadRole::CudaKernel,
        ThreadRole::NcclComm, ThreadRole::System};
    for (ThreadRole domain : kDomains) {
      render_domain_section(out, domain, report);
    }
    bool has_unknown = false;
    for (const ResolvedFinding& rf : report.findings) {
      if (rf.domain == ThreadRole::Unknown) has_unknown = true;
    }
    if (has_unknown) {
      render_domain_section(out, ThreadRole::Unknown, report);
    }
  }
  out += "\n=== metric data summary ===\n";
  if (report.metric_summary && !report.metric_summary->empty()) {
    out += *report.metric_summary;
    if (out.back() != '\n') out += "\n";
  } else {
    out += "(none provided)\n";
  }
  return out;
}

std::string report_to_json(const AnalysisReport& report) {
  ordered_json doc;
  doc["report_version"] = 1;

  ordered_json config = ordered_json::object();
  for (const auto& [key, value] : report.task_config) config[key] = value;
  doc["task_config"] = std::move(config);

  doc["findings"] = ordered_json::array();
  for (const ResolvedFinding& rf : report.findings) {
    const AnomalyFinding& f = rf.finding;
    ordered_json item;
    item["event_id"] = f.event_id;
    item["function"] = rf.function_name;
    item["worker_pid"] = rf.worker_pid;
    item["tid"] = rf.tid;
    item["domain"] = std::string(to_string(rf.domain));
    item["dimension"] = std::string(to_string(f.dimension));
    item["kind"] = std::string(to_string(f.kind));
    item["causal_role"] = std::string(to_string(f.causal_role));
    item["deviation"] = f.deviation;
    item["tree_id"] = f.tree_id;
    item["node_index"] = f.node_index;
    item["depth"] = f.depth;
    item["start_ns"] = rf.start_ns;
    item["duration_ns"] = rf.duration_ns;
    item["group"] = {{"str_id", f.group.str_id},   {"layer", f.group.layer},
                     {"name", f.group.name},       {"mean_ns", f.group.mean_ns},
                     {"stddev_ns", f.group.stddev_ns}, {"n", f.group.n}};
    doc["findings"].push_back(std::move(item));
  }

  if (report.metric_summary) doc["metric_summary"] = *report.metric_summary;
  if (report.scores) {
    doc["scores"] = {{"precision", report.scores->precision},
                     {"recall", report.scores->recall},
                     {"f1", report.scores->f1},
                     {"fpr", report.scores->fpr},
                     {"tp", report.scores->tp},
                     {"fp", report.scores->fp},
                     {"fn", report.scores->fn}};
  }

  doc["diagnostics"] = {
      {"total_events", report.diagnostics.total_events},
      {"skipped_events", report.diagnostics.skipped_events},
      {"unmatched_begin", report.diagnostics.unmatched_begin},
      {"unmatched_end", report.diagnostics.unmatched_end},
      {"ignored_phases", report.diagnostics.ignored_phases},
      {"crossing_intervals", report.diagnostics.crossing_intervals}};

  return doc.dump(2) + "\n";
}

AnalysisReport report_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ReportIoError(std::string("invalid report JSON: ") + e.what());
  }

  AnalysisReport report;
  if (!doc.contains("report_version") ||
      doc["report_version"].get<int>() != 1) {
    throw ReportIoError("unsupported report version");
  }
  for (const auto& [key, value] : doc.at("task_config").items()) {
    report.task_config.emplace_back(key, value.get<std::string>());
  }
  for (const auto& item : doc.at("findings")) {
    ResolvedFinding rf;
    AnomalyFinding& f = rf.finding;
    f.event_id = item.at("event_id").get<EventId>();
    rf.function_name = item.at("function").get<std::string>();
    rf.worker_pid = item.at("worker_pid").get<std::int64_t>();
    rf.tid = item.at("tid").get<std::int64_t>();
    rf.domain = thread_role_from_string(item.at("domain").get<std::string>());
    f.dimension = dimension_from_string(item.at("dimension").get<std::string>());
    f.kind = finding_kind_from_string(item.at("kind").get<std::string>());
    f.causal_role =
        causal_role_from_string(item.at("causal_role").get<std::string>());
    f.deviation = item.at("deviation").get<double>();
    f.tree_id = item.at("tree_id").get<std::uint32_t>();
    f.node_index = item.at("node_index").get<std::uint32_t>();
    f.depth = item.at("depth").get<std::uint32_t>();
    rf.start_ns = item.at("start_ns").get<std::int64_t>();
    rf.duration_ns = item.at("duration_ns").get<std::int64_t>();
    const auto& group = item.at("group");
    f.group.str_id = group.at("str_id").get<std::uint32_t>();
    f.group.layer = group.at("layer").get<std::uint32_t>();
    f.group.name = group.at("name").get<std::string>();
    f.group.mean_ns = group.at("mean_ns").get<double>();
    f.group.stddev_ns = group.at("stddev_ns").get<double>();
    f.group.n = group.at("n").get<std::size_t>();
    report.findings.push_back(std::move(rf));
  }
  if (doc.contains("metric_summary")) {
    report.metric_summary = doc["metric_summary"].get<std::string>();
  }
  if (doc.contains("scores")) {
    const auto& s = doc["scores"];
    Scores scores;
    scores.precision = s.at("precision").get<double>();
    scores.recall = s.at("recall").get<double>();
    scores.f1 = s.at("f1").get<double>();
    scores.fpr = s.at("fpr").get<double>();
    scores.tp = s.at("tp").get<std::size_t>();
    scores.fp = s.at("fp").get<std::size_t>();
    scores.fn = s.at("fn").get<std::size_t>();
    report.scores = scores;
  }
  if (doc.contains("diagnostics")) {
    const auto& d = doc["diagnostics"];
    report.diagnostics.total_events = d.at("total_events").get<std::size_t>();
    report.diagnostics.skipped_events =
        d.at("skipped_events").get<std::size_t>();
    report.diagnostics.unmatched_begin =
        d.at("unmatched_begin").get<std::size_t>();
    report.diagnostics.unmatched_end =
        d.at("unmatched_end").get<std::size_t>();
    report.diagnostics.ignored_phases =
        d.at("ignored_phases").get<std::size_t>();
    report.diagnostics.crossing_intervals =
        d.at("crossing_intervals").get<std::size_t>();
  }
  return report;
}

void write_report_json(const AnalysisReport& report, const std::string& path) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file.is_open()) throw ReportIoError("cannot write " + path);
  const std::string text = report_to_json(report);
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file.good()) throw ReportIoError("short write to " + path);
}

AnalysisReport read_report_json(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file.is_open()) throw ReportIoError("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(file)),
                   std::istreambuf_iterator<char>());
  return report_from_json(text);
}

}  // namespace tracetree
