#include "tracetree/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>

#include <json.hpp>

#include "tracetree/parallel.hpp"
#include "tracetree/simhash.hpp"

namespace tracetree {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string stringify_scalar(const ordered_json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

ScenarioSpec scenario_from_json(const ordered_json& doc) {
  ScenarioSpec spec;
  if (doc.contains("workers")) spec.workers = doc["workers"].get<std::size_t>();
  if (doc.contains("iterations")) {
    spec.iterations = doc["iterations"].get<std::size_t>();
  }
  if (doc.contains("jitter")) spec.jitter = doc["jitter"].get<double>();
  if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("model")) {
    const ordered_json& model = doc["model"];
    if (model.contains("layers")) {
      spec.model.layers = model["layers"].get<std::size_t>();
    }
    if (model.contains("collective_ns")) {
      spec.model.collective_ns = model["collective_ns"].get<std::int64_t>();
    }
    if (model.contains("prep_ns")) {
      spec.model.prep_ns = model["prep_ns"].get<std::int64_t>();
    }
    if (model.contains("launch_overhead_ns")) {
      spec.model.launch_overhead_ns =
          model["launch_overhead_ns"].get<std::int64_t>();
    }
    if (model.contains("gap_ns")) {
      spec.model.gap_ns = model["gap_ns"].get<std::int64_t>();
    }
    if (model.contains("kernels")) {
      spec.model.kernels.clear();
      for (const auto& entry : model["kernels"]) {
        spec.model.kernels.push_back(
            KernelSpec{entry.at("name").get<std::string>(),
                       entry.at("base_ns").get<std::int64_t>()});
      }
    }
  }
  return spec;
}

FaultSpec fault_from_json(const ordered_json& doc) {
  FaultSpec fault;
  fault.kind = fault_kind_from_string(doc.at("kind").get<std::string>());
  if (doc.contains("target")) {
    if (doc["target"].is_string()) {
      if (doc["target"].get<std::string>() != "all") {
        throw ConfigError("fault target must be a worker index or \"all\"");
      }
      fault.target = kAllWorkers;
    } else {
      fault.target = doc["target"].get<int>();
    }
  }
  if (doc.contains("magnitude")) fault.magnitude = doc["magnitude"].get<double>();
  if (doc.contains("delay_ns")) fault.delay_ns = doc["delay_ns"].get<std::int64_t>();
  if (doc.contains("window")) {
    const auto& window = doc["window"];
    if (!window.is_array() || window.size() != 2) {
      throw ConfigError("fault window must be [begin, end)");
    }
    fault.window_begin = window[0].get<std::size_t>();
    fault.window_end = window[1].get<std::size_t>();
  }
  if (doc.contains("layer")) fault.layer = doc["layer"].get<std::size_t>();
  if (doc.contains("kernel")) fault.kernel = doc["kernel"].get<std::size_t>();
  return fault;
}

}  // namespace

void apply_config_json(RunConfig& config, const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config document must be an object");

  if (doc.contains("trace_dir")) {
    config.trace_dir = doc["trace_dir"].get<std::string>();
  }
  if (doc.contains("files")) {
    config.trace_files.clear();
    for (const auto& f : doc["files"]) {
      config.trace_files.push_back(f.get<std::string>());
    }
  }
  if (doc.contains("time_unit")) {
    config.time_unit = time_unit_from_string(doc["time_unit"].get<std::string>());
  }
  if (doc.contains("role_rules")) {
    config.role_rules.clear();
    for (const auto& rule : doc["role_rules"]) {
      config.role_rules.push_back(
          RoleRule{rule.at("pattern").get<std::string>(),
                   thread_role_from_string(rule.at("role").get<std::string>())});
    }
  }
  if (doc.contains("sigma_bits")) config.sigma_bits = doc["sigma_bits"].get<int>();
  if (doc.contains("lambda")) {
    config.detection.lambda = doc["lambda"].get<double>();
  }
  if (doc.contains("min_group")) {
    config.detection.min_group = doc["min_group"].get<std::size_t>();
  }
  if (doc.contains("dimensions")) {
    config.detection.inter_worker = false;
    config.detection.intra_worker = false;
    for (const auto& d : doc["dimensions"]) {
      const std::string name = d.get<std::string>();
      if (name == "inter") {
        config.detection.inter_worker = true;
      } else if (name == "intra") {
        config.detection.intra_worker = true;
      } else {
        throw ConfigError("unknown detection dimension: " + name);
      }
    }
  }
  if (doc.contains("report_out")) {
    config.report_out = doc["report_out"].get<std::string>();
  }
  if (doc.contains("template_out")) {
    config.template_out = doc["template_out"].get<std::string>();
  }
  if (doc.contains("ground_truth")) {
    config.ground_truth_path = doc["ground_truth"].get<std::string>();
  }
  if (doc.contains("lenient")) config.lenient = doc["lenient"].get<bool>();
  if (doc.contains("jobs")) config.jobs = doc["jobs"].get<std::size_t>();
  if (doc.contains("task_config")) {
    config.task_config.clear();
    for (const auto& [key, value] : doc["task_config"].items()) {
      config.task_config.emplace_back(key, stringify_scalar(value));
    }
  }
  if (doc.contains("metric_summary")) {
    const auto& metric = doc["metric_summary"];
    if (metric.is_string()) {
      config.metric_summary = metric.get<std::string>();
    } else if (metric.is_object()) {
      std::string text;
      for (const auto& [key, value] : metric.items()) {
        text += key + ": " + stringify_scalar(value) + "\n";
      }
      config.metric_summary = text;
    } else {
      throw ConfigError("metric_summary must be a string or an object");
    }
  }
  if (doc.contains("out_dir")) config.out_dir = doc["out_dir"].get<std::string>();
  if (doc.contains("scenario")) {
    config.scenario = scenario_from_json(doc["scenario"]);
  }
  if (doc.contains("faults")) {
    config.faults.clear();
    for (const auto& fault : doc["faults"]) {
      config.faults.push_back(fault_from_json(fault));
    }
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file.is_open()) throw ConfigError("cannot read config file " + path);
  std::string text((std::istreambuf_iterator<char>(file)),
                   std::istreambuf_iterator<char>());
  RunConfig config;
  apply_config_json(config, text);
  return config;
}

void validate(const RunConfig& config) {
  try {
    config.detection.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (config.sigma_bits < 0 || config.sigma_bits > 64) {
    throw ConfigError("sigma_bits must be in [0, 64]");
  }
  if (!config.detection.inter_worker && !config.detection.intra_worker) {
    throw ConfigError("at least one detection dimension must be enabled");
  }
  if (config.scenario) {
    try {
      config.scenario->validate();
    } catch (const SynthError& e) {
      throw ConfigError(e.what());
    }
  }
}

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ia = i;
      std::size_t jb = j;
      while (ia < a.size() && std::isdigit(static_cast<unsigned char>(a[ia]))) ++ia;
      while (jb < b.size() && std::isdigit(static_cast<unsigned char>(b[jb]))) ++jb;
      std::string_view na = a.substr(i, ia - i);
      std::string_view nb = b.substr(j, jb - j);
      na.remove_prefix(std::min(na.find_first_not_of('0'), na.size() - 1));
      nb.remove_prefix(std::min(nb.find_first_not_of('0'), nb.size() - 1));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ia;
      j = jb;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  return a.size() - i < b.size() - j;
}

std::vector<std::string> list_trace_files(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json" &&
        name != "ground_truth.json") {
      files.push_back(entry.path().string());
    }
  }
  if (ec) throw ConfigError("cannot list trace dir " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end(),
            [](const std::string& a, const std::string& b) {
              return natural_less(a, b);
            });
  return files;
}

Corpus load_corpus(const std::vector<std::string>& files, TimeUnit unit,
                   std::size_t jobs) {
  auto parsed = parallel_map<ParseResult>(files.size(), jobs, [&](std::size_t i) {
    return parse_trace_file(files[i], unit, 0);
  });

  Corpus corpus;
  corpus.files = files;
  std::size_t total = 0;
  for (const ParseResult& r : parsed) total += r.events.size();
  corpus.events.reserve(total);

  EventId offset = 0;
  for (ParseResult& r : parsed) {
    for (TraceEvent& event : r.events) {
      event.id += offset;
      corpus.events.push_back(std::move(event));
    }
    offset += r.events.size();
    for (auto& [key, name] : r.thread_names) {
      corpus.thread_names.emplace(key, std::move(name));
    }
    corpus.stats.add(r.stats);
  }
  return corpus;
}

namespace {

struct TreeSet {
  std::vector<TraceTree> trees;  // canonical order, tree_id == index
  std::size_t crossing_intervals = 0;
};

TreeSet build_forest(const Corpus& corpus, const RunConfig& config) {
  const auto groups = group_by_role(corpus.events, corpus.thread_names,
                                    config.role_rules);
  auto built = parallel_map<TreeBuildResult>(
      groups.size(), config.jobs,
      [&](std::size_t i) { return build_trace_trees(groups[i]); });

  TreeSet set;
  for (TreeBuildResult& result : built) {
    set.crossing_intervals += result.crossing_intervals;
    for (TraceTree& tree : result.trees) {
      tree.tree_id = static_cast<std::uint32_t>(set.trees.size());
      set.trees.push_back(std::move(tree));
    }
  }
  return set;
}

std::vector<std::string> resolve_inputs(const RunConfig& config) {
  if (!config.trace_files.empty()) return config.trace_files;
  if (!config.trace_dir.empty()) {
    auto files = list_trace_files(config.trace_dir);
    if (files.empty()) {
      throw ConfigError("no trace files found in " + config.trace_dir);
    }
    return files;
  }
  throw ConfigError("no trace inputs: set trace files or a trace dir");
}

}  // namespace

DetectionOutput run_detect(const RunConfig& config) {
  validate(config);
  const auto files = resolve_inputs(config);
  Corpus corpus = load_corpus(files, config.time_unit, config.jobs);

  TreeSet set = build_forest(corpus, config);
  const std::size_t clusters =
      assign_str_ids(set.trees, corpus.events, config.sigma_bits);

  std::vector<AnomalyFinding> findings =
      run_detection(set.trees, corpus.events, config.detection, config.jobs);

  DetectionOutput output;
  output.cluster_count = clusters;
  output.findings = findings;

  AnalysisReport& report = output.report;
  report.task_config = config.task_config;
  report.metric_summary = config.metric_summary;
  report.diagnostics.total_events = corpus.events.size();
  report.diagnostics.skipped_events = corpus.stats.skipped_events;
  report.diagnostics.unmatched_begin = corpus.stats.unmatched_begin;
  report.diagnostics.unmatched_end = corpus.stats.unmatched_end;
  report.diagnostics.ignored_phases = corpus.stats.ignored_phases;
  report.diagnostics.crossing_intervals = set.crossing_intervals;

  report.findings.reserve(findings.size());
  for (const AnomalyFinding& finding : findings) {
    const TraceTree& tree = set.trees[finding.tree_id];
    const TraceEvent& event =
        corpus.events[static_cast<std::size_t>(finding.event_id)];
    ResolvedFinding rf;
    rf.finding = finding;
    rf.function_name = event.name;
    rf.worker_pid = tree.pid;
    rf.tid = tree.tid;
    rf.domain = tree.role;
    rf.start_ns = event.start_ns;
    rf.duration_ns = event.duration_ns;
    report.findings.push_back(std::move(rf));
  }

  if (!config.ground_truth_path.empty()) {
    const GroundTruth truth = read_ground_truth(config.ground_truth_path);
    report.scores = score(findings, truth, corpus.events.size(), config.lenient);
  }

  output.trees = std::move(set.trees);

  if (!config.report_out.empty()) write_report_json(report, config.report_out);
  if (!config.template_out.empty()) {
    std::ofstream file(config.template_out, std::ios::binary | std::ios::trunc);
    if (!file.is_open()) {
      throw ReportIoError("cannot write " + config.template_out);
    }
    const std::string text = render_template(report);
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  return output;
}

int cmd_detect(const RunConfig& config) {
  DetectionOutput output = run_detect(config);
  std::cout << "events: " << output.report.diagnostics.total_events
            << " trees: " << output.trees.size()
            << " clusters: " << output.cluster_count
            << " findings: " << output.findings.size() << "\n";
  if (output.report.scores) {
    const Scores& s = *output.report.scores;
    std::cout << "precision: " << s.precision << " recall: " << s.recall
              << " f1: " << s.f1 << " fpr: " << s.fpr << "\n";
  }
  return output.findings.empty() ? 0 : 2;
}

int cmd_synth(const RunConfig& config) {
  validate(config);
  if (!config.scenario) {
    throw ConfigError("synth needs a scenario in the config file");
  }
  SynthResult result = generate(*config.scenario, config.faults, config.out_dir);
  std::cout << "wrote " << result.files.size() << " trace files ("
            << result.total_events << " events) and "
            << result.ground_truth_path << "\n";
  return 0;
}

int cmd_score(const RunConfig& config) {
  validate(config);
  if (config.report_out.empty() || config.ground_truth_path.empty()) {
    throw ConfigError("score needs --report-out (report to read) and --ground-truth");
  }
  const AnalysisReport report = read_report_json(config.report_out);
  const GroundTruth truth = read_ground_truth(config.ground_truth_path);
  std::vector<AnomalyFinding> findings;
  findings.reserve(report.findings.size());
  for (const ResolvedFinding& rf : report.findings) {
    findings.push_back(rf.finding);
  }
  const Scores s = score(findings, truth, report.diagnostics.total_events,
                         config.lenient);
  std::cout << "precision: " << s.precision << "\n"
            << "recall: " << s.recall << "\n"
            << "f1: " << s.f1 << "\n"
            << "fpr: " << s.fpr << "\n"
            << "tp: " << s.tp << " fp: " << s.fp << " fn: " << s.fn << "\n";
  return 0;
}

void dump_trees(const RunConfig& config, std::ostream& out) {
  validate(config);
  const auto files = resolve_inputs(config);
  Corpus corpus = load_corpus(files, config.time_unit, config.jobs);
  const auto groups =
      group_by_role(corpus.events, corpus.thread_names, config.role_rules);
  for (const ThreadGroup& group : groups) {
    const TreeBuildResult built = build_trace_trees(group);
    out << "pid=" << group.pid << " tid=" << group.tid
        << " role=" << to_string(group.role) << " name=\"" << group.thread_name
        << "\" trees=" << built.trees.size()
        << " crossing=" << built.crossing_intervals << "\n";
    for (const TraceTree& tree : built.trees) {
      for (const TreeNode& node : tree.nodes) {
        const TraceEvent& event =
            corpus.events[static_cast<std::size_t>(node.event_id)];
        for (std::uint32_t d = 0; d < node.depth; ++d) out << "  ";
        out << "- id=" << event.id << " \"" << event.name
            << "\" st=" << event.start_ns << " dur=" << event.duration_ns
            << "\n";
      }
    }
  }
}

}  // namespace tracetree
