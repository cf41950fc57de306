#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tracetree/pipeline.hpp"

using namespace tracetree;

namespace {

namespace fs = std::filesystem;

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tracetree_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  REQUIRE(file.is_open());
  file << text;
}

std::string slurp(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  REQUIRE(file.is_open());
  return std::string((std::istreambuf_iterator<char>(file)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("natural_less orders embedded numbers numerically") {
  CHECK(natural_less("worker_2.trace.json", "worker_10.trace.json"));
  CHECK(!natural_less("worker_10.trace.json", "worker_2.trace.json"));
  CHECK(natural_less("worker_9", "worker_10"));
  CHECK(natural_less("a1b2", "a1b10"));
  CHECK(natural_less("abc", "abd"));
  CHECK(natural_less("a", "ab"));
  CHECK(!natural_less("a01", "a1"));  // equal numbers: neither is smaller
  CHECK(!natural_less("a1", "a01"));
}

TEST_CASE("run config JSON sets every field") {
  RunConfig config;
  apply_config_json(config, R"({
    "trace_dir": "traces",
    "time_unit": "ns",
    "role_rules": [{"pattern": "gpu", "role": "CudaKernel"}],
    "sigma_bits": 5,
    "lambda": 2.5,
    "min_group": 4,
    "dimensions": ["intra"],
    "report_out": "r.json",
    "template_out": "t.txt",
    "ground_truth": "gt.json",
    "lenient": false,
    "jobs": 2,
    "task_config": {"model": "m", "batch": 16},
    "metric_summary": {"gpu_clock": "ok"},
    "out_dir": "synth",
    "scenario": {"workers": 2, "iterations": 5, "seed": 3,
                 "model": {"layers": 2,
                            "kernels": [{"name": "k", "base_ns": 1000}]}},
    "faults": [{"kind": "gpu_throttle", "target": 1, "magnitude": 3.0,
                "window": [1, 2]},
               {"kind": "global_power_cap", "target": "all", "magnitude": 2.0}]
  })");
  CHECK(config.trace_dir == "traces");
  CHECK(config.time_unit == TimeUnit::Nanoseconds);
  REQUIRE(config.role_rules.size() == 1);
  CHECK(config.role_rules[0].pattern == "gpu");
  CHECK(config.sigma_bits == 5);
  CHECK(config.detection.lambda == 2.5);
  CHECK(config.detection.min_group == 4);
  CHECK(!config.detection.inter_worker);
  CHECK(config.detection.intra_worker);
  CHECK(config.report_out == "r.json");
  CHECK(config.template_out == "t.txt");
  CHECK(config.ground_truth_path == "gt.json");
  CHECK(!config.lenient);
  CHECK(config.jobs == 2);
  REQUIRE(config.task_config.size() == 2);
  CHECK(config.task_config[1].second == "16");
  REQUIRE(config.metric_summary.has_value());
  CHECK(*config.metric_summary == "gpu_clock: ok\n");
  REQUIRE(config.scenario.has_value());
  CHECK(config.scenario->workers == 2);
  CHECK(config.scenario->model.kernels.size() == 1);
  REQUIRE(config.faults.size() == 2);
  CHECK(config.faults[0].target == 1);
  CHECK(config.faults[1].target == kAllWorkers);
  CHECK_NOTHROW(validate(config));
}

TEST_CASE("config validation rejects out-of-range knobs") {
  RunConfig config;
  config.detection.lambda = -1.0;
  CHECK_THROWS_AS(validate(config), ConfigError);

  config = RunConfig{};
  config.sigma_bits = 65;
  CHECK_THROWS_AS(validate(config), ConfigError);

  config = RunConfig{};
  config.detection.inter_worker = false;
  config.detection.intra_worker = false;
  CHECK_THROWS_AS(validate(config), ConfigError);

  CHECK_THROWS_AS(apply_config_json(config, "not json"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(config, R"({"dimensions": ["bogus"]})"),
                  ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("load_corpus renumbers ids across files") {
  const std::string dir = fresh_dir("corpus");
  write_file(dir + "/worker_0.trace.json", R"({"traceEvents":[
    {"ph":"X","name":"a","pid":1,"tid":1,"ts":0,"dur":5},
    {"ph":"X","name":"b","pid":1,"tid":1,"ts":10,"dur":5}
  ]})");
  write_file(dir + "/worker_1.trace.json", R"({"traceEvents":[
    {"ph":"X","name":"c","pid":2,"tid":1,"ts":0,"dur":5}
  ]})");

  const auto files = list_trace_files(dir);
  REQUIRE(files.size() == 2);
  const Corpus corpus = load_corpus(files, TimeUnit::Microseconds, 2);
  REQUIRE(corpus.events.size() == 3);
  for (std::size_t i = 0; i < corpus.events.size(); ++i) {
    CHECK(corpus.events[i].id == i);
  }
  CHECK(corpus.events[2].name == "c");
}

TEST_CASE("detect pipeline end-to-end with scoring and outputs") {
  const std::string dir = fresh_dir("pipeline");
  ScenarioSpec spec;
  spec.workers = 4;
  spec.iterations = 12;
  spec.seed = 99;
  std::vector<FaultSpec> faults = {
      {FaultKind::TransientStall, 2, 9.0, 0, 6, 7, 0, 0}};
  const SynthResult synth = generate(spec, faults, dir);

  RunConfig config;
  config.trace_dir = dir;
  config.time_unit = TimeUnit::Microseconds;
  config.ground_truth_path = synth.ground_truth_path;
  config.report_out = dir + "/out/report.json";
  config.template_out = dir + "/out/template.txt";
  fs::create_directories(dir + "/out");
  config.task_config = {{"model", "test"}};

  const DetectionOutput output = run_detect(config);
  CHECK(output.report.diagnostics.total_events == synth.total_events);
  CHECK(!output.findings.empty());
  REQUIRE(output.report.scores.has_value());
  CHECK(output.report.scores->recall == 1.0);
  CHECK(output.report.scores->fp == 0);

  // Outputs written and readable.
  const AnalysisReport loaded = read_report_json(config.report_out);
  CHECK(loaded.findings.size() == output.report.findings.size());
  CHECK(slurp(config.template_out) == render_template(output.report));

  // Same corpus, jobs 1 vs jobs 8: byte-identical outputs.
  RunConfig config8 = config;
  config8.jobs = 8;
  config8.report_out = dir + "/out/report8.json";
  config8.template_out = dir + "/out/template8.txt";
  config.jobs = 1;
  config.report_out = dir + "/out/report1.json";
  config.template_out = dir + "/out/template1.txt";
  run_detect(config);
  run_detect(config8);
  CHECK(slurp(dir + "/out/report1.json") == slurp(dir + "/out/report8.json"));
  CHECK(slurp(dir + "/out/template1.txt") == slurp(dir + "/out/template8.txt"));
}

TEST_CASE("detect pipeline fails cleanly without inputs") {
  RunConfig config;
  CHECK_THROWS_AS(run_detect(config), ConfigError);
  config.trace_dir = "/nonexistent/dir";
  CHECK_THROWS(run_detect(config));
}

TEST_CASE("dump_trees prints the forest") {
  const std::string dir = fresh_dir("dump");
  write_file(dir + "/t.json", R"({"traceEvents":[
    {"ph":"M","name":"thread_name","pid":1,"tid":1,"args":{"name":"python_main"}},
    {"ph":"X","name":"outer","pid":1,"tid":1,"ts":0,"dur":100},
    {"ph":"X","name":"inner","pid":1,"tid":1,"ts":10,"dur":20}
  ]})");
  RunConfig config;
  config.trace_dir = dir;
  std::ostringstream out;
  dump_trees(config, out);
  const std::string text = out.str();
  CHECK(text.find("role=PythonScheduling") != std::string::npos);
  CHECK(text.find("\"outer\"") != std::string::npos);
  CHECK(text.find("  - id=1 \"inner\"") != std::string::npos);
}
