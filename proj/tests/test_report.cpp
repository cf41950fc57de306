#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "report_fixtures.hpp"
#include "tracetree/report.hpp"

using namespace tracetree;

namespace {

std::string golden(const std::string& name) {
  const std::string path = std::string(TEST_GOLDEN_DIR) + "/" + name;
  std::ifstream file(path, std::ios::binary);
  REQUIRE_MESSAGE(file.is_open(), "missing golden file ", path);
  return std::string((std::istreambuf_iterator<char>(file)),
                     std::istreambuf_iterator<char>());
}

AnalysisReport random_report(std::mt19937_64& rng) {
  AnalysisReport report;
  const std::size_t config_entries = rng() % 4;
  for (std::size_t i = 0; i < config_entries; ++i) {
    report.task_config.emplace_back("key" + std::to_string(i),
                                    "value" + std::to_string(rng() % 100));
  }
  const std::size_t findings = rng() % 6;
  for (std::size_t i = 0; i < findings; ++i) {
    ResolvedFinding rf;
    rf.finding.event_id = rng() % 10000;
    rf.finding.tree_id = static_cast<std::uint32_t>(rng() % 500);
    rf.finding.node_index = static_cast<std::uint32_t>(rng() % 40);
    rf.finding.depth = static_cast<std::uint32_t>(rng() % 6);
    rf.finding.dimension =
        rng() % 2 ? Dimension::InterWorker : Dimension::IntraWorker;
    rf.finding.kind = rng() % 4 == 0 ? FindingKind::StructuralDiscrepancy
                                     : FindingKind::DurationOutlier;
    rf.finding.causal_role =
        rng() % 2 ? CausalRole::RootCandidate : CausalRole::Propagated;
    rf.finding.deviation = static_cast<double>(rng() % 1000) / 100.0;
    rf.finding.group =
        GroupStats{static_cast<std::uint32_t>(rng() % 8),
                   rf.finding.depth,
                   "fn" + std::to_string(rng() % 5),
                   static_cast<double>(rng() % 1000000),
                   static_cast<double>(rng() % 10000) / 3.0,
                   1 + rng() % 200};
    rf.function_name = rf.finding.group.name;
    rf.worker_pid = 4000 + static_cast<std::int64_t>(rng() % 8);
    rf.tid = 1 + static_cast<std::int64_t>(rng() % 3);
    rf.domain = static_cast<ThreadRole>(rng() % 5);
    rf.start_ns = static_cast<std::int64_t>(rng() % 1000000000);
    rf.duration_ns = static_cast<std::int64_t>(rng() % 10000000);
    report.findings.push_back(std::move(rf));
  }
  if (rng() % 2) report.metric_summary = "metric line " + std::to_string(rng());
  if (rng() % 2) {
    Scores scores;
    scores.precision = 0.5 + static_cast<double>(rng() % 50) / 100.0;
    scores.recall = 0.5 + static_cast<double>(rng() % 50) / 100.0;
    scores.f1 = 0.5;
    scores.fpr = static_cast<double>(rng() % 100) / 10000.0;
    scores.tp = rng() % 100;
    scores.fp = rng() % 10;
    scores.fn = rng() % 10;
    report.scores = scores;
  }
  report.diagnostics.total_events = rng() % 100000;
  report.diagnostics.skipped_events = rng() % 10;
  report.diagnostics.crossing_intervals = rng() % 10;
  return report;
}

bool reports_equal(const AnalysisReport& a, const AnalysisReport& b) {
  return report_to_json(a) == report_to_json(b);
}

}  // namespace

TEST_CASE("template golden: empty report") {
  const std::string text = render_template(testing::empty_report());
  CHECK(text == golden("template_empty.txt"));
  CHECK(text.find("no anomalous events detected") != std::string::npos);
}

TEST_CASE("template golden: single CUDA finding") {
  const std::string text = render_template(testing::single_finding_report());
  CHECK(text == golden("template_single.txt"));
  // Original function name verbatim in the CUDA domain section.
  CHECK(text.find("[CudaKernel]\n- function=\"mlp_gemm_fp16\"") !=
        std::string::npos);
}

TEST_CASE("template golden: multi-domain report") {
  const std::string text = render_template(testing::multi_domain_report());
  CHECK(text == golden("template_multi.txt"));
}

TEST_CASE("template rendering is deterministic") {
  const AnalysisReport report = testing::multi_domain_report();
  CHECK(render_template(report) == render_template(report));
}

TEST_CASE("report JSON round-trips") {
  std::mt19937_64 rng(4242);
  for (int round = 0; round < 50; ++round) {
    const AnalysisReport report = random_report(rng);
    const AnalysisReport loaded = report_from_json(report_to_json(report));
    CHECK(reports_equal(report, loaded));
  }
}

TEST_CASE("scores block present only when scores were computed") {
  const std::string without = report_to_json(testing::empty_report());
  CHECK(without.find("\"scores\"") == std::string::npos);
  const std::string with = report_to_json(testing::multi_domain_report());
  CHECK(with.find("\"scores\"") != std::string::npos);
  CHECK(with.find("\"precision\"") != std::string::npos);
  CHECK(with.find("\"metric_summary\"") != std::string::npos);
}

TEST_CASE("report file IO round-trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tracetree_tests" / "report";
  fs::create_directories(dir);
  const std::string path = (dir / "report.json").string();
  const AnalysisReport report = testing::multi_domain_report();
  write_report_json(report, path);
  const AnalysisReport loaded = read_report_json(path);
  CHECK(reports_equal(report, loaded));
  CHECK_THROWS_AS(read_report_json("/nonexistent/report.json"), ReportIoError);
}

TEST_CASE("unreadable report JSON is rejected") {
  CHECK_THROWS_AS(report_from_json("{"), ReportIoError);
  CHECK_THROWS_AS(report_from_json(R"({"report_version": 99, "task_config": {},
                                      "findings": []})"),
                  ReportIoError);
}
