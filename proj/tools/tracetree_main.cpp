#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tracetree/pipeline.hpp"

namespace {

using tracetree::RunConfig;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> files;
  std::string trace_dir;
  std::string time_unit = "us";
  double lambda = 3.0;
  std::size_t min_group = 3;
  int sigma_bits = 3;
  std::string dimensions = "inter,intra";
  std::string report_out;
  std::string template_out;
  std::string ground_truth;
  bool lenient = true;
  std::size_t jobs = 0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

void add_common_options(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "Run-config JSON file; explicit flags override it");
  cmd->add_option("files", flags.files, "Trace files (Chrome Trace Event JSON)");
  cmd->add_option("--trace-dir", flags.trace_dir,
                  "Directory of *.json trace files");
  cmd->add_option("--time-unit", flags.time_unit, "Timestamp unit: ns or us")
      ->check(CLI::IsMember({"ns", "us"}))
      ->capture_default_str();
  cmd->add_option("--lambda", flags.lambda,
                  "Significance coefficient: deviations of the group stddev "
                  "needed to flag")
      ->capture_default_str();
  cmd->add_option("--min-group", flags.min_group,
                  "Smallest group size tested statistically")
      ->capture_default_str();
  cmd->add_option("--sigma-bits", flags.sigma_bits,
                  "Hamming distance threshold for shared str_ids")
      ->capture_default_str();
  cmd->add_option("--dimensions", flags.dimensions,
                  "Detection dimensions, comma separated: inter,intra")
      ->capture_default_str();
  cmd->add_option("--report-out", flags.report_out, "Report JSON output path");
  cmd->add_option("--template-out", flags.template_out,
                  "Instruction template text output path");
  cmd->add_option("--ground-truth", flags.ground_truth,
                  "Ground-truth JSON for scoring");
  cmd->add_flag("--lenient,!--no-lenient", flags.lenient,
                "Skip propagated-symptom events when scoring (default: on)");
  cmd->add_option("--jobs", flags.jobs,
                  "Worker threads; 0 means available parallelism")
      ->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Override the scenario RNG seed");
  cmd->add_option("--out-dir", flags.out_dir,
                  "Output directory for generated traces")
      ->capture_default_str();
}

RunConfig build_config(const CLI::App* cmd, const CommonFlags& flags) {
  RunConfig config;
  if (cmd->count("--config") > 0) {
    config = tracetree::load_run_config(flags.config_path);
  }
  if (!flags.files.empty()) config.trace_files = flags.files;
  if (cmd->count("--trace-dir") > 0) config.trace_dir = flags.trace_dir;
  if (cmd->count("--time-unit") > 0) {
    config.time_unit = tracetree::time_unit_from_string(flags.time_unit);
  }
  if (cmd->count("--lambda") > 0) config.detection.lambda = flags.lambda;
  if (cmd->count("--min-group") > 0) config.detection.min_group = flags.min_group;
  if (cmd->count("--sigma-bits") > 0) config.sigma_bits = flags.sigma_bits;
  if (cmd->count("--dimensions") > 0) {
    config.detection.inter_worker = false;
    config.detection.intra_worker = false;
    std::size_t pos = 0;
    const std::string& dims = flags.dimensions;
    while (pos <= dims.size()) {
      const std::size_t comma = std::min(dims.find(',', pos), dims.size());
      const std::string part = dims.substr(pos, comma - pos);
      if (part == "inter") {
        config.detection.inter_worker = true;
      } else if (part == "intra") {
        config.detection.intra_worker = true;
      } else if (!part.empty()) {
        throw tracetree::ConfigError("unknown dimension: " + part);
      }
      pos = comma + 1;
    }
  }
  if (cmd->count("--report-out") > 0) config.report_out = flags.report_out;
  if (cmd->count("--template-out") > 0) config.template_out = flags.template_out;
  if (cmd->count("--ground-truth") > 0) {
    config.ground_truth_path = flags.ground_truth;
  }
  if (cmd->count("--lenient") > 0 || cmd->count("--no-lenient") > 0) {
    config.lenient = flags.lenient;
  }
  if (cmd->count("--jobs") > 0) config.jobs = flags.jobs;
  if (cmd->count("--seed") > 0 && config.scenario) {
    config.scenario->seed = flags.seed;
  }
  if (cmd->count("--out-dir") > 0) config.out_dir = flags.out_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-tree anomaly detection for parallel-worker traces"};
  app.require_subcommand(1);

  CommonFlags detect_flags;
  CLI::App* detect = app.add_subcommand(
      "detect", "Ingest traces, detect anomalies, write report and template");
  add_common_options(detect, detect_flags);

  CommonFlags synth_flags;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate synthetic worker traces with fault injection");
  add_common_options(synth, synth_flags);

  CommonFlags score_flags;
  CLI::App* score = app.add_subcommand(
      "score", "Score a report (--report-out) against ground truth");
  add_common_options(score, score_flags);

  CommonFlags dump_flags;
  CLI::App* dump = app.add_subcommand(
      "dump-trees", "Print the invocation forest of each thread");
  add_common_options(dump, dump_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (detect->parsed()) {
      return tracetree::cmd_detect(build_config(detect, detect_flags));
    }
    if (synth->parsed()) {
      return tracetree::cmd_synth(build_config(synth, synth_flags));
    }
    if (score->parsed()) {
      return tracetree::cmd_score(build_config(score, score_flags));
    }
    if (dump->parsed()) {
      tracetree::dump_trees(build_config(dump, dump_flags), std::cout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
