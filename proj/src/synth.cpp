#include "tracetree/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace tracetree {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::int64_t kTimeOrigin = 1'000'000;  // ns
constexpr std::int64_t kCudaLaunchLag = 2'000;   // kernel start inside launch op
constexpr std::int64_t kNcclStartLag = 1'000;    // collective start inside wait op
constexpr std::size_t kMaxCoord = 1u << 20;

constexpr const char* kPrepName = "py_batch_prep";
constexpr const char* kIterationName = "decode_step";
constexpr const char* kLayerName = "run_layer";
constexpr const char* kWaitName = "py_allreduce_wait";
constexpr const char* kCollectiveName = "nccl_all_reduce_ring";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Bell-shaped noise with unit variance and hard bounds: a sum of twelve
// uniforms, clamped at `limit` sigma. Bounded noise is what keeps healthy
// corpora free of three-sigma outliers, and nothing libm-dependent is
// sampled.
double bounded_noise(std::mt19937_64& rng, double limit) {
  double sum = 0.0;
  for (int i = 0; i < 12; ++i) sum += uniform01(rng);
  return std::clamp(sum - 6.0, -limit, limit);
}

std::int64_t jittered(std::int64_t base, double noise, double jitter) {
  const double value = static_cast<double>(base) * (1.0 + noise * jitter);
  const auto floor_ns = static_cast<std::int64_t>(
      std::llround(0.1 * static_cast<double>(base)));
  return std::max(static_cast<std::int64_t>(std::llround(value)), floor_ns);
}

std::int64_t scaled(std::int64_t value, double magnitude) {
  return static_cast<std::int64_t>(
      std::llround(static_cast<double>(value) * magnitude));
}

enum class Slot : std::uint64_t {
  Decode = 0,
  Prep,
  RunLayer,
  Launch,
  Kern,
  Wait,
  Nccl,
};

std::uint64_t coord_key(Slot slot, std::size_t i, std::size_t l, std::size_t k) {
  return (static_cast<std::uint64_t>(slot) << 60) |
         (static_cast<std::uint64_t>(i) << 40) |
         (static_cast<std::uint64_t>(l) << 20) | static_cast<std::uint64_t>(k);
}

struct WorkerTensors {
  // [iteration][layer][kernel]
  std::vector<std::vector<std::vector<std::int64_t>>> kern;
  std::vector<std::vector<std::vector<std::int64_t>>> overhead;
  std::vector<std::vector<std::vector<std::int64_t>>> stall_extra;
  std::vector<std::vector<std::int64_t>> collective;  // [iteration][layer]
  std::vector<std::vector<std::int64_t>> wait_overhead;
  std::vector<std::vector<std::int64_t>> peer_extra;
  std::vector<std::int64_t> prep;  // [iteration]
  std::set<std::uint64_t> drops;   // coord_key(Launch, i, l, k)

  std::int64_t launch(std::size_t i, std::size_t l, std::size_t k) const {
    return kern[i][l][k] + overhead[i][l][k] + stall_extra[i][l][k];
  }
  bool dropped(std::size_t i, std::size_t l, std::size_t k) const {
    return drops.contains(coord_key(Slot::Launch, i, l, k));
  }
  // The python-side wait op absorbs time lost to late peers; the collective
  // event itself carries only the wire time, so link faults and compute
  // faults surface in separate event populations.
  std::int64_t wait(std::size_t i, std::size_t l) const {
    return collective[i][l] + wait_overhead[i][l] + peer_extra[i][l];
  }
  std::int64_t nccl(std::size_t i, std::size_t l) const {
    return collective[i][l];
  }
};

WorkerTensors draw_worker(const ScenarioSpec& spec, std::size_t worker) {
  std::mt19937_64 rng(splitmix64(spec.seed ^ (0x632BE59BD9B4E019ULL *
                                              (worker + 1))));
  const ModelShape& model = spec.model;
  WorkerTensors t;
  t.prep.resize(spec.iterations);
  t.kern.resize(spec.iterations);
  t.overhead.resize(spec.iterations);
  t.stall_extra.resize(spec.iterations);
  t.collective.resize(spec.iterations);
  t.wait_overhead.resize(spec.iterations);
  t.peer_extra.resize(spec.iterations);
  for (std::size_t i = 0; i < spec.iterations; ++i) {
    // Noise is applied per iteration: clock and thermal drift move whole
    // iterations together, and the pools detection tests (same name, same
    // layer, across iterations or workers) then contain repeated copies of
    // each iteration's draw. A duplicated value among n pooled samples can
    // deviate by at most sqrt(n / copies) population sigmas, which with the
    // 2-sigma clamp keeps healthy corpora below any lambda >= 3.
    const double noise = bounded_noise(rng, 2.0);

    t.prep[i] = jittered(model.prep_ns, noise, spec.jitter);
    t.kern[i].resize(model.layers);
    t.overhead[i].resize(model.layers);
    t.stall_extra[i].resize(model.layers);
    t.collective[i].resize(model.layers);
    t.wait_overhead[i].resize(model.layers);
    t.peer_extra[i].assign(model.layers, 0);
    for (std::size_t l = 0; l < model.layers; ++l) {
      t.kern[i][l].resize(model.kernels.size());
      t.overhead[i][l].resize(model.kernels.size());
      t.stall_extra[i][l].assign(model.kernels.size(), 0);
      for (std::size_t k = 0; k < model.kernels.size(); ++k) {
        t.kern[i][l][k] =
            jittered(model.kernels[k].base_ns, noise, spec.jitter);
        t.overhead[i][l][k] =
            jittered(model.launch_overhead_ns, noise, spec.jitter);
      }
      t.collective[i][l] =
          jittered(model.collective_ns, noise, spec.jitter);
      t.wait_overhead[i][l] =
          jittered(model.launch_overhead_ns, noise, spec.jitter);
    }
  }
  return t;
}

struct Emitted {
  std::string name;
  std::int64_t tid = 0;
  std::int64_t start_ns = 0;
  std::int64_t duration_ns = 0;
  std::uint64_t coord = 0;
  std::uint32_t iteration = 0;
};

// Places one worker's iterations on its timeline: host ops laid out
// sequentially with fixed gaps, kernel and collective events anchored
// inside their host-side wrappers. Envelope durations (layer, iteration
// root) fall out of the layout.
std::vector<Emitted> layout_worker(const ScenarioSpec& spec,
                                   const WorkerTensors& t) {
  const ModelShape& model = spec.model;
  const std::int64_t gap = model.gap_ns;
  std::vector<Emitted> python;
  std::vector<Emitted> cuda;
  std::vector<Emitted> nccl;

  std::int64_t cur = kTimeOrigin;
  for (std::size_t i = 0; i < spec.iterations; ++i) {
    const std::int64_t iter_start = cur;
    const auto it = static_cast<std::uint32_t>(i);
    const std::size_t decode_index = python.size();
    python.push_back(Emitted{kIterationName, 1, iter_start, 0,
                             coord_key(Slot::Decode, i, 0, 0), it});

    std::int64_t off = iter_start + gap;
    python.push_back(Emitted{kPrepName, 1, off, t.prep[i],
                             coord_key(Slot::Prep, i, 0, 0), it});
    off += t.prep[i];

    for (std::size_t l = 0; l < model.layers; ++l) {
      off += gap;
      const std::int64_t layer_start = off;
      const std::size_t layer_index = python.size();
      python.push_back(Emitted{kLayerName, 1, layer_start, 0,
                               coord_key(Slot::RunLayer, i, l, 0), it});
      for (std::size_t k = 0; k < model.kernels.size(); ++k) {
        if (t.dropped(i, l, k)) continue;
        off += gap;
        const std::int64_t launch_dur = t.launch(i, l, k);
        python.push_back(Emitted{"py_launch_" + model.kernels[k].name, 1, off,
                                 launch_dur, coord_key(Slot::Launch, i, l, k),
                                 it});
        cuda.push_back(Emitted{model.kernels[k].name, 2, off + kCudaLaunchLag,
                               t.kern[i][l][k], coord_key(Slot::Kern, i, l, k),
                               it});
        off += launch_dur;
      }
      off += gap;
      python.push_back(Emitted{kWaitName, 1, off, t.wait(i, l),
                               coord_key(Slot::Wait, i, l, 0), it});
      nccl.push_back(Emitted{kCollectiveName, 3, off + kNcclStartLag,
                             t.nccl(i, l), coord_key(Slot::Nccl, i, l, 0), it});
      off += t.wait(i, l);
      off += gap;
      python[layer_index].duration_ns = off - layer_start;
    }
    off += gap;
    python[decode_index].duration_ns = off - iter_start;
    cur = off + gap;
  }

  std::vector<Emitted> all;
  all.reserve(python.size() + cuda.size() + nccl.size());
  all.insert(all.end(), python.begin(), python.end());
  all.insert(all.end(), cuda.begin(), cuda.end());
  all.insert(all.end(), nccl.begin(), nccl.end());
  return all;
}

void append_us(std::string& out, std::int64_t ns) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%lld.%03lld",
                static_cast<long long>(ns / 1000),
                static_cast<long long>(ns % 1000));
  out += buf;
}

void append_escaped(std::string& out, std::string_view text) {
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
}

void append_metadata(std::string& out, const char* meta_name,
                     std::int64_t pid, std::int64_t tid,
                     std::string_view value) {
  out += "{\"ph\":\"M\",\"name\":\"";
  out += meta_name;
  out += "\",\"pid\":";
  out += std::to_string(pid);
  out += ",\"tid\":";
  out += std::to_string(tid);
  out += ",\"args\":{\"name\":\"";
  append_escaped(out, value);
  out += "\"}},\n";
}

std::size_t window_begin(const FaultSpec& fault) { return fault.window_begin; }

std::size_t window_end(const FaultSpec& fault, const ScenarioSpec& spec) {
  if (fault.window_begin == 0 && fault.window_end == 0) return spec.iterations;
  return fault.window_end;
}

void validate_faults(const ScenarioSpec& spec, std::span<const FaultSpec> faults) {
  std::set<std::pair<int, std::uint64_t>> drop_claims;
  for (const FaultSpec& fault : faults) {
    if (fault.target != kAllWorkers &&
        (fault.target < 0 ||
         static_cast<std::size_t>(fault.target) >= spec.workers)) {
      throw SynthError("fault target outside worker range");
    }
    const std::size_t we = window_end(fault, spec);
    if (we > spec.iterations || window_begin(fault) >= we) {
      throw SynthError("fault window outside iteration range");
    }
    const bool uses_site = fault.kind == FaultKind::TransientStall ||
                           fault.kind == FaultKind::DroppedKernel;
    if (uses_site && (fault.layer >= spec.model.layers ||
                      fault.kernel >= spec.model.kernels.size())) {
      throw SynthError("fault site outside the model shape");
    }
    if (fault.kind == FaultKind::DroppedKernel) {
      for (std::size_t i = window_begin(fault); i < we; ++i) {
        const auto key = coord_key(Slot::Launch, i, fault.layer, fault.kernel);
        const int lo = fault.target == kAllWorkers ? 0 : fault.target;
        const int hi = fault.target == kAllWorkers
                           ? static_cast<int>(spec.workers)
                           : fault.target + 1;
        for (int w = lo; w < hi; ++w) {
          if (!drop_claims.emplace(w, key).second) {
            throw SynthError("conflicting faults: same event dropped twice");
          }
        }
      }
    } else if (fault.kind == FaultKind::TransientStall) {
      if (!(fault.magnitude > 1.0) && fault.delay_ns <= 0) {
        throw SynthError("transient stall needs magnitude > 1 or delay_ns > 0");
      }
    } else if (!(fault.magnitude > 1.0)) {
      throw SynthError("fault magnitude must be > 1");
    }
  }
}

}  // namespace

ModelShape default_model_shape() {
  ModelShape model;
  model.layers = 4;
  model.kernels = {
      {"attn_qkv_matmul", 420'000},
      {"attn_softmax", 180'000},
      {"mlp_gemm_fp16", 520'000},
  };
  return model;
}

void ScenarioSpec::validate() const {
  if (workers < 1) throw SynthError("workers must be >= 1");
  if (iterations < 1) throw SynthError("iterations must be >= 1");
  if (!(jitter >= 0.0)) throw SynthError("jitter must be >= 0");
  if (model.layers < 1) throw SynthError("model needs at least one layer");
  if (model.kernels.empty()) throw SynthError("model needs at least one kernel");
  for (const KernelSpec& kernel : model.kernels) {
    if (kernel.name.empty() || kernel.base_ns <= 0) {
      throw SynthError("kernel template entries need a name and base_ns > 0");
    }
  }
  if (model.collective_ns <= 0 || model.prep_ns <= 0 ||
      model.launch_overhead_ns <= 0 || model.gap_ns < 0) {
    throw SynthError("model durations must be positive");
  }
  if (iterations >= kMaxCoord || model.layers >= kMaxCoord ||
      model.kernels.size() >= kMaxCoord) {
    throw SynthError("scenario dimensions too large");
  }
}

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::GpuThrottle: return "gpu_throttle";
    case FaultKind::BandwidthCongestion: return "bandwidth_congestion";
    case FaultKind::MemoryPressure: return "memory_pressure";
    case FaultKind::TransientStall: return "transient_stall";
    case FaultKind::DroppedKernel: return "dropped_kernel";
    case FaultKind::GlobalPowerCap: return "global_power_cap";
  }
  return "gpu_throttle";
}

FaultKind fault_kind_from_string(std::string_view text) {
  if (text == "gpu_throttle") return FaultKind::GpuThrottle;
  if (text == "bandwidth_congestion") return FaultKind::BandwidthCongestion;
  if (text == "memory_pressure") return FaultKind::MemoryPressure;
  if (text == "transient_stall") return FaultKind::TransientStall;
  if (text == "dropped_kernel") return FaultKind::DroppedKernel;
  if (text == "global_power_cap") return FaultKind::GlobalPowerCap;
  throw SynthError("unknown fault kind: " + std::string(text));
}

SynthResult generate(const ScenarioSpec& spec, std::span<const FaultSpec> faults,
                     const std::string& out_dir) {
  spec.validate();
  validate_faults(spec, faults);
  std::filesystem::create_directories(out_dir);

  const ModelShape& model = spec.model;
  const std::size_t kernel_count = model.kernels.size();

  std::vector<WorkerTensors> healthy;
  healthy.reserve(spec.workers);
  for (std::size_t w = 0; w < spec.workers; ++w) {
    healthy.push_back(draw_worker(spec, w));
  }
  std::vector<WorkerTensors> faulted = healthy;

  // worker -> coord -> fault kind of the origin label
  std::vector<std::map<std::uint64_t, FaultKind>> truth_coords(spec.workers);

  auto worker_range = [&](const FaultSpec& fault) {
    const int lo = fault.target == kAllWorkers ? 0 : fault.target;
    const int hi = fault.target == kAllWorkers ? static_cast<int>(spec.workers)
                                               : fault.target + 1;
    return std::pair<int, int>{lo, hi};
  };

  for (const FaultSpec& fault : faults) {
    const auto [lo, hi] = worker_range(fault);
    const std::size_t wb = window_begin(fault);
    const std::size_t we = window_end(fault, spec);
    switch (fault.kind) {
      case FaultKind::GpuThrottle:
      case FaultKind::GlobalPowerCap:
        for (int w = lo; w < hi; ++w) {
          for (std::size_t i = wb; i < we; ++i) {
            for (std::size_t l = 0; l < model.layers; ++l) {
              for (std::size_t k = 0; k < kernel_count; ++k) {
                faulted[w].kern[i][l][k] =
                    scaled(faulted[w].kern[i][l][k], fault.magnitude);
                truth_coords[w][coord_key(Slot::Kern, i, l, k)] = fault.kind;
              }
            }
          }
        }
        break;
      case FaultKind::MemoryPressure:
        for (int w = lo; w < hi; ++w) {
          for (std::size_t i = wb; i < we; ++i) {
            faulted[w].prep[i] = scaled(faulted[w].prep[i], fault.magnitude);
            truth_coords[w][coord_key(Slot::Prep, i, 0, 0)] = fault.kind;
          }
        }
        break;
      case FaultKind::BandwidthCongestion:
        // A congested link slows the ring for every participant; only the
        // congested worker's collectives carry the origin label.
        for (std::size_t v = 0; v < spec.workers; ++v) {
          for (std::size_t i = wb; i < we; ++i) {
            for (std::size_t l = 0; l < model.layers; ++l) {
              faulted[v].collective[i][l] =
                  scaled(faulted[v].collective[i][l], fault.magnitude);
            }
          }
        }
        for (int w = lo; w < hi; ++w) {
          for (std::size_t i = wb; i < we; ++i) {
            for (std::size_t l = 0; l < model.layers; ++l) {
              truth_coords[w][coord_key(Slot::Nccl, i, l, 0)] = fault.kind;
            }
          }
        }
        break;
      case FaultKind::TransientStall:
        for (int w = lo; w < hi; ++w) {
          for (std::size_t i = wb; i < we; ++i) {
            const std::int64_t base = faulted[w].kern[i][fault.layer][fault.kernel] +
                                      faulted[w].overhead[i][fault.layer][fault.kernel];
            const std::int64_t extra =
                fault.delay_ns > 0
                    ? fault.delay_ns
                    : scaled(base, fault.magnitude - 1.0);
            faulted[w].stall_extra[i][fault.layer][fault.kernel] += extra;
            truth_coords[w][coord_key(Slot::Launch, i, fault.layer,
                                      fault.kernel)] = fault.kind;
          }
        }
        break;
      case FaultKind::DroppedKernel:
        for (int w = lo; w < hi; ++w) {
          for (std::size_t i = wb; i < we; ++i) {
            faulted[w].drops.insert(
                coord_key(Slot::Launch, i, fault.layer, fault.kernel));
            truth_coords[w][coord_key(Slot::RunLayer, i, fault.layer, 0)] =
                fault.kind;
          }
        }
        break;
    }
  }

  // Synchronization: a worker arriving late at the layer barrier makes the
  // others wait. Arrival deltas are measured against the healthy run. Every
  // wait at a perturbed barrier is a fault symptom, including the late
  // worker's own wait, which stays nominal while its peers stretch and so
  // stands out as a short outlier; those coordinates all join the
  // propagated set.
  std::vector<std::set<std::uint64_t>> perturbed_waits(spec.workers);
  for (std::size_t i = 0; i < spec.iterations; ++i) {
    for (std::size_t l = 0; l < model.layers; ++l) {
      std::vector<std::int64_t> delay(spec.workers, 0);
      std::int64_t max_delay = 0;
      bool any_delay = false;
      for (std::size_t w = 0; w < spec.workers; ++w) {
        std::int64_t d = 0;
        if (l == 0) d += faulted[w].prep[i] - healthy[w].prep[i];
        for (std::size_t k = 0; k < kernel_count; ++k) {
          if (faulted[w].dropped(i, l, k)) {
            d -= model.gap_ns + healthy[w].launch(i, l, k);
          } else {
            d += faulted[w].launch(i, l, k) - healthy[w].launch(i, l, k);
          }
        }
        delay[w] = d;
        max_delay = std::max(max_delay, d);
        if (d != 0) any_delay = true;
      }
      for (std::size_t w = 0; w < spec.workers; ++w) {
        faulted[w].peer_extra[i][l] = max_delay - delay[w];
        if (any_delay) {
          perturbed_waits[w].insert(coord_key(Slot::Wait, i, l, 0));
        }
      }
    }
  }

  SynthResult result;
  EventId next_id = 0;
  std::string path_prefix = out_dir;
  if (!path_prefix.empty() && path_prefix.back() != '/') path_prefix += '/';

  for (std::size_t w = 0; w < spec.workers; ++w) {
    const std::int64_t pid = 4000 + static_cast<std::int64_t>(w);
    const auto emitted = layout_worker(spec, faulted[w]);

    std::map<std::uint64_t, std::int64_t> healthy_durations;
    for (const Emitted& e : layout_worker(spec, healthy[w])) {
      healthy_durations.emplace(e.coord, e.duration_ns);
    }

    std::string out;
    out.reserve(emitted.size() * 110 + 1024);
    out += "{\"displayTimeUnit\":\"ms\",\"traceEvents\":[\n";
    append_metadata(out, "process_name", pid, 1,
                    "gpu_worker_" + std::to_string(w));
    append_metadata(out, "thread_name", pid, 1, "python_scheduler");
    append_metadata(out, "thread_name", pid, 2, "cuda_stream_0");
    append_metadata(out, "thread_name", pid, 3, "nccl_comm_0");

    for (std::size_t e = 0; e < emitted.size(); ++e) {
      const Emitted& ev = emitted[e];
      const EventId id = next_id++;
      result.iteration_of.emplace(id, ev.iteration);

      const auto truth_it = truth_coords[w].find(ev.coord);
      if (truth_it != truth_coords[w].end()) {
        result.truth.labels.push_back(
            GroundTruthLabel{static_cast<int>(w), id, truth_it->second});
      } else {
        const auto healthy_it = healthy_durations.find(ev.coord);
        const bool changed = healthy_it != healthy_durations.end() &&
                             healthy_it->second != ev.duration_ns;
        if (changed || perturbed_waits[w].contains(ev.coord)) {
          result.truth.propagated.emplace_back(static_cast<int>(w), id);
        }
      }

      out += "{\"ph\":\"X\",\"name\":\"";
      append_escaped(out, ev.name);
      out += "\",\"pid\":";
      out += std::to_string(pid);
      out += ",\"tid\":";
      out += std::to_string(ev.tid);
      out += ",\"ts\":";
      append_us(out, ev.start_ns);
      out += ",\"dur\":";
      append_us(out, ev.duration_ns);
      out += "}";
      out += (e + 1 < emitted.size()) ? ",\n" : "\n";
    }
    out += "]}\n";

    const std::string path = path_prefix + "worker_" + std::to_string(w) +
                             ".trace.json";
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file.is_open()) throw SynthError("cannot write " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file.good()) throw SynthError("short write to " + path);
    result.files.push_back(path);
  }

  result.total_events = static_cast<std::size_t>(next_id);
  result.ground_truth_path = path_prefix + "ground_truth.json";
  write_ground_truth(result.truth, result.ground_truth_path);
  return result;
}

void write_ground_truth(const GroundTruth& truth, const std::string& path) {
  ordered_json doc;
  doc["version"] = 1;
  doc["labels"] = ordered_json::array();
  for (const GroundTruthLabel& label : truth.labels) {
    doc["labels"].push_back({{"worker", label.worker},
                             {"event_id", label.event_id},
                             {"kind", std::string(to_string(label.kind))}});
  }
  doc["propagated"] = ordered_json::array();
  for (const auto& [worker, event_id] : truth.propagated) {
    doc["propagated"].push_back({{"worker", worker}, {"event_id", event_id}});
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file.is_open()) throw SynthError("cannot write " + path);
  file << doc.dump(1) << "\n";
}

GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file.is_open()) throw SynthError("cannot read " + path);
  ordered_json doc;
  try {
    file >> doc;
  } catch (const std::exception& e) {
    throw SynthError(path + ": " + e.what());
  }
  GroundTruth truth;
  if (!doc.contains("labels") || !doc["labels"].is_array()) {
    throw SynthError(path + ": missing labels array");
  }
  for (const auto& entry : doc["labels"]) {
    truth.labels.push_back(GroundTruthLabel{
        entry.at("worker").get<int>(), entry.at("event_id").get<EventId>(),
        fault_kind_from_string(entry.at("kind").get<std::string>())});
  }
  if (doc.contains("propagated")) {
    for (const auto& entry : doc["propagated"]) {
      truth.propagated.emplace_back(entry.at("worker").get<int>(),
                                    entry.at("event_id").get<EventId>());
    }
  }
  return truth;
}

Scores score(std::span<const AnomalyFinding> findings, const GroundTruth& truth,
             std::size_t total_events, bool lenient) {
  std::unordered_set<EventId> truth_set;
  for (const GroundTruthLabel& label : truth.labels) {
    truth_set.insert(label.event_id);
  }
  std::unordered_set<EventId> acceptable;
  if (lenient) {
    for (const auto& [worker, event_id] : truth.propagated) {
      if (!truth_set.contains(event_id)) acceptable.insert(event_id);
    }
  }

  std::unordered_set<EventId> flagged;
  for (const AnomalyFinding& finding : findings) {
    if (finding.event_id >= total_events) {
      throw ScoreError("finding references unknown event id " +
                       std::to_string(finding.event_id));
    }
    flagged.insert(finding.event_id);
  }

  Scores scores;
  for (EventId id : flagged) {
    if (truth_set.contains(id)) {
      ++scores.tp;
    } else if (!acceptable.contains(id)) {
      ++scores.fp;
    }
  }
  for (EventId id : truth_set) {
    if (!flagged.contains(id)) ++scores.fn;
  }

  scores.precision = (scores.tp + scores.fp) == 0
                         ? 1.0
                         : static_cast<double>(scores.tp) /
                               static_cast<double>(scores.tp + scores.fp);
  scores.recall = truth_set.empty()
                      ? 1.0
                      : static_cast<double>(scores.tp) /
                            static_cast<double>(scores.tp + scores.fn);
  const double pr = scores.precision + scores.recall;
  scores.f1 = pr == 0.0 ? 0.0 : 2.0 * scores.precision * scores.recall / pr;

  const std::size_t abnormal = truth_set.size() + acceptable.size();
  const std::size_t normal = total_events > abnormal ? total_events - abnormal : 0;
  scores.fpr = normal == 0 ? 0.0
                           : static_cast<double>(scores.fp) /
                                 static_cast<double>(normal);
  return scores;
}

}  // namespace tracetree
