// Copyright 2026 The coopsched Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <coopsched/check.hpp>
#include <coopsched/cli/config.hpp>
#include <coopsched/metrics.hpp>
#include <coopsched/runtime/bench.hpp>
#include <coopsched/sim/engine.hpp>
#include <coopsched/trace.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace coopsched::cli {

// Exit statuses shared by the subcommands.
enum Exit : int {
  kOk = 0,
  kViolations = 1,
  kBadInput = 2,
  kStalled = 3,
  kStallMissing = 4,
};

struct RunFlags {
  bool expect_stall = false;
};

// One measured run: a policy on one sweep point and repeat.
struct RunRecord {
  std::size_t point = 0;
  std::optional<Json> sweep_value;
  std::uint32_t repeat = 0;
  std::uint64_t seed = 0;
  std::string policy;
  Metrics metrics;
  std::string stem;
};

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

inline std::string run_stem(const ExperimentConfig& c, const std::string& policy, std::size_t point,
                            std::uint32_t rep) {
  std::string s = policy;
  if (c.sweep) s += ".p" + std::to_string(point);
  if (c.repeat > 1) s += ".r" + std::to_string(rep);
  return s;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline std::string sweep_text(const std::optional<Json>& v) { return v ? v->dump() : "-"; }

// Per-run comparison against the first policy of the same point and repeat.
inline std::string comparison_tsv(const std::vector<RunRecord>& runs) {
  std::ostringstream os;
  os << "point\tsweep_value\trepeat\tseed\tpolicy\tmakespan_ns\tmean_latency_ns\tp99_latency_ns"
        "\tthroughput_per_s\tmakespan_ratio\tlatency_ratio\tstalled\tdeadlocked\n";
  for (const auto& r : runs) {
    const RunRecord* base = nullptr;
    for (const auto& b : runs)
      if (b.point == r.point && b.repeat == r.repeat) {
        base = &b;
        break;
      }
    auto ratio = [](double a, double b) { return b > 0 ? fmt(a / b) : std::string("-"); };
    const auto& m = r.metrics;
    os << r.point << '\t' << sweep_text(r.sweep_value) << '\t' << r.repeat << '\t' << r.seed << '\t'
       << r.policy << '\t' << m.makespan_ns << '\t' << fmt(m.latency.mean_ns) << '\t'
       << m.latency.p99_ns << '\t' << fmt(m.throughput_per_s) << '\t'
       << ratio(static_cast<double>(m.makespan_ns), static_cast<double>(base->metrics.makespan_ns))
       << '\t' << ratio(m.latency.mean_ns, base->metrics.latency.mean_ns) << '\t' << m.stalled << '\t'
       << m.deadlocked << '\n';
  }
  return os.str();
}

// Tidy table: one row per (run, metric).
inline std::string plot_tsv(const std::vector<RunRecord>& runs, const std::string& sweep_key) {
  std::ostringstream os;
  os << "mode\tpoint\tsweep_key\tsweep_value\trepeat\tseed\tpolicy\tmetric\tvalue\n";
  for (const auto& r : runs) {
    const auto& m = r.metrics;
    std::vector<std::pair<const char*, std::string>> vals = {
        {"makespan_ns", std::to_string(m.makespan_ns)},
        {"latency_mean_ns", fmt(m.latency.mean_ns)},
        {"latency_p50_ns", std::to_string(m.latency.p50_ns)},
        {"latency_p99_ns", std::to_string(m.latency.p99_ns)},
        {"throughput_per_s", fmt(m.throughput_per_s)},
        {"context_switches", std::to_string(m.context_switches)},
        {"preemptions", std::to_string(m.preemptions)},
        {"lock_holder_preemptions", std::to_string(m.lock_holder_preemptions)},
        {"spin_waste_ns", std::to_string(m.spin_waste_ns)},
        {"core_idle_ns", std::to_string(m.core_idle_ns)},
        {"created_total", std::to_string(m.created_total)},
        {"reused_total", std::to_string(m.reused_total)},
    };
    for (const auto& [k, v] : vals)
      os << m.mode << '\t' << r.point << '\t' << (sweep_key.empty() ? "-" : sweep_key) << '\t'
         << sweep_text(r.sweep_value) << '\t' << r.repeat << '\t' << r.seed << '\t' << r.policy << '\t'
         << k << '\t' << v << '\n';
  }
  return os.str();
}

template <class RunOne>
int run_experiment(const ExperimentConfig& c, const RunFlags& flags, std::ostream& log, RunOne&& run_one) {
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);
  fs::path dir(c.out_dir);
  write_file(dir / "config.json", cli::to_json(c).dump(2) + "\n");
  std::vector<RunRecord> runs;
  std::size_t points = c.sweep ? c.sweep->values.size() : 1;
  bool any_stall = false;
  for (std::size_t pt = 0; pt < points; ++pt) {
    const Json* sv = c.sweep ? &c.sweep->values[pt] : nullptr;
    for (std::uint32_t rep = 0; rep < c.repeat; ++rep) {
      std::uint64_t seed = c.seed + rep;
      auto w = make_workload(c, seed, sv);
      for (auto p : c.policies) {
        RunRecord r;
        r.point = pt;
        if (sv) r.sweep_value = *sv;
        r.repeat = rep;
        r.seed = seed;
        auto [metrics, trace] = run_one(w, p, seed);
        r.metrics = std::move(metrics);
        r.policy = r.metrics.policy;
        r.stem = run_stem(c, r.policy, pt, rep);
        if (trace) write_file(dir / (r.stem + ".trace"), *trace);
        write_file(dir / (r.stem + ".metrics.json"), to_text(r.metrics));
        if (r.metrics.stalled) {
          any_stall = true;
          write_file(dir / (r.stem + ".stall.json"), coopsched::to_json(*r.metrics.stall).dump(2) + "\n");
          log << r.stem << ": stall reported at " << r.metrics.stall->detected_at.count() << " ns\n";
        }
        if (r.metrics.deadlocked) log << r.stem << ": run did not drain (deadlock or time limit)\n";
        runs.push_back(std::move(r));
      }
    }
  }
  write_file(dir / "comparison.tsv", comparison_tsv(runs));
  write_file(dir / "plot.tsv", plot_tsv(runs, c.sweep ? c.sweep->key : std::string()));
  for (const auto& r : runs)
    log << r.stem << ": makespan " << r.metrics.makespan_ns << " ns, mean latency "
        << fmt(r.metrics.latency.mean_ns) << " ns\n";
  if (flags.expect_stall) return any_stall ? kOk : kStallMissing;
  return any_stall ? kStalled : kOk;
}

}  // namespace detail

inline sim::SimOptions sim_options(const ExperimentConfig& c, std::uint64_t seed) {
  sim::SimOptions o;
  o.sched = c.scheduler;
  o.latency = c.latency;
  o.fair = c.fair;
  o.seed = seed;
  o.record_trace = c.record_trace;
  o.time_limit = c.time_limit;
  return o;
}

// Simulates every policy on every sweep point and repeat. Writes per run
// <stem>.trace, <stem>.metrics.json and <stem>.stall.json (if stalled), plus
// comparison.tsv and plot.tsv for the whole experiment.
inline int cmd_sim(const ExperimentConfig& c, const RunFlags& flags, std::ostream& log) {
  return detail::run_experiment(
      c, flags, log,
      [&](const sim::Workload& w, sim::PolicyKind p, std::uint64_t seed) {
        auto res = sim::run_sim(w, p, sim_options(c, seed));
        if (!res.error.empty()) throw Error("simulation failed: " + res.error);
        std::optional<std::string> trace;
        if (c.record_trace) trace = to_text(res.trace);
        return std::make_pair(std::move(res.metrics), std::move(trace));
      });
}

inline runtime::BenchOptions bench_options(const ExperimentConfig& c, runtime::Backend b,
                                           std::uint64_t seed) {
  runtime::BenchOptions o;
  o.runtime.sched = c.scheduler;
  o.runtime.backend = b;
  o.runtime.watchdog_horizon = c.bench.watchdog_horizon;
  o.runtime.record_trace = c.bench.record_trace && b == runtime::Backend::Coop;
  o.min_duration = c.bench.min_duration;
  o.time_scale = c.bench.time_scale;
  o.time_limit = c.bench.time_limit;
  o.seed = seed;
  return o;
}

inline runtime::Backend backend_for(sim::PolicyKind p) {
  return p == sim::PolicyKind::Coop ? runtime::Backend::Coop : runtime::Backend::Native;
}

// Runs the workloads on real threads. The coop policy maps to the cooperative
// runtime and fair to native OS threads.
inline int cmd_bench(const ExperimentConfig& c, const RunFlags& flags, std::ostream& log) {
  return detail::run_experiment(
      c, flags, log,
      [&](const sim::Workload& w, sim::PolicyKind p, std::uint64_t seed) {
        auto res = runtime::run_bench(w, bench_options(c, backend_for(p), seed));
        std::optional<std::string> trace;
        if (c.bench.record_trace && p == sim::PolicyKind::Coop) trace = to_text(res.trace);
        return std::make_pair(std::move(res.metrics), std::move(trace));
      });
}

// Replays every invariant over a trace file. Exit 0 iff no violation.
inline int cmd_check(const std::string& path, std::ostream& out, std::ostream& err) {
  Trace t;
  try {
    t = load_trace(path);
  } catch (const Error& e) {
    err << path << ": " << e.what() << '\n';
    return kBadInput;
  }
  auto v = check::check_trace(t);
  out << check::to_text(v);
  out << path << ": " << t.records.size() << " records, " << v.size() << " violations\n";
  return v.empty() ? kOk : kViolations;
}

// Writes the generated workload document for the config's first sweep point.
inline int cmd_gen(const ExperimentConfig& c, const std::string& out_path, std::ostream& out) {
  const Json* sv = c.sweep ? &c.sweep->values.front() : nullptr;
  auto w = make_workload(c, c.seed, sv);
  auto text = sim::to_json(w).dump(2) + "\n";
  if (out_path.empty() || out_path == "-") out << text;
  else detail::write_file(out_path, text);
  return kOk;
}

}  // namespace coopsched::cli
