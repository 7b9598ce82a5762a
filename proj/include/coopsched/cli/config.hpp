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

#include <coopsched/common.hpp>
#include <coopsched/config.hpp>
#include <coopsched/runtime/runtime.hpp>
#include <coopsched/sim/policy.hpp>
#include <coopsched/sim/workload.hpp>
#include <coopsched/workloads/churn.hpp>
#include <coopsched/workloads/ensemble.hpp>
#include <coopsched/workloads/matmul.hpp>
#include <coopsched/workloads/microservice.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace coopsched::cli {

using Json = sim::Json;

inline constexpr const char* kConfigSchema = "coopsched.experiment/1";

struct WorkloadSource {
  // matmul, microservice, ensemble, churn, single or file.
  std::string generator = "single";
  Json params = Json::object();
  std::string path;
};

// Re-runs the experiment once per value, with params[key] set to the value.
struct Sweep {
  std::string key;
  std::vector<Json> values;
};

struct BenchSettings {
  Nanos min_duration{0};
  double time_scale = 1.0;
  Nanos time_limit = std::chrono::seconds(60);
  Nanos watchdog_horizon = std::chrono::seconds(1);
  bool record_trace = true;
};

struct ExperimentConfig {
  std::vector<sim::PolicyKind> policies{sim::PolicyKind::Coop, sim::PolicyKind::Fair};
  std::uint64_t seed = 0;
  std::uint32_t repeat = 1;
  SchedulerConfig scheduler;
  FairConfig fair;
  LatencyModel latency;
  Nanos time_limit = std::chrono::seconds(3600);
  bool record_trace = true;
  WorkloadSource workload;
  std::optional<Sweep> sweep;
  std::string out_dir = "out";
  BenchSettings bench;

  void validate() const {
    if (policies.empty()) throw Error("policies: at least one policy required");
    if (repeat == 0) throw Error("repeat: must be >= 1");
    scheduler.validate();
    fair.validate();
    latency.validate();
    if (time_limit <= Nanos::zero()) throw Error("time_limit_ns: must be > 0");
    if (!(bench.time_scale > 0)) throw Error("bench.time_scale: must be > 0");
    if (bench.time_limit <= Nanos::zero()) throw Error("bench.time_limit_ns: must be > 0");
    if (bench.watchdog_horizon <= Nanos::zero()) throw Error("bench.watchdog_horizon_ns: must be > 0");
    if (bench.min_duration < Nanos::zero()) throw Error("bench.min_duration_ns: must be >= 0");
    if (sweep && sweep->values.empty()) throw Error("sweep.values: at least one value required");
    if (sweep && workload.generator == "file") throw Error("sweep: not available for file workloads");
  }
};

namespace detail {

using sim::detail::get_as;
using sim::detail::only_keys;

template <class T>
void read(const Json& j, const std::string& where, const char* key, T& out) {
  if (j.contains(key)) out = get_as<T>(j[key], where + key);
}

inline void read_ns(const Json& j, const std::string& where, const char* key, Nanos& out) {
  if (j.contains(key)) out = Nanos(get_as<std::int64_t>(j[key], where + key));
}

inline Topology topology_from_json(const Json& j, const std::string& where) {
  std::size_t cores = 1, numa_nodes = 1;
  read(j, where, "cores", cores);
  read(j, where, "numa_nodes", numa_nodes);
  if (j.contains("numa")) {
    auto v = get_as<std::vector<std::uint32_t>>(j["numa"], where + "numa");
    if (j.contains("cores") && v.size() != cores)
      throw Error(where + "numa: expected " + std::to_string(cores) + " entries");
    std::vector<NumaId> ids;
    for (auto n : v) ids.push_back(NumaId(n));
    return Topology(std::move(ids));
  }
  try {
    return Topology(cores, numa_nodes);
  } catch (const Error& e) {
    throw Error(where + "cores: " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  using namespace detail;
  only_keys(j, "config", {"schema", "policies", "seed", "repeat", "scheduler", "fair", "latency",
                          "time_limit_ns", "record_trace", "workload", "sweep", "out_dir", "bench"});
  ExperimentConfig c;
  if (j.contains("schema") && j["schema"] != kConfigSchema)
    throw Error(std::string("schema: expected \"") + kConfigSchema + "\"");
  if (j.contains("policies")) {
    c.policies.clear();
    for (const auto& p : get_as<std::vector<std::string>>(j["policies"], "policies")) {
      try {
        c.policies.push_back(sim::parse_policy(p));
      } catch (const Error& e) {
        throw Error(std::string("policies: ") + e.what());
      }
    }
  }
  read(j, "", "seed", c.seed);
  read(j, "", "repeat", c.repeat);
  read_ns(j, "", "time_limit_ns", c.time_limit);
  read(j, "", "record_trace", c.record_trace);
  read(j, "", "out_dir", c.out_dir);
  if (j.contains("scheduler")) {
    const auto& s = j["scheduler"];
    only_keys(s, "scheduler", {"cores", "numa_nodes", "numa", "quantum_ns", "waitfor_poll_ns",
                               "stall_horizon_ns", "deadlock_check_interval_ns", "thread_cache"});
    c.scheduler.topology = topology_from_json(s, "scheduler.");
    read_ns(s, "scheduler.", "quantum_ns", c.scheduler.quantum);
    read_ns(s, "scheduler.", "waitfor_poll_ns", c.scheduler.waitfor_poll);
    read_ns(s, "scheduler.", "stall_horizon_ns", c.scheduler.stall_horizon);
    read_ns(s, "scheduler.", "deadlock_check_interval_ns", c.scheduler.deadlock_check_interval);
    read(s, "scheduler.", "thread_cache", c.scheduler.thread_cache);
  }
  if (j.contains("fair")) {
    const auto& f = j["fair"];
    only_keys(f, "fair", {"quantum_ns", "tick_ns", "yield_mode"});
    read_ns(f, "fair.", "quantum_ns", c.fair.quantum);
    read_ns(f, "fair.", "tick_ns", c.fair.tick);
    if (f.contains("yield_mode")) {
      auto m = get_as<std::string>(f["yield_mode"], "fair.yield_mode");
      if (m == "lazy") c.fair.yield_mode = YieldMode::Lazy;
      else if (m == "immediate") c.fair.yield_mode = YieldMode::Immediate;
      else throw Error("fair.yield_mode: expected lazy or immediate");
    }
  }
  if (j.contains("latency")) {
    const auto& l = j["latency"];
    only_keys(l, "latency", {"context_switch_ns", "migration_penalty", "spin_iteration_ns", "scale"});
    read_ns(l, "latency.", "context_switch_ns", c.latency.context_switch);
    read(l, "latency.", "migration_penalty", c.latency.migration_penalty);
    read_ns(l, "latency.", "spin_iteration_ns", c.latency.spin_iteration);
    if (l.contains("scale")) {
      auto f = get_as<double>(l["scale"], "latency.scale");
      if (!(f > 0)) throw Error("latency.scale: must be > 0");
      c.latency = c.latency.scaled(f);
    }
  }
  if (j.contains("workload")) {
    const auto& w = j["workload"];
    only_keys(w, "workload", {"generator", "params", "path"});
    read(w, "workload.", "generator", c.workload.generator);
    if (w.contains("params")) {
      if (!w["params"].is_object()) throw Error("workload.params: expected an object");
      c.workload.params = w["params"];
    }
    read(w, "workload.", "path", c.workload.path);
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    only_keys(s, "sweep", {"key", "values"});
    Sweep sw;
    sw.key = get_as<std::string>(s.value("key", Json()), "sweep.key");
    if (!s.contains("values") || !s["values"].is_array()) throw Error("sweep.values: expected an array");
    for (const auto& v : s["values"]) sw.values.push_back(v);
    c.sweep = std::move(sw);
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    only_keys(b, "bench", {"min_duration_ns", "time_scale", "time_limit_ns", "watchdog_horizon_ns",
                           "record_trace"});
    read_ns(b, "bench.", "min_duration_ns", c.bench.min_duration);
    read(b, "bench.", "time_scale", c.bench.time_scale);
    read_ns(b, "bench.", "time_limit_ns", c.bench.time_limit);
    read_ns(b, "bench.", "watchdog_horizon_ns", c.bench.watchdog_horizon);
    read(b, "bench.", "record_trace", c.bench.record_trace);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
  return config_from_json(j);
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["schema"] = kConfigSchema;
  j["policies"] = Json::array();
  for (auto p : c.policies) j["policies"].push_back(sim::to_string(p));
  j["seed"] = c.seed;
  j["repeat"] = c.repeat;
  Json numa = Json::array();
  for (auto n : c.scheduler.topology.numa_map()) numa.push_back(n.value());
  j["scheduler"] = {{"cores", c.scheduler.topology.n_cores()},
                    {"numa", numa},
                    {"quantum_ns", c.scheduler.quantum.count()},
                    {"waitfor_poll_ns", c.scheduler.waitfor_poll.count()},
                    {"stall_horizon_ns", c.scheduler.stall_horizon.count()},
                    {"deadlock_check_interval_ns", c.scheduler.deadlock_check_interval.count()},
                    {"thread_cache", c.scheduler.thread_cache}};
  j["fair"] = {{"quantum_ns", c.fair.quantum.count()},
               {"tick_ns", c.fair.tick.count()},
               {"yield_mode", c.fair.yield_mode == YieldMode::Lazy ? "lazy" : "immediate"}};
  j["latency"] = {{"context_switch_ns", c.latency.context_switch.count()},
                  {"migration_penalty", c.latency.migration_penalty},
                  {"spin_iteration_ns", c.latency.spin_iteration.count()}};
  j["time_limit_ns"] = c.time_limit.count();
  j["record_trace"] = c.record_trace;
  j["workload"] = {{"generator", c.workload.generator}, {"params", c.workload.params}};
  if (!c.workload.path.empty()) j["workload"]["path"] = c.workload.path;
  if (c.sweep) j["sweep"] = {{"key", c.sweep->key}, {"values", c.sweep->values}};
  j["out_dir"] = c.out_dir;
  j["bench"] = {{"min_duration_ns", c.bench.min_duration.count()},
                {"time_scale", c.bench.time_scale},
                {"time_limit_ns", c.bench.time_limit.count()},
                {"watchdog_horizon_ns", c.bench.watchdog_horizon.count()},
                {"record_trace", c.bench.record_trace}};
  return j;
}

// Builds the workload for one run. `sweep_value`, if given, replaces
// params[sweep.key] first.
inline sim::Workload make_workload(const ExperimentConfig& c, std::uint64_t seed,
                                   const Json* sweep_value = nullptr) {
  const auto& src = c.workload;
  Json params = src.params;
  if (sweep_value) params[c.sweep->key] = *sweep_value;
  const std::string where = "workload.params";
  if (src.generator == "file") {
    if (src.path.empty()) throw Error("workload.path: required for the file generator");
    return sim::load_workload(src.path);
  }
  if (src.generator == "matmul")
    return workloads::gen_nested_matmul(workloads::matmul_spec_from_json(params, where), seed);
  if (src.generator == "microservice")
    return workloads::gen_microservice(workloads::microservice_spec_from_json(params, where), seed);
  if (src.generator == "ensemble")
    return workloads::gen_ensemble(workloads::ensemble_spec_from_json(params, where));
  if (src.generator == "churn")
    return workloads::gen_churn(workloads::churn_spec_from_json(params, where));
  if (src.generator == "single") {
    sim::detail::only_keys(params, where, {"compute_ns"});
    Nanos d{1'000'000};
    detail::read_ns(params, where + ".", "compute_ns", d);
    sim::Workload w;
    w.name = "single";
    w.add_domain("main");
    sim::Program p;
    p.name = "single";
    p.segments = {sim::Segment::compute(d), sim::Segment::finish()};
    w.add_program(p);
    w.add_task({});
    w.validate();
    return w;
  }
  throw Error("workload.generator: unknown generator '" + src.generator +
              "' (expected matmul, microservice, ensemble, churn, single or file)");
}

}  // namespace coopsched::cli
