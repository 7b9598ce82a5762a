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
#include <coopsched/lifecycle/domain.hpp>
#include <coopsched/sync/stall.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace coopsched {

struct LatencySummary {
  std::uint64_t count = 0;
  double mean_ns = 0;
  std::int64_t p50_ns = 0;
  std::int64_t p95_ns = 0;
  std::int64_t p99_ns = 0;
  std::int64_t max_ns = 0;

  bool operator==(const LatencySummary&) const = default;
};

// Nearest-rank percentiles.
inline LatencySummary summarize_latencies(std::vector<std::int64_t> v) {
  LatencySummary s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.count = v.size();
  long double sum = 0;
  for (auto x : v) sum += static_cast<long double>(x);
  s.mean_ns = static_cast<double>(sum / static_cast<long double>(v.size()));
  auto rank = [&](double p) {
    auto r = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(r, 1, v.size()) - 1];
  };
  s.p50_ns = rank(0.50);
  s.p95_ns = rank(0.95);
  s.p99_ns = rank(0.99);
  s.max_ns = v.back();
  return s;
}

struct DomainCounters {
  std::string name;
  std::uint64_t created_total = 0;
  std::uint64_t reused_total = 0;

  bool operator==(const DomainCounters&) const = default;
};

// Run summary. The simulator and the runtime bench fill the same fields.
struct Metrics {
  std::string mode;  // "sim" or "bench"
  std::string policy;
  std::string workload;
  std::uint64_t seed = 0;

  std::int64_t makespan_ns = 0;
  std::uint64_t tasks_total = 0;
  std::uint64_t tasks_finished = 0;
  std::uint64_t requests = 0;
  LatencySummary latency;
  // Finished requests per second of makespan, or finished tasks when the
  // workload has no requests.
  double throughput_per_s = 0;

  std::uint64_t context_switches = 0;
  std::uint64_t preemptions = 0;
  std::uint64_t lock_holder_preemptions = 0;
  std::int64_t spin_waste_ns = 0;
  std::int64_t core_idle_ns = 0;

  std::uint64_t created_total = 0;
  std::uint64_t reused_total = 0;
  std::vector<DomainCounters> domains;

  std::uint64_t rejected_spawns = 0;
  bool stalled = false;
  std::optional<sync::StallReport> stall;
  bool deadlocked = false;
  std::vector<lifecycle::ShutdownReport> shutdown_reports;

  std::uint64_t loops = 0;
  std::int64_t measured_ns = 0;
};

inline void finish_rates(Metrics& m) {
  std::uint64_t n = m.requests > 0 ? m.latency.count : m.tasks_finished;
  m.throughput_per_s =
      m.makespan_ns > 0 ? static_cast<double>(n) * 1e9 / static_cast<double>(m.makespan_ns) : 0.0;
}

inline nlohmann::ordered_json to_json(const sync::StallReport& r) {
  nlohmann::ordered_json j;
  j["detected_at_ns"] = r.detected_at.count();
  j["spinning"] = nlohmann::ordered_json::array();
  for (auto t : r.spinning) j["spinning"].push_back(t.value());
  j["waiting"] = nlohmann::ordered_json::array();
  for (auto t : r.waiting) j["waiting"].push_back(t.value());
  return j;
}

inline nlohmann::ordered_json to_json(const lifecycle::ShutdownReport& r) {
  nlohmann::ordered_json j;
  j["domain"] = r.domain.value();
  j["stuck"] = nlohmann::ordered_json::array();
  for (const auto& s : r.stuck)
    j["stuck"].push_back({{"task", s.task.value()}, {"state", to_string(s.state)}});
  return j;
}

inline nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["mode"] = m.mode;
  j["policy"] = m.policy;
  j["workload"] = m.workload;
  j["seed"] = m.seed;
  j["makespan_ns"] = m.makespan_ns;
  j["tasks_total"] = m.tasks_total;
  j["tasks_finished"] = m.tasks_finished;
  j["requests"] = m.requests;
  j["latency"] = {{"count", m.latency.count},   {"mean_ns", m.latency.mean_ns},
                  {"p50_ns", m.latency.p50_ns}, {"p95_ns", m.latency.p95_ns},
                  {"p99_ns", m.latency.p99_ns}, {"max_ns", m.latency.max_ns}};
  j["throughput_per_s"] = m.throughput_per_s;
  j["context_switches"] = m.context_switches;
  j["preemptions"] = m.preemptions;
  j["lock_holder_preemptions"] = m.lock_holder_preemptions;
  j["spin_waste_ns"] = m.spin_waste_ns;
  j["core_idle_ns"] = m.core_idle_ns;
  j["created_total"] = m.created_total;
  j["reused_total"] = m.reused_total;
  j["domains"] = nlohmann::ordered_json::array();
  for (const auto& d : m.domains)
    j["domains"].push_back(
        {{"name", d.name}, {"created_total", d.created_total}, {"reused_total", d.reused_total}});
  j["rejected_spawns"] = m.rejected_spawns;
  j["stalled"] = m.stalled;
  j["stall"] = m.stall ? to_json(*m.stall) : nlohmann::ordered_json(nullptr);
  j["deadlocked"] = m.deadlocked;
  j["shutdown_reports"] = nlohmann::ordered_json::array();
  for (const auto& r : m.shutdown_reports) j["shutdown_reports"].push_back(to_json(r));
  j["loops"] = m.loops;
  j["measured_ns"] = m.measured_ns;
  return j;
}

inline std::string to_text(const Metrics& m) { return to_json(m).dump(2) + "\n"; }

}  // namespace coopsched
