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
#include <coopsched/topology.hpp>

namespace coopsched {

using namespace std::chrono_literals;

struct SchedulerConfig {
  // Per-domain CPU allotment, evaluated only at scheduling points.
  Nanos quantum = 20ms;
  // Slice length used by timed waits between non-blocking probes.
  Nanos waitfor_poll = 5ms;
  Topology topology{};
  // How long every core may be held by a spinner before a stall is reported.
  Nanos stall_horizon = 100ms;
  // Runtime watchdog period; the simulator checks exactly at the horizon.
  Nanos deadlock_check_interval = 10ms;
  bool thread_cache = true;

  void validate() const {
    if (quantum <= Nanos::zero()) throw Error("scheduler.quantum must be > 0");
    if (waitfor_poll <= Nanos::zero()) throw Error("scheduler.waitfor_poll must be > 0");
    if (stall_horizon <= Nanos::zero()) throw Error("scheduler.stall_horizon must be > 0");
    if (deadlock_check_interval <= Nanos::zero())
      throw Error("scheduler.deadlock_check_interval must be > 0");
  }
};

// Costs charged by the simulator. These are calibration knobs.
struct LatencyModel {
  Nanos context_switch = 2us;
  // Multiplier applied to the first compute segment after a cross-NUMA move.
  double migration_penalty = 1.2;
  Nanos spin_iteration = 1us;

  void validate() const {
    if (context_switch < Nanos::zero()) throw Error("latency.context_switch must be >= 0");
    if (migration_penalty < 1.0) throw Error("latency.migration_penalty must be >= 1");
    if (spin_iteration <= Nanos::zero()) throw Error("latency.spin_iteration must be > 0");
  }

  LatencyModel scaled(double f) const {
    LatencyModel m = *this;
    m.context_switch = Nanos(static_cast<std::int64_t>(static_cast<double>(context_switch.count()) * f));
    m.migration_penalty = 1.0 + (migration_penalty - 1.0) * f;
    m.spin_iteration = Nanos(std::max<std::int64_t>(
        1, static_cast<std::int64_t>(static_cast<double>(spin_iteration.count()) * f)));
    return m;
  }
};

enum class YieldMode { Lazy, Immediate };

// Parameters of the quantum-preemptive baseline policy.
struct FairConfig {
  Nanos quantum = 3ms;
  // Timer interrupt period. A lazy yield only takes effect at a tick.
  Nanos tick = 1ms;
  YieldMode yield_mode = YieldMode::Lazy;

  void validate() const {
    if (quantum <= Nanos::zero()) throw Error("fair.quantum must be > 0");
    if (tick <= Nanos::zero()) throw Error("fair.tick must be > 0");
  }
};

}  // namespace coopsched
