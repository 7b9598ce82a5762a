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

#include <optional>
#include <span>
#include <vector>

namespace coopsched::sync {

struct CoreActivity {
  std::optional<TaskId> task;
  // The task is busy-waiting (inside a spin barrier), not computing.
  bool spinning = false;
  // Time of the task's last scheduling point on this core.
  Nanos since{0};
};

struct StallReport {
  Nanos detected_at{0};
  std::vector<TaskId> spinning;
  std::vector<TaskId> waiting;
};

// A stall is every core held by a spinner that has not reached a scheduling
// point for `horizon`, while some other task is ready or blocked on a
// cooperative primitive and so cannot get a core.
inline std::optional<StallReport> stall_detector(std::span<const CoreActivity> cores,
                                                 std::span<const TaskId> waiting, Nanos now,
                                                 Nanos horizon) {
  if (cores.empty() || waiting.empty()) return std::nullopt;
  StallReport r;
  r.detected_at = now;
  for (const auto& c : cores) {
    if (!c.task || !c.spinning || now - c.since < horizon) return std::nullopt;
    r.spinning.push_back(*c.task);
  }
  r.waiting.assign(waiting.begin(), waiting.end());
  return r;
}

}  // namespace coopsched::sync
