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
#include <string>
#include <vector>

namespace coopsched::lifecycle {

enum class DomainState : std::uint8_t { Active, ShuttingDown, Terminated };

inline const char* to_string(DomainState s) {
  switch (s) {
    case DomainState::Active: return "active";
    case DomainState::ShuttingDown: return "shutting_down";
    case DomainState::Terminated: return "terminated";
  }
  return "?";
}

// A logical process sharing the scheduler with the others.
struct Domain {
  DomainId id;
  std::optional<DomainId> parent;
  DomainState state = DomainState::Active;
  std::uint64_t live_tasks = 0;
};

struct StuckTask {
  TaskId task;
  TaskState state;
};

// Produced when a domain could not finish shutting down within its grace
// period.
struct ShutdownReport {
  DomainId domain;
  std::vector<StuckTask> stuck;
};

class DomainRegistry {
 public:
  DomainId add(std::optional<DomainId> parent) {
    if (parent && !contains(*parent)) throw Error("unknown parent domain");
    DomainId id(static_cast<DomainId::rep>(domains_.size()));
    domains_.push_back(Domain{id, parent, DomainState::Active, 0});
    return id;
  }

  bool contains(DomainId d) const { return d.index() < domains_.size(); }

  const Domain& get(DomainId d) const {
    if (!contains(d)) throw Error("unknown domain " + std::to_string(d.value()));
    return domains_[d.index()];
  }

  void require_active(DomainId d) const {
    const auto& dom = get(d);
    if (dom.state != DomainState::Active)
      throw Error("domain " + std::to_string(d.value()) + " is " + to_string(dom.state) +
                  "; no new tasks accepted");
  }

  void task_started(DomainId d) { ++mut(d).live_tasks; }
  void task_finished(DomainId d) {
    auto& dom = mut(d);
    if (dom.live_tasks == 0) throw ContractViolation("domain task count underflow");
    --dom.live_tasks;
  }

  void begin_shutdown(DomainId d) {
    auto& dom = mut(d);
    COOPSCHED_REQUIRE(dom.state == DomainState::Active, "shutdown of a non-active domain");
    dom.state = DomainState::ShuttingDown;
  }

  // Moves a shutting-down domain to Terminated once it has no live tasks.
  bool try_complete_shutdown(DomainId d) {
    auto& dom = mut(d);
    if (dom.state == DomainState::ShuttingDown && dom.live_tasks == 0)
      dom.state = DomainState::Terminated;
    return dom.state == DomainState::Terminated;
  }

  std::size_t size() const { return domains_.size(); }
  const std::vector<Domain>& all() const { return domains_; }

 private:
  Domain& mut(DomainId d) {
    if (!contains(d)) throw Error("unknown domain " + std::to_string(d.value()));
    return domains_[d.index()];
  }

  std::vector<Domain> domains_;
};

}  // namespace coopsched::lifecycle
