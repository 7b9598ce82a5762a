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
#include <coopsched/trace.hpp>

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace coopsched::check {

struct Violation {
  // Index of the offending record (its seq column), or the record count for
  // end-of-trace accounting failures.
  std::uint64_t offset = 0;
  std::string invariant;
  std::string message;

  bool operator==(const Violation&) const = default;
};

inline std::string to_text(const std::vector<Violation>& vs) {
  std::ostringstream os;
  for (const auto& v : vs) os << "record " << v.offset << ": " << v.invariant << ": " << v.message << '\n';
  return os.str();
}

// Replays a trace and reports every broken scheduling or synchronization
// invariant. Queue-level checks (FIFO, dispatch priority, rotation) need the
// per-core queue column and only apply to cooperative traces.
class Checker {
 public:
  explicit Checker(const Trace& t)
      : trace_(t), coop_(t.header.policy == "coop"),
        occupant_(t.header.topology.n_cores()) {}

  std::vector<Violation> run() {
    const auto& recs = trace_.records;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      at_ = i;
      const auto& r = recs[i];
      if (r.seq != i) fail("order", "seq " + std::to_string(r.seq) + " out of sequence");
      if (i > 0 && r.time < recs[i - 1].time) fail("order", "time goes backwards");
      step(r, i + 1 < recs.size() ? &recs[i + 1] : nullptr);
    }
    at_ = recs.size();
    finish();
    return std::move(out_);
  }

 private:
  struct Queued {
    TaskId task;
    std::uint64_t seq;
  };
  enum class St { Created, Ready, Running, Blocked, Finished };

  void fail(const char* inv, std::string msg) { out_.push_back({at_, inv, std::move(msg)}); }

  static std::string id(std::optional<TaskId> t) {
    return t ? "task " + std::to_string(t->value()) : std::string("task -");
  }

  bool core_ok(const TraceRecord& r) {
    if (!r.core || r.core->index() >= occupant_.size()) {
      fail("format", std::string(to_string(r.event)) + " without a valid core");
      return false;
    }
    return true;
  }

  bool need_task(const TraceRecord& r) {
    if (!r.task) {
      fail("format", std::string(to_string(r.event)) + " without a task");
      return false;
    }
    return true;
  }

  void step(const TraceRecord& r, const TraceRecord* next) {
    switch (r.event) {
      case TraceEvent::Create:
        if (!need_task(r)) return;
        if (state_.count(*r.task)) fail("single-runner", id(r.task) + " created twice");
        state_[*r.task] = St::Created;
        if (r.domain) domain_of_[*r.task] = *r.domain;
        return;
      case TraceEvent::Ready: on_ready(r); return;
      case TraceEvent::Dispatch: on_dispatch(r); return;
      case TraceEvent::Block:
      case TraceEvent::Yield:
      case TraceEvent::Preempt:
      case TraceEvent::Finish: on_leave(r); return;
      case TraceEvent::Rotate:
        if (!coop_) return;
        if (!next || next->event != TraceEvent::Dispatch || next->domain != r.domain)
          fail("rotation", "rotation not followed by a dispatch from the new domain");
        if (r.domain) current_ = *r.domain;
        return;
      case TraceEvent::Wait:
      case TraceEvent::CvWait: on_wait(r); return;
      case TraceEvent::LockAcquire: on_acquire(r); return;
      case TraceEvent::LockTransfer: on_transfer(r); return;
      case TraceEvent::LockRelease: on_release(r); return;
      case TraceEvent::CvSignal:
      case TraceEvent::BarrierRelease:
      case TraceEvent::SpinSegment:
      case TraceEvent::Compute:
      case TraceEvent::Waitfor:
      case TraceEvent::StallReport: return;
    }
  }

  void on_ready(const TraceRecord& r) {
    if (!need_task(r)) return;
    auto it = state_.find(*r.task);
    if (it == state_.end()) {
      fail("single-runner", id(r.task) + " ready before create");
      return;
    }
    if (it->second == St::Ready || it->second == St::Running || it->second == St::Finished)
      fail("no-lost-wakeup", id(r.task) + " submitted while not blocked");
    it->second = St::Ready;
    if (parked_.erase(*r.task)) ++unparkings_;
    if (!coop_ || !r.core || !r.domain) return;
    std::uint64_t seq = 0;
    try {
      seq = std::stoull(r.arg);
    } catch (const std::exception&) {
      fail("format", "ready without an enqueue sequence number");
    }
    queues_[{*r.domain, *r.core}].push_back({*r.task, seq});
  }

  void on_dispatch(const TraceRecord& r) {
    if (!need_task(r) || !core_ok(r)) return;
    auto& occ = occupant_[r.core->index()];
    if (occ) fail("single-runner", "core " + std::to_string(r.core->value()) + " already runs " + id(occ));
    if (auto it = running_on_.find(*r.task); it != running_on_.end())
      fail("single-runner", id(r.task) + " already running on core " + std::to_string(it->second.value()));
    auto st = state_.find(*r.task);
    if (st == state_.end() || st->second != St::Ready)
      fail("single-runner", id(r.task) + " dispatched while not ready");
    occ = *r.task;
    running_on_[*r.task] = *r.core;
    if (st != state_.end()) st->second = St::Running;
    if (r.worker) {
      auto [w, inserted] = worker_.emplace(*r.task, *r.worker);
      if (!inserted && w->second != *r.worker)
        fail("worker-affinity", id(r.task) + " moved from worker " + std::to_string(w->second.value()) +
                                    " to " + std::to_string(r.worker->value()));
    }
    if (coop_) check_queues(r);
  }

  void check_queues(const TraceRecord& r) {
    if (!r.domain) {
      fail("format", "dispatch without a domain");
      return;
    }
    if (*r.domain != current_)
      fail("rotation", "dispatch from domain " + std::to_string(r.domain->value()) +
                           " while domain " + std::to_string(current_.value()) + " is current");
    std::optional<CoreId> src;
    if (r.arg.size() > 1 && r.arg[0] == 'q') src = CoreId(static_cast<CoreId::rep>(std::stoul(r.arg.substr(1))));
    if (!src) {
      fail("format", "dispatch without a source queue");
      return;
    }
    auto& q = queues_[{*r.domain, *src}];
    if (q.empty() || q.front().task != *r.task) {
      fail("fifo", id(r.task) + " is not at the head of queue " + r.arg);
      for (auto it = q.begin(); it != q.end(); ++it)
        if (it->task == *r.task) {
          q.erase(it);
          break;
        }
      return;
    }
    std::uint64_t chosen_seq = q.front().seq;
    q.pop_front();

    const auto& topo = trace_.header.topology;
    auto level = [&](CoreId k) { return k == *r.core ? 0 : topo.same_numa(k, *r.core) ? 1 : 2; };
    int chosen = level(*src);
    for (std::size_t k = 0; k < topo.n_cores(); ++k) {
      CoreId kc(static_cast<CoreId::rep>(k));
      auto it = queues_.find({*r.domain, kc});
      if (it == queues_.end() || it->second.empty()) continue;
      int l = level(kc);
      if (l < chosen)
        fail("dispatch-priority", "took " + id(r.task) + " from queue " + r.arg + " while queue q" +
                                      std::to_string(k) + " had a closer task");
      else if (l == chosen && l > 0 && it->second.front().seq < chosen_seq)
        fail("dispatch-priority", "took " + id(r.task) + " while an older task waited in q" +
                                      std::to_string(k));
    }
  }

  void on_leave(const TraceRecord& r) {
    if (!need_task(r) || !core_ok(r)) return;
    if (coop_ && r.event == TraceEvent::Preempt)
      fail("no-cooperative-preemption", id(r.task) + " preempted under the cooperative policy");
    auto& occ = occupant_[r.core->index()];
    if (occ != r.task) {
      fail("single-runner", id(r.task) + " left core " + std::to_string(r.core->value()) +
                                " which runs " + id(occ));
    }
    occ.reset();
    running_on_.erase(*r.task);
    // Yield and preempt are followed by the ready record that requeues the task.
    St next = r.event == TraceEvent::Finish ? St::Finished : St::Blocked;
    if (r.event == TraceEvent::Finish && held_by(*r.task))
      fail("mutual-exclusion", id(r.task) + " finished holding a mutex");
    state_[*r.task] = next;
  }

  bool held_by(TaskId t) const {
    for (const auto& [tok, owner] : owner_)
      if (owner == t) return true;
    return false;
  }

  void on_wait(const TraceRecord& r) {
    if (!need_task(r)) return;
    if (!parked_.count(*r.task)) {
      parked_.insert(*r.task);
      ++parkings_;
    }
    if (r.event == TraceEvent::Wait && is_mutex(r.arg)) {
      auto& w = waiters_[r.arg];
      if (owner_.find(r.arg) == owner_.end())
        fail("mutual-exclusion", id(r.task) + " queued on free mutex " + r.arg);
      w.push_back(*r.task);
    }
  }

  static bool is_mutex(const std::string& tok) { return !tok.empty() && tok[0] == 'm'; }

  void on_acquire(const TraceRecord& r) {
    if (!need_task(r)) return;
    if (auto it = owner_.find(r.arg); it != owner_.end())
      fail("mutual-exclusion", id(r.task) + " acquired " + r.arg + " held by " + id(it->second));
    owner_[r.arg] = *r.task;
  }

  void on_transfer(const TraceRecord& r) {
    if (!need_task(r)) return;
    if (owner_.find(r.arg) == owner_.end())
      fail("transfer-not-release", "transfer of free mutex " + r.arg);
    auto& w = waiters_[r.arg];
    if (w.empty() || w.front() != *r.task)
      fail("fifo", r.arg + " handed to " + id(r.task) + " out of queue order");
    for (auto it = w.begin(); it != w.end(); ++it)
      if (*it == *r.task) {
        w.erase(it);
        break;
      }
    owner_[r.arg] = *r.task;
  }

  void on_release(const TraceRecord& r) {
    if (!need_task(r)) return;
    auto it = owner_.find(r.arg);
    if (it == owner_.end() || it->second != *r.task)
      fail("mutual-exclusion", id(r.task) + " released " + r.arg + " it does not hold");
    if (!waiters_[r.arg].empty())
      fail("transfer-not-release", r.arg + " released while " +
                                       std::to_string(waiters_[r.arg].size()) + " tasks wait");
    owner_.erase(r.arg);
  }

  void finish() {
    if (parkings_ != unparkings_ + trace_.residual_waiters)
      fail("no-lost-wakeup", std::to_string(parkings_) + " parkings, " + std::to_string(unparkings_) +
                                 " wakeups, " + std::to_string(trace_.residual_waiters) + " residual");
  }

  const Trace& trace_;
  bool coop_;
  std::uint64_t at_ = 0;
  std::vector<std::optional<TaskId>> occupant_;
  std::map<TaskId, CoreId> running_on_;
  std::map<TaskId, St> state_;
  std::map<TaskId, DomainId> domain_of_;
  std::map<TaskId, WorkerId> worker_;
  std::map<std::pair<DomainId, CoreId>, std::deque<Queued>> queues_;
  DomainId current_{0};
  std::map<std::string, TaskId> owner_;
  std::map<std::string, std::deque<TaskId>> waiters_;
  std::set<TaskId> parked_;
  std::uint64_t parkings_ = 0;
  std::uint64_t unparkings_ = 0;
  std::vector<Violation> out_;
};

inline std::vector<Violation> check_trace(const Trace& t) { return Checker(t).run(); }

}  // namespace coopsched::check
