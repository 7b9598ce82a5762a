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

// Brute-force model of the cooperative dispatcher. It keeps one flat list of
// ready tasks and re-derives every decision from scratch: the task for an
// idle core is the minimum of (distance level, enqueue age) over all ready
// tasks of the current domain, where level is 0 for the core's own queue, 1
// for a queue of the same NUMA node and 2 otherwise. Taking the oldest task of
// a level equals taking the head of the oldest queue because every queue is
// FIFO in enqueue order. The model emits the same trace records as the real
// dispatcher so the two can be compared record by record.

#include <coopsched/common.hpp>
#include <coopsched/config.hpp>
#include <coopsched/core/scheduler.hpp>
#include <coopsched/lifecycle/domain.hpp>
#include <coopsched/lifecycle/thread_cache.hpp>
#include <coopsched/trace.hpp>

#include <optional>
#include <vector>

namespace coopsched::testing {

class ReferenceDispatcher {
 public:
  explicit ReferenceDispatcher(SchedulerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    core_task_.resize(cfg_.topology.n_cores());
  }

  void set_trace_sink(TraceSink s) { sink_ = std::move(s); }

  DomainId register_domain() {
    DomainId d = registry_.add(std::nullopt);
    cache_.add_domain(d);
    quantum_left_.push_back(cfg_.quantum);
    return d;
  }

  TaskId create_task(DomainId d, std::optional<CoreId> creator, bool attached) {
    registry_.require_active(d);
    T t;
    t.domain = d;
    t.home = creator.value_or(CoreId(0));
    if (!cfg_.topology.contains(t.home)) throw Error("creator core out of range");
    TaskId id(static_cast<TaskId::rep>(tasks_.size()));
    if (attached) {
      t.worker = WorkerId(static_cast<WorkerId::rep>(n_workers_++));
      t.attached = true;
    }
    tasks_.push_back(t);
    registry_.task_started(d);
    emit(TraceEvent::Create, id, creator, t.worker, {});
    return id;
  }

  void submit(TaskId id) {
    auto& t = tasks_.at(id.index());
    COOPSCHED_REQUIRE(!t.queued, "duplicate submission");
    COOPSCHED_REQUIRE(t.state != TaskState::Running && t.state != TaskState::Finished,
                      "submit of a running or finished task");
    t.state = TaskState::Ready;
    enqueue(id);
  }

  std::optional<Placement> block_current(CoreId c, Nanos consumed) {
    TaskId id = leave(c, TaskState::Blocked, TraceEvent::Block);
    return after_point(c, consumed, tasks_[id.index()].domain);
  }

  Placement yield_current(CoreId c, Nanos consumed) {
    TaskId id = leave(c, TaskState::Ready, TraceEvent::Yield);
    enqueue(id);
    return *after_point(c, consumed, tasks_[id.index()].domain);
  }

  std::optional<Placement> finish_current(CoreId c, Nanos consumed) {
    TaskId id = leave(c, TaskState::Finished, TraceEvent::Finish);
    auto& t = tasks_[id.index()];
    if (t.worker && !t.attached) {
      if (cfg_.thread_cache && registry_.get(t.domain).state == lifecycle::DomainState::Active)
        cache_.push(t.domain, *t.worker);
    }
    registry_.task_finished(t.domain);
    return after_point(c, consumed, t.domain);
  }

  std::vector<Placement> dispatch_idle() {
    std::vector<Placement> out;
    for (;;) {
      if (!any_ready()) break;
      bool idle = false;
      for (const auto& o : core_task_) idle = idle || !o;
      if (!idle) break;
      rotate_if_needed();
      std::optional<std::pair<int, std::size_t>> best;
      for (std::size_t c = 0; c < core_task_.size(); ++c) {
        if (core_task_[c]) continue;
        auto cand = best_for(CoreId(static_cast<CoreId::rep>(c)));
        if (cand && (!best || cand->level < best->first)) best = std::make_pair(cand->level, c);
      }
      if (!best) break;
      CoreId core(static_cast<CoreId::rep>(best->second));
      out.push_back(take(core, *best_for(core)));
    }
    return out;
  }

  std::vector<WorkerId> begin_domain_shutdown(DomainId d) {
    registry_.begin_shutdown(d);
    auto drained = cache_.drain(d);
    registry_.try_complete_shutdown(d);
    return drained;
  }
  bool try_complete_domain_shutdown(DomainId d) { return registry_.try_complete_shutdown(d); }
  lifecycle::ShutdownReport stuck_tasks(DomainId d) const {
    lifecycle::ShutdownReport r;
    r.domain = d;
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      if (tasks_[i].domain == d && tasks_[i].state != TaskState::Finished)
        r.stuck.push_back({TaskId(static_cast<TaskId::rep>(i)), tasks_[i].state});
    return r;
  }
  const lifecycle::ThreadCache& cache() const { return cache_; }

 private:
  struct T {
    DomainId domain;
    TaskState state = TaskState::Created;
    CoreId home{0};
    std::optional<CoreId> last;
    std::optional<WorkerId> worker;
    bool attached = false;
    bool queued = false;
    CoreId queue{0};
    std::uint64_t seq = 0;
  };
  struct Cand {
    int level;
    TaskId task;
  };

  void emit(TraceEvent e, TaskId id, std::optional<CoreId> c, std::optional<WorkerId> w,
            std::string arg) {
    if (sink_) sink_(TraceEntry{e, id, tasks_[id.index()].domain, c, w, std::move(arg)});
  }

  void enqueue(TaskId id) {
    auto& t = tasks_[id.index()];
    t.queued = true;
    t.queue = t.last.value_or(t.home);
    t.seq = next_seq_++;
    emit(TraceEvent::Ready, id, t.queue, t.worker, std::to_string(t.seq));
  }

  bool any_ready(std::optional<DomainId> d = std::nullopt) const {
    for (const auto& t : tasks_)
      if (t.queued && (!d || t.domain == *d)) return true;
    return false;
  }

  int level(CoreId queue, CoreId core) const {
    if (queue == core) return 0;
    return cfg_.topology.same_numa(queue, core) ? 1 : 2;
  }

  std::optional<Cand> best_for(CoreId core) const {
    std::optional<Cand> best;
    std::uint64_t best_seq = 0;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      const auto& t = tasks_[i];
      if (!t.queued || t.domain != current_) continue;
      int l = level(t.queue, core);
      if (!best || l < best->level || (l == best->level && t.seq < best_seq)) {
        best = Cand{l, TaskId(static_cast<TaskId::rep>(i))};
        best_seq = t.seq;
      }
    }
    return best;
  }

  void rotate_if_needed() {
    const std::size_t n = quantum_left_.size();
    if (n == 0) return;
    bool spent = quantum_left_[current_.index()] <= Nanos::zero();
    if (!spent && any_ready(current_)) return;
    for (std::size_t step = 1; step <= n; ++step) {
      DomainId d(static_cast<DomainId::rep>((current_.index() + step) % n));
      if (!any_ready(d)) continue;
      if (d != current_) {
        if (sink_)
          sink_(TraceEntry{TraceEvent::Rotate, std::nullopt, d, std::nullopt, std::nullopt,
                           obj_token('d', current_.index())});
      }
      current_ = d;
      quantum_left_[d.index()] = cfg_.quantum;
      return;
    }
    if (spent) quantum_left_[current_.index()] = cfg_.quantum;
  }

  TaskId leave(CoreId c, TaskState next, TraceEvent ev) {
    auto id = core_task_.at(c.index());
    COOPSCHED_REQUIRE(id.has_value(), "no running task");
    core_task_[c.index()].reset();
    auto& t = tasks_[id->index()];
    t.state = next;
    emit(ev, *id, c, t.worker, {});
    return *id;
  }

  std::optional<Placement> after_point(CoreId c, Nanos consumed, DomainId charged) {
    quantum_left_[charged.index()] -= consumed;
    rotate_if_needed();
    auto cand = best_for(c);
    if (!cand) return std::nullopt;
    return take(c, *cand);
  }

  Placement take(CoreId core, const Cand& cand) {
    auto& t = tasks_[cand.task.index()];
    Placement p;
    p.core = core;
    p.task = cand.task;
    p.source_queue = t.queue;
    t.queued = false;
    if (!t.worker) {
      std::optional<WorkerId> reuse;
      if (cfg_.thread_cache) reuse = cache_.pop(t.domain);
      if (reuse) {
        t.worker = reuse;
        p.worker_reused = true;
      } else {
        t.worker = WorkerId(static_cast<WorkerId::rep>(n_workers_++));
        cache_.note_created(t.domain);
        p.worker_created = true;
      }
    }
    p.worker = *t.worker;
    p.cross_numa = t.last && !cfg_.topology.same_numa(*t.last, core);
    t.last = core;
    t.state = TaskState::Running;
    core_task_[core.index()] = cand.task;
    emit(TraceEvent::Dispatch, cand.task, core, t.worker, obj_token('q', p.source_queue->index()));
    return p;
  }

  SchedulerConfig cfg_;
  lifecycle::DomainRegistry registry_;
  lifecycle::ThreadCache cache_;
  std::vector<T> tasks_;
  std::vector<std::optional<TaskId>> core_task_;
  std::vector<Nanos> quantum_left_;
  DomainId current_{0};
  std::uint64_t next_seq_ = 0;
  std::size_t n_workers_ = 0;
  TraceSink sink_;
};

}  // namespace coopsched::testing
