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
#include <coopsched/lifecycle/affinity.hpp>
#include <coopsched/lifecycle/domain.hpp>
#include <coopsched/lifecycle/thread_cache.hpp>
#include <coopsched/topology.hpp>
#include <coopsched/trace.hpp>

#include <algorithm>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace coopsched {

struct TaskRecord {
  TaskId id;
  DomainId domain;
  TaskState state = TaskState::Created;
  // Set once, at first dispatch (or at attach); never changes afterwards.
  std::optional<WorkerId> bound_worker;
  // Last core the task ran on; unset until it has run.
  std::optional<CoreId> preferred_core;
  // Queue used while the task has never run: its creator's core.
  CoreId home_core{0};
  std::uint64_t enqueue_seq = 0;
  std::optional<CoreId> queued_on;
  std::optional<CoreId> running_on;
  std::optional<CoreId> last_core;
};

struct WorkerRecord {
  WorkerId id;
  DomainId domain;
  std::optional<CoreId> current_core;
  std::optional<TaskId> hosted_task;
  bool cached = false;
  bool alive = true;
  // Pre-existing execution context adopted by the runtime (main thread).
  bool attached = false;
};

struct DomainQueues {
  DomainId id;
  // One FIFO per core, indexed by core id.
  std::vector<std::deque<TaskId>> ready;
  std::size_t ready_count = 0;
  Nanos quantum_remaining{0};
};

// Result of putting a task on a core.
struct Placement {
  CoreId core;
  TaskId task;
  WorkerId worker;
  // Queue the task was taken from.
  std::optional<CoreId> source_queue;
  bool worker_created = false;
  bool worker_reused = false;
  // The task last ran on a core of another NUMA node.
  bool cross_numa = false;
};

// Priority level of a candidate relative to the dispatching core.
enum class DispatchLevel : std::uint8_t { SameCore = 0, SameNuma = 1, Remote = 2 };

// Centralized cooperative dispatcher. Holds no locks: callers serialize access
// (the runtime under its scheduler mutex, the simulator by construction).
//
// A core changes hands only at scheduling points: block, yield, finish, and
// dispatch onto an idle core. Ready tasks live in per-domain, per-core FIFO
// queues; an idle core takes from its own queue first, then from cores of the
// same NUMA node, then from anywhere, always within the current domain. The
// current domain rotates round-robin when its quantum is spent or it runs out
// of ready work.
class CoopScheduler {
 public:
  explicit CoopScheduler(SchedulerConfig cfg)
      : cfg_(std::move(cfg)),
        hints_(cfg_.topology),
        core_occupant_(cfg_.topology.n_cores()) {
    cfg_.validate();
  }

  const SchedulerConfig& config() const { return cfg_; }
  const Topology& topology() const { return cfg_.topology; }

  void set_trace_sink(TraceSink sink) { sink_ = std::move(sink); }

  // Lifecycle ---------------------------------------------------------------

  DomainId register_domain(std::optional<DomainId> parent = std::nullopt) {
    DomainId d = registry_.add(parent);
    DomainQueues q;
    q.id = d;
    q.ready.resize(cfg_.topology.n_cores());
    q.quantum_remaining = cfg_.quantum;
    queues_.push_back(std::move(q));
    cache_.add_domain(d);
    return d;
  }

  // New task in `domain`. `creator_core` is the core of the creating task;
  // unplaced tasks queue there until they first run. Attached tasks adopt a
  // pre-existing execution context instead of needing a worker.
  TaskId create_task(DomainId domain, std::optional<CoreId> creator_core = std::nullopt,
                     bool attached = false) {
    registry_.require_active(domain);
    TaskRecord t;
    t.id = TaskId(static_cast<TaskId::rep>(tasks_.size()));
    t.domain = domain;
    t.home_core = creator_core.value_or(CoreId(0));
    if (!cfg_.topology.contains(t.home_core)) throw Error("creator core out of range");
    if (attached) {
      WorkerId w = new_worker(domain, /*attached=*/true);
      workers_[w.index()].hosted_task = t.id;
      t.bound_worker = w;
    }
    tasks_.push_back(t);
    registry_.task_started(domain);
    emit(TraceEvent::Create, t.id, domain, creator_core, t.bound_worker, {});
    return t.id;
  }

  // Puts a Created or Blocked task at the tail of its queue.
  void submit(TaskId id) {
    auto& t = task_mut(id);
    if (t.queued_on)
      throw ContractViolation("duplicate submission of task " + std::to_string(id.value()));
    if (t.state != TaskState::Created && t.state != TaskState::Blocked &&
        t.state != TaskState::Ready)
      throw ContractViolation("submit of task " + std::to_string(id.value()) + " in state " +
                              to_string(t.state));
    if (!registry_.contains(t.domain)) throw Error("submit to unknown domain");
    t.state = TaskState::Ready;
    enqueue(t);
  }

  // Removes and returns the best ready task for idle `core`, rotating the
  // current domain first if it has no ready work or its quantum is spent.
  std::optional<TaskId> pick_next(CoreId core) {
    COOPSCHED_REQUIRE(cfg_.topology.contains(core), "pick_next: core out of range");
    COOPSCHED_REQUIRE(!core_occupant_[core.index()], "pick_next on a busy core");
    if (total_ready_ == 0) return std::nullopt;
    maybe_rotate();
    auto best = best_candidate(current_, core);
    if (!best) return std::nullopt;
    auto& q = queues_[current_.index()].ready[best->queue.index()];
    TaskId id = q.front();
    q.pop_front();
    --queues_[current_.index()].ready_count;
    --total_ready_;
    auto& t = task_mut(id);
    t.queued_on.reset();
    last_source_ = best->queue;
    t.preferred_core = core;
    return id;
  }

  // Charges `consumed` to `charged` (default: current domain) and moves to the
  // next domain with ready work if the current one is spent or empty.
  void rotate_domain(Nanos consumed, std::optional<DomainId> charged = std::nullopt) {
    DomainId c = charged.value_or(current_);
    if (c.index() < queues_.size()) queues_[c.index()].quantum_remaining -= consumed;
    maybe_rotate();
  }

  std::optional<Placement> block_current(CoreId core, Nanos consumed) {
    TaskId id = vacate(core, TaskState::Blocked, TraceEvent::Block);
    return after_scheduling_point(core, consumed, task(id).domain);
  }

  // The yielding task goes to the tail of its own queue; rotation is applied
  // before it can be re-selected.
  Placement yield_current(CoreId core, Nanos consumed) {
    TaskId id = vacate(core, TaskState::Ready, TraceEvent::Yield);
    enqueue(task_mut(id));
    auto p = after_scheduling_point(core, consumed, task(id).domain);
    COOPSCHED_REQUIRE(p.has_value(), "yield left the core idle");
    return *p;
  }

  std::optional<Placement> finish_current(CoreId core, Nanos consumed) {
    TaskId id = vacate(core, TaskState::Finished, TraceEvent::Finish);
    auto& t = task_mut(id);
    if (t.bound_worker) release_worker(*t.bound_worker, t.domain);
    registry_.task_finished(t.domain);
    return after_scheduling_point(core, consumed, t.domain);
  }

  // Installs a dequeued Ready task on `core`, resuming its bound worker or
  // binding it to a cached or new one.
  Placement worker_swap(CoreId core, TaskId incoming) {
    COOPSCHED_REQUIRE(!core_occupant_[core.index()], "worker_swap onto a busy core");
    auto& t = task_mut(incoming);
    COOPSCHED_REQUIRE(t.state == TaskState::Ready && !t.queued_on,
                      "worker_swap of a task that is not ready and dequeued");
    Placement p;
    p.core = core;
    p.task = incoming;
    p.source_queue = last_source_;
    last_source_.reset();
    if (t.bound_worker) {
      auto& w = workers_[t.bound_worker->index()];
      COOPSCHED_REQUIRE(!w.current_core, "bound worker of task " +
                                             std::to_string(incoming.value()) +
                                             " is running on another core");
      p.worker = w.id;
    } else {
      std::optional<WorkerId> reuse;
      if (cfg_.thread_cache) reuse = cache_.pop(t.domain);
      if (reuse) {
        p.worker = *reuse;
        p.worker_reused = true;
        workers_[reuse->index()].cached = false;
      } else {
        p.worker = new_worker(t.domain, false);
        p.worker_created = true;
      }
      workers_[p.worker.index()].hosted_task = incoming;
      t.bound_worker = p.worker;
    }
    auto& w = workers_[p.worker.index()];
    w.current_core = core;
    core_occupant_[core.index()] = w.id;
    p.cross_numa = t.last_core && !cfg_.topology.same_numa(*t.last_core, core);
    t.state = TaskState::Running;
    t.running_on = core;
    t.last_core = core;
    t.preferred_core = core;
    emit(TraceEvent::Dispatch, incoming, t.domain, core, p.worker,
         p.source_queue ? obj_token('q', p.source_queue->index()) : std::string());
    return p;
  }

  // Fills idle cores. Each step places the (level, core) minimal pair, so
  // exact-affinity matches go first, then same-NUMA, then remote.
  std::vector<Placement> dispatch_idle() {
    std::vector<Placement> out;
    while (total_ready_ > 0) {
      // Rotation happens only on behalf of a core that is about to dispatch.
      if (std::none_of(core_occupant_.begin(), core_occupant_.end(),
                       [](const auto& o) { return !o.has_value(); }))
        break;
      maybe_rotate();
      std::optional<std::pair<DispatchLevel, CoreId>> best;
      for (std::size_t c = 0; c < core_occupant_.size(); ++c) {
        if (core_occupant_[c]) continue;
        CoreId core(static_cast<CoreId::rep>(c));
        auto cand = best_candidate(current_, core);
        if (!cand) continue;
        if (!best || cand->level < best->first) best = std::make_pair(cand->level, core);
      }
      if (!best) break;
      auto id = pick_next(best->second);
      if (!id) break;
      out.push_back(worker_swap(best->second, *id));
    }
    return out;
  }

  // Domain shutdown: no new tasks, cached workers destroyed. Returns them.
  std::vector<WorkerId> begin_domain_shutdown(DomainId d) {
    registry_.begin_shutdown(d);
    auto drained = cache_.drain(d);
    for (WorkerId w : drained) {
      workers_[w.index()].alive = false;
      workers_[w.index()].cached = false;
    }
    registry_.try_complete_shutdown(d);
    return drained;
  }

  bool try_complete_domain_shutdown(DomainId d) { return registry_.try_complete_shutdown(d); }

  lifecycle::ShutdownReport stuck_tasks(DomainId d) const {
    lifecycle::ShutdownReport r;
    r.domain = d;
    for (const auto& t : tasks_)
      if (t.domain == d && t.state != TaskState::Finished) r.stuck.push_back({t.id, t.state});
    return r;
  }

  // Queries -----------------------------------------------------------------

  const TaskRecord& task(TaskId id) const {
    if (id.index() >= tasks_.size()) throw Error("unknown task " + std::to_string(id.value()));
    return tasks_[id.index()];
  }
  const WorkerRecord& worker(WorkerId id) const { return workers_.at(id.index()); }
  std::size_t n_tasks() const { return tasks_.size(); }
  std::size_t n_workers() const { return workers_.size(); }
  std::size_t n_domains() const { return queues_.size(); }

  std::optional<TaskId> running_on(CoreId c) const {
    auto w = core_occupant_.at(c.index());
    if (!w) return std::nullopt;
    return workers_[w->index()].hosted_task;
  }
  std::optional<WorkerId> occupant(CoreId c) const { return core_occupant_.at(c.index()); }
  bool core_idle(CoreId c) const { return !core_occupant_.at(c.index()); }

  DomainId current_domain() const { return current_; }
  Nanos quantum_remaining(DomainId d) const { return queues_.at(d.index()).quantum_remaining; }
  std::size_t ready_count() const { return total_ready_; }
  std::size_t ready_count(DomainId d) const { return queues_.at(d.index()).ready_count; }
  const std::deque<TaskId>& queue(DomainId d, CoreId c) const {
    return queues_.at(d.index()).ready.at(c.index());
  }

  lifecycle::ThreadCache& cache() { return cache_; }
  const lifecycle::ThreadCache& cache() const { return cache_; }
  lifecycle::AffinityHints& hints() { return hints_; }
  const lifecycle::DomainRegistry& domains() const { return registry_; }

 private:
  struct Candidate {
    CoreId queue;
    DispatchLevel level;
  };

  TaskRecord& task_mut(TaskId id) {
    if (id.index() >= tasks_.size()) throw Error("unknown task " + std::to_string(id.value()));
    return tasks_[id.index()];
  }

  void emit(TraceEvent e, std::optional<TaskId> t, std::optional<DomainId> d,
            std::optional<CoreId> c, std::optional<WorkerId> w, std::string arg) {
    if (sink_) sink_(TraceEntry{e, t, d, c, w, std::move(arg)});
  }

  void enqueue(TaskRecord& t) {
    CoreId q = t.preferred_core.value_or(t.home_core);
    t.enqueue_seq = next_seq_++;
    t.queued_on = q;
    auto& dq = queues_[t.domain.index()];
    dq.ready[q.index()].push_back(t.id);
    ++dq.ready_count;
    ++total_ready_;
    emit(TraceEvent::Ready, t.id, t.domain, q, t.bound_worker, std::to_string(t.enqueue_seq));
  }

  std::optional<Candidate> best_candidate(DomainId d, CoreId core) const {
    const auto& dq = queues_[d.index()];
    if (dq.ready_count == 0) return std::nullopt;
    if (!dq.ready[core.index()].empty()) return Candidate{core, DispatchLevel::SameCore};
    std::optional<Candidate> best;
    std::uint64_t best_seq = 0;
    for (std::size_t k = 0; k < dq.ready.size(); ++k) {
      if (dq.ready[k].empty()) continue;
      CoreId kc(static_cast<CoreId::rep>(k));
      auto level = cfg_.topology.same_numa(kc, core) ? DispatchLevel::SameNuma
                                                     : DispatchLevel::Remote;
      std::uint64_t seq = tasks_[dq.ready[k].front().index()].enqueue_seq;
      if (!best || level < best->level || (level == best->level && seq < best_seq)) {
        best = Candidate{kc, level};
        best_seq = seq;
      }
    }
    return best;
  }

  void maybe_rotate() {
    if (queues_.empty()) return;
    auto& cur = queues_[current_.index()];
    bool expired = cur.quantum_remaining <= Nanos::zero();
    if (!expired && cur.ready_count > 0) return;
    const std::size_t n = queues_.size();
    for (std::size_t step = 1; step <= n; ++step) {
      std::size_t idx = (current_.index() + step) % n;
      if (queues_[idx].ready_count == 0) continue;
      DomainId next(static_cast<DomainId::rep>(idx));
      if (next != current_)
        emit(TraceEvent::Rotate, std::nullopt, next, std::nullopt, std::nullopt,
             obj_token('d', current_.index()));
      current_ = next;
      queues_[idx].quantum_remaining = cfg_.quantum;
      return;
    }
    if (expired) cur.quantum_remaining = cfg_.quantum;
  }

  TaskId vacate(CoreId core, TaskState next, TraceEvent ev) {
    COOPSCHED_REQUIRE(cfg_.topology.contains(core), "core out of range");
    auto wid = core_occupant_[core.index()];
    COOPSCHED_REQUIRE(wid.has_value(), "no running task on core " + std::to_string(core.value()));
    auto& w = workers_[wid->index()];
    COOPSCHED_REQUIRE(w.hosted_task.has_value(), "occupant worker hosts no task");
    TaskId id = *w.hosted_task;
    auto& t = task_mut(id);
    COOPSCHED_REQUIRE(t.state == TaskState::Running, "task on core is not running");
    w.current_core.reset();
    core_occupant_[core.index()].reset();
    t.state = next;
    t.running_on.reset();
    emit(ev, id, t.domain, core, wid, {});
    return id;
  }

  std::optional<Placement> after_scheduling_point(CoreId core, Nanos consumed, DomainId charged) {
    rotate_domain(consumed, charged);
    auto next = pick_next(core);
    if (!next) return std::nullopt;
    return worker_swap(core, *next);
  }

  WorkerId new_worker(DomainId d, bool attached) {
    WorkerId id(static_cast<WorkerId::rep>(workers_.size()));
    WorkerRecord w;
    w.id = id;
    w.domain = d;
    w.attached = attached;
    workers_.push_back(w);
    if (!attached) cache_.note_created(d);
    return id;
  }

  void release_worker(WorkerId wid, DomainId d) {
    auto& w = workers_[wid.index()];
    w.hosted_task.reset();
    bool cacheable = cfg_.thread_cache && !w.attached &&
                     registry_.get(d).state == lifecycle::DomainState::Active;
    if (cacheable) {
      w.cached = true;
      cache_.push(d, wid);
    } else {
      w.alive = false;
    }
  }

  SchedulerConfig cfg_;
  lifecycle::DomainRegistry registry_;
  lifecycle::ThreadCache cache_;
  lifecycle::AffinityHints hints_;
  std::vector<TaskRecord> tasks_;
  std::vector<WorkerRecord> workers_;
  std::vector<DomainQueues> queues_;
  std::vector<std::optional<WorkerId>> core_occupant_;
  DomainId current_{0};
  std::uint64_t next_seq_ = 0;
  std::size_t total_ready_ = 0;
  std::optional<CoreId> last_source_;
  TraceSink sink_;
};

}  // namespace coopsched
