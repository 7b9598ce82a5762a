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
#include <coopsched/core/scheduler.hpp>
#include <coopsched/lifecycle/domain.hpp>
#include <coopsched/lifecycle/thread_cache.hpp>
#include <coopsched/trace.hpp>

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace coopsched::sim {

enum class PolicyKind : std::uint8_t { Coop, Fair };

inline const char* to_string(PolicyKind p) { return p == PolicyKind::Coop ? "coop" : "fair"; }

inline PolicyKind parse_policy(const std::string& s) {
  if (s == "coop" || s == "COOP") return PolicyKind::Coop;
  if (s == "fair" || s == "FAIR") return PolicyKind::Fair;
  throw Error("unknown policy '" + s + "' (expected coop or fair)");
}

struct YieldResult {
  // False when the yielding task keeps its core for now.
  bool switched = false;
  std::optional<Placement> next;
};

// Simulator face of the cooperative dispatcher. `Dispatcher` is CoopScheduler
// in production; tests substitute a brute-force reference with the same
// surface to compare decisions.
template <class Dispatcher = CoopScheduler>
class CoopPolicy {
 public:
  static constexpr PolicyKind kind = PolicyKind::Coop;
  static constexpr bool preemptive = false;

  CoopPolicy(const SchedulerConfig& sched, const FairConfig&) : d_(sched) {}

  void set_trace_sink(TraceSink s) { d_.set_trace_sink(std::move(s)); }

  DomainId add_domain(double /*weight*/) { return d_.register_domain(); }

  TaskId create(DomainId d, std::optional<CoreId> creator, bool attached, double /*weight*/) {
    return d_.create_task(d, creator, attached);
  }

  void submit(TaskId t) { d_.submit(t); }
  std::optional<Placement> block(CoreId c, Nanos consumed) { return d_.block_current(c, consumed); }
  YieldResult yield(CoreId c, Nanos consumed) { return {true, d_.yield_current(c, consumed)}; }
  std::optional<Placement> finish(CoreId c, Nanos consumed) {
    return d_.finish_current(c, consumed);
  }
  std::vector<Placement> dispatch_idle() { return d_.dispatch_idle(); }

  // Never called: the cooperative policy has no timer-driven decisions.
  std::optional<Placement> expire(CoreId, Nanos) { return std::nullopt; }
  std::optional<Placement> tick(CoreId, Nanos) { return std::nullopt; }
  bool yield_marked(CoreId) const { return false; }

  void begin_shutdown(DomainId d) { d_.begin_domain_shutdown(d); }
  bool try_complete_shutdown(DomainId d) { return d_.try_complete_domain_shutdown(d); }
  lifecycle::ShutdownReport stuck(DomainId d) const { return d_.stuck_tasks(d); }

  lifecycle::CacheStats stats(DomainId d) const { return d_.cache().stats(d); }
  const lifecycle::ThreadCache& cache() const { return d_.cache(); }

  Dispatcher& dispatcher() { return d_; }
  const Dispatcher& dispatcher() const { return d_; }

 private:
  Dispatcher d_;
};

// Quantum-preemptive baseline with a single global run queue ordered by
// virtual deadline (vruntime + quantum/weight), ties broken by task id. Every
// task has its own kernel thread, so there is no reuse.
//
// Yields come in two flavours. Immediate requeues the caller at once behind
// any other ready task. Lazy only marks the caller; the switch happens at the
// next timer tick, which is how a kernel defers the reschedule.
class FairPolicy {
 public:
  static constexpr PolicyKind kind = PolicyKind::Fair;
  static constexpr bool preemptive = true;

  FairPolicy(const SchedulerConfig& sched, const FairConfig& fair)
      : topo_(sched.topology), cfg_(fair), running_(sched.topology.n_cores()) {
    cfg_.validate();
  }

  void set_trace_sink(TraceSink s) { sink_ = std::move(s); }

  DomainId add_domain(double /*weight*/) {
    DomainId d = registry_.add(std::nullopt);
    cache_.add_domain(d);
    return d;
  }

  TaskId create(DomainId d, std::optional<CoreId> creator, bool attached, double weight) {
    registry_.require_active(d);
    if (!(weight > 0)) throw Error("task weight must be > 0");
    FTask t;
    t.id = TaskId(static_cast<TaskId::rep>(tasks_.size()));
    t.domain = d;
    t.weight = weight;
    t.attached = attached;
    tasks_.push_back(t);
    registry_.task_started(d);
    if (!attached) cache_.note_created(d);
    emit(TraceEvent::Create, t.id, d, creator, {});
    return t.id;
  }

  void submit(TaskId id) {
    auto& t = at(id);
    if (t.queued) throw ContractViolation("duplicate submission of task " + std::to_string(id.value()));
    if (t.state == TaskState::Running || t.state == TaskState::Finished)
      throw ContractViolation("submit of task " + std::to_string(id.value()) + " in state " +
                              to_string(t.state));
    update_min_vruntime();
    t.vruntime = std::max(t.vruntime, min_vruntime_);
    t.state = TaskState::Ready;
    enqueue(t);
  }

  std::optional<Placement> block(CoreId c, Nanos consumed) {
    auto& t = vacate(c, consumed, TaskState::Blocked, TraceEvent::Block);
    (void)t;
    return pick_for(c);
  }

  YieldResult yield(CoreId c, Nanos consumed) {
    auto& t = at(*running_.at(c.index()));
    charge(t, consumed);
    if (runq_.empty()) return {false, std::nullopt};
    if (cfg_.yield_mode == YieldMode::Lazy) {
      t.marked = true;
      return {false, std::nullopt};
    }
    return {true, switch_away(c, Nanos::zero(), TraceEvent::Yield)};
  }

  std::optional<Placement> finish(CoreId c, Nanos consumed) {
    auto& t = vacate(c, consumed, TaskState::Finished, TraceEvent::Finish);
    registry_.task_finished(t.domain);
    return pick_for(c);
  }

  std::vector<Placement> dispatch_idle() {
    std::vector<Placement> out;
    while (!runq_.empty()) {
      auto best = runq_.begin();
      TaskId id(std::get<2>(*best));
      auto core = choose_core(at(id));
      if (!core) break;
      runq_.erase(best);
      at(id).queued = false;
      out.push_back(place(*core, id));
    }
    return out;
  }

  // Quantum expiry on `c`. Returns the placement when the running task is
  // preempted, nothing when it keeps the core for another slice.
  std::optional<Placement> expire(CoreId c, Nanos consumed) {
    auto& t = at(*running_.at(c.index()));
    charge(t, consumed);
    if (runq_.empty()) return std::nullopt;
    if (!(*runq_.begin() < key(t))) return std::nullopt;
    return switch_away(c, Nanos::zero(), TraceEvent::Preempt);
  }

  // Timer tick on a core whose task has a pending lazy yield.
  std::optional<Placement> tick(CoreId c, Nanos consumed) {
    auto& t = at(*running_.at(c.index()));
    charge(t, consumed);
    if (!t.marked) return std::nullopt;
    if (runq_.empty()) {
      t.marked = false;
      return std::nullopt;
    }
    return switch_away(c, Nanos::zero(), TraceEvent::Yield);
  }

  bool yield_marked(CoreId c) const {
    auto id = running_.at(c.index());
    return id && tasks_[id->index()].marked;
  }

  void begin_shutdown(DomainId d) {
    registry_.begin_shutdown(d);
    registry_.try_complete_shutdown(d);
  }
  bool try_complete_shutdown(DomainId d) { return registry_.try_complete_shutdown(d); }
  lifecycle::ShutdownReport stuck(DomainId d) const {
    lifecycle::ShutdownReport r;
    r.domain = d;
    for (const auto& t : tasks_)
      if (t.domain == d && t.state != TaskState::Finished) r.stuck.push_back({t.id, t.state});
    return r;
  }

  lifecycle::CacheStats stats(DomainId d) const { return cache_.stats(d); }
  const lifecycle::ThreadCache& cache() const { return cache_; }

  double vruntime(TaskId id) const { return tasks_.at(id.index()).vruntime; }
  double min_vruntime() const { return min_vruntime_; }
  std::optional<TaskId> running_on(CoreId c) const { return running_.at(c.index()); }
  std::size_t ready_count() const { return runq_.size(); }

 private:
  struct FTask {
    TaskId id;
    DomainId domain;
    double weight = 1.0;
    double vruntime = 0;
    TaskState state = TaskState::Created;
    bool queued = false;
    bool marked = false;
    bool attached = false;
    std::optional<CoreId> core;
    std::optional<CoreId> last_core;
  };
  // (virtual deadline, lost tie-break, task id)
  using Key = std::tuple<double, bool, TaskId::rep>;

  FTask& at(TaskId id) {
    if (id.index() >= tasks_.size()) throw Error("unknown task " + std::to_string(id.value()));
    return tasks_[id.index()];
  }

  Key key(const FTask& t) const {
    return {t.vruntime + static_cast<double>(cfg_.quantum.count()) / t.weight, t.marked,
            t.id.value()};
  }

  void emit(TraceEvent e, TaskId t, DomainId d, std::optional<CoreId> c, std::string arg) {
    if (sink_) {
      std::optional<WorkerId> w;
      if (tasks_[t.index()].state != TaskState::Created || e == TraceEvent::Dispatch)
        w = WorkerId(t.value());
      sink_(TraceEntry{e, t, d, c, w, std::move(arg)});
    }
  }

  void charge(FTask& t, Nanos consumed) {
    t.vruntime += static_cast<double>(consumed.count()) / t.weight;
  }

  void update_min_vruntime() {
    std::optional<double> lo;
    for (const auto& r : running_)
      if (r) lo = lo ? std::min(*lo, tasks_[r->index()].vruntime) : tasks_[r->index()].vruntime;
    if (!runq_.empty()) {
      double v = tasks_[std::get<2>(*runq_.begin())].vruntime;
      for (const auto& k : runq_) v = std::min(v, tasks_[std::get<2>(k)].vruntime);
      lo = lo ? std::min(*lo, v) : v;
    }
    if (lo) min_vruntime_ = std::max(min_vruntime_, *lo);
  }

  void enqueue(FTask& t) {
    t.queued = true;
    runq_.insert(key(t));
    emit(TraceEvent::Ready, t.id, t.domain, std::nullopt, std::to_string(next_seq_++));
  }

  FTask& vacate(CoreId c, Nanos consumed, TaskState next, TraceEvent ev) {
    auto id = running_.at(c.index());
    COOPSCHED_REQUIRE(id.has_value(), "no running task on core " + std::to_string(c.value()));
    auto& t = at(*id);
    charge(t, consumed);
    running_[c.index()].reset();
    t.core.reset();
    t.state = next;
    t.marked = false;
    emit(ev, t.id, t.domain, c, {});
    return t;
  }

  // Puts the running task back on the run queue and gives the core to the
  // best other ready task.
  std::optional<Placement> switch_away(CoreId c, Nanos consumed, TraceEvent ev) {
    auto& t = vacate(c, consumed, TaskState::Ready, ev);
    auto next = pick_for(c);
    enqueue(t);
    if (!next) return pick_for(c);
    return next;
  }

  std::optional<Placement> pick_for(CoreId c) {
    if (runq_.empty()) return std::nullopt;
    auto best = runq_.begin();
    TaskId id(std::get<2>(*best));
    runq_.erase(best);
    at(id).queued = false;
    return place(c, id);
  }

  // Prefers the task's previous core, then an idle core of the same node.
  std::optional<CoreId> choose_core(const FTask& t) const {
    std::optional<CoreId> same, any;
    for (std::size_t i = 0; i < running_.size(); ++i) {
      if (running_[i]) continue;
      CoreId c(static_cast<CoreId::rep>(i));
      if (t.last_core && *t.last_core == c) return c;
      if (!any) any = c;
      if (!same && t.last_core && topo_.same_numa(*t.last_core, c)) same = c;
    }
    return same ? same : any;
  }

  Placement place(CoreId c, TaskId id) {
    auto& t = at(id);
    COOPSCHED_REQUIRE(!running_[c.index()], "dispatch onto a busy core");
    Placement p;
    p.core = c;
    p.task = id;
    p.worker = WorkerId(id.value());
    p.worker_created = t.state == TaskState::Created && !t.attached;
    p.cross_numa = t.last_core && !topo_.same_numa(*t.last_core, c);
    t.state = TaskState::Running;
    t.core = c;
    t.last_core = c;
    running_[c.index()] = id;
    emit(TraceEvent::Dispatch, id, t.domain, c, {});
    return p;
  }

  Topology topo_;
  FairConfig cfg_;
  lifecycle::DomainRegistry registry_;
  lifecycle::ThreadCache cache_;
  std::vector<FTask> tasks_;
  std::vector<std::optional<TaskId>> running_;
  std::set<Key> runq_;
  double min_vruntime_ = 0;
  std::uint64_t next_seq_ = 0;
  TraceSink sink_;
};

}  // namespace coopsched::sim
