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
#include <coopsched/metrics.hpp>
#include <coopsched/sim/policy.hpp>
#include <coopsched/sim/workload.hpp>
#include <coopsched/sync/barrier.hpp>
#include <coopsched/sync/busy_barrier.hpp>
#include <coopsched/sync/condvar.hpp>
#include <coopsched/sync/mutex.hpp>
#include <coopsched/sync/semaphore.hpp>
#include <coopsched/sync/stall.hpp>
#include <coopsched/sync/timed_wait.hpp>
#include <coopsched/trace.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

namespace coopsched::sim {

struct SimOptions {
  SchedulerConfig sched;
  LatencyModel latency;
  FairConfig fair;
  std::uint64_t seed = 0;
  bool record_trace = true;
  // Virtual time after which a run that has not drained is cut off and
  // reported as deadlocked (livelocked yielding spinners never drain).
  Nanos time_limit{3'600'000'000'000};
};

struct SimResult {
  Trace trace;
  Metrics metrics;
  // Set when the workload broke a primitive's contract mid-run.
  std::string error;
  bool timed_out = false;
};

// Deterministic discrete-event execution of a workload under one policy.
//
// Each core runs at most one task. A running task executes its program
// segment by segment; synchronization segments take no time and may block,
// compute and spin segments take time and may be split by preemption. Events
// are processed in (time, seq) order and every per-core event carries the
// core's epoch so that stale ones are dropped.
template <class Policy>
class Engine {
 public:
  Engine(const Workload& w, SimOptions opt)
      : w_(w), opt_(std::move(opt)), policy_(opt_.sched, opt_.fair),
        cores_(opt_.sched.topology.n_cores()) {
    opt_.sched.validate();
    opt_.latency.validate();
    opt_.fair.validate();
    w_.validate();
    policy_.set_trace_sink([this](TraceEntry&& e) { record(std::move(e)); });
  }

  Policy& policy() { return policy_; }

  SimResult run() {
    SimResult res;
    res.trace.header.policy = to_string(Policy::kind);
    res.trace.header.topology = opt_.sched.topology;
    try {
      setup();
      loop();
    } catch (const std::logic_error& e) {
      res.error = e.what();
    } catch (const Error& e) {
      res.error = e.what();
    }
    res.timed_out = timed_out_;
    finalize(res);
    return res;
  }

 private:
  enum class EvKind : std::uint8_t { Core, Wakeup, Arrival, StallCheck, ShutdownStart, ShutdownEnd };
  enum class Phase : std::uint8_t { Idle, Switching, Running, Computing, Spinning };
  enum class Pending : std::uint8_t { None, SwitchDone, ComputeDone, SpinRelease, SpinYield, Expiry, Tick };
  enum class Wait : std::uint8_t { None, Primitive, Join, Timer };

  struct Ev {
    Nanos time;
    std::uint64_t seq;
    EvKind kind;
    std::uint32_t index;
    std::uint64_t epoch;
    bool operator>(const Ev& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  struct CoreRt {
    std::optional<TaskId> task;
    std::optional<TaskId> last_task;
    Phase phase = Phase::Idle;
    Pending pending = Pending::None;
    std::uint64_t epoch = 0;
    // Last scheduling point of the current task on this core.
    Nanos since{0};
    // Start of the stretch not yet charged to the policy.
    Nanos stretch{0};
    Nanos seg_start{0};
    Nanos planned_end{0};
    Nanos slice_end{0};
    Nanos busy_since{0};
  };

  struct BusyObj {
    std::unique_ptr<sync::BusyWaitBarrier> b;
    // Completion time of each generation.
    std::vector<Nanos> released_at;
  };
  struct Flag {
    bool set = false;
  };
  using ObjState = std::variant<sync::CoopMutex, sync::CoopCondvar, sync::CoopBarrier,
                                sync::CoopSemaphore, BusyObj, Flag>;
  struct Obj {
    ObjectKind kind;
    std::string token;
    ObjState state;
  };

  struct TaskRt {
    std::uint32_t program = 0;
    DomainId domain;
    std::size_t pc = 0;
    std::size_t scope = 0;
    Nanos work_left{-1};
    bool penalty = false;
    std::optional<sync::BusyWaitBarrier::Ticket> ticket;
    std::size_t spin_obj = 0;
    std::uint64_t spins = 0;
    std::optional<sync::TimedWaitLoop> twl;
    std::vector<std::optional<TaskId>> children;
    std::vector<bool> joined;
    std::size_t join_cursor = 0;
    std::vector<TaskId> joiners;
    std::size_t cv_mutex = 0;
    Wait waiting = Wait::None;
    std::uint32_t held = 0;
    bool finished = false;
    std::optional<std::uint32_t> top;
    double weight = 1.0;
  };

  // Setup ---------------------------------------------------------------------

  void setup() {
    for (std::size_t i = 0; i < w_.domains.size(); ++i) {
      DomainId d = policy_.add_domain(w_.domains[i].weight);
      if (w_.domains[i].shutdown_at)
        push(*w_.domains[i].shutdown_at, EvKind::ShutdownStart, static_cast<std::uint32_t>(d.index()));
    }
    scopes_.emplace_back();
    for (const auto& decl : w_.objects) scopes_[0].push_back(make_obj(decl));

    deps_left_.resize(w_.tasks.size());
    dependents_.resize(w_.tasks.size());
    for (std::size_t i = 0; i < w_.tasks.size(); ++i) {
      deps_left_[i] = w_.tasks[i].after.size();
      for (auto a : w_.tasks[i].after) dependents_[a].push_back(static_cast<std::uint32_t>(i));
      if (w_.tasks[i].request) ++metrics_.requests;
    }
    for (std::size_t i = 0; i < w_.tasks.size(); ++i)
      if (deps_left_[i] == 0) push(w_.tasks[i].arrival, EvKind::Arrival, static_cast<std::uint32_t>(i));
  }

  std::size_t make_obj(const ObjectDecl& d) {
    Obj o{d.kind, {}, sync::CoopMutex{}};
    char c = 'm';
    switch (d.kind) {
      case ObjectKind::Mutex: c = 'm'; break;
      case ObjectKind::Condvar: o.state.template emplace<sync::CoopCondvar>(); c = 'c'; break;
      case ObjectKind::Barrier: o.state.template emplace<sync::CoopBarrier>(d.count); c = 'b'; break;
      case ObjectKind::Semaphore:
        o.state.template emplace<sync::CoopSemaphore>(d.count);
        c = 's';
        break;
      case ObjectKind::BusyBarrier:
        o.state.template emplace<BusyObj>(
            BusyObj{std::make_unique<sync::BusyWaitBarrier>(d.count, d.yield_every), {}});
        c = 'x';
        break;
      case ObjectKind::Flag: o.state.template emplace<Flag>(); c = 'f'; break;
    }
    o.token = obj_token(c, objs_.size());
    objs_.push_back(std::move(o));
    return objs_.size() - 1;
  }

  // Event loop ----------------------------------------------------------------

  void push(Nanos t, EvKind k, std::uint32_t index, std::uint64_t epoch = 0) {
    if (k != EvKind::Core && k != EvKind::StallCheck) ++external_;
    events_.push(Ev{t, ev_seq_++, k, index, epoch});
  }

  void loop() {
    while (!events_.empty() && !stopped_) {
      Ev ev = events_.top();
      events_.pop();
      if (ev.time > opt_.time_limit) {
        timed_out_ = true;
        break;
      }
      now_ = ev.time;
      if (ev.kind != EvKind::Core && ev.kind != EvKind::StallCheck) --external_;
      switch (ev.kind) {
        case EvKind::Core:
          if (cores_[ev.index].epoch == ev.epoch) on_core(CoreId(ev.index));
          break;
        case EvKind::Wakeup: wake(TaskId(ev.index)); break;
        case EvKind::Arrival: arrive(ev.index); break;
        case EvKind::StallCheck:
          --stall_checks_;
          if (cores_[ev.index].epoch == ev.epoch) stall_check(CoreId(ev.index), ev.epoch);
          break;
        case EvKind::ShutdownStart: shutdown_start(DomainId(ev.index)); break;
        case EvKind::ShutdownEnd: shutdown_end(DomainId(ev.index)); break;
      }
    }
  }

  void record(TraceEntry&& e) {
    if (!opt_.record_trace) return;
    TraceRecord r;
    r.time = now_.count();
    r.event = e.event;
    r.task = e.task;
    r.domain = e.domain;
    r.core = e.core;
    r.worker = e.worker;
    r.seq = trace_.size();
    r.arg = std::move(e.arg);
    trace_.push_back(std::move(r));
  }

  void emit(TraceEvent e, TaskId t, std::optional<CoreId> c, std::string arg) {
    record(TraceEntry{e, t, tasks_[t.index()].domain, c, std::nullopt, std::move(arg)});
  }

  // Task creation -------------------------------------------------------------

  void arrive(std::uint32_t idx) {
    const auto& decl = w_.tasks[idx];
    DomainId d(decl.domain);
    double weight = decl.weight.value_or(w_.domains[decl.domain].weight);
    auto id = create(d, std::nullopt, decl.attached, weight, decl.program, std::nullopt);
    if (!id) {
      release_dependents(idx);
      return;
    }
    tasks_[id->index()].top = idx;
    top_task_.resize(w_.tasks.size());
    top_task_[idx] = *id;
    policy_.submit(*id);
    fill_idle();
  }

  std::optional<TaskId> create(DomainId d, std::optional<CoreId> creator, bool attached,
                               double weight, std::uint32_t program,
                               std::optional<std::size_t> parent_scope) {
    TaskId id;
    try {
      id = policy_.create(d, creator, attached, weight);
    } catch (const Error&) {
      ++metrics_.rejected_spawns;
      return std::nullopt;
    }
    COOPSCHED_REQUIRE(id.index() == tasks_.size(), "policy task ids must be dense");
    TaskRt t;
    t.program = program;
    t.domain = d;
    t.weight = weight;
    const auto& prog = w_.programs[program];
    if (!prog.locals.empty()) {
      std::vector<std::size_t> scope;
      for (const auto& decl : prog.locals) scope.push_back(make_obj(decl));
      scopes_.push_back(std::move(scope));
      t.scope = scopes_.size() - 1;
    } else {
      t.scope = parent_scope.value_or(0);
    }
    tasks_.push_back(std::move(t));
    return id;
  }

  void release_dependents(std::uint32_t idx) {
    for (auto dep : dependents_[idx])
      if (--deps_left_[dep] == 0)
        push(std::max(now_, w_.tasks[dep].arrival), EvKind::Arrival, dep);
  }

  // Core state machine ----------------------------------------------------------

  void place(const Placement& p) {
    auto& c = cores_[p.core.index()];
    bool was_idle = !c.task;
    c.task = p.task;
    Nanos cost{0};
    if (c.last_task != p.task) {
      cost = opt_.latency.context_switch;
      ++metrics_.context_switches;
    }
    c.last_task = p.task;
    c.phase = Phase::Switching;
    c.since = now_;
    c.stretch = now_;
    if (was_idle) c.busy_since = now_;
    if constexpr (Policy::preemptive) c.slice_end = now_ + opt_.fair.quantum;
    if (p.cross_numa) tasks_[p.task.index()].penalty = true;
    c.pending = Pending::SwitchDone;
    push(now_ + cost, EvKind::Core, static_cast<std::uint32_t>(p.core.index()), ++c.epoch);
  }

  void vacate(CoreId core) {
    auto& c = cores_[core.index()];
    busy_ns_ += (now_ - c.busy_since).count();
    c.task.reset();
    c.phase = Phase::Idle;
    c.pending = Pending::None;
    ++c.epoch;
  }

  void fill_idle() {
    for (const auto& p : policy_.dispatch_idle()) place(p);
  }

  Nanos take_consumed(CoreId core) {
    auto& c = cores_[core.index()];
    Nanos consumed = now_ - c.stretch;
    c.stretch = now_;
    return consumed;
  }

  void on_core(CoreId core) {
    auto& c = cores_[core.index()];
    switch (c.pending) {
      case Pending::SwitchDone:
        c.phase = Phase::Running;
        advance(core);
        return;
      case Pending::ComputeDone: {
        auto& t = running(core);
        emit(TraceEvent::Compute, *c.task, core, std::to_string(t.work_left.count()));
        t.work_left = Nanos(-1);
        t.penalty = false;
        ++t.pc;
        c.phase = Phase::Running;
        advance(core);
        return;
      }
      case Pending::SpinRelease: {
        settle(core);
        auto& t = running(core);
        t.ticket.reset();
        ++t.pc;
        c.phase = Phase::Running;
        advance(core);
        return;
      }
      case Pending::SpinYield: {
        settle(core);
        if (livelocked()) return;
        running(core).spins = 0;
        c.phase = Phase::Running;
        if (do_yield(core)) return;
        // The spinner keeps the core: resume spinning.
        advance(core);
        return;
      }
      case Pending::Expiry: {
        settle(core);
        if (livelocked()) return;
        c.slice_end = now_ + opt_.fair.quantum;
        auto& t = running(core);
        auto p = policy_.expire(core, take_consumed(core));
        if (p) {
          ++metrics_.preemptions;
          if (t.held > 0) ++metrics_.lock_holder_preemptions;
          switch_to(core, *p);
        } else {
          resume_segment(core);
        }
        return;
      }
      case Pending::Tick: {
        settle(core);
        auto p = policy_.tick(core, take_consumed(core));
        if (p) switch_to(core, *p);
        else resume_segment(core);
        return;
      }
      case Pending::None: return;
    }
  }

  TaskRt& running(CoreId core) { return tasks_[cores_[core.index()].task->index()]; }

  // The core's task was switched out while still ready (preempt or yield).
  void switch_to(CoreId core, const Placement& p) {
    cores_[core.index()].phase = Phase::Idle;
    place(p);
    fill_idle();
  }

  // Accounts time spent in the current compute or spin segment up to now.
  void settle(CoreId core) {
    auto& c = cores_[core.index()];
    auto& t = running(core);
    if (c.phase == Phase::Computing) {
      Nanos elapsed = now_ - c.seg_start;
      double factor = t.penalty ? opt_.latency.migration_penalty : 1.0;
      auto done = static_cast<std::int64_t>(std::floor(static_cast<double>(elapsed.count()) / factor));
      done = std::min(done, t.work_left.count());
      if (done > 0) emit(TraceEvent::Compute, *c.task, core, std::to_string(done));
      t.work_left -= Nanos(done);
      c.seg_start = now_;
    } else if (c.phase == Phase::Spinning) {
      Nanos elapsed = now_ - c.seg_start;
      if (elapsed > Nanos::zero()) {
        emit(TraceEvent::SpinSegment, *c.task, core, std::to_string(elapsed.count()));
        metrics_.spin_waste_ns += elapsed.count();
        t.spins += static_cast<std::uint64_t>(elapsed / opt_.latency.spin_iteration);
      }
      c.seg_start = now_;
    }
  }

  // Continues the interrupted compute or spin segment after a timer event
  // that did not switch the task out.
  void resume_segment(CoreId core) {
    auto& c = cores_[core.index()];
    if (c.phase == Phase::Computing) {
      start_compute(core);
    } else if (c.phase == Phase::Spinning) {
      schedule_core(core);
    } else {
      advance(core);
    }
  }

  void start_compute(CoreId core) {
    auto& c = cores_[core.index()];
    auto& t = running(core);
    double factor = t.penalty ? opt_.latency.migration_penalty : 1.0;
    c.phase = Phase::Computing;
    c.seg_start = now_;
    c.planned_end =
        now_ + Nanos(static_cast<std::int64_t>(std::ceil(static_cast<double>(t.work_left.count()) * factor)));
    schedule_core(core);
  }

  Nanos next_tick() const {
    const auto tick = opt_.fair.tick.count();
    return Nanos((now_.count() / tick + 1) * tick);
  }

  // Arms the single pending event of a running core.
  void schedule_core(CoreId core) {
    auto& c = cores_[core.index()];
    auto& t = running(core);
    std::optional<std::pair<Nanos, Pending>> best;
    auto offer = [&](Nanos when, Pending p) {
      if (!best || when < best->first) best = std::make_pair(when, p);
    };
    if (c.phase == Phase::Computing) {
      offer(c.planned_end, Pending::ComputeDone);
    } else if (c.phase == Phase::Spinning) {
      auto& bo = std::get<BusyObj>(objs_[t.spin_obj].state);
      if (bo.b->released(*t.ticket)) {
        Nanos rel = bo.released_at.at(t.ticket->generation);
        auto iter = opt_.latency.spin_iteration.count();
        auto k = std::max<std::int64_t>(1, ((rel - c.seg_start).count() + iter - 1) / iter);
        offer(c.seg_start + Nanos(k * iter), Pending::SpinRelease);
      } else if (auto ye = bo.b->yield_every(); ye && !policy_.yield_marked(core)) {
        auto left = static_cast<std::int64_t>(*ye) - static_cast<std::int64_t>(t.spins);
        offer(c.seg_start + opt_.latency.spin_iteration * std::max<std::int64_t>(1, left),
              Pending::SpinYield);
      }
    }
    if constexpr (Policy::preemptive) {
      offer(c.slice_end, Pending::Expiry);
      if (policy_.yield_marked(core)) offer(next_tick(), Pending::Tick);
    }
    ++c.epoch;
    if (!best) {
      c.pending = Pending::None;
      // A spinner with no way to reach a scheduling point.
      push(std::max(now_, c.since + opt_.sched.stall_horizon), EvKind::StallCheck,
           static_cast<std::uint32_t>(core.index()), c.epoch);
      ++stall_checks_;
      return;
    }
    c.pending = best->second;
    push(best->first, EvKind::Core, static_cast<std::uint32_t>(core.index()), c.epoch);
  }

  // Returns true when the core was handed to another task.
  bool do_yield(CoreId core) {
    auto& c = cores_[core.index()];
    TaskId me = *c.task;
    auto r = policy_.yield(core, take_consumed(core));
    if (!r.switched) return false;
    c.phase = Phase::Idle;
    if (r.next) {
      place(*r.next);
      if (r.next->task == me) return true;
    } else {
      vacate(core);
    }
    fill_idle();
    return true;
  }

  void block(CoreId core) {
    auto p = policy_.block(core, take_consumed(core));
    vacate(core);
    if (p) place(*p);
    fill_idle();
  }

  void wake(TaskId id) {
    auto& t = tasks_[id.index()];
    t.waiting = Wait::None;
    policy_.submit(id);
    fill_idle();
  }

  Obj& obj(const TaskRt& t, const ObjRef& r, ObjectKind want) {
    std::size_t idx = 0;
    if (r.local) {
      const auto& scope = scopes_[t.scope];
      if (r.index >= scope.size()) throw Error("local object l" + std::to_string(r.index) + " not in scope");
      idx = scope[r.index];
    } else {
      if (r.index >= scopes_[0].size()) throw Error("global object out of range");
      idx = scopes_[0][r.index];
    }
    auto& o = objs_[idx];
    if (o.kind != want)
      throw Error("object " + o.token + " is a " + to_string(o.kind) + ", expected " + to_string(want));
    return o;
  }

  std::size_t obj_index(const Obj& o) const { return static_cast<std::size_t>(&o - objs_.data()); }

  void give_mutex(TaskId to, const Obj& m) {
    emit(TraceEvent::LockTransfer, to, std::nullopt, m.token);
    ++tasks_[to.index()].held;
  }

  // Runs zero-time segments of the core's task until it starts a timed
  // segment, blocks, yields the core away or finishes.
  void advance(CoreId core) {
    auto& c = cores_[core.index()];
    const TaskId id = *c.task;
    for (;;) {
      auto& t = tasks_[id.index()];
      const auto& seg = w_.programs[t.program].segments[t.pc];
      switch (seg.op) {
        case Op::Compute: {
          if (t.work_left < Nanos::zero()) t.work_left = seg.duration;
          if (t.work_left == Nanos::zero()) {
            t.work_left = Nanos(-1);
            ++t.pc;
            continue;
          }
          start_compute(core);
          return;
        }
        case Op::Lock: {
          auto& o = obj(t, seg.obj, ObjectKind::Mutex);
          auto& m = std::get<sync::CoopMutex>(o.state);
          ++t.pc;
          if (m.lock(id) == sync::LockOutcome::Acquired) {
            emit(TraceEvent::LockAcquire, id, core, o.token);
            ++t.held;
            continue;
          }
          emit(TraceEvent::Wait, id, core, o.token);
          t.waiting = Wait::Primitive;
          block(core);
          return;
        }
        case Op::Unlock: {
          auto& o = obj(t, seg.obj, ObjectKind::Mutex);
          auto next = std::get<sync::CoopMutex>(o.state).unlock(id);
          --t.held;
          ++t.pc;
          if (next) {
            give_mutex(*next, o);
            wake(*next);
          } else {
            emit(TraceEvent::LockRelease, id, core, o.token);
          }
          continue;
        }
        case Op::CvWait: {
          auto& cvo = obj(t, seg.obj, ObjectKind::Condvar);
          auto& mo = obj(t, *seg.obj2, ObjectKind::Mutex);
          auto next = std::get<sync::CoopCondvar>(cvo.state).wait(id, std::get<sync::CoopMutex>(mo.state));
          emit(TraceEvent::CvWait, id, core, cvo.token);
          --t.held;
          t.cv_mutex = obj_index(mo);
          t.waiting = Wait::Primitive;
          ++t.pc;
          if (next) {
            give_mutex(*next, mo);
            wake(*next);
          } else {
            emit(TraceEvent::LockRelease, id, core, mo.token);
          }
          block(core);
          return;
        }
        case Op::CvSignal:
        case Op::CvBroadcast: {
          auto& cvo = obj(t, seg.obj, ObjectKind::Condvar);
          auto& cv = std::get<sync::CoopCondvar>(cvo.state);
          auto r = seg.op == Op::CvSignal ? cv.signal() : cv.broadcast();
          emit(TraceEvent::CvSignal, id, core, cvo.token);
          ++t.pc;
          // Acquisitions first: a waiter only queues on a mutex that is held.
          for (TaskId w : r.to_submit) {
            emit(TraceEvent::LockAcquire, w, std::nullopt, objs_[tasks_[w.index()].cv_mutex].token);
            ++tasks_[w.index()].held;
          }
          for (TaskId w : r.queued_on_mutex)
            emit(TraceEvent::Wait, w, std::nullopt, objs_[tasks_[w.index()].cv_mutex].token);
          for (TaskId w : r.to_submit) wake(w);
          continue;
        }
        case Op::BarrierWait: {
          auto& o = obj(t, seg.obj, ObjectKind::Barrier);
          auto a = std::get<sync::CoopBarrier>(o.state).arrive(id);
          ++t.pc;
          if (a.serial) {
            emit(TraceEvent::BarrierRelease, id, core, o.token);
            for (TaskId r : a.release) wake(r);
            continue;
          }
          emit(TraceEvent::Wait, id, core, o.token);
          t.waiting = Wait::Primitive;
          block(core);
          return;
        }
        case Op::BusySpin: {
          auto& o = obj(t, seg.obj, ObjectKind::BusyBarrier);
          auto& bo = std::get<BusyObj>(o.state);
          if (!t.ticket) {
            auto tk = bo.b->arrive();
            if (tk.last) {
              bo.released_at.push_back(now_);
              emit(TraceEvent::BarrierRelease, id, core, o.token);
              ++t.pc;
              notify_spinners(obj_index(o));
              continue;
            }
            t.ticket = tk;
            t.spin_obj = obj_index(o);
            t.spins = 0;
          }
          if (bo.b->released(*t.ticket)) {
            // Resumed after the release: the first check costs nothing.
            t.ticket.reset();
            ++t.pc;
            continue;
          }
          c.phase = Phase::Spinning;
          c.seg_start = now_;
          schedule_core(core);
          return;
        }
        case Op::SemWait: {
          auto& o = obj(t, seg.obj, ObjectKind::Semaphore);
          ++t.pc;
          if (std::get<sync::CoopSemaphore>(o.state).wait(id)) continue;
          emit(TraceEvent::Wait, id, core, o.token);
          t.waiting = Wait::Primitive;
          block(core);
          return;
        }
        case Op::SemPost: {
          auto& o = obj(t, seg.obj, ObjectKind::Semaphore);
          ++t.pc;
          if (auto next = std::get<sync::CoopSemaphore>(o.state).post()) wake(*next);
          continue;
        }
        case Op::Yield: {
          ++t.pc;
          if (do_yield(core)) return;
          continue;
        }
        case Op::TimedWait: {
          if (!t.twl) t.twl.emplace(seg.duration, opt_.sched.waitfor_poll);
          bool event = seg.obj2 && std::get<Flag>(obj(t, *seg.obj2, ObjectKind::Flag).state).set;
          auto slice = event ? std::nullopt : t.twl->next_slice();
          if (!slice) {
            t.twl.reset();
            ++t.pc;
            continue;
          }
          t.twl->charge(*slice);
          emit(TraceEvent::Waitfor, id, core, std::to_string(slice->count()));
          t.waiting = Wait::Timer;
          push(now_ + *slice, EvKind::Wakeup, id.value());
          block(core);
          return;
        }
        case Op::Notify: {
          std::get<Flag>(obj(t, seg.obj, ObjectKind::Flag).state).set = true;
          ++t.pc;
          continue;
        }
        case Op::Spawn: {
          DomainId d = seg.domain ? DomainId(*seg.domain) : t.domain;
          double weight = w_.domains[d.index()].weight;
          std::size_t scope = t.scope;
          auto child = create(d, core, false, weight, seg.program, scope);
          auto& me = tasks_[id.index()];
          me.children.push_back(child);
          me.joined.push_back(false);
          ++me.pc;
          if (child) {
            policy_.submit(*child);
            fill_idle();
          }
          continue;
        }
        case Op::Join: {
          if (seg.child >= t.children.size()) throw Error("join of a child that was never spawned");
          if (t.joined[seg.child]) throw ContractViolation("double join of a child task");
          t.joined[seg.child] = true;
          ++t.pc;
          auto child = t.children[seg.child];
          if (!child || tasks_[child->index()].finished) continue;
          tasks_[child->index()].joiners.push_back(id);
          emit(TraceEvent::Wait, id, core, obj_token('j', child->index()));
          t.waiting = Wait::Join;
          block(core);
          return;
        }
        case Op::JoinAll: {
          while (t.join_cursor < t.children.size()) {
            auto k = t.join_cursor;
            auto child = t.children[k];
            if (t.joined[k] || !child || tasks_[child->index()].finished) {
              t.joined[k] = true;
              ++t.join_cursor;
              continue;
            }
            break;
          }
          if (t.join_cursor == t.children.size()) {
            ++t.pc;
            continue;
          }
          auto child = *t.children[t.join_cursor];
          tasks_[child.index()].joiners.push_back(id);
          emit(TraceEvent::Wait, id, core, obj_token('j', child.index()));
          t.waiting = Wait::Join;
          block(core);
          return;
        }
        case Op::Finish: {
          finish(core);
          return;
        }
      }
    }
  }

  void notify_spinners(std::size_t obj_idx) {
    for (std::size_t i = 0; i < cores_.size(); ++i) {
      auto& c = cores_[i];
      if (c.phase != Phase::Spinning || !c.task) continue;
      const auto& t = tasks_[c.task->index()];
      if (t.spin_obj == obj_idx && t.ticket) schedule_core(CoreId(static_cast<CoreId::rep>(i)));
    }
  }

  void finish(CoreId core) {
    TaskId id = *cores_[core.index()].task;
    auto& t = tasks_[id.index()];
    if (t.held > 0) throw Error("task " + std::to_string(id.value()) + " finished holding a mutex");
    t.finished = true;
    finish_time_ = now_;
    ++metrics_.tasks_finished;
    if (t.top) {
      const auto& decl = w_.tasks[*t.top];
      if (decl.request) latencies_.push_back((now_ - decl.arrival).count());
      release_dependents(*t.top);
    }
    auto joiners = std::move(t.joiners);
    for (TaskId j : joiners) wake(j);
    auto p = policy_.finish(core, take_consumed(core));
    vacate(core);
    if (p) place(*p);
    fill_idle();
    DomainId d = tasks_[id.index()].domain;
    if (shutting_down(d)) policy_.try_complete_shutdown(d);
  }

  bool shutting_down(DomainId d) const {
    return d.index() < shutdown_begun_.size() && shutdown_begun_[d.index()];
  }

  void shutdown_start(DomainId d) {
    if (shutdown_begun_.size() <= d.index()) shutdown_begun_.resize(d.index() + 1, false);
    shutdown_begun_[d.index()] = true;
    policy_.begin_shutdown(d);
    if (!policy_.try_complete_shutdown(d))
      push(now_ + w_.domains[d.index()].shutdown_grace, EvKind::ShutdownEnd,
           static_cast<std::uint32_t>(d.index()));
  }

  void shutdown_end(DomainId d) {
    if (policy_.try_complete_shutdown(d)) return;
    metrics_.shutdown_reports.push_back(policy_.stuck(d));
  }

  // True, and the run is stopped, when every unfinished task is either parked
  // or spinning on a busy barrier that cannot complete, and no arrival, timer
  // or shutdown event is pending. Spinners then burn time forever. Checked at
  // most once per stall horizon.
  bool livelocked() {
    if (now_ < next_livelock_check_) return false;
    next_livelock_check_ = now_ + opt_.sched.stall_horizon;
    if (external_ > 0) return false;
    for (const auto& t : tasks_) {
      if (t.finished || t.waiting == Wait::Primitive || t.waiting == Wait::Join) continue;
      if (t.waiting == Wait::Timer || !t.ticket) return false;
      if (std::get<BusyObj>(objs_[t.spin_obj].state).b->released(*t.ticket)) return false;
    }
    stopped_ = true;
    return true;
  }

  void stall_check(CoreId core, std::uint64_t epoch) {
    std::vector<sync::CoreActivity> act;
    for (const auto& c : cores_)
      act.push_back({c.task, c.phase == Phase::Spinning, c.since});
    std::vector<TaskId> waiting;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      const auto& t = tasks_[i];
      if (t.finished) continue;
      bool on_core = false;
      for (const auto& c : cores_) on_core = on_core || (c.task && c.task->index() == i);
      if (on_core || t.waiting == Wait::Timer) continue;
      waiting.push_back(TaskId(static_cast<TaskId::rep>(i)));
    }
    auto rep = sync::stall_detector(act, waiting, now_, opt_.sched.stall_horizon);
    if (!rep) {
      // Look again later, but only while something else can still happen.
      if (events_.size() > stall_checks_) {
        push(now_ + opt_.sched.stall_horizon, EvKind::StallCheck,
             static_cast<std::uint32_t>(core.index()), epoch);
        ++stall_checks_;
      }
      return;
    }
    std::string arg = "spinning=";
    for (std::size_t i = 0; i < rep->spinning.size(); ++i)
      arg += (i ? "," : "") + std::to_string(rep->spinning[i].value());
    arg += ";waiting=";
    for (std::size_t i = 0; i < rep->waiting.size(); ++i)
      arg += (i ? "," : "") + std::to_string(rep->waiting[i].value());
    record(TraceEntry{TraceEvent::StallReport, std::nullopt, std::nullopt, std::nullopt,
                      std::nullopt, arg});
    metrics_.stalled = true;
    metrics_.stall = *rep;
    stopped_ = true;
  }

  // Results ---------------------------------------------------------------------

  std::uint64_t residual_waiters() const {
    std::uint64_t n = 0;
    for (const auto& o : objs_) {
      std::visit(
          [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, sync::CoopMutex> || std::is_same_v<S, sync::CoopCondvar> ||
                          std::is_same_v<S, sync::CoopSemaphore>)
              n += s.n_waiters();
            else if constexpr (std::is_same_v<S, sync::CoopBarrier>)
              n += s.arrived();
          },
          o.state);
    }
    for (const auto& t : tasks_) n += (!t.finished && t.waiting == Wait::Join) ? 1 : 0;
    return n;
  }

  void finalize(SimResult& res) {
    auto& m = metrics_;
    m.mode = "sim";
    m.policy = to_string(Policy::kind);
    m.workload = w_.name;
    m.seed = opt_.seed;
    m.tasks_total = tasks_.size();
    bool complete = m.tasks_finished == tasks_.size() && !m.stalled && !timed_out_ &&
                    res.error.empty() && all_top_created();
    m.deadlocked = !complete && !m.stalled && res.error.empty();
    Nanos end = complete ? finish_time_ : now_;
    m.makespan_ns = end.count();
    std::int64_t busy = busy_ns_;
    for (const auto& c : cores_)
      if (c.task) busy += (end - c.busy_since).count();
    m.core_idle_ns = std::max<std::int64_t>(
        0, static_cast<std::int64_t>(cores_.size()) * end.count() - busy);
    m.latency = summarize_latencies(latencies_);
    finish_rates(m);
    for (std::size_t i = 0; i < w_.domains.size(); ++i) {
      auto s = policy_.stats(DomainId(static_cast<DomainId::rep>(i)));
      m.domains.push_back({w_.domains[i].name, s.created_total, s.reused_total});
      m.created_total += s.created_total;
      m.reused_total += s.reused_total;
    }
    res.trace.records = std::move(trace_);
    res.trace.residual_waiters = residual_waiters();
    res.metrics = m;
  }

  bool all_top_created() const {
    for (std::size_t i = 0; i < w_.tasks.size(); ++i)
      if (deps_left_[i] != 0) return false;
    return true;
  }

  const Workload& w_;
  SimOptions opt_;
  Policy policy_;
  std::vector<CoreRt> cores_;
  std::vector<TaskRt> tasks_;
  std::vector<Obj> objs_;
  std::vector<std::vector<std::size_t>> scopes_;
  std::vector<std::size_t> deps_left_;
  std::vector<std::vector<std::uint32_t>> dependents_;
  std::vector<TaskId> top_task_;
  std::vector<bool> shutdown_begun_;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> events_;
  std::uint64_t ev_seq_ = 0;
  std::size_t stall_checks_ = 0;
  std::size_t external_ = 0;
  Nanos next_livelock_check_{0};
  Nanos now_{0};
  Nanos finish_time_{0};
  std::int64_t busy_ns_ = 0;
  bool stopped_ = false;
  bool timed_out_ = false;
  std::vector<TraceRecord> trace_;
  std::vector<std::int64_t> latencies_;
  Metrics metrics_;
};

inline SimResult run_sim(const Workload& w, PolicyKind policy, const SimOptions& opt) {
  if (policy == PolicyKind::Coop) return Engine<CoopPolicy<>>(w, opt).run();
  return Engine<FairPolicy>(w, opt).run();
}

}  // namespace coopsched::sim
