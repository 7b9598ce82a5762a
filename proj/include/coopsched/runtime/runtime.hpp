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
#include <coopsched/sync/stall.hpp>
#include <coopsched/trace.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace coopsched::runtime {

// Coop: tasks run on workers that hold one of the runtime's logical cores and
// switch only at scheduling points. Native: one OS thread per task, left to
// the kernel scheduler. Both share the primitives and the park protocol.
enum class Backend { Coop, Native };

inline const char* to_string(Backend b) { return b == Backend::Coop ? "coop" : "native"; }

inline Backend parse_backend(const std::string& s) {
  if (s == "coop") return Backend::Coop;
  if (s == "native" || s == "fair") return Backend::Native;
  throw Error("unknown backend '" + s + "' (expected coop or native)");
}

struct RuntimeConfig {
  SchedulerConfig sched;
  Backend backend = Backend::Coop;
  // Wall-clock stall horizon of the watchdog. Real spinners need far longer
  // than the simulator's virtual horizon before a stall is certain.
  Nanos watchdog_horizon = std::chrono::seconds(1);
  bool record_trace = false;
};

// Thrown out of scheduling points once the runtime has aborted (stall).
struct Aborted : Error {
  Aborted() : Error("runtime aborted") {}
};

struct RuntimeStats {
  std::uint64_t tasks_total = 0;
  std::uint64_t tasks_finished = 0;
  std::uint64_t context_switches = 0;
  std::int64_t spin_ns = 0;
  std::int64_t busy_ns = 0;
};

class Runtime {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Runtime(RuntimeConfig cfg)
      : cfg_(std::move(cfg)), sched_(cfg_.sched), cores_(cfg_.sched.topology.n_cores()),
        start_(Clock::now()) {
    if (cfg_.watchdog_horizon <= Nanos::zero()) throw Error("watchdog horizon must be > 0");
    if (cfg_.record_trace) {
      trace_.header.policy = cfg_.backend == Backend::Coop ? "coop" : "native";
      trace_.header.topology = cfg_.sched.topology;
      sched_.set_trace_sink([this](TraceEntry&& e) { record(std::move(e)); });
    }
    timer_ = std::thread([this] { timer_loop(); });
  }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  ~Runtime() {
    {
      std::unique_lock lk(m_);
      if (!all_done_locked()) abort_locked();
      stop_ = true;
      for (auto& s : slots_) {
        s.exit = true;
        s.cv.notify_all();
      }
      timer_cv_.notify_all();
    }
    for (auto& s : slots_)
      if (s.thread.joinable()) s.thread.join();
    if (timer_.joinable()) timer_.join();
  }

  const RuntimeConfig& config() const { return cfg_; }
  Backend backend() const { return cfg_.backend; }

  DomainId add_domain() {
    std::lock_guard lk(m_);
    return sched_.register_domain();
  }

  // Stops new task creation in `d` and destroys its cached workers.
  void begin_domain_shutdown(DomainId d) {
    std::lock_guard lk(m_);
    for (WorkerId w : sched_.begin_domain_shutdown(d)) {
      auto& s = slot_of(w);
      s.exit = true;
      s.cv.notify_all();
    }
  }

  // Creates a task running `fn` in domain `d` and makes it ready. Throws if
  // the domain no longer accepts tasks.
  TaskId spawn(DomainId d, std::function<void()> fn) {
    std::unique_lock lk(m_);
    if (aborting_) throw Aborted();
    std::optional<CoreId> creator;
    if (auto* me = self_slot(); me && me->core) creator = me->core;
    TaskId id = sched_.create_task(d, creator);
    TaskInfo t;
    t.fn = std::move(fn);
    t.domain = d;
    tasks_.push_back(std::move(t));
    ++stats_.tasks_total;
    if (cfg_.backend == Backend::Native) {
      auto& s = new_slot(std::nullopt);
      s.task = id;
      tasks_[id.index()].slot = &s;
      s.go = true;
      s.thread = std::thread([this, &s] { worker_loop(s); });
      return id;
    }
    sched_.submit(id);
    apply(sched_.dispatch_idle());
    return id;
  }

  // Turns the calling thread into a task of domain `d` that holds a core
  // until detach(). Used for the main thread.
  TaskId attach(DomainId d) {
    std::unique_lock lk(m_);
    if (tls().rt) throw ContractViolation("thread is already a task of a runtime");
    if (aborting_) throw Aborted();
    TaskId id = sched_.create_task(d, std::nullopt, cfg_.backend == Backend::Coop);
    tasks_.push_back(TaskInfo{});
    tasks_.back().domain = d;
    tasks_.back().attached = true;
    ++stats_.tasks_total;
    Slot* s = nullptr;
    if (cfg_.backend == Backend::Coop) {
      s = &new_slot(sched_.task(id).bound_worker);
    } else {
      s = &new_slot(std::nullopt);
      s->go = true;
    }
    s->task = id;
    tasks_[id.index()].slot = s;
    tls() = {this, s};
    if (cfg_.backend == Backend::Coop) {
      sched_.submit(id);
      apply(sched_.dispatch_idle());
    }
    park(lk, *s);
    return id;
  }

  void detach() {
    std::unique_lock lk(m_);
    auto* s = self_slot();
    if (!s || !tasks_[s->task->index()].attached) throw ContractViolation("detach from a thread that is not attached");
    complete(*s);
    tls() = {};
  }

  // Waits for `id` to finish: cooperatively from a task, on a condition
  // variable from any other thread.
  void join(TaskId id) {
    std::unique_lock lk(m_);
    auto& t = task_info(id);
    if (t.done) return;
    if (auto* s = self_slot()) {
      t.joiners.push_back(*s->task);
      block_locked(lk, *s);
      return;
    }
    done_cv_.wait(lk, [&] { return t.done || aborting_; });
    if (!t.done) throw Aborted();
  }

  // Returns true once every task has finished, false if the runtime aborted.
  // Reaching `limit` aborts the runtime.
  bool wait_all(std::optional<Nanos> limit = std::nullopt) {
    std::unique_lock lk(m_);
    auto pred = [&] { return all_done_locked() || aborting_; };
    if (limit) {
      if (!done_cv_.wait_for(lk, *limit, pred)) abort_locked();
    } else {
      done_cv_.wait(lk, pred);
    }
    return !aborting_;
  }

  void abort() {
    std::lock_guard lk(m_);
    abort_locked();
  }

  // Scheduling points for the running task ------------------------------------

  std::optional<TaskId> current() const {
    auto* s = self_slot();
    return s ? s->task : std::nullopt;
  }

  TaskId self() const {
    auto* s = self_slot();
    if (!s) throw ContractViolation("not called from a runtime task");
    return *s->task;
  }

  std::optional<CoreId> current_core() const {
    auto* s = self_slot();
    return s ? s->core : std::nullopt;
  }

  DomainId current_domain() const { return task_info_const(self()).domain; }

  // Parks the calling task until wake(). The caller must already be on the
  // wait queue that will produce the wake; a wake that arrives first is kept
  // and makes block() return at once.
  void block() {
    std::unique_lock lk(m_);
    block_locked(lk, require_self());
  }

  void wake(TaskId id) {
    std::lock_guard lk(m_);
    wake_locked(id);
  }

  void yield() {
    if (aborted()) throw Aborted();
    if (cfg_.backend == Backend::Native) {
      std::this_thread::yield();
      return;
    }
    std::unique_lock lk(m_);
    auto& s = require_self();
    CoreId core = *s.core;
    auto p = sched_.yield_current(core, charge(core));
    s.core.reset();
    cores_[core.index()] = {};
    if (p.task != *s.task) ++stats_.context_switches;
    apply_one(p);
    park(lk, s);
  }

  // Blocks the caller for `d` of wall time.
  void sleep_for(Nanos d) {
    std::unique_lock lk(m_);
    auto& s = require_self();
    timers_.emplace(Clock::now() + d, *s.task);
    timer_cv_.notify_all();
    block_locked(lk, s);
  }

  // Marks the running task as spinning (or not) for the watchdog.
  void set_spinning(bool on) {
    if (cfg_.backend == Backend::Native) return;
    std::lock_guard lk(m_);
    auto* s = self_slot();
    if (!s || !s->core) return;
    cores_[s->core->index()].spinning = on;
  }

  void add_spin_time(Nanos d) {
    std::lock_guard lk(m_);
    stats_.spin_ns += d.count();
  }

  bool aborted() const { return aborted_.load(std::memory_order_acquire); }

  // Results --------------------------------------------------------------------

  std::optional<sync::StallReport> stall_report() const {
    std::lock_guard lk(m_);
    return stall_;
  }

  RuntimeStats stats() const {
    std::lock_guard lk(m_);
    return stats_;
  }

  lifecycle::CacheStats cache_stats(std::optional<DomainId> d = std::nullopt) const {
    std::lock_guard lk(m_);
    if (cfg_.backend == Backend::Native) {
      lifecycle::CacheStats s;
      for (const auto& t : tasks_)
        if (!t.attached && (!d || t.domain == *d)) ++s.created_total;
      return s;
    }
    return d ? sched_.cache().stats(*d) : sched_.cache().totals();
  }

  std::vector<lifecycle::CacheEvent> cache_log(DomainId d) const {
    std::lock_guard lk(m_);
    return sched_.cache().log(d);
  }

  Trace trace() const {
    std::lock_guard lk(m_);
    return trace_;
  }

  Nanos elapsed() const { return std::chrono::duration_cast<Nanos>(Clock::now() - start_); }

  std::size_t n_domains() const {
    std::lock_guard lk(m_);
    return sched_.n_domains();
  }

 private:
  struct Slot {
    std::optional<WorkerId> worker;
    std::optional<TaskId> task;
    std::optional<CoreId> core;
    std::condition_variable cv;
    std::thread thread;
    bool go = false;
    bool exit = false;
  };

  struct TaskInfo {
    std::function<void()> fn;
    DomainId domain;
    Slot* slot = nullptr;
    std::vector<TaskId> joiners;
    bool done = false;
    bool parked = false;
    bool wake_pending = false;
    bool attached = false;
  };

  struct CoreState {
    std::optional<TaskId> task;
    bool spinning = false;
    Clock::time_point since{};
  };

  struct Tls {
    Runtime* rt = nullptr;
    Slot* slot = nullptr;
  };

  static Tls& tls() {
    static thread_local Tls t;
    return t;
  }

  Slot* self_slot() const { return tls().rt == this ? tls().slot : nullptr; }

  Slot& require_self() const {
    auto* s = self_slot();
    if (!s) throw ContractViolation("not called from a runtime task");
    return *s;
  }

  TaskInfo& task_info(TaskId id) {
    if (id.index() >= tasks_.size()) throw Error("unknown task " + std::to_string(id.value()));
    return tasks_[id.index()];
  }
  const TaskInfo& task_info_const(TaskId id) const {
    std::lock_guard lk(m_);
    return tasks_.at(id.index());
  }

  Slot& new_slot(std::optional<WorkerId> w) {
    slots_.emplace_back();
    auto& s = slots_.back();
    s.worker = w;
    if (w) by_worker_[*w] = &s;
    return s;
  }

  Slot& slot_of(WorkerId w) { return *by_worker_.at(w); }

  bool all_done_locked() const {
    for (const auto& t : tasks_)
      if (!t.done && !t.attached) return false;
    return true;
  }

  Nanos charge(CoreId core) {
    auto now = Clock::now();
    auto d = std::chrono::duration_cast<Nanos>(now - cores_[core.index()].since);
    stats_.busy_ns += d.count();
    return d;
  }

  void record(TraceEntry&& e) {
    TraceRecord r;
    r.time = elapsed().count();
    r.event = e.event;
    r.task = e.task;
    r.domain = e.domain;
    r.core = e.core;
    r.worker = e.worker;
    r.seq = trace_.records.size();
    r.arg = std::move(e.arg);
    trace_.records.push_back(std::move(r));
  }

  // Hands each placed task's core to its worker, starting a thread for a new
  // worker and waking a parked or cached one otherwise.
  void apply(const std::vector<Placement>& ps) {
    for (const auto& p : ps) apply_one(p);
  }
  void apply(const std::optional<Placement>& p) {
    if (p) apply_one(*p);
  }
  void apply_one(const Placement& p) {
    cores_[p.core.index()] = {p.task, false, Clock::now()};
    Slot* s = nullptr;
    if (p.worker_created) {
      s = &new_slot(p.worker);
    } else {
      s = &slot_of(p.worker);
    }
    s->task = p.task;
    s->core = p.core;
    s->go = true;
    tasks_[p.task.index()].slot = s;
    if (p.worker_created) s->thread = std::thread([this, s] { worker_loop(*s); });
    else s->cv.notify_all();
  }

  void park(std::unique_lock<std::mutex>& lk, Slot& s) {
    s.cv.wait(lk, [&] { return s.go || aborting_; });
    if (!s.go) throw Aborted();
    s.go = false;
  }

  void block_locked(std::unique_lock<std::mutex>& lk, Slot& s) {
    if (aborting_) throw Aborted();
    auto& t = tasks_[s.task->index()];
    if (t.wake_pending) {
      t.wake_pending = false;
      return;
    }
    t.parked = true;
    if (cfg_.backend == Backend::Coop) {
      CoreId core = *s.core;
      auto p = sched_.block_current(core, charge(core));
      s.core.reset();
      cores_[core.index()] = {};
      if (p) ++stats_.context_switches;
      apply(p);
    }
    park(lk, s);
  }

  void wake_locked(TaskId id) {
    auto& t = task_info(id);
    if (t.done) return;
    if (!t.parked) {
      t.wake_pending = true;
      return;
    }
    t.parked = false;
    if (cfg_.backend == Backend::Native) {
      t.slot->go = true;
      t.slot->cv.notify_all();
      return;
    }
    sched_.submit(id);
    apply(sched_.dispatch_idle());
  }

  // Finish path of a task; runs with the lock held on the task's own thread.
  void complete(Slot& s) {
    TaskId id = *s.task;
    auto& t = tasks_[id.index()];
    t.done = true;
    ++stats_.tasks_finished;
    if (!aborting_) {
      for (TaskId j : t.joiners) wake_locked(j);
      if (cfg_.backend == Backend::Coop && s.core) {
        CoreId core = *s.core;
        auto p = sched_.finish_current(core, charge(core));
        cores_[core.index()] = {};
        s.core.reset();
        if (p) ++stats_.context_switches;
        apply(p);
      }
    }
    t.joiners.clear();
    done_cv_.notify_all();
  }

  void worker_loop(Slot& s) {
    std::unique_lock lk(m_);
    tls() = {this, &s};
    for (;;) {
      s.cv.wait(lk, [&] { return s.go || s.exit || aborting_; });
      if (!s.go) break;
      s.go = false;
      auto fn = std::move(tasks_[s.task->index()].fn);
      lk.unlock();
      try {
        if (fn) fn();
      } catch (...) {
        // A task that throws (including Aborted) ends; its joiners resume.
      }
      lk.lock();
      complete(s);
      if (cfg_.backend == Backend::Native) break;
      if (s.go) continue;
      if (aborting_ || !sched_.worker(*s.worker).cached) break;
    }
    tls() = {};
  }

  void abort_locked() {
    if (aborting_) return;
    aborting_ = true;
    aborted_.store(true, std::memory_order_release);
    for (auto& t : tasks_)
      if (!t.slot && !t.attached) t.done = true;
    for (auto& s : slots_) s.cv.notify_all();
    done_cv_.notify_all();
    timer_cv_.notify_all();
  }

  // Fires timers and runs the stall watchdog every deadlock_check_interval.
  void timer_loop() {
    std::unique_lock lk(m_);
    auto next_check = Clock::now() + cfg_.sched.deadlock_check_interval;
    while (!stop_) {
      auto until = next_check;
      if (!timers_.empty()) until = std::min(until, timers_.begin()->first);
      timer_cv_.wait_until(lk, until);
      if (stop_) break;
      auto now = Clock::now();
      while (!timers_.empty() && timers_.begin()->first <= now) {
        TaskId id = timers_.begin()->second;
        timers_.erase(timers_.begin());
        if (!aborting_) wake_locked(id);
      }
      if (now >= next_check) {
        next_check = now + cfg_.sched.deadlock_check_interval;
        if (!aborting_ && cfg_.backend == Backend::Coop) check_stall(now);
      }
    }
  }

  void check_stall(Clock::time_point now) {
    std::vector<sync::CoreActivity> act;
    for (const auto& c : cores_)
      act.push_back({c.task, c.spinning,
                     std::chrono::duration_cast<Nanos>(c.since - start_)});
    std::vector<TaskId> waiting;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      TaskId id(static_cast<TaskId::rep>(i));
      auto st = sched_.task(id).state;
      if (st == TaskState::Ready || st == TaskState::Blocked) waiting.push_back(id);
    }
    auto r = sync::stall_detector(act, waiting, std::chrono::duration_cast<Nanos>(now - start_),
                                  cfg_.watchdog_horizon);
    if (!r) return;
    stall_ = *r;
    if (cfg_.record_trace) {
      std::string arg = "spinning=";
      for (std::size_t i = 0; i < r->spinning.size(); ++i)
        arg += (i ? "," : "") + std::to_string(r->spinning[i].value());
      arg += ";waiting=";
      for (std::size_t i = 0; i < r->waiting.size(); ++i)
        arg += (i ? "," : "") + std::to_string(r->waiting[i].value());
      record(TraceEntry{TraceEvent::StallReport, std::nullopt, std::nullopt, std::nullopt,
                        std::nullopt, std::move(arg)});
    }
    abort_locked();
  }

  RuntimeConfig cfg_;
  mutable std::mutex m_;
  CoopScheduler sched_;
  std::vector<CoreState> cores_;
  std::deque<Slot> slots_;
  std::map<WorkerId, Slot*> by_worker_;
  std::deque<TaskInfo> tasks_;
  std::multimap<Clock::time_point, TaskId> timers_;
  std::condition_variable done_cv_;
  std::condition_variable timer_cv_;
  std::thread timer_;
  Clock::time_point start_;
  RuntimeStats stats_;
  std::optional<sync::StallReport> stall_;
  Trace trace_;
  bool aborting_ = false;
  bool stop_ = false;
  std::atomic<bool> aborted_{false};
};

}  // namespace coopsched::runtime
