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

// Runs a simulator workload on real threads: every task executes its program
// with runtime primitives and wall-clock compute, under the cooperative
// runtime or plain OS threads. Produces the same Metrics as the simulator.

#include <coopsched/metrics.hpp>
#include <coopsched/runtime/runtime.hpp>
#include <coopsched/runtime/sync.hpp>
#include <coopsched/sim/workload.hpp>

#include <algorithm>
#include <cstdlib>
#include <memory>

namespace coopsched::runtime {

struct BenchOptions {
  RuntimeConfig runtime;
  // Repeat the workload until this much wall time has been measured.
  Nanos min_duration{0};
  std::uint32_t repeat = 1;
  // Multiplies compute and timed-wait durations.
  double time_scale = 1.0;
  // Per-run wall limit; a run that has not drained by then is aborted and
  // reported as deadlocked.
  std::optional<Nanos> time_limit = std::chrono::seconds(60);
  std::uint64_t seed = 0;
};

struct BenchResult {
  Metrics metrics;
  // Scheduler trace of the last run (coop backend, when recording).
  Trace trace;
  // Thread-cache log per domain of the last run.
  std::vector<std::vector<lifecycle::CacheEvent>> cache_logs;
};

// COOPSCHED_POLICY selects the backend when set (coop or native).
inline Backend backend_from_env(Backend fallback) {
  const char* v = std::getenv("COOPSCHED_POLICY");
  if (!v || !*v) return fallback;
  return parse_backend(v);
}

namespace detail {

class BenchRun {
 public:
  BenchRun(const sim::Workload& w, const BenchOptions& opt)
      : w_(w), opt_(opt), rt_(std::make_unique<Runtime>(opt.runtime)) {
    globals_ = make_scope(w_.objects);
    for (std::size_t i = 0; i < w_.domains.size(); ++i) doms_.push_back(rt_->add_domain());
  }

  ~BenchRun() {
    if (rt_) rt_->abort();
    for (auto& t : attached_)
      if (t.joinable()) t.join();
    rt_.reset();
  }

  void run() {
    using Clock = Runtime::Clock;
    start_ = Clock::now();
    const std::size_t n = w_.tasks.size();
    std::vector<bool> launched(n, false);
    std::vector<std::pair<Clock::time_point, DomainId>> shutdowns;
    for (std::size_t i = 0; i < w_.domains.size(); ++i)
      if (w_.domains[i].shutdown_at) shutdowns.emplace_back(start_ + scaled(*w_.domains[i].shutdown_at), doms_[i]);

    std::unique_lock lk(lm_);
    top_done_.assign(n, false);
    std::size_t n_launched = 0;
    while ((n_launched < n || !shutdowns.empty()) && !rt_->aborted()) {
      auto now = Clock::now();
      for (auto it = shutdowns.begin(); it != shutdowns.end();) {
        if (it->first <= now) {
          rt_->begin_domain_shutdown(it->second);
          it = shutdowns.erase(it);
        } else {
          ++it;
        }
      }
      std::optional<Clock::time_point> next;
      for (const auto& s : shutdowns) next = next ? std::min(*next, s.first) : s.first;
      bool progress = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (launched[i]) continue;
        const auto& d = w_.tasks[i];
        bool ready = std::all_of(d.after.begin(), d.after.end(), [&](auto a) { return top_done_[a]; });
        if (!ready) continue;
        auto due = start_ + scaled(d.arrival);
        if (due > now) {
          next = next ? std::min(*next, due) : due;
          continue;
        }
        launched[i] = true;
        ++n_launched;
        progress = true;
        lk.unlock();
        launch(static_cast<std::uint32_t>(i));
        lk.lock();
      }
      if (progress) continue;
      if (next) lcv_.wait_until(lk, *next);
      else lcv_.wait_for(lk, std::chrono::milliseconds(50));
    }
    auto all_top = [&] { return std::all_of(top_done_.begin(), top_done_.end(), [](bool b) { return b; }); };
    if (opt_.time_limit) {
      auto deadline = start_ + *opt_.time_limit;
      while (!all_top() && !rt_->aborted())
        if (lcv_.wait_until(lk, std::min(deadline, Clock::now() + std::chrono::milliseconds(50))) ==
                std::cv_status::timeout &&
            Clock::now() >= deadline)
          break;
      lk.unlock();
      auto left = std::chrono::duration_cast<Nanos>(deadline - Clock::now());
      completed_ = rt_->wait_all(std::max(left, Nanos(1)));
    } else {
      while (!all_top() && !rt_->aborted()) lcv_.wait_for(lk, std::chrono::milliseconds(50));
      lk.unlock();
      completed_ = rt_->wait_all();
    }
    end_ = Clock::now();
    if (!completed_) rt_->abort();
    for (auto& t : attached_)
      if (t.joinable()) t.join();
  }

  Metrics metrics() const {
    Metrics m;
    m.mode = "bench";
    m.policy = to_string(opt_.runtime.backend);
    m.workload = w_.name;
    m.seed = opt_.seed;
    auto st = rt_->stats();
    m.makespan_ns = std::chrono::duration_cast<Nanos>(end_ - start_).count();
    m.tasks_total = st.tasks_total;
    m.tasks_finished = st.tasks_finished;
    for (const auto& d : w_.tasks) m.requests += d.request ? 1 : 0;
    {
      std::lock_guard lk(lm_);
      m.latency = summarize_latencies(latencies_);
      m.rejected_spawns = rejected_;
    }
    finish_rates(m);
    m.context_switches = st.context_switches;
    m.spin_waste_ns = st.spin_ns;
    if (opt_.runtime.backend == Backend::Coop)
      m.core_idle_ns = std::max<std::int64_t>(
          0, static_cast<std::int64_t>(opt_.runtime.sched.topology.n_cores()) * m.makespan_ns - st.busy_ns);
    for (std::size_t i = 0; i < w_.domains.size(); ++i) {
      auto s = rt_->cache_stats(doms_[i]);
      m.domains.push_back({w_.domains[i].name, s.created_total, s.reused_total});
      m.created_total += s.created_total;
      m.reused_total += s.reused_total;
    }
    if (auto r = rt_->stall_report()) {
      m.stalled = true;
      m.stall = r;
    }
    m.deadlocked = !completed_ && !m.stalled;
    return m;
  }

  Trace trace() const { return rt_->trace(); }

  std::vector<std::vector<lifecycle::CacheEvent>> cache_logs() const {
    std::vector<std::vector<lifecycle::CacheEvent>> out;
    if (opt_.runtime.backend != Backend::Coop) return out;
    for (auto d : doms_) out.push_back(rt_->cache_log(d));
    return out;
  }

  std::vector<std::int64_t> latencies() const {
    std::lock_guard lk(lm_);
    return latencies_;
  }

 private:
  struct Obj {
    sim::ObjectKind kind{};
    std::unique_ptr<Mutex> mutex;
    std::unique_ptr<Condvar> condvar;
    std::unique_ptr<Barrier> barrier;
    std::unique_ptr<Semaphore> sem;
    std::unique_ptr<BusyBarrier> busy;
    std::unique_ptr<Flag> flag;
  };
  struct Scope {
    std::vector<Obj> objs;
  };
  struct Ctx {
    std::uint32_t program = 0;
    std::uint32_t domain = 0;
    std::shared_ptr<Scope> scope;
    std::vector<std::optional<TaskId>> children;
    std::vector<bool> joined;
  };

  Nanos scaled(Nanos d) const {
    return Nanos(static_cast<std::int64_t>(static_cast<double>(d.count()) * opt_.time_scale));
  }

  std::shared_ptr<Scope> make_scope(const std::vector<sim::ObjectDecl>& decls) {
    auto s = std::make_shared<Scope>();
    Runtime& rt = *rt_;
    for (const auto& d : decls) {
      Obj o;
      o.kind = d.kind;
      switch (d.kind) {
        case sim::ObjectKind::Mutex: o.mutex = std::make_unique<Mutex>(rt); break;
        case sim::ObjectKind::Condvar: o.condvar = std::make_unique<Condvar>(rt); break;
        case sim::ObjectKind::Barrier: o.barrier = std::make_unique<Barrier>(rt, d.count); break;
        case sim::ObjectKind::Semaphore: o.sem = std::make_unique<Semaphore>(rt, d.count); break;
        case sim::ObjectKind::BusyBarrier:
          o.busy = std::make_unique<BusyBarrier>(rt, d.count, d.yield_every);
          break;
        case sim::ObjectKind::Flag: o.flag = std::make_unique<Flag>(); break;
      }
      s->objs.push_back(std::move(o));
    }
    return s;
  }

  Obj& obj(Ctx& c, const sim::ObjRef& r) {
    auto& pool = r.local ? c.scope : globals_;
    if (!pool || r.index >= pool->objs.size()) throw Error("object reference out of range");
    return pool->objs[r.index];
  }

  void launch(std::uint32_t idx) {
    const auto& d = w_.tasks[idx];
    auto ctx = std::make_shared<Ctx>();
    ctx->program = d.program;
    ctx->domain = d.domain;
    const auto& prog = w_.programs[d.program];
    ctx->scope = prog.locals.empty() ? std::make_shared<Scope>() : make_scope(prog.locals);
    auto eligible = Runtime::Clock::now();
    auto body = [this, ctx, idx, eligible] {
      bool ok = false;
      try {
        exec(*ctx);
        ok = true;
      } catch (...) {
      }
      top_finished(idx, eligible, ok);
    };
    if (d.attached) {
      auto dom = doms_[d.domain];
      attached_.emplace_back([this, dom, body, idx] {
        try {
          rt_->attach(dom);
        } catch (const Error&) {
          note_rejected();
          top_finished(idx, Runtime::Clock::now(), false);
          return;
        }
        body();
        try {
          rt_->detach();
        } catch (...) {
        }
      });
      return;
    }
    try {
      rt_->spawn(doms_[d.domain], body);
    } catch (const Error&) {
      note_rejected();
      top_finished(idx, eligible, false);
    }
  }

  void note_rejected() {
    std::lock_guard lk(lm_);
    ++rejected_;
  }

  void top_finished(std::uint32_t idx, Runtime::Clock::time_point eligible, bool ok) {
    auto now = Runtime::Clock::now();
    std::lock_guard lk(lm_);
    top_done_[idx] = true;
    if (ok && w_.tasks[idx].request)
      latencies_.push_back(std::chrono::duration_cast<Nanos>(now - eligible).count());
    lcv_.notify_all();
  }

  void compute(Nanos d) {
    auto end = Runtime::Clock::now() + scaled(d);
    std::uint32_t n = 0;
    while (Runtime::Clock::now() < end)
      if ((++n & 255) == 0 && rt_->aborted()) throw Aborted();
  }

  void join_child(Ctx& c, std::size_t k) {
    c.joined[k] = true;
    if (c.children[k]) rt_->join(*c.children[k]);
  }

  void exec(Ctx& c) {
    Runtime& rt = *rt_;
    const auto& prog = w_.programs[c.program];
    for (const auto& seg : prog.segments) {
      switch (seg.op) {
        case sim::Op::Compute: compute(seg.duration); break;
        case sim::Op::Lock: obj(c, seg.obj).mutex->lock(); break;
        case sim::Op::Unlock: obj(c, seg.obj).mutex->unlock(); break;
        case sim::Op::CvWait: obj(c, seg.obj).condvar->wait(*obj(c, *seg.obj2).mutex); break;
        case sim::Op::CvSignal: obj(c, seg.obj).condvar->notify_one(); break;
        case sim::Op::CvBroadcast: obj(c, seg.obj).condvar->notify_all(); break;
        case sim::Op::BarrierWait: obj(c, seg.obj).barrier->arrive_and_wait(); break;
        case sim::Op::BusySpin: obj(c, seg.obj).busy->arrive_and_wait(); break;
        case sim::Op::SemWait: obj(c, seg.obj).sem->acquire(); break;
        case sim::Op::SemPost: obj(c, seg.obj).sem->release(); break;
        case sim::Op::Yield: rt.yield(); break;
        case sim::Op::TimedWait: {
          Flag* f = seg.obj2 ? obj(c, *seg.obj2).flag.get() : nullptr;
          timed_wait(rt, scaled(seg.duration), [f] { return f && f->is_set(); });
          break;
        }
        case sim::Op::Notify: obj(c, seg.obj).flag->set(); break;
        case sim::Op::Spawn: {
          auto child = std::make_shared<Ctx>();
          child->program = seg.program;
          child->domain = seg.domain.value_or(c.domain);
          const auto& cp = w_.programs[seg.program];
          child->scope = cp.locals.empty() ? c.scope : make_scope(cp.locals);
          std::optional<TaskId> id;
          try {
            id = rt.spawn(doms_[child->domain], [this, child] { exec(*child); });
          } catch (const Aborted&) {
            throw;
          } catch (const Error&) {
            note_rejected();
          }
          c.children.push_back(id);
          c.joined.push_back(false);
          break;
        }
        case sim::Op::Join:
          if (c.joined.at(seg.child)) throw ContractViolation("double join of a child task");
          join_child(c, seg.child);
          break;
        case sim::Op::JoinAll:
          for (std::size_t k = 0; k < c.children.size(); ++k)
            if (!c.joined[k]) join_child(c, k);
          break;
        case sim::Op::Finish: return;
      }
    }
  }

  const sim::Workload& w_;
  BenchOptions opt_;
  std::vector<DomainId> doms_;
  std::shared_ptr<Scope> globals_;
  mutable std::mutex lm_;
  std::condition_variable lcv_;
  std::vector<bool> top_done_;
  std::vector<std::int64_t> latencies_;
  std::uint64_t rejected_ = 0;
  std::vector<std::thread> attached_;
  Runtime::Clock::time_point start_{}, end_{};
  bool completed_ = false;
  // Declared last: destroyed (and its threads joined) before the objects above.
  std::unique_ptr<Runtime> rt_;
};

}  // namespace detail

// Runs the workload at least `repeat` times and until `min_duration` of wall
// time has been measured. Counters come from the last run; makespan is the
// mean over runs and the latency summary covers every run.
inline BenchResult run_bench(const sim::Workload& w, const BenchOptions& opt) {
  w.validate();
  if (opt.time_scale <= 0) throw Error("bench: time_scale must be > 0");
  BenchResult res;
  std::vector<std::int64_t> lat;
  std::int64_t measured = 0;
  std::int64_t makespan_sum = 0;
  std::uint64_t loops = 0;
  for (;;) {
    detail::BenchRun run(w, opt);
    run.run();
    res.metrics = run.metrics();
    auto l = run.latencies();
    lat.insert(lat.end(), l.begin(), l.end());
    makespan_sum += res.metrics.makespan_ns;
    measured += res.metrics.makespan_ns;
    ++loops;
    if (opt.runtime.record_trace) res.trace = run.trace();
    res.cache_logs = run.cache_logs();
    if (res.metrics.stalled || res.metrics.deadlocked) break;
    if (loops >= std::max<std::uint32_t>(1, opt.repeat) && Nanos(measured) >= opt.min_duration) break;
  }
  res.metrics.loops = loops;
  res.metrics.measured_ns = measured;
  res.metrics.makespan_ns = makespan_sum / static_cast<std::int64_t>(loops);
  res.metrics.latency = summarize_latencies(std::move(lat));
  finish_rates(res.metrics);
  return res;
}

}  // namespace coopsched::runtime
