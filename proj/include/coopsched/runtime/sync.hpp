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

// Blocking primitives for runtime tasks. Each wraps the matching state machine
// from coopsched/sync with a SpinGuard and turns its "block" and "submit"
// results into Runtime::block() and Runtime::wake().

#include <coopsched/runtime/runtime.hpp>
#include <coopsched/sync/barrier.hpp>
#include <coopsched/sync/busy_barrier.hpp>
#include <coopsched/sync/condvar.hpp>
#include <coopsched/sync/guard.hpp>
#include <coopsched/sync/mutex.hpp>
#include <coopsched/sync/semaphore.hpp>
#include <coopsched/sync/timed_wait.hpp>

#include <atomic>
#include <chrono>

namespace coopsched::runtime {

class Mutex {
 public:
  explicit Mutex(Runtime& rt) : rt_(rt) {}

  void lock() {
    if (m_.lock(rt_.self()) == sync::LockOutcome::Enqueued) rt_.block();
  }
  bool try_lock() { return m_.try_lock(rt_.self()); }
  void unlock() {
    if (auto next = m_.unlock(rt_.self())) rt_.wake(*next);
  }

  sync::BasicCoopMutex<sync::SpinGuard>& state() { return m_; }

 private:
  Runtime& rt_;
  sync::BasicCoopMutex<sync::SpinGuard> m_;
};

class Condvar {
 public:
  explicit Condvar(Runtime& rt) : rt_(rt) {}

  // Returns owning `m` again.
  void wait(Mutex& m) {
    if (auto next = cv_.wait(rt_.self(), m.state())) rt_.wake(*next);
    rt_.block();
  }

  template <class Pred>
  void wait(Mutex& m, Pred pred) {
    while (!pred()) wait(m);
  }

  void notify_one() { submit(cv_.signal()); }
  void notify_all() { submit(cv_.broadcast()); }

 private:
  void submit(const sync::SignalResult& r) {
    for (TaskId t : r.to_submit) rt_.wake(t);
  }

  Runtime& rt_;
  sync::BasicCoopCondvar<sync::SpinGuard> cv_;
};

class Barrier {
 public:
  Barrier(Runtime& rt, std::size_t parties) : rt_(rt), b_(parties) {}

  // True for the arrival that completed the generation.
  bool arrive_and_wait() {
    auto a = b_.arrive(rt_.self());
    if (a.serial) {
      for (TaskId t : a.release) rt_.wake(t);
      return true;
    }
    rt_.block();
    return false;
  }

 private:
  Runtime& rt_;
  sync::BasicCoopBarrier<sync::SpinGuard> b_;
};

class Semaphore {
 public:
  Semaphore(Runtime& rt, std::uint64_t permits) : rt_(rt), s_(permits) {}

  void acquire() {
    if (!s_.wait(rt_.self())) rt_.block();
  }
  void release() {
    if (auto next = s_.post()) rt_.wake(*next);
  }

 private:
  Runtime& rt_;
  sync::BasicCoopSemaphore<sync::SpinGuard> s_;
};

// Spin barrier whose waiters burn their core. With yield_every set they yield
// to the scheduler every that many iterations.
class BusyBarrier {
 public:
  BusyBarrier(Runtime& rt, std::size_t parties, std::optional<std::uint32_t> yield_every = {})
      : rt_(rt), b_(parties, yield_every) {}

  bool arrive_and_wait() {
    auto tk = b_.arrive();
    if (tk.last) return true;
    auto start = std::chrono::steady_clock::now();
    rt_.set_spinning(true);
    std::uint64_t n = 0;
    auto ye = b_.yield_every();
    while (!b_.released(tk)) {
      sync::cpu_relax();
      ++n;
      if ((n & 1023) == 0 && rt_.aborted()) throw Aborted();
      if (ye && n % *ye == 0) rt_.yield();
    }
    rt_.set_spinning(false);
    rt_.add_spin_time(
        std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now() - start));
    return false;
  }

  const sync::BusyWaitBarrier& state() const { return b_; }

 private:
  Runtime& rt_;
  sync::BusyWaitBarrier b_;
};

// One-shot event for timed waits.
class Flag {
 public:
  void set() { v_.store(true, std::memory_order_release); }
  bool is_set() const { return v_.load(std::memory_order_acquire); }

 private:
  std::atomic<bool> v_{false};
};

// Polls `probe` and sleeps in slices of the scheduler's waitfor_poll until it
// holds or `timeout` has been slept away.
template <class Probe>
sync::WaitOutcome timed_wait(Runtime& rt, Nanos timeout, Probe&& probe) {
  return sync::timed_wait(timeout, rt.config().sched.waitfor_poll, std::forward<Probe>(probe),
                          [&](Nanos slice) { rt.sleep_for(slice); });
}

}  // namespace coopsched::runtime
