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
#include <coopsched/sync/guard.hpp>
#include <coopsched/sync/mutex.hpp>

#include <deque>
#include <mutex>
#include <optional>
#include <vector>

namespace coopsched::sync {

struct SignalResult {
  std::size_t woken = 0;
  // Waiters that now own their mutex and must be submitted by the caller.
  // Woken waiters whose mutex was held were queued on it instead.
  std::vector<TaskId> to_submit;
  // Woken waiters that found their mutex held and now wait on it.
  std::vector<TaskId> queued_on_mutex;
};

template <class Guard = NullGuard>
class BasicCoopCondvar {
 public:
  using Mutex = BasicCoopMutex<Guard>;

  // Enqueues the caller, then releases `m`. The caller must block afterwards
  // and will be resumed already owning `m`. Returns the task `m` was handed
  // to by the release, which the caller must submit.
  std::optional<TaskId> wait(TaskId caller, Mutex& m) {
    COOPSCHED_REQUIRE(m.owner() == caller, "condvar wait without holding the mutex");
    {
      std::lock_guard g(guard_);
      waiters_.push_back({caller, &m});
    }
    return m.unlock(caller);
  }

  SignalResult signal() { return wake(1); }
  SignalResult broadcast() { return wake(static_cast<std::size_t>(-1)); }

  std::size_t n_waiters() const {
    std::lock_guard g(guard_);
    return waiters_.size();
  }
  std::vector<TaskId> waiters() const {
    std::lock_guard g(guard_);
    std::vector<TaskId> out;
    for (const auto& w : waiters_) out.push_back(w.task);
    return out;
  }

 private:
  struct Waiter {
    TaskId task;
    Mutex* mutex;
  };

  SignalResult wake(std::size_t max) {
    std::vector<Waiter> taken;
    {
      std::lock_guard g(guard_);
      while (!waiters_.empty() && taken.size() < max) {
        taken.push_back(waiters_.front());
        waiters_.pop_front();
      }
    }
    SignalResult r;
    r.woken = taken.size();
    for (const auto& w : taken)
      if (w.mutex->acquire_or_enqueue(w.task) == LockOutcome::Acquired)
        r.to_submit.push_back(w.task);
      else
        r.queued_on_mutex.push_back(w.task);
    return r;
  }

  mutable Guard guard_;
  std::deque<Waiter> waiters_;
};

using CoopCondvar = BasicCoopCondvar<NullGuard>;

}  // namespace coopsched::sync
