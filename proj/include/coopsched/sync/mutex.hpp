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

#include <algorithm>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

namespace coopsched::sync {

enum class LockOutcome { Acquired, Enqueued };

// Mutex with an explicit FIFO wait queue and ownership hand-off.
//
// A contended lock() appends the caller to the queue; the caller must then
// block. unlock() with waiters pops the head and makes it the owner without
// ever clearing the locked flag, so a third task cannot barge in between. The
// returned task has to be submitted to the scheduler by the caller; it does
// not run immediately.
template <class Guard = NullGuard>
class BasicCoopMutex {
 public:
  LockOutcome lock(TaskId caller) {
    std::lock_guard g(guard_);
    COOPSCHED_REQUIRE(!(locked_ && owner_ == caller),
                      "recursive lock by task " + std::to_string(caller.value()));
    return acquire_or_enqueue_locked(caller);
  }

  bool try_lock(TaskId caller) {
    std::lock_guard g(guard_);
    COOPSCHED_REQUIRE(!(locked_ && owner_ == caller), "recursive try_lock");
    if (locked_) return false;
    locked_ = true;
    owner_ = caller;
    return true;
  }

  // Releases the mutex or transfers it. Returns the new owner, if any.
  std::optional<TaskId> unlock(TaskId caller) {
    std::lock_guard g(guard_);
    COOPSCHED_REQUIRE(locked_ && owner_ == caller,
                      "unlock by non-owner task " + std::to_string(caller.value()));
    if (waiters_.empty()) {
      locked_ = false;
      owner_.reset();
      return std::nullopt;
    }
    owner_ = waiters_.front();
    waiters_.pop_front();
    return owner_;
  }

  // Takes the mutex on behalf of `t` if free, else queues `t`. Used when a
  // condition variable moves a signalled waiter onto the mutex.
  LockOutcome acquire_or_enqueue(TaskId t) {
    std::lock_guard g(guard_);
    return acquire_or_enqueue_locked(t);
  }

  bool locked() const {
    std::lock_guard g(guard_);
    return locked_;
  }
  std::optional<TaskId> owner() const {
    std::lock_guard g(guard_);
    return owner_;
  }
  std::vector<TaskId> waiters() const {
    std::lock_guard g(guard_);
    return {waiters_.begin(), waiters_.end()};
  }
  std::size_t n_waiters() const {
    std::lock_guard g(guard_);
    return waiters_.size();
  }

 private:
  LockOutcome acquire_or_enqueue_locked(TaskId t) {
    if (!locked_) {
      locked_ = true;
      owner_ = t;
      return LockOutcome::Acquired;
    }
    COOPSCHED_REQUIRE(std::find(waiters_.begin(), waiters_.end(), t) == waiters_.end(),
                      "task already waiting on this mutex");
    waiters_.push_back(t);
    return LockOutcome::Enqueued;
  }

  mutable Guard guard_;
  bool locked_ = false;
  std::optional<TaskId> owner_;
  std::deque<TaskId> waiters_;
};

using CoopMutex = BasicCoopMutex<NullGuard>;

}  // namespace coopsched::sync
