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

#include <deque>
#include <mutex>
#include <optional>

namespace coopsched::sync {

// Counting semaphore with FIFO hand-off: a post with waiters passes the
// permit straight to the head waiter instead of incrementing the count.
template <class Guard = NullGuard>
class BasicCoopSemaphore {
 public:
  explicit BasicCoopSemaphore(std::uint64_t permits = 0) : permits_(permits) {}

  // True if a permit was taken; false if the caller was queued and must block.
  bool wait(TaskId caller) {
    std::lock_guard g(guard_);
    if (permits_ > 0) {
      --permits_;
      return true;
    }
    waiters_.push_back(caller);
    return false;
  }

  // Returns the waiter that received the permit, to be submitted.
  std::optional<TaskId> post() {
    std::lock_guard g(guard_);
    if (waiters_.empty()) {
      ++permits_;
      return std::nullopt;
    }
    TaskId t = waiters_.front();
    waiters_.pop_front();
    return t;
  }

  std::uint64_t permits() const {
    std::lock_guard g(guard_);
    return permits_;
  }
  std::size_t n_waiters() const {
    std::lock_guard g(guard_);
    return waiters_.size();
  }

 private:
  mutable Guard guard_;
  std::uint64_t permits_;
  std::deque<TaskId> waiters_;
};

using CoopSemaphore = BasicCoopSemaphore<NullGuard>;

}  // namespace coopsched::sync
