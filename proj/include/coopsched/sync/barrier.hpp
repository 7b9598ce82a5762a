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
#include <mutex>
#include <vector>

namespace coopsched::sync {

struct BarrierArrival {
  // Exactly one arrival per generation gets the serial flag: the last one.
  bool serial = false;
  std::uint64_t generation = 0;
  // Waiters of the completed generation, in arrival order; the caller submits
  // them. Empty unless serial.
  std::vector<TaskId> release;
};

// Blocking barrier. The first parties-1 arrivals of a generation block; the
// last arrival releases them and does not block itself.
template <class Guard = NullGuard>
class BasicCoopBarrier {
 public:
  explicit BasicCoopBarrier(std::size_t parties) : parties_(parties) {
    if (parties == 0) throw Error("barrier needs at least one party");
  }

  BarrierArrival arrive(TaskId caller) {
    std::lock_guard g(guard_);
    BarrierArrival a;
    a.generation = generation_;
    if (waiters_.size() + 1 == parties_) {
      a.serial = true;
      a.release = std::move(waiters_);
      waiters_.clear();
      ++generation_;
      return a;
    }
    COOPSCHED_REQUIRE(std::find(waiters_.begin(), waiters_.end(), caller) == waiters_.end(),
                      "task arrived twice at a barrier in one generation");
    waiters_.push_back(caller);
    return a;
  }

  std::size_t parties() const { return parties_; }
  std::size_t arrived() const {
    std::lock_guard g(guard_);
    return waiters_.size();
  }
  std::uint64_t generation() const {
    std::lock_guard g(guard_);
    return generation_;
  }

 private:
  mutable Guard guard_;
  std::size_t parties_;
  std::uint64_t generation_ = 0;
  std::vector<TaskId> waiters_;
};

using CoopBarrier = BasicCoopBarrier<NullGuard>;

}  // namespace coopsched::sync
