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

#include <algorithm>
#include <optional>

namespace coopsched::sync {

enum class WaitOutcome { Event, Timeout };

// Bookkeeping for a timed wait built from short polls: probe, then block for
// min(poll, remaining), until the event shows up or the timeout is used up.
// Each slice is charged at its nominal length, so a wait that never sees the
// event blocks exactly ceil(timeout / poll) times.
class TimedWaitLoop {
 public:
  TimedWaitLoop(Nanos user_timeout, Nanos poll) : remaining_(user_timeout), poll_(poll) {
    if (user_timeout < Nanos::zero()) throw Error("timed wait: negative timeout");
    if (poll <= Nanos::zero()) throw Error("timed wait: poll must be > 0");
  }

  std::optional<Nanos> next_slice() const {
    if (remaining_ <= Nanos::zero()) return std::nullopt;
    return std::min(poll_, remaining_);
  }

  void charge(Nanos slice) {
    remaining_ -= slice;
    ++segments_;
  }

  Nanos remaining() const { return remaining_; }
  std::size_t segments() const { return segments_; }

 private:
  Nanos remaining_;
  Nanos poll_;
  std::size_t segments_ = 0;
};

// Runs the loop with caller-supplied probe and block operations.
template <class Probe, class BlockFor>
WaitOutcome timed_wait(Nanos user_timeout, Nanos poll, Probe&& probe, BlockFor&& block_for) {
  TimedWaitLoop loop(user_timeout, poll);
  for (;;) {
    if (probe()) return WaitOutcome::Event;
    auto slice = loop.next_slice();
    if (!slice) return WaitOutcome::Timeout;
    block_for(*slice);
    loop.charge(*slice);
  }
}

}  // namespace coopsched::sync
