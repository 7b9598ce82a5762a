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

#include <atomic>
#include <optional>

namespace coopsched::sync {

// Sense-reversing spin barrier. Waiters consume CPU until the generation they
// arrived in completes. With yield_every set, a spinner yields after that many
// iterations, which gives a cooperative scheduler a scheduling point; without
// it a spinner never reaches one.
class BusyWaitBarrier {
 public:
  struct Ticket {
    std::uint64_t generation = 0;
    bool last = false;
  };

  explicit BusyWaitBarrier(std::size_t parties, std::optional<std::uint32_t> yield_every = {})
      : parties_(parties), yield_every_(yield_every) {
    if (parties == 0) throw Error("busy barrier needs at least one party");
    if (yield_every && *yield_every == 0) throw Error("yield_every must be > 0");
  }

  Ticket arrive() {
    std::uint64_t gen = generation_.load(std::memory_order_acquire);
    std::size_t n = arrived_.fetch_add(1, std::memory_order_acq_rel) + 1;
    if (n == parties_) {
      arrived_.store(0, std::memory_order_relaxed);
      generation_.store(gen + 1, std::memory_order_release);
      return {gen, true};
    }
    return {gen, false};
  }

  bool released(const Ticket& t) const {
    return generation_.load(std::memory_order_acquire) > t.generation;
  }

  std::size_t parties() const { return parties_; }
  std::optional<std::uint32_t> yield_every() const { return yield_every_; }
  std::uint64_t generation() const { return generation_.load(std::memory_order_acquire); }
  std::size_t arrived() const { return arrived_.load(std::memory_order_acquire); }

 private:
  std::size_t parties_;
  std::optional<std::uint32_t> yield_every_;
  std::atomic<std::size_t> arrived_{0};
  std::atomic<std::uint64_t> generation_{0};
};

}  // namespace coopsched::sync
