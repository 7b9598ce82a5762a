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

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace coopsched {

using Nanos = std::chrono::nanoseconds;

// Strongly typed dense identifier. Ids index into the owning tables, so they
// are handed out sequentially starting at zero.
template <class Tag, class Rep = std::uint32_t>
class Id {
 public:
  using rep = Rep;

  constexpr Id() = default;
  constexpr explicit Id(Rep v) : value_(v) {}

  constexpr Rep value() const { return value_; }
  constexpr std::size_t index() const { return static_cast<std::size_t>(value_); }

  constexpr auto operator<=>(const Id&) const = default;

  friend std::ostream& operator<<(std::ostream& os, Id id) {
    return os << id.value_;
  }

 private:
  Rep value_{0};
};

using TaskId = Id<struct TaskTag>;
using WorkerId = Id<struct WorkerTag>;
using DomainId = Id<struct DomainTag>;
using CoreId = Id<struct CoreTag>;
using NumaId = Id<struct NumaTag>;

// A caller broke an operation's precondition (double submit, unlock by a
// non-owner, ...). These are programming errors, not runtime conditions.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Recoverable runtime failure (unknown domain, terminated domain, bad input).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define COOPSCHED_REQUIRE(cond, msg)                                  \
  do {                                                                \
    if (!(cond)) throw ::coopsched::ContractViolation(std::string(msg)); \
  } while (0)

enum class TaskState : std::uint8_t { Created, Ready, Running, Blocked, Finished };

inline const char* to_string(TaskState s) {
  switch (s) {
    case TaskState::Created: return "created";
    case TaskState::Ready: return "ready";
    case TaskState::Running: return "running";
    case TaskState::Blocked: return "blocked";
    case TaskState::Finished: return "finished";
  }
  return "?";
}

}  // namespace coopsched

template <class Tag, class Rep>
struct std::hash<coopsched::Id<Tag, Rep>> {
  std::size_t operator()(coopsched::Id<Tag, Rep> id) const noexcept {
    return std::hash<Rep>{}(id.value());
  }
};
