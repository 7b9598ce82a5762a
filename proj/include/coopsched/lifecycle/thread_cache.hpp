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

#include <optional>
#include <vector>

namespace coopsched::lifecycle {

struct CacheStats {
  std::uint64_t created_total = 0;
  std::uint64_t reused_total = 0;

  bool operator==(const CacheStats&) const = default;
};

// One push or pop on a domain's cache, kept so reuse order can be audited.
struct CacheEvent {
  bool push = true;
  WorkerId worker;
};

// Per-domain stack of parked workers that host no task. Creation of a new
// execution context is only needed when the stack of the task's domain is
// empty; reuse always takes the most recently cached worker.
class ThreadCache {
 public:
  void add_domain(DomainId d) {
    if (d.index() >= per_domain_.size()) per_domain_.resize(d.index() + 1);
  }

  void push(DomainId d, WorkerId w) {
    auto& e = entry(d);
    e.stack.push_back(w);
    e.log.push_back({true, w});
  }

  std::optional<WorkerId> pop(DomainId d) {
    auto& e = entry(d);
    if (e.stack.empty()) return std::nullopt;
    WorkerId w = e.stack.back();
    e.stack.pop_back();
    e.log.push_back({false, w});
    ++e.stats.reused_total;
    return w;
  }

  void note_created(DomainId d) { ++entry(d).stats.created_total; }

  // Empties the domain's stack, returning the workers to destroy.
  std::vector<WorkerId> drain(DomainId d) {
    auto& e = entry(d);
    std::vector<WorkerId> out(e.stack.rbegin(), e.stack.rend());
    e.stack.clear();
    return out;
  }

  std::size_t size(DomainId d) const { return at(d).stack.size(); }
  const std::vector<WorkerId>& contents(DomainId d) const { return at(d).stack; }
  const CacheStats& stats(DomainId d) const { return at(d).stats; }
  const std::vector<CacheEvent>& log(DomainId d) const { return at(d).log; }
  std::size_t n_domains() const { return per_domain_.size(); }

  CacheStats totals() const {
    CacheStats s;
    for (const auto& e : per_domain_) {
      s.created_total += e.stats.created_total;
      s.reused_total += e.stats.reused_total;
    }
    return s;
  }

 private:
  struct Entry {
    std::vector<WorkerId> stack;
    CacheStats stats;
    std::vector<CacheEvent> log;
  };

  Entry& entry(DomainId d) {
    if (d.index() >= per_domain_.size()) throw Error("thread cache: unknown domain");
    return per_domain_[d.index()];
  }
  const Entry& at(DomainId d) const {
    if (d.index() >= per_domain_.size()) throw Error("thread cache: unknown domain");
    return per_domain_[d.index()];
  }

  std::vector<Entry> per_domain_;
};

// True when every pop in the log returned the most recently pushed worker
// still in the cache.
inline bool reuse_is_lifo(const std::vector<CacheEvent>& log) {
  std::vector<WorkerId> stack;
  for (const auto& ev : log) {
    if (ev.push) {
      stack.push_back(ev.worker);
    } else {
      if (stack.empty() || stack.back() != ev.worker) return false;
      stack.pop_back();
    }
  }
  return true;
}

}  // namespace coopsched::lifecycle
