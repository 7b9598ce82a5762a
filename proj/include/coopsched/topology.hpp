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
#include <vector>

namespace coopsched {

// Logical cores and the NUMA node each one belongs to.
class Topology {
 public:
  Topology() : Topology(1) {}

  // n_cores cores spread over n_numa nodes in contiguous blocks.
  explicit Topology(std::size_t n_cores, std::size_t n_numa = 1) {
    if (n_cores == 0) throw Error("topology needs at least one core");
    if (n_numa == 0 || n_numa > n_cores)
      throw Error("numa node count must be in [1, cores]");
    numa_of_.resize(n_cores);
    const std::size_t per = (n_cores + n_numa - 1) / n_numa;
    for (std::size_t c = 0; c < n_cores; ++c)
      numa_of_[c] = NumaId(static_cast<NumaId::rep>(c / per));
  }

  explicit Topology(std::vector<NumaId> numa_of) : numa_of_(std::move(numa_of)) {
    if (numa_of_.empty()) throw Error("topology needs at least one core");
  }

  std::size_t n_cores() const { return numa_of_.size(); }
  NumaId numa_of(CoreId c) const { return numa_of_.at(c.index()); }
  bool same_numa(CoreId a, CoreId b) const { return numa_of(a) == numa_of(b); }
  bool contains(CoreId c) const { return c.index() < numa_of_.size(); }

  std::size_t n_numa() const {
    std::vector<NumaId> ids = numa_of_;
    std::sort(ids.begin(), ids.end());
    return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
  }

  const std::vector<NumaId>& numa_map() const { return numa_of_; }

  bool operator==(const Topology&) const = default;

 private:
  std::vector<NumaId> numa_of_;
};

}  // namespace coopsched
