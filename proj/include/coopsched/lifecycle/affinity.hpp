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
#include <coopsched/topology.hpp>

#include <unordered_map>
#include <vector>

namespace coopsched::lifecycle {

// Set of logical cores, as a user would pass to an affinity call.
class CpuMask {
 public:
  CpuMask() = default;
  explicit CpuMask(std::size_t n_cores) : bits_(n_cores, false) {}

  static CpuMask full(const Topology& topo) {
    CpuMask m(topo.n_cores());
    m.bits_.assign(topo.n_cores(), true);
    return m;
  }

  static CpuMask of(std::size_t n_cores, std::initializer_list<std::uint32_t> cores) {
    CpuMask m(n_cores);
    for (auto c : cores) m.set(CoreId(c));
    return m;
  }

  void set(CoreId c) {
    if (c.index() >= bits_.size()) bits_.resize(c.index() + 1, false);
    bits_[c.index()] = true;
  }
  bool test(CoreId c) const { return c.index() < bits_.size() && bits_[c.index()]; }
  std::size_t count() const {
    std::size_t n = 0;
    for (bool b : bits_) n += b ? 1 : 0;
    return n;
  }

  std::vector<CoreId> cores() const {
    std::vector<CoreId> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) out.emplace_back(static_cast<CoreId::rep>(i));
    return out;
  }

  bool operator==(const CpuMask& o) const { return cores() == o.cores(); }

 private:
  std::vector<bool> bits_;
};

// Affinity requests are recorded and echoed back verbatim. They never steer
// placement; the dispatcher decides where tasks run.
class AffinityHints {
 public:
  explicit AffinityHints(Topology topo = Topology{}) : topo_(std::move(topo)) {}

  void set(TaskId t, CpuMask mask) { hints_[t] = std::move(mask); }

  CpuMask get(TaskId t) const {
    auto it = hints_.find(t);
    if (it == hints_.end()) return CpuMask::full(topo_);
    return it->second;
  }

  void forget(TaskId t) { hints_.erase(t); }

 private:
  Topology topo_;
  std::unordered_map<TaskId, CpuMask> hints_;
};

}  // namespace coopsched::lifecycle
