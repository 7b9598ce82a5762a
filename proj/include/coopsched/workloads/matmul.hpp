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

#include <coopsched/workloads/common.hpp>

#include <cmath>
#include <random>

namespace coopsched::workloads {

// Blocked matrix multiply with a parallel region inside every block task.
// The C = A*B product is cut into NB x NB blocks; block task (i, j, k)
// accumulates A[i][k]*B[k][j] into C[i][j], so the k tasks of one C block form
// a dependency chain while different C blocks run concurrently.
struct NestedMatmulSpec {
  std::uint64_t matrix_size = 64;
  std::uint64_t task_size = 32;
  std::uint32_t inner_threads = 4;
  BarrierKind barrier = BarrierKind::Blocking;
  std::uint32_t yield_every = 100;
  // Block cost model: ns_per_unit * task_size^3.
  double ns_per_unit = 250.0;
  // Compute/barrier rounds inside one parallel region; the block cost is
  // split evenly over rounds and threads.
  std::uint32_t inner_phases = 1;
  // Relative spread of a thread's share of one phase: each share is scaled by
  // a factor drawn uniformly from [1 - jitter, 1 + jitter].
  double jitter = 0.0;

  std::uint64_t blocks() const { return matrix_size / task_size; }

  void validate() const {
    if (task_size == 0 || matrix_size == 0) throw Error("matmul: sizes must be > 0");
    if (matrix_size % task_size != 0)
      throw Error("matmul: matrix_size " + std::to_string(matrix_size) +
                  " is not divisible by task_size " + std::to_string(task_size));
    if (inner_threads == 0) throw Error("matmul: inner_threads must be > 0");
    if (inner_phases == 0) throw Error("matmul: inner_phases must be > 0");
    if (yield_every == 0) throw Error("matmul: yield_every must be > 0");
    if (!(ns_per_unit > 0)) throw Error("matmul: ns_per_unit must be > 0");
    if (!(jitter >= 0 && jitter < 1)) throw Error("matmul: jitter must be in [0, 1)");
  }

  Nanos block_cost() const {
    double ts = static_cast<double>(task_size);
    return Nanos(static_cast<std::int64_t>(std::llround(ns_per_unit * ts * ts * ts)));
  }

  // Threads busy at once when every C block chain has a task running.
  std::uint64_t max_busy_threads() const { return blocks() * blocks() * inner_threads; }

  double oversubscription(std::size_t cores) const {
    return static_cast<double>(max_busy_threads()) / static_cast<double>(cores);
  }
};

inline sim::Workload gen_nested_matmul(const NestedMatmulSpec& s, std::uint64_t seed = 0) {
  using sim::Segment;
  s.validate();
  sim::Workload w;
  w.name = "nested_matmul";
  w.add_domain("matmul");

  const auto nb = s.blocks();
  const double share =
      static_cast<double>(s.block_cost().count()) / static_cast<double>(s.inner_threads * s.inner_phases);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> spread(1.0 - s.jitter, 1.0 + s.jitter);

  // One program per team slot, so that threads differ within a team.
  std::vector<std::uint32_t> inner_ids;
  for (std::uint32_t t = 0; t < s.inner_threads; ++t) {
    sim::Program inner;
    inner.name = "inner" + std::to_string(t);
    for (std::uint32_t p = 0; p < s.inner_phases; ++p) {
      double f = s.jitter > 0 ? spread(rng) : 1.0;
      inner.segments.push_back(Segment::compute(Nanos(std::llround(share * f))));
      inner.segments.push_back(barrier_wait(s.barrier, sim::local(0)));
    }
    inner.segments.push_back(Segment::finish());
    inner_ids.push_back(w.add_program(inner));
  }

  sim::Program block;
  block.name = "block";
  block.locals.push_back(barrier_decl(s.barrier, s.inner_threads, s.yield_every));
  for (auto id : inner_ids) block.segments.push_back(Segment::spawn(id));
  block.segments.push_back(Segment::join_all());
  block.segments.push_back(Segment::finish());
  auto block_id = w.add_program(block);

  sim::Program done;
  done.name = "taskwait";
  done.segments.push_back(Segment::finish());
  auto done_id = w.add_program(done);

  std::vector<std::uint32_t> chain_ends;
  for (std::uint64_t i = 0; i < nb; ++i)
    for (std::uint64_t j = 0; j < nb; ++j) {
      std::optional<std::uint32_t> prev;
      for (std::uint64_t k = 0; k < nb; ++k) {
        sim::TaskDecl t;
        t.program = block_id;
        if (prev) t.after.push_back(*prev);
        prev = w.add_task(t);
      }
      chain_ends.push_back(*prev);
    }
  sim::TaskDecl fin;
  fin.program = done_id;
  fin.after = chain_ends;
  w.add_task(fin);
  return w;
}

inline NestedMatmulSpec matmul_spec_from_json(const Json& j, const std::string& where = "matmul") {
  sim::detail::only_keys(j, where, {"matrix_size", "task_size", "inner_threads", "barrier",
                                    "yield_every", "ns_per_unit", "inner_phases", "jitter"});
  NestedMatmulSpec s;
  detail::read(j, where, "matrix_size", s.matrix_size);
  detail::read(j, where, "task_size", s.task_size);
  detail::read(j, where, "inner_threads", s.inner_threads);
  detail::read_kind(j, where, "barrier", s.barrier);
  detail::read(j, where, "yield_every", s.yield_every);
  detail::read(j, where, "ns_per_unit", s.ns_per_unit);
  detail::read(j, where, "inner_phases", s.inner_phases);
  detail::read(j, where, "jitter", s.jitter);
  s.validate();
  return s;
}

// Throughput metric used for the kernels: size * loops / seconds, in millions.
inline double metric_mops(double size, double loops, double seconds) {
  if (!(seconds > 0)) throw Error("metric_mops: seconds must be > 0");
  return size * loops / seconds * 1e-6;
}

}  // namespace coopsched::workloads
