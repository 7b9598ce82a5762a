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

namespace coopsched::workloads {

// Thread churn: outer tasks that open a fresh team of workers for every
// iteration and join it before going on, as a library that creates and
// destroys its threads on every call does.
struct ChurnSpec {
  std::uint32_t outer = 1;
  std::uint32_t iterations = 100;
  std::uint32_t team = 8;
  Nanos inner_cost{50'000};
  // Outer tasks run on pre-existing contexts (the application's own threads).
  bool attached_outer = true;

  void validate() const {
    if (outer == 0 || iterations == 0 || team == 0) throw Error("churn: counts must be > 0");
    if (inner_cost < Nanos::zero()) throw Error("churn: inner_cost must be >= 0");
  }

  // Most inner workers alive at once.
  std::uint64_t peak_concurrency() const { return static_cast<std::uint64_t>(outer) * team; }
};

inline sim::Workload gen_churn(const ChurnSpec& s) {
  using sim::Segment;
  s.validate();
  sim::Workload w;
  w.name = "churn";
  w.add_domain("app");

  sim::Program inner;
  inner.name = "team_member";
  inner.segments = {Segment::compute(s.inner_cost), Segment::finish()};
  auto inner_id = w.add_program(inner);

  sim::Program outer;
  outer.name = "outer";
  for (std::uint32_t i = 0; i < s.iterations; ++i) {
    for (std::uint32_t t = 0; t < s.team; ++t) outer.segments.push_back(Segment::spawn(inner_id));
    outer.segments.push_back(Segment::join_all());
  }
  outer.segments.push_back(Segment::finish());
  auto outer_id = w.add_program(outer);

  for (std::uint32_t o = 0; o < s.outer; ++o) {
    sim::TaskDecl d;
    d.program = outer_id;
    d.attached = s.attached_outer;
    w.add_task(d);
  }
  return w;
}

inline ChurnSpec churn_spec_from_json(const Json& j, const std::string& where = "churn") {
  sim::detail::only_keys(j, where, {"outer", "iterations", "team", "inner_cost_ns", "attached_outer"});
  ChurnSpec s;
  detail::read(j, where, "outer", s.outer);
  detail::read(j, where, "iterations", s.iterations);
  detail::read(j, where, "team", s.team);
  detail::read_ns(j, where, "inner_cost_ns", s.inner_cost);
  detail::read(j, where, "attached_outer", s.attached_outer);
  s.validate();
  return s;
}

}  // namespace coopsched::workloads
