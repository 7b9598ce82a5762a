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

// Bulk-synchronous ensembles. Each ensemble has `ranks` ranks of
// `threads_per_rank` threads; every thread of rank r computes imbalance[r]
// per phase, then all threads of the ensemble meet at a barrier. Ensembles
// either share the machine as separate domains or run one after the other.
struct EnsembleSpec {
  std::uint32_t n_ensembles = 2;
  std::uint32_t ranks = 2;
  std::uint32_t threads_per_rank = 2;
  std::vector<Nanos> imbalance{Nanos(9'000'000), Nanos(1'000'000)};
  std::uint32_t phases = 20;
  BarrierKind barrier = BarrierKind::Blocking;
  std::uint32_t yield_every = 100;
  bool concurrent = true;

  void validate() const {
    if (n_ensembles == 0 || ranks == 0 || threads_per_rank == 0 || phases == 0)
      throw Error("ensemble: counts must be > 0");
    if (imbalance.size() != ranks)
      throw Error("ensemble: imbalance has " + std::to_string(imbalance.size()) +
                  " entries for " + std::to_string(ranks) + " ranks");
    for (auto d : imbalance)
      if (d < Nanos::zero()) throw Error("ensemble: imbalance durations must be >= 0");
    if (yield_every == 0) throw Error("ensemble: yield_every must be > 0");
  }

  std::uint32_t threads() const { return ranks * threads_per_rank; }
};

inline sim::Workload gen_ensemble(const EnsembleSpec& s) {
  using sim::Segment;
  s.validate();
  sim::Workload w;
  w.name = s.concurrent ? "ensemble_concurrent" : "ensemble_sequential";

  std::vector<std::uint32_t> previous;
  for (std::uint32_t e = 0; e < s.n_ensembles; ++e) {
    std::uint32_t domain = s.concurrent ? w.add_domain("ensemble" + std::to_string(e))
                                        : (e == 0 ? w.add_domain("ensembles") : 0);
    auto bar = static_cast<std::uint32_t>(w.objects.size());
    w.objects.push_back(barrier_decl(s.barrier, s.threads(), s.yield_every));

    std::vector<std::uint32_t> programs;
    for (std::uint32_t r = 0; r < s.ranks; ++r) {
      sim::Program p;
      p.name = "e" + std::to_string(e) + "_rank" + std::to_string(r);
      for (std::uint32_t ph = 0; ph < s.phases; ++ph) {
        p.segments.push_back(Segment::compute(s.imbalance[r]));
        p.segments.push_back(barrier_wait(s.barrier, sim::global(bar)));
      }
      p.segments.push_back(Segment::finish());
      programs.push_back(w.add_program(p));
    }

    std::vector<std::uint32_t> mine;
    for (std::uint32_t r = 0; r < s.ranks; ++r)
      for (std::uint32_t t = 0; t < s.threads_per_rank; ++t) {
        sim::TaskDecl d;
        d.program = programs[r];
        d.domain = domain;
        if (!s.concurrent) d.after = previous;
        mine.push_back(w.add_task(d));
      }
    previous = std::move(mine);
  }
  return w;
}

inline EnsembleSpec ensemble_spec_from_json(const Json& j, const std::string& where = "ensemble") {
  sim::detail::only_keys(j, where, {"n_ensembles", "ranks", "threads_per_rank", "imbalance_ns",
                                    "phases", "barrier", "yield_every", "concurrent"});
  EnsembleSpec s;
  detail::read(j, where, "n_ensembles", s.n_ensembles);
  detail::read(j, where, "ranks", s.ranks);
  detail::read(j, where, "threads_per_rank", s.threads_per_rank);
  if (j.contains("imbalance_ns")) {
    s.imbalance.clear();
    for (auto v : sim::detail::get_as<std::vector<std::int64_t>>(j["imbalance_ns"], where + ".imbalance_ns"))
      s.imbalance.push_back(Nanos(v));
  }
  detail::read(j, where, "phases", s.phases);
  detail::read_kind(j, where, "barrier", s.barrier);
  detail::read(j, where, "yield_every", s.yield_every);
  detail::read(j, where, "concurrent", s.concurrent);
  s.validate();
  return s;
}

}  // namespace coopsched::workloads
