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
#include <coopsched/sim/workload.hpp>

#include <string>

namespace coopsched::workloads {

using sim::Json;

// How the members of an inner team wait for each other.
enum class BarrierKind : std::uint8_t { Blocking, Busy, BusyYield };

inline const char* to_string(BarrierKind k) {
  switch (k) {
    case BarrierKind::Blocking: return "blocking";
    case BarrierKind::Busy: return "busy";
    case BarrierKind::BusyYield: return "busy_yield";
  }
  return "?";
}

inline BarrierKind parse_barrier_kind(const std::string& s) {
  if (s == "blocking") return BarrierKind::Blocking;
  if (s == "busy") return BarrierKind::Busy;
  if (s == "busy_yield") return BarrierKind::BusyYield;
  throw Error("unknown barrier kind '" + s + "' (expected blocking, busy or busy_yield)");
}

inline sim::ObjectDecl barrier_decl(BarrierKind k, std::uint64_t parties, std::uint32_t yield_every) {
  sim::ObjectDecl d;
  d.count = parties;
  if (k == BarrierKind::Blocking) {
    d.kind = sim::ObjectKind::Barrier;
  } else {
    d.kind = sim::ObjectKind::BusyBarrier;
    if (k == BarrierKind::BusyYield) d.yield_every = yield_every;
  }
  return d;
}

inline sim::Segment barrier_wait(BarrierKind k, sim::ObjRef r) {
  return k == BarrierKind::Blocking ? sim::Segment::barrier(r) : sim::Segment::busy_spin(r);
}

namespace detail {

template <class T>
void read(const Json& j, const std::string& where, const char* key, T& out) {
  if (j.contains(key)) out = sim::detail::get_as<T>(j[key], where + "." + key);
}

inline void read_ns(const Json& j, const std::string& where, const char* key, Nanos& out) {
  if (j.contains(key)) out = Nanos(sim::detail::get_as<std::int64_t>(j[key], where + "." + key));
}

inline void read_kind(const Json& j, const std::string& where, const char* key, BarrierKind& out) {
  if (!j.contains(key)) return;
  try {
    out = parse_barrier_kind(sim::detail::get_as<std::string>(j[key], where + "." + key));
  } catch (const Error& e) {
    throw Error(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

}  // namespace coopsched::workloads
