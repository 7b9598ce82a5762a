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

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace coopsched {

enum class TraceEvent : std::uint8_t {
  Create,
  Ready,
  Dispatch,
  Block,
  Yield,
  Preempt,
  Finish,
  Rotate,
  Wait,
  LockAcquire,
  LockTransfer,
  LockRelease,
  CvWait,
  CvSignal,
  BarrierRelease,
  SpinSegment,
  Compute,
  Waitfor,
  StallReport,
};

inline constexpr std::array<std::string_view, 19> kTraceEventNames = {
    "create",       "ready",        "dispatch",     "block",           "yield",
    "preempt",      "finish",       "rotate",       "wait",            "lock_acquire",
    "lock_transfer", "lock_release", "cv_wait",     "cv_signal",       "barrier_release",
    "spin_segment", "compute",      "waitfor",      "stall_report"};

inline std::string_view to_string(TraceEvent e) {
  return kTraceEventNames[static_cast<std::size_t>(e)];
}

inline std::optional<TraceEvent> parse_trace_event(std::string_view s) {
  for (std::size_t i = 0; i < kTraceEventNames.size(); ++i)
    if (kTraceEventNames[i] == s) return static_cast<TraceEvent>(i);
  return std::nullopt;
}

// Scheduling points: the only events at which a cooperative core changes hands.
inline bool is_scheduling_point(TraceEvent e) {
  return e == TraceEvent::Block || e == TraceEvent::Yield || e == TraceEvent::Finish ||
         e == TraceEvent::Dispatch || e == TraceEvent::Preempt;
}

// Event payload as produced by the scheduler and the simulator. Time and the
// record sequence number are stamped by the sink.
struct TraceEntry {
  TraceEvent event{};
  std::optional<TaskId> task;
  std::optional<DomainId> domain;
  std::optional<CoreId> core;
  std::optional<WorkerId> worker;
  std::string arg;
};

// One line of a trace file. Field order is fixed:
//   time event task domain core worker seq arg
// Absent fields are written as '-'.
struct TraceRecord {
  std::int64_t time = 0;
  TraceEvent event{};
  std::optional<TaskId> task;
  std::optional<DomainId> domain;
  std::optional<CoreId> core;
  std::optional<WorkerId> worker;
  std::uint64_t seq = 0;
  std::string arg;

  bool operator==(const TraceRecord&) const = default;
};

using TraceSink = std::function<void(TraceEntry&&)>;

struct TraceHeader {
  std::string policy;
  Topology topology;
};

struct Trace {
  TraceHeader header;
  std::vector<TraceRecord> records;
  // Tasks still parked on a wait queue when the run ended.
  std::uint64_t residual_waiters = 0;
};

namespace detail {

template <class T>
void write_opt(std::ostream& os, const std::optional<T>& v) {
  if (v) os << v->value();
  else os << '-';
}

template <class IdT>
std::optional<IdT> parse_opt_id(std::string_view tok, bool& ok) {
  if (tok == "-") return std::nullopt;
  typename IdT::rep v{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  ok = ec == std::errc() && p == tok.data() + tok.size();
  return IdT(v);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

inline void write_record(std::ostream& os, const TraceRecord& r) {
  os << r.time << ' ' << to_string(r.event) << ' ';
  detail::write_opt(os, r.task);
  os << ' ';
  detail::write_opt(os, r.domain);
  os << ' ';
  detail::write_opt(os, r.core);
  os << ' ';
  detail::write_opt(os, r.worker);
  os << ' ' << r.seq << ' ' << (r.arg.empty() ? std::string("-") : r.arg) << '\n';
}

inline void write_trace(std::ostream& os, const Trace& t) {
  os << "# coopsched-trace 1\n";
  os << "# policy " << t.header.policy << '\n';
  os << "# topology";
  for (NumaId n : t.header.topology.numa_map()) os << ' ' << n.value();
  os << '\n';
  for (const auto& r : t.records) write_record(os, r);
  os << "# end " << t.records.size() << " residual " << t.residual_waiters << '\n';
}

inline std::string to_text(const Trace& t) {
  std::ostringstream os;
  write_trace(os, t);
  return os.str();
}

// Parses a trace document. Throws Error("line N: ...") on malformed input,
// including a missing end marker (truncated file).
inline Trace parse_trace(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t lineno = 0;
  bool saw_magic = false, saw_end = false, saw_topology = false;
  auto fail = [&](const std::string& why) -> void {
    throw Error("line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (saw_end) fail("content after end marker");
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "#") {
      if (toks.size() >= 3 && toks[1] == "coopsched-trace") {
        if (toks[2] != "1") fail("unsupported trace version");
        saw_magic = true;
      } else if (toks.size() >= 2 && toks[1] == "policy") {
        t.header.policy = toks.size() >= 3 ? std::string(toks[2]) : std::string();
      } else if (toks.size() >= 2 && toks[1] == "topology") {
        std::vector<NumaId> numa;
        for (std::size_t i = 2; i < toks.size(); ++i) {
          bool ok = true;
          auto n = detail::parse_opt_id<NumaId>(toks[i], ok);
          if (!ok || !n) fail("bad topology entry");
          numa.push_back(*n);
        }
        if (numa.empty()) fail("empty topology");
        t.header.topology = Topology(std::move(numa));
        saw_topology = true;
      } else if (toks.size() >= 5 && toks[1] == "end") {
        std::uint64_t n = 0, res = 0;
        auto r1 = std::from_chars(toks[2].data(), toks[2].data() + toks[2].size(), n);
        auto r2 = std::from_chars(toks[4].data(), toks[4].data() + toks[4].size(), res);
        if (r1.ec != std::errc() || r2.ec != std::errc() || toks[3] != "residual")
          fail("bad end marker");
        if (n != t.records.size())
          fail("end marker announces " + std::to_string(n) + " records, found " +
               std::to_string(t.records.size()));
        t.residual_waiters = res;
        saw_end = true;
      }
      continue;
    }
    if (!saw_magic) fail("missing trace header");
    if (toks.size() != 8) fail("expected 8 fields, got " + std::to_string(toks.size()));
    TraceRecord r;
    auto [p, ec] = std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), r.time);
    if (ec != std::errc() || p != toks[0].data() + toks[0].size()) fail("bad time field");
    auto ev = parse_trace_event(toks[1]);
    if (!ev) fail("unknown event '" + std::string(toks[1]) + "'");
    r.event = *ev;
    bool ok = true;
    r.task = detail::parse_opt_id<TaskId>(toks[2], ok);
    if (!ok) fail("bad task field");
    r.domain = detail::parse_opt_id<DomainId>(toks[3], ok);
    if (!ok) fail("bad domain field");
    r.core = detail::parse_opt_id<CoreId>(toks[4], ok);
    if (!ok) fail("bad core field");
    r.worker = detail::parse_opt_id<WorkerId>(toks[5], ok);
    if (!ok) fail("bad worker field");
    auto [p2, ec2] = std::from_chars(toks[6].data(), toks[6].data() + toks[6].size(), r.seq);
    if (ec2 != std::errc() || p2 != toks[6].data() + toks[6].size()) fail("bad seq field");
    if (toks[7] != "-") r.arg = std::string(toks[7]);
    t.records.push_back(std::move(r));
  }
  ++lineno;
  if (!saw_magic) fail("missing trace header");
  if (!saw_topology) fail("missing topology header");
  if (!saw_end) fail("truncated trace: no end marker");
  return t;
}

inline Trace parse_trace_text(const std::string& text) {
  std::istringstream is(text);
  return parse_trace(is);
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file " + path);
  return parse_trace(in);
}

// Helpers for the compact object tokens carried in the arg column.
inline std::string obj_token(char kind, std::size_t index) {
  return std::string(1, kind) + std::to_string(index);
}

}  // namespace coopsched
