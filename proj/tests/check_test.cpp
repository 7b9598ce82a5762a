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

#include <coopsched/check.hpp>
#include <coopsched/sim/engine.hpp>

#include <gtest/gtest.h>

using namespace coopsched;
using namespace coopsched::check;
using namespace coopsched::sim;
using namespace std::chrono_literals;

namespace {

const char* kValid =
    "# coopsched-trace 1\n"
    "# policy coop\n"
    "# topology 0 0\n"
    "0 create 0 0 - - 0 -\n"
    "0 ready 0 0 0 - 1 0\n"
    "0 create 1 0 - - 2 -\n"
    "0 ready 1 0 0 - 3 1\n"
    "0 dispatch 0 0 0 0 4 q0\n"
    "0 dispatch 1 0 1 1 5 q0\n"
    "5 finish 0 0 0 0 6 -\n"
    "6 finish 1 0 1 1 7 -\n"
    "# end 8 residual 0\n";

std::vector<std::string> invariants(const std::vector<Violation>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs) out.push_back(v.invariant);
  return out;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

Workload contended() {
  Workload w;
  w.add_domain("a");
  w.add_domain("b");
  auto m = w.add_object(ObjectKind::Mutex);
  auto cv = w.add_object(ObjectKind::Condvar);
  auto b = w.add_object(ObjectKind::Barrier, 4);
  Program p;
  p.name = "p";
  p.segments = {Segment::compute(1ms), Segment::lock(m),      Segment::compute(2ms),
                Segment::cv_broadcast(cv), Segment::unlock(m), Segment::barrier(b),
                Segment::yield(),          Segment::compute(500us), Segment::finish()};
  w.add_program(p);
  for (std::uint32_t i = 0; i < 8; ++i) w.add_task({0, i % 2, Nanos(i * 250'000)});
  return w;
}

}  // namespace

TEST(Check, ValidTraceHasNoViolations) {
  auto t = parse_trace_text(kValid);
  EXPECT_TRUE(check_trace(t).empty()) << to_text(check_trace(t));
}

TEST(Check, TwoRunnersOnOneCoreReportedAtOffset) {
  auto bad = replace(kValid, "0 dispatch 1 0 1 1 5 q0", "0 dispatch 1 0 0 1 5 q0");
  auto vs = check_trace(parse_trace_text(bad));
  ASSERT_FALSE(vs.empty());
  EXPECT_EQ(vs[0].invariant, "single-runner");
  EXPECT_EQ(vs[0].offset, 5u);
}

TEST(Check, FifoViolation) {
  auto bad = replace(kValid, "0 dispatch 0 0 0 0 4 q0\n0 dispatch 1 0 1 1 5 q0",
                     "0 dispatch 1 0 0 1 4 q0\n0 dispatch 0 0 1 0 5 q0");
  auto bad2 = replace(bad, "5 finish 0 0 0 0 6 -\n6 finish 1 0 1 1 7 -",
                      "5 finish 1 0 0 1 6 -\n6 finish 0 0 1 0 7 -");
  auto v = invariants(check_trace(parse_trace_text(bad2)));
  EXPECT_NE(std::find(v.begin(), v.end(), "fifo"), v.end());
}

TEST(Check, ReleaseWithWaitersIsNotATransfer) {
  std::string t =
      "# coopsched-trace 1\n# policy fair\n# topology 0\n"
      "0 lock_acquire 0 0 0 - 0 m0\n"
      "0 wait 1 0 - - 1 m0\n"
      "1 lock_release 0 0 0 - 2 m0\n"
      "# end 3 residual 1\n";
  auto v = invariants(check_trace(parse_trace_text(t)));
  EXPECT_EQ(v, std::vector<std::string>{"transfer-not-release"});
}

TEST(Check, DoubleAcquireBreaksMutualExclusion) {
  std::string t =
      "# coopsched-trace 1\n# policy fair\n# topology 0\n"
      "0 lock_acquire 0 0 0 - 0 m0\n"
      "0 lock_acquire 1 0 0 - 1 m0\n"
      "# end 2 residual 0\n";
  auto v = invariants(check_trace(parse_trace_text(t)));
  EXPECT_EQ(v, std::vector<std::string>{"mutual-exclusion"});
}

TEST(Check, LostWakeupAccounting) {
  std::string t =
      "# coopsched-trace 1\n# policy fair\n# topology 0\n"
      "0 wait 1 0 - - 0 b0\n"
      "# end 1 residual 0\n";
  auto v = invariants(check_trace(parse_trace_text(t)));
  EXPECT_EQ(v, std::vector<std::string>{"no-lost-wakeup"});
}

TEST(Check, RotationMustPrecedeDispatch) {
  std::string t =
      "# coopsched-trace 1\n# policy coop\n# topology 0\n"
      "0 rotate - 1 - - 0 d0\n"
      "# end 1 residual 0\n";
  auto v = invariants(check_trace(parse_trace_text(t)));
  EXPECT_EQ(v, std::vector<std::string>{"rotation"});
}

TEST(Check, TruncatedTraceIsAParseError) {
  std::string t = kValid;
  t = t.substr(0, t.find("# end"));
  try {
    parse_trace_text(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
}

TEST(Check, SimulatorTracesPassUnderBothPolicies) {
  auto w = contended();
  for (auto p : {PolicyKind::Coop, PolicyKind::Fair})
    for (std::size_t n : {1, 2, 4}) {
      SimOptions o;
      o.sched.topology = Topology(n);
      o.sched.quantum = 1ms;
      auto r = run_sim(w, p, o);
      ASSERT_TRUE(r.error.empty()) << r.error;
      EXPECT_EQ(r.metrics.tasks_finished, 8u);
      auto text = to_text(r.trace);
      auto vs = check_trace(parse_trace_text(text));
      EXPECT_TRUE(vs.empty()) << to_string(p) << " cores=" << n << "\n" << check::to_text(vs);
    }
}
