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

#include <coopsched/sim/engine.hpp>

#include <gtest/gtest.h>

using namespace coopsched;
using namespace coopsched::sim;
using namespace std::chrono_literals;

namespace {

SimOptions cores(std::size_t n) {
  SimOptions o;
  o.sched.topology = Topology(n);
  return o;
}

Program prog(std::string name, std::vector<Segment> segs) {
  Program p;
  p.name = std::move(name);
  p.segments = std::move(segs);
  p.segments.push_back(Segment::finish());
  return p;
}

std::size_t count(const Trace& t, TraceEvent e) {
  std::size_t n = 0;
  for (const auto& r : t.records) n += r.event == e;
  return n;
}

}  // namespace

TEST(Sim, EmptyWorkload) {
  Workload w;
  w.add_domain("d");
  for (auto p : {PolicyKind::Coop, PolicyKind::Fair}) {
    auto r = run_sim(w, p, cores(2));
    EXPECT_TRUE(r.error.empty());
    EXPECT_EQ(r.metrics.makespan_ns, 0);
    EXPECT_FALSE(r.metrics.deadlocked);
    EXPECT_TRUE(r.trace.records.empty());
  }
}

TEST(Sim, SingleComputeTaskPaysOneSwitch) {
  Workload w;
  w.add_domain("d");
  w.add_program(prog("p", {Segment::compute(10ms)}));
  w.add_task({});
  for (auto p : {PolicyKind::Coop, PolicyKind::Fair}) {
    auto r = run_sim(w, p, cores(1));
    ASSERT_TRUE(r.error.empty()) << r.error;
    EXPECT_EQ(r.metrics.makespan_ns, Nanos(10ms + 2us).count()) << to_string(p);
    EXPECT_EQ(r.metrics.tasks_finished, 1u);
    EXPECT_EQ(r.metrics.context_switches, 1u);
    EXPECT_EQ(r.metrics.core_idle_ns, 0);
  }
}

TEST(Sim, FairPreemptsAtQuantumCoopRunsToCompletion) {
  Workload w;
  w.add_domain("d");
  w.add_program(prog("p", {Segment::compute(9ms)}));
  w.add_task({});
  w.add_task({});
  auto coop = run_sim(w, PolicyKind::Coop, cores(1));
  auto fair = run_sim(w, PolicyKind::Fair, cores(1));
  ASSERT_TRUE(coop.error.empty() && fair.error.empty());
  EXPECT_EQ(coop.metrics.preemptions, 0u);
  EXPECT_EQ(coop.metrics.context_switches, 2u);
  EXPECT_EQ(coop.metrics.makespan_ns, Nanos(18ms + 4us).count());
  EXPECT_GT(fair.metrics.preemptions, 0u);
  EXPECT_GT(fair.metrics.makespan_ns, coop.metrics.makespan_ns);
  EXPECT_EQ(count(fair.trace, TraceEvent::Finish), 2u);
}

TEST(Sim, TimedWaitSlices) {
  Workload w;
  w.add_domain("d");
  w.add_program(prog("p", {Segment::timed_wait(12ms)}));
  w.add_task({});
  auto r = run_sim(w, PolicyKind::Coop, cores(1));
  ASSERT_TRUE(r.error.empty()) << r.error;
  std::vector<std::string> slices;
  for (const auto& rec : r.trace.records)
    if (rec.event == TraceEvent::Waitfor) slices.push_back(rec.arg);
  EXPECT_EQ(slices, (std::vector<std::string>{"5000000", "5000000", "2000000"}));
}

TEST(Sim, MutexHandOffAndCondvar) {
  Workload w;
  w.add_domain("d");
  auto m = w.add_object(ObjectKind::Mutex);
  auto cv = w.add_object(ObjectKind::Condvar);
  auto waiter = w.add_program(prog("waiter", {Segment::lock(m), Segment::cv_wait(cv, m),
                                              Segment::compute(1ms), Segment::unlock(m)}));
  auto signaller = w.add_program(prog("signaller", {Segment::compute(1ms), Segment::lock(m),
                                                    Segment::cv_signal(cv), Segment::unlock(m)}));
  w.add_task({waiter});
  w.add_task({signaller});
  for (auto p : {PolicyKind::Coop, PolicyKind::Fair}) {
    auto r = run_sim(w, p, cores(2));
    ASSERT_TRUE(r.error.empty()) << r.error;
    EXPECT_EQ(r.metrics.tasks_finished, 2u);
    EXPECT_FALSE(r.metrics.deadlocked);
    EXPECT_EQ(r.trace.residual_waiters, 0u);
    EXPECT_EQ(count(r.trace, TraceEvent::LockTransfer), 1u) << to_string(p);
  }
}

TEST(Sim, LostSignalDeadlocks) {
  Workload w;
  w.add_domain("d");
  auto b = w.add_object(ObjectKind::Barrier, 3);
  w.add_program(prog("p", {Segment::barrier(b)}));
  w.add_task({});
  w.add_task({});
  auto r = run_sim(w, PolicyKind::Coop, cores(2));
  EXPECT_TRUE(r.metrics.deadlocked);
  EXPECT_EQ(r.trace.residual_waiters, 2u);
}

TEST(Sim, SpinnersStallCooperativeCores) {
  Workload w;
  w.add_domain("d");
  auto x = w.add_object(ObjectKind::BusyBarrier, 3);
  w.add_program(prog("p", {Segment::busy_spin(x)}));
  for (int i = 0; i < 3; ++i) w.add_task({});
  auto coop = run_sim(w, PolicyKind::Coop, cores(2));
  EXPECT_TRUE(coop.metrics.stalled);
  ASSERT_TRUE(coop.metrics.stall.has_value());
  EXPECT_EQ(coop.metrics.stall->spinning.size(), 2u);
  EXPECT_EQ(coop.trace.records.back().event, TraceEvent::StallReport);
  auto fair = run_sim(w, PolicyKind::Fair, cores(2));
  EXPECT_FALSE(fair.metrics.stalled);
  EXPECT_EQ(fair.metrics.tasks_finished, 3u);
}

TEST(Sim, YieldingSpinnersMakeProgressUnderCoop) {
  Workload w;
  w.add_domain("d");
  auto x = w.add_object(ObjectKind::BusyBarrier, 3, 100);
  w.add_program(prog("p", {Segment::busy_spin(x)}));
  for (int i = 0; i < 3; ++i) w.add_task({});
  auto r = run_sim(w, PolicyKind::Coop, cores(2));
  ASSERT_TRUE(r.error.empty()) << r.error;
  EXPECT_FALSE(r.metrics.stalled);
  EXPECT_EQ(r.metrics.tasks_finished, 3u);
  EXPECT_GT(r.metrics.spin_waste_ns, 0);
}

TEST(Sim, SpawnJoinReusesWorkers) {
  Workload w;
  w.add_domain("d");
  auto child = w.add_program(prog("child", {Segment::compute(1ms)}));
  std::vector<Segment> segs;
  for (std::uint32_t i = 0; i < 10; ++i) {
    segs.push_back(Segment::spawn(child));
    segs.push_back(Segment::join(i));
  }
  auto parent = w.add_program(prog("parent", segs));
  TaskDecl t{parent};
  t.attached = true;
  w.add_task(t);
  auto r = run_sim(w, PolicyKind::Coop, cores(1));
  ASSERT_TRUE(r.error.empty()) << r.error;
  EXPECT_EQ(r.metrics.tasks_finished, 11u);
  EXPECT_EQ(r.metrics.created_total, 1u);
  EXPECT_EQ(r.metrics.reused_total, 9u);
  auto f = run_sim(w, PolicyKind::Fair, cores(1));
  EXPECT_EQ(f.metrics.created_total, 10u);
}

TEST(Sim, FinishingWhileHoldingMutexIsAnError) {
  Workload w;
  w.add_domain("d");
  auto m = w.add_object(ObjectKind::Mutex);
  w.add_program(prog("p", {Segment::lock(m)}));
  w.add_task({});
  auto r = run_sim(w, PolicyKind::Coop, cores(1));
  EXPECT_NE(r.error.find("holding"), std::string::npos);
}

TEST(Sim, DeterministicTraces) {
  Workload w;
  w.add_domain("d");
  auto m = w.add_object(ObjectKind::Mutex);
  w.add_program(prog("p", {Segment::compute(2ms), Segment::lock(m), Segment::compute(1ms),
                           Segment::unlock(m), Segment::yield(), Segment::compute(3ms)}));
  for (int i = 0; i < 6; ++i) w.add_task({0, 0, Nanos(i * 100'000)});
  for (auto p : {PolicyKind::Coop, PolicyKind::Fair}) {
    auto a = run_sim(w, p, cores(2));
    auto b = run_sim(w, p, cores(2));
    EXPECT_EQ(to_text(a.trace), to_text(b.trace));
    EXPECT_EQ(to_text(a.metrics), to_text(b.metrics));
  }
}
