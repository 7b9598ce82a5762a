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

#include <coopsched/sync/barrier.hpp>
#include <coopsched/sync/busy_barrier.hpp>
#include <coopsched/sync/condvar.hpp>
#include <coopsched/sync/mutex.hpp>
#include <coopsched/sync/semaphore.hpp>
#include <coopsched/sync/stall.hpp>
#include <coopsched/sync/timed_wait.hpp>

#include <gtest/gtest.h>

#include <atomic>
#include <thread>
#include <vector>

using namespace coopsched;
using namespace coopsched::sync;
using namespace std::chrono_literals;

namespace {
const TaskId T1(1), T2(2), T3(3), T4(4);
}

TEST(CoopMutex, UncontendedAcquire) {
  CoopMutex m;
  EXPECT_EQ(m.lock(T1), LockOutcome::Acquired);
  EXPECT_TRUE(m.locked());
  EXPECT_EQ(m.owner(), T1);
}

TEST(CoopMutex, UnlockTransfersWithoutClearingLocked) {
  CoopMutex m;
  m.lock(T1);
  EXPECT_EQ(m.lock(T2), LockOutcome::Enqueued);
  auto next = m.unlock(T1);
  ASSERT_TRUE(next.has_value());
  EXPECT_EQ(*next, T2);
  EXPECT_TRUE(m.locked());
  EXPECT_EQ(m.owner(), T2);
  // A third task arriving right after the transfer must queue.
  EXPECT_EQ(m.lock(T3), LockOutcome::Enqueued);
  EXPECT_FALSE(m.try_lock(T4));
}

TEST(CoopMutex, FifoHandoffOrder) {
  CoopMutex m;
  m.lock(T1);
  m.lock(T2);
  m.lock(T3);
  EXPECT_EQ(m.unlock(T1), T2);
  EXPECT_EQ(m.unlock(T2), T3);
  EXPECT_EQ(m.unlock(T3), std::nullopt);
  EXPECT_FALSE(m.locked());
}

TEST(CoopMutex, OneTransferPerUnlock) {
  CoopMutex m;
  m.lock(T1);
  m.lock(T2);
  m.lock(T3);
  m.unlock(T1);
  EXPECT_EQ(m.n_waiters(), 1u);
}

TEST(CoopMutex, ContractViolations) {
  CoopMutex m;
  m.lock(T1);
  EXPECT_THROW(m.lock(T1), ContractViolation);
  EXPECT_THROW(m.unlock(T2), ContractViolation);
  m.unlock(T1);
  EXPECT_THROW(m.unlock(T1), ContractViolation);
}

TEST(CoopCondvar, SignalWithoutWaitersIsNoop) {
  CoopCondvar cv;
  auto r = cv.signal();
  EXPECT_EQ(r.woken, 0u);
  EXPECT_TRUE(r.to_submit.empty());
}

TEST(CoopCondvar, WaitReleasesMutexAndSignalReacquires) {
  CoopMutex m;
  CoopCondvar cv;
  m.lock(T1);
  EXPECT_EQ(cv.wait(T1, m), std::nullopt);
  EXPECT_FALSE(m.locked());
  m.lock(T2);
  auto r = cv.signal();
  EXPECT_EQ(r.woken, 1u);
  EXPECT_TRUE(r.to_submit.empty());
  EXPECT_EQ(r.queued_on_mutex, std::vector<TaskId>{T1});
  EXPECT_EQ(m.unlock(T2), T1);
  EXPECT_EQ(m.owner(), T1);
}

TEST(CoopCondvar, BroadcastSerializesThroughMutexInFifoOrder) {
  CoopMutex m;
  CoopCondvar cv;
  m.lock(T1);
  cv.wait(T1, m);
  m.lock(T2);
  cv.wait(T2, m);
  auto r = cv.broadcast();
  EXPECT_EQ(r.woken, 2u);
  EXPECT_EQ(r.to_submit, std::vector<TaskId>{T1});
  EXPECT_EQ(r.queued_on_mutex, std::vector<TaskId>{T2});
  EXPECT_EQ(m.unlock(T1), T2);
}

TEST(CoopCondvar, WaitWithoutMutexIsAContractViolation) {
  CoopMutex m;
  CoopCondvar cv;
  EXPECT_THROW(cv.wait(T1, m), ContractViolation);
  m.lock(T2);
  EXPECT_THROW(cv.wait(T1, m), ContractViolation);
}

TEST(CoopCondvar, WaitHandsMutexToQueuedLocker) {
  CoopMutex m;
  CoopCondvar cv;
  m.lock(T1);
  m.lock(T2);
  EXPECT_EQ(cv.wait(T1, m), T2);
  EXPECT_EQ(cv.n_waiters(), 1u);
}

TEST(CoopBarrier, SinglePartyReturnsSerial) {
  CoopBarrier b(1);
  auto a = b.arrive(T1);
  EXPECT_TRUE(a.serial);
  EXPECT_TRUE(a.release.empty());
  EXPECT_EQ(b.generation(), 1u);
}

TEST(CoopBarrier, LastArrivalReleasesInArrivalOrder) {
  CoopBarrier b(3);
  EXPECT_FALSE(b.arrive(T1).serial);
  EXPECT_FALSE(b.arrive(T2).serial);
  auto a = b.arrive(T3);
  EXPECT_TRUE(a.serial);
  EXPECT_EQ(a.release, (std::vector<TaskId>{T1, T2}));
  EXPECT_EQ(b.arrived(), 0u);
}

TEST(CoopBarrier, GenerationsDoNotMix) {
  CoopBarrier b(2);
  b.arrive(T1);
  auto g0 = b.arrive(T2);
  EXPECT_EQ(g0.generation, 0u);
  auto w = b.arrive(T1);
  EXPECT_EQ(w.generation, 1u);
  EXPECT_FALSE(w.serial);
  auto g1 = b.arrive(T2);
  EXPECT_EQ(g1.release, std::vector<TaskId>{T1});
}

TEST(CoopBarrier, DoubleArrivalIsAContractViolation) {
  CoopBarrier b(3);
  b.arrive(T1);
  EXPECT_THROW(b.arrive(T1), ContractViolation);
  EXPECT_THROW(CoopBarrier(0), Error);
}

TEST(CoopSemaphore, TakesPermitWithoutBlocking) {
  CoopSemaphore s(1);
  EXPECT_TRUE(s.wait(T1));
  EXPECT_EQ(s.permits(), 0u);
}

TEST(CoopSemaphore, PostHandsPermitToWaiter) {
  CoopSemaphore s(0);
  EXPECT_FALSE(s.wait(T1));
  EXPECT_EQ(s.post(), T1);
  EXPECT_EQ(s.permits(), 0u);
  EXPECT_EQ(s.n_waiters(), 0u);
}

TEST(CoopSemaphore, PostsThenWaitsNeverBlock) {
  CoopSemaphore s(0);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s.post(), std::nullopt);
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(s.wait(TaskId(i)));
}

TEST(TimedWait, ZeroTimeoutProbesOnce) {
  int probes = 0, blocks = 0;
  auto r = timed_wait(0ns, 5ms, [&] { ++probes; return false; }, [&](Nanos) { ++blocks; });
  EXPECT_EQ(r, WaitOutcome::Timeout);
  EXPECT_EQ(probes, 1);
  EXPECT_EQ(blocks, 0);
}

TEST(TimedWait, EventAlreadySetNeverBlocks) {
  int blocks = 0;
  auto r = timed_wait(12ms, 5ms, [] { return true; }, [&](Nanos) { ++blocks; });
  EXPECT_EQ(r, WaitOutcome::Event);
  EXPECT_EQ(blocks, 0);
}

TEST(TimedWait, SlicesAreFiveFiveTwo) {
  std::vector<Nanos> slices;
  auto r = timed_wait(12ms, 5ms, [] { return false; }, [&](Nanos s) { slices.push_back(s); });
  EXPECT_EQ(r, WaitOutcome::Timeout);
  EXPECT_EQ(slices, (std::vector<Nanos>{5ms, 5ms, 2ms}));
}

TEST(TimedWait, SegmentCountIsCeilingOfRatio) {
  for (auto [timeout, poll] : std::vector<std::pair<Nanos, Nanos>>{
           {1ns, 5ms}, {10ms, 5ms}, {11ms, 5ms}, {7ms, 1ms}}) {
    TimedWaitLoop loop(timeout, poll);
    while (auto s = loop.next_slice()) loop.charge(*s);
    auto expect = static_cast<std::size_t>((timeout.count() + poll.count() - 1) / poll.count());
    EXPECT_EQ(loop.segments(), expect);
  }
}

TEST(TimedWait, EventMidwayStopsLoop) {
  int probes = 0;
  std::vector<Nanos> slices;
  auto r = timed_wait(20ms, 5ms, [&] { return ++probes == 3; },
                      [&](Nanos s) { slices.push_back(s); });
  EXPECT_EQ(r, WaitOutcome::Event);
  EXPECT_EQ(slices.size(), 2u);
}

TEST(BusyWaitBarrier, LastArrivalReleasesGeneration) {
  BusyWaitBarrier b(3);
  auto a = b.arrive();
  auto c = b.arrive();
  EXPECT_FALSE(b.released(a));
  auto d = b.arrive();
  EXPECT_TRUE(d.last);
  EXPECT_FALSE(a.last || c.last);
  EXPECT_TRUE(b.released(a));
  EXPECT_TRUE(b.released(c));
  EXPECT_EQ(b.generation(), 1u);
}

TEST(BusyWaitBarrier, RejectsBadParameters) {
  EXPECT_THROW(BusyWaitBarrier(0), Error);
  EXPECT_THROW(BusyWaitBarrier(2, 0u), Error);
}

TEST(BusyWaitBarrier, ThreadsAcrossGenerations) {
  constexpr int kThreads = 4, kRounds = 200;
  BusyWaitBarrier b(kThreads);
  std::atomic<int> counter{0};
  std::atomic<bool> ok{true};
  std::vector<std::thread> ts;
  for (int i = 0; i < kThreads; ++i)
    ts.emplace_back([&] {
      for (int r = 0; r < kRounds; ++r) {
        counter.fetch_add(1);
        auto t = b.arrive();
        while (!b.released(t)) std::this_thread::yield();
        if (counter.load() < (r + 1) * kThreads) ok = false;
        auto t2 = b.arrive();
        while (!b.released(t2)) std::this_thread::yield();
      }
    });
  for (auto& t : ts) t.join();
  EXPECT_TRUE(ok);
  EXPECT_EQ(b.generation(), 2u * kRounds);
}

TEST(SpinGuardMutex, ThreadsSeeMutualExclusion) {
  BasicCoopMutex<SpinGuard> m;
  std::atomic<int> inside{0};
  std::atomic<bool> ok{true};
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i)
    ts.emplace_back([&, i] {
      TaskId me(static_cast<TaskId::rep>(i));
      for (int r = 0; r < 500; ++r) {
        while (!m.try_lock(me)) std::this_thread::yield();
        if (inside.fetch_add(1) != 0) ok = false;
        inside.fetch_sub(1);
        m.unlock(me);
      }
    });
  for (auto& t : ts) t.join();
  EXPECT_TRUE(ok);
}

TEST(StallDetector, AllSpinnersWithWaiterReports) {
  std::vector<CoreActivity> cores = {{T1, true, 0ms}, {T2, true, 10ms}};
  std::vector<TaskId> waiting = {T3};
  auto r = stall_detector(cores, waiting, 110ms, 100ms);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->spinning, (std::vector<TaskId>{T1, T2}));
  EXPECT_EQ(r->waiting, std::vector<TaskId>{T3});
}

TEST(StallDetector, NoWaitersNoReport) {
  std::vector<CoreActivity> cores = {{T1, true, 0ms}};
  EXPECT_FALSE(stall_detector(cores, {}, 1s, 100ms).has_value());
}

TEST(StallDetector, RecentSchedulingPointNoReport) {
  std::vector<CoreActivity> cores = {{T1, true, 0ms}, {T2, true, 50ms}};
  std::vector<TaskId> waiting = {T3};
  EXPECT_FALSE(stall_detector(cores, waiting, 120ms, 100ms).has_value());
}

TEST(StallDetector, ComputingCoreNoReport) {
  std::vector<CoreActivity> cores = {{T1, true, 0ms}, {T2, false, 0ms}};
  std::vector<TaskId> waiting = {T3};
  EXPECT_FALSE(stall_detector(cores, waiting, 1s, 100ms).has_value());
}
