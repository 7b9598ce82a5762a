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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "support/random_instance.hpp"
#include "support/reference_dispatcher.hpp"

#include <coopsched/check.hpp>
#include <coopsched/runtime/bench.hpp>
#include <coopsched/sim/engine.hpp>
#include <coopsched/workloads/churn.hpp>
#include <coopsched/workloads/ensemble.hpp>
#include <coopsched/workloads/matmul.hpp>
#include <coopsched/workloads/microservice.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

using namespace coopsched;
using namespace coopsched::sim;
using namespace coopsched::workloads;
using namespace std::chrono_literals;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double ms(std::int64_t ns) { return static_cast<double>(ns) / 1e6; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr int kInstances = 10'000;

std::vector<testing::Instance>& instances() {
  static std::vector<testing::Instance> all = [] {
    testing::InstanceGenerator gen(2024);
    std::vector<testing::Instance> v;
    v.reserve(kInstances);
    for (int i = 0; i < kInstances; ++i) v.push_back(gen.next_bounded());
    return v;
  }();
  return all;
}

Outcome invariant_suite() {
  auto t0 = Clock::now();
  auto& all = instances();
  std::size_t max_cores = 0, max_domains = 0, max_tasks = 0, max_records = 0, traces = 0;
  std::set<Op> kinds;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& in = all[i];
    max_cores = std::max(max_cores, in.options.sched.topology.n_cores());
    max_domains = std::max(max_domains, in.workload.domains.size());
    for (const auto& p : in.workload.programs)
      for (const auto& s : p.segments) kinds.insert(s.op);
    for (auto pol : {PolicyKind::Coop, PolicyKind::Fair}) {
      auto r = run_sim(in.workload, pol, in.options);
      if (!r.error.empty())
        return {false, fmt("instance %zu %s: %s", i, to_string(pol), r.error.c_str())};
      std::size_t created = 0;
      for (const auto& rec : r.trace.records) created += rec.event == TraceEvent::Create;
      max_tasks = std::max(max_tasks, created);
      max_records = std::max(max_records, r.trace.records.size());
      auto vs = check::check_trace(r.trace);
      if (!vs.empty())
        return {false, fmt("instance %zu %s: %zu violations, first: %s", i, to_string(pol), vs.size(),
                           check::to_text({vs.front()}).c_str())};
      ++traces;
    }
  }
  double secs = seconds_since(t0);
  bool bounded = max_cores <= 4 && max_domains <= 3 && max_tasks <= 16 && max_records <= 1000;
  bool mixed = kinds.size() >= 8;
  return {bounded && mixed && secs < 60.0,
          fmt("%zu traces clean; max cores %zu, domains %zu, tasks %zu, records %zu; %zu segment kinds; %.1f s",
              traces, max_cores, max_domains, max_tasks, max_records, kinds.size(), secs)};
}

Outcome oracle_equivalence() {
  auto& all = instances();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& in = all[i];
    auto real = Engine<CoopPolicy<CoopScheduler>>(in.workload, in.options).run();
    auto ref = Engine<CoopPolicy<testing::ReferenceDispatcher>>(in.workload, in.options).run();
    if (real.error != ref.error || to_text(real.trace) != to_text(ref.trace))
      return {false, fmt("instance %zu diverges from the reference dispatcher", i)};
  }
  return {true, fmt("%zu instances, identical decision traces", all.size())};
}

// Oversubscribed nested matmul: one 32x32 block whose inner team has T
// threads on 4 cores.
NestedMatmulSpec matmul(std::uint32_t threads, BarrierKind k) {
  NestedMatmulSpec s;
  s.matrix_size = 32;
  s.task_size = 32;
  s.inner_threads = threads;
  s.inner_phases = 8;
  s.jitter = 0.2;
  s.barrier = k;
  s.yield_every = 100;
  return s;
}

SimOptions machine(std::size_t cores, double latency_scale = 1.0) {
  SimOptions o;
  o.sched.topology = Topology(cores);
  o.latency = LatencyModel{}.scaled(latency_scale);
  o.record_trace = false;
  return o;
}

std::int64_t makespan(const Workload& w, PolicyKind p, const SimOptions& o) {
  auto r = run_sim(w, p, o);
  if (!r.error.empty()) throw Error(r.error);
  if (r.metrics.deadlocked) throw Error("workload " + w.name + " did not drain under " + to_string(p));
  return r.metrics.makespan_ns;
}

Outcome busy_wait_collapse() {
  double worst = 1e300;
  std::string at;
  for (double scale : {0.5, 1.0, 1.5})
    for (std::uint32_t t : {16u, 32u, 64u}) {
      auto o = machine(4, scale);
      auto busy = makespan(gen_nested_matmul(matmul(t, BarrierKind::Busy), 1), PolicyKind::Fair, o);
      auto yield = makespan(gen_nested_matmul(matmul(t, BarrierKind::BusyYield), 1), PolicyKind::Fair, o);
      double ratio = static_cast<double>(busy) / static_cast<double>(yield);
      if (ratio < worst) {
        worst = ratio;
        at = fmt("T=%u oversubscription %.0f latency x%.1f", t, matmul(t, BarrierKind::Busy).oversubscription(4),
                 scale);
      }
    }
  return {worst >= 2.0, fmt("FAIR busy/yield makespan ratio min %.2f (%s)", worst, at.c_str())};
}

Outcome coop_advantage() {
  bool ok = true;
  std::ostringstream os;
  double worst_gain = 1e300;
  for (double scale : {0.5, 1.0, 1.5})
    for (std::uint32_t t : {16u, 32u, 64u}) {
      auto o = machine(4, scale);
      auto w = gen_nested_matmul(matmul(t, BarrierKind::BusyYield), 1);
      auto coop = makespan(w, PolicyKind::Coop, o);
      auto fair = makespan(w, PolicyKind::Fair, o);
      double gain = 1.0 - static_cast<double>(coop) / static_cast<double>(fair);
      double os_factor = matmul(t, BarrierKind::BusyYield).oversubscription(4);
      ok = ok && coop <= fair;
      if (os_factor >= 8) {
        ok = ok && gain >= 0.05;
        worst_gain = std::min(worst_gain, gain);
      }
    }
  os << fmt("COOP <= FAIR at every point; min improvement at oversubscription >= 8: %.1f%%", worst_gain * 100);
  return {ok, os.str()};
}

Outcome stall_reproduction() {
  const std::size_t cores = 4;
  auto build = [&](std::optional<std::uint32_t> yield_every) {
    Workload w;
    w.name = "stall";
    w.add_domain("d");
    auto b = w.add_object(ObjectKind::BusyBarrier, cores + 1, yield_every);
    Program p;
    p.name = "spinner";
    p.segments = {Segment::compute(1ms), Segment::busy_spin(b), Segment::finish()};
    w.add_program(p);
    for (std::size_t i = 0; i <= cores; ++i) w.add_task({});
    return w;
  };
  auto o = machine(cores);
  o.record_trace = true;
  auto stuck = run_sim(build(std::nullopt), PolicyKind::Coop, o);
  auto yielding = run_sim(build(100), PolicyKind::Coop, o);
  auto fair = run_sim(build(std::nullopt), PolicyKind::Fair, o);
  if (!stuck.metrics.stall) return {false, "no stall report for the unyielding busy barrier"};
  // The horizon runs from the spinners' last scheduling point; the detector
  // samples every deadlock_check_interval.
  std::int64_t last_point = 0;
  for (const auto& rec : stuck.trace.records)
    if (rec.event == TraceEvent::Dispatch) last_point = rec.time;
  auto at = stuck.metrics.stall->detected_at;
  bool within = at >= Nanos(last_point) + o.sched.stall_horizon &&
                at <= Nanos(last_point) + o.sched.stall_horizon + o.sched.deadlock_check_interval;
  bool recorded = !stuck.trace.records.empty() && stuck.trace.records.back().event == TraceEvent::StallReport;
  bool y_ok = !yielding.metrics.stalled && !yielding.metrics.deadlocked &&
              yielding.metrics.tasks_finished == cores + 1;
  bool f_ok = !fair.metrics.stalled && !fair.metrics.deadlocked && fair.metrics.tasks_finished == cores + 1;
  return {within && recorded && y_ok && f_ok,
          fmt("COOP stall at %.1f ms (%zu spinning, %zu waiting); yield_every completes: %s; FAIR completes: %s",
              ms(at.count()), stuck.metrics.stall->spinning.size(), stuck.metrics.stall->waiting.size(),
              y_ok ? "yes" : "no", f_ok ? "yes" : "no")};
}

Outcome microservice_trend() {
  auto t0 = Clock::now();
  const std::vector<double> rates{4, 8, 16, 24, 32};
  std::vector<double> fair, coop;
  for (double rate : rates) {
    MicroserviceSpec s;
    s.request_rate = rate;
    auto w = gen_microservice(s, 1);
    auto o = machine(28);
    auto f = run_sim(w, PolicyKind::Fair, o);
    auto c = run_sim(w, PolicyKind::Coop, o);
    if (!f.error.empty() || !c.error.empty()) return {false, f.error + c.error};
    fair.push_back(f.metrics.latency.mean_ns);
    coop.push_back(c.metrics.latency.mean_ns);
  }
  double fr = fair.back() / fair.front(), cr = coop.back() / coop.front();
  double secs = seconds_since(t0);
  return {fr >= 3.0 && cr <= 1.5 && secs <= 30.0,
          fmt("mean latency growth %g->%g req/s: FAIR x%.2f (%.1f -> %.1f ms), COOP x%.2f (%.1f -> %.1f ms); %.1f s",
              rates.front(), rates.back(), fr, fair.front() / 1e6, fair.back() / 1e6, cr, coop.front() / 1e6,
              coop.back() / 1e6, secs)};
}

Outcome thread_cache_economy() {
  ChurnSpec s;
  s.outer = 1;
  s.iterations = 100;
  s.team = 8;
  s.inner_cost = 20us;
  auto w = gen_churn(s);
  std::uint64_t created[2] = {0, 0};
  bool lifo = false, drained = true;
  for (bool cache : {false, true}) {
    runtime::BenchOptions o;
    o.runtime.sched.topology = Topology(4);
    o.runtime.sched.thread_cache = cache;
    o.runtime.backend = runtime::Backend::Coop;
    auto r = runtime::run_bench(w, o);
    drained = drained && !r.metrics.deadlocked;
    created[cache] = r.metrics.created_total;
    if (cache) {
      lifo = !r.cache_logs.empty();
      for (const auto& log : r.cache_logs) lifo = lifo && lifecycle::reuse_is_lifo(log);
    }
  }
  const std::uint64_t total = std::uint64_t{s.outer} * s.iterations * s.team;
  const std::uint64_t bound = s.peak_concurrency() + s.outer;
  return {drained && created[0] == total && created[1] <= bound && lifo,
          fmt("runtime churn %ux%u: cache off created %llu, cache on created %llu (bound %llu), reuse LIFO: %s",
              s.iterations, s.team, static_cast<unsigned long long>(created[0]),
              static_cast<unsigned long long>(created[1]), static_cast<unsigned long long>(bound),
              lifo ? "yes" : "no")};
}

Outcome determinism() {
  std::vector<Workload> ws;
  ws.push_back(gen_nested_matmul(matmul(16, BarrierKind::BusyYield), 3));
  MicroserviceSpec ms;
  ms.n_requests = 8;
  ms.request_rate = 24;
  ws.push_back(gen_microservice(ms, 3));
  ws.push_back(gen_ensemble(EnsembleSpec{}));
  ws.push_back(gen_churn(ChurnSpec{}));
  for (std::size_t i = 0; i < 200; ++i) ws.push_back(instances()[i].workload);
  std::size_t runs = 0;
  for (std::size_t i = 0; i < ws.size(); ++i)
    for (auto p : {PolicyKind::Coop, PolicyKind::Fair}) {
      auto o = i >= 4 ? instances()[i - 4].options : machine(4);
      o.record_trace = true;
      o.seed = 17;
      auto a = run_sim(ws[i], p, o);
      auto b = run_sim(ws[i], p, o);
      if (to_text(a.trace) != to_text(b.trace) || to_text(a.metrics) != to_text(b.metrics))
        return {false, fmt("workload %zu (%s) under %s differs between runs", i, ws[i].name.c_str(), to_string(p))};
      ++runs;
    }
  return {true, fmt("%zu configurations run twice, traces and metrics byte-identical", runs)};
}

Outcome timed_wait_slices() {
  Workload w;
  w.name = "timed_wait";
  w.add_domain("d");
  Program p;
  p.name = "waiter";
  p.segments = {Segment::timed_wait(12ms), Segment::finish()};
  w.add_program(p);
  w.add_task({});
  auto o = machine(1);
  o.record_trace = true;
  o.sched.waitfor_poll = 5ms;
  auto r = run_sim(w, PolicyKind::Coop, o);
  std::vector<std::string> slices;
  for (const auto& rec : r.trace.records)
    if (rec.event == TraceEvent::Waitfor) slices.push_back(rec.arg);
  bool ok = r.error.empty() && slices == std::vector<std::string>{"5000000", "5000000", "2000000"};
  std::string got;
  for (const auto& s : slices) got += (got.empty() ? "" : ", ") + fmt("%.0f ms", std::stod(s) / 1e6);
  return {ok, fmt("12 ms timeout, 5 ms poll: %zu blocking segments [%s]", slices.size(), got.c_str())};
}

Outcome ensemble_gap_filling() {
  auto ratio = [](std::vector<Nanos> imbalance) {
    EnsembleSpec s;
    s.imbalance = std::move(imbalance);
    auto seq = s;
    seq.concurrent = false;
    auto o = machine(4);
    return static_cast<double>(makespan(gen_ensemble(s), PolicyKind::Coop, o)) /
           static_cast<double>(makespan(gen_ensemble(seq), PolicyKind::Coop, o));
  };
  double skewed = ratio({9ms, 1ms});
  double even = ratio({5ms, 5ms});
  return {skewed <= 0.9 && even >= 0.98,
          fmt("concurrent/sequential makespan: 90/10 imbalance %.3f, no imbalance %.3f", skewed, even)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"invariant suite", invariant_suite},
      {"oracle equivalence", oracle_equivalence},
      {"busy-wait collapse", busy_wait_collapse},
      {"coop advantage", coop_advantage},
      {"stall reproduction", stall_reproduction},
      {"microservice trend", microservice_trend},
      {"thread-cache economy", thread_cache_economy},
      {"determinism", determinism},
      {"timed_wait slices", timed_wait_slices},
      {"ensemble gap filling", ensemble_gap_filling},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    failed += !out.pass;
    std::printf("%s %2zu %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
