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

#include <coopsched/cli/commands.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

using namespace coopsched;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("coopsched_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

int run_tool(const std::string& args, const fs::path& log) {
  std::string cmd = std::string(COOPSCHED_BIN) + " " + args + " > " + log.string() + " 2>&1";
  int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

cli::ExperimentConfig stall_config(const fs::path& out) {
  auto c = cli::config_from_json(sim::Json::parse(R"({
    "policies": ["coop"],
    "scheduler": {"cores": 2},
    "workload": {"generator": "matmul",
                 "params": {"matrix_size": 8, "task_size": 8, "inner_threads": 3, "barrier": "busy"}}
  })"));
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST(Config, UnknownKeyNamesItsPath) {
  try {
    cli::config_from_json(sim::Json::parse(R"({"scheduler": {"quantum": 5}})"));
    FAIL() << "accepted an unknown key";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("scheduler.quantum"), std::string::npos) << e.what();
  }
  try {
    auto c = cli::config_from_json(sim::Json::parse(R"({"workload": {"generator": "churn", "params": {"teams": 2}}})"));
    cli::make_workload(c, 0);
    FAIL() << "accepted an unknown generator parameter";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("workload.params.teams"), std::string::npos) << e.what();
  }
}

TEST(Config, RoundTripsThroughJson) {
  auto c = cli::config_from_json(sim::Json::parse(R"({
    "policies": ["fair"], "seed": 9, "repeat": 2,
    "scheduler": {"cores": 4, "numa_nodes": 2, "thread_cache": false},
    "fair": {"tick_ns": 2000000, "yield_mode": "immediate"},
    "workload": {"generator": "ensemble", "params": {"phases": 3}},
    "sweep": {"key": "phases", "values": [1, 2]}
  })"));
  auto again = cli::config_from_json(cli::to_json(c));
  EXPECT_EQ(cli::to_json(again), cli::to_json(c));
  EXPECT_EQ(again.seed, 9u);
  EXPECT_FALSE(again.scheduler.thread_cache);
}

TEST(Cli, MinimalSimWritesArtifacts) {
  auto dir = scratch("minimal");
  cli::ExperimentConfig c;
  c.out_dir = dir.string();
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_sim(c, {}, log), cli::kOk) << log.str();
  for (const char* f : {"config.json", "coop.metrics.json", "fair.metrics.json", "coop.trace", "fair.trace",
                        "comparison.tsv", "plot.tsv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  auto m = sim::Json::parse(slurp(dir / "coop.metrics.json"));
  EXPECT_EQ(m["mode"], "sim");
  EXPECT_EQ(m["tasks_finished"], 1);
}

TEST(Cli, SameConfigTwiceIsByteIdentical) {
  auto a = scratch("det_a"), b = scratch("det_b");
  auto c = cli::config_from_json(sim::Json::parse(R"({
    "seed": 4, "scheduler": {"cores": 4},
    "workload": {"generator": "microservice",
                 "params": {"n_requests": 6, "request_rate": 30, "batches": 2, "phases": 4,
                            "inference_cost_ns": [20000000, 6000000, 4000000]}}
  })"));
  std::ostringstream log;
  c.out_dir = a.string();
  ASSERT_EQ(cli::cmd_sim(c, {}, log), cli::kOk);
  c.out_dir = b.string();
  ASSERT_EQ(cli::cmd_sim(c, {}, log), cli::kOk);
  for (const char* f : {"coop.metrics.json", "fair.metrics.json", "coop.trace", "fair.trace", "comparison.tsv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, StallExitCodes) {
  auto dir = scratch("stall");
  auto c = stall_config(dir);
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_sim(c, {}, log), cli::kStalled);
  EXPECT_EQ(cli::cmd_sim(c, {true}, log), cli::kOk);
  EXPECT_TRUE(fs::exists(dir / "coop.stall.json"));
  auto report = sim::Json::parse(slurp(dir / "coop.stall.json"));
  EXPECT_EQ(report["spinning"].size(), 2u);

  cli::ExperimentConfig quiet;
  quiet.out_dir = scratch("stall_missing").string();
  EXPECT_EQ(cli::cmd_sim(quiet, {true}, log), cli::kStallMissing);
}

TEST(Cli, SweepAndRepeatNameRuns) {
  auto dir = scratch("sweep");
  auto c = cli::config_from_json(sim::Json::parse(R"({
    "repeat": 2, "scheduler": {"cores": 2},
    "workload": {"generator": "single"},
    "sweep": {"key": "compute_ns", "values": [1000000, 2000000]}
  })"));
  c.out_dir = dir.string();
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_sim(c, {}, log), cli::kOk);
  EXPECT_TRUE(fs::exists(dir / "fair.p1.r1.metrics.json"));
  auto tsv = slurp(dir / "comparison.tsv");
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 1 + 2 * 2 * 2);
}

TEST(Cli, CheckAcceptsValidAndFlagsCorruptTraces) {
  auto dir = scratch("check");
  auto c = stall_config(dir);
  c.policies = {sim::PolicyKind::Coop, sim::PolicyKind::Fair};
  c.workload.params["barrier"] = "busy_yield";
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_sim(c, {}, out), cli::kOk) << out.str();
  for (const char* f : {"coop.trace", "fair.trace"}) EXPECT_EQ(cli::cmd_check((dir / f).string(), out, err), cli::kOk) << f;

  // A second runner on a busy core.
  auto t = load_trace((dir / "coop.trace").string());
  std::size_t i = 0;
  while (t.records[i].event != TraceEvent::Dispatch) ++i;
  auto dup = t.records[i];
  dup.task = TaskId(9999);
  dup.worker = WorkerId(9999);
  t.records.insert(t.records.begin() + static_cast<std::ptrdiff_t>(i) + 1, dup);
  for (std::size_t k = 0; k < t.records.size(); ++k) t.records[k].seq = k;
  spit(dir / "bad.trace", to_text(t));
  std::ostringstream vout;
  EXPECT_EQ(cli::cmd_check((dir / "bad.trace").string(), vout, err), cli::kViolations);
  EXPECT_FALSE(vout.str().empty());

  auto text = slurp(dir / "coop.trace");
  spit(dir / "cut.trace", text.substr(0, text.size() / 2 + 3));
  EXPECT_EQ(cli::cmd_check((dir / "cut.trace").string(), out, err), cli::kBadInput);
}

TEST(Cli, GenOutputLoadsBack) {
  auto dir = scratch("gen");
  auto c = cli::config_from_json(sim::Json::parse(R"({"workload": {"generator": "churn", "params": {"iterations": 3}}})"));
  std::ostringstream out;
  ASSERT_EQ(cli::cmd_gen(c, (dir / "w.json").string(), out), cli::kOk);
  auto w = sim::load_workload((dir / "w.json").string());
  EXPECT_EQ(sim::to_json(w), sim::to_json(cli::make_workload(c, 0)));
}

TEST(Cli, BenchHonoursDurationFloor) {
  auto dir = scratch("bench");
  auto c = cli::config_from_json(sim::Json::parse(R"({
    "policies": ["coop"], "scheduler": {"cores": 2},
    "workload": {"generator": "churn", "params": {"iterations": 5, "team": 2, "inner_cost_ns": 100000}},
    "bench": {"min_duration_ns": 2000000000}
  })"));
  c.out_dir = dir.string();
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_bench(c, {}, log), cli::kOk) << log.str();
  auto m = sim::Json::parse(slurp(dir / "coop.metrics.json"));
  EXPECT_EQ(m["mode"], "bench");
  EXPECT_GE(m["measured_ns"].get<std::int64_t>(), 2'000'000'000);
  EXPECT_GT(m["loops"].get<std::uint64_t>(), 1u);
  std::ostringstream err;
  EXPECT_EQ(cli::cmd_check((dir / "coop.trace").string(), log, err), cli::kOk);
}

TEST(Tool, ExitCodes) {
  auto dir = scratch("tool");
  auto log = dir / "log.txt";
  spit(dir / "bad.json", R"({"scheduler": {"quantum": 5}})");
  EXPECT_EQ(run_tool("sim -c " + (dir / "bad.json").string(), log), cli::kBadInput);
  EXPECT_NE(slurp(log).find("scheduler.quantum"), std::string::npos);

  spit(dir / "ok.json", R"({"schema": "coopsched.experiment/1", "scheduler": {"cores": 2}})");
  EXPECT_EQ(run_tool("sim -c " + (dir / "ok.json").string() + " -o " + (dir / "out").string(), log), cli::kOk);
  EXPECT_EQ(run_tool("check " + (dir / "out" / "coop.trace").string(), log), cli::kOk);
  EXPECT_EQ(run_tool("sim -c " + (dir / "ok.json").string() + " -p coop --expect-stall -o " +
                         (dir / "out2").string(), log),
            cli::kStallMissing);
  EXPECT_EQ(run_tool("check " + (dir / "missing.trace").string(), log), cli::kBadInput);
}

TEST(Tool, PolicyFromEnvironmentForBench) {
  auto dir = scratch("env");
  auto log = dir / "log.txt";
  spit(dir / "c.json", R"({"scheduler": {"cores": 2}, "workload": {"generator": "single", "params": {"compute_ns": 100000}}})");
  ASSERT_EQ(run_tool("bench -c " + (dir / "c.json").string() + " -o " + (dir / "a").string(), log), cli::kOk);
  EXPECT_TRUE(fs::exists(dir / "a" / "coop.metrics.json"));
  EXPECT_TRUE(fs::exists(dir / "a" / "native.metrics.json"));
  ASSERT_EQ(setenv("COOPSCHED_POLICY", "fair", 1), 0);
  ASSERT_EQ(run_tool("bench -c " + (dir / "c.json").string() + " -o " + (dir / "c").string(), log), cli::kOk);
  EXPECT_FALSE(fs::exists(dir / "c" / "coop.metrics.json"));
  EXPECT_TRUE(fs::exists(dir / "c" / "native.metrics.json"));
  ASSERT_EQ(run_tool("bench -p coop -c " + (dir / "c.json").string() + " -o " + (dir / "d").string(), log), cli::kOk);
  EXPECT_TRUE(fs::exists(dir / "d" / "coop.metrics.json"));
  unsetenv("COOPSCHED_POLICY");
}
