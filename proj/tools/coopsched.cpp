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

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace coopsched;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> policies;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> repeat;
  std::string out;
  std::string workload;
  bool expect_stall = false;
};

void add_common(CLI::App* app, Overrides& o, bool run_flags) {
  app->add_option("-c,--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "Base seed");
  app->add_option("--workload", o.workload, "Workload document; replaces the config's generator")
      ->check(CLI::ExistingFile);
  if (!run_flags) return;
  app->add_option("-p,--policy", o.policies, "Policies to run (coop, fair)");
  app->add_option("--repeat", o.repeat, "Runs per policy and sweep point");
  app->add_option("-o,--out", o.out, "Output directory");
  app->add_flag("--expect-stall", o.expect_stall, "Succeed only if a stall report fires");
}

cli::ExperimentConfig resolve(const Overrides& o, bool bench) {
  cli::ExperimentConfig c;
  if (!o.config.empty()) c = cli::load_config(o.config);
  if (bench && o.policies.empty()) {
    if (const char* env = std::getenv("COOPSCHED_POLICY"); env && *env) {
      auto b = runtime::parse_backend(env);
      c.policies = {b == runtime::Backend::Coop ? sim::PolicyKind::Coop : sim::PolicyKind::Fair};
    }
  }
  if (!o.policies.empty()) {
    c.policies.clear();
    for (const auto& p : o.policies) c.policies.push_back(sim::parse_policy(p));
  }
  if (o.seed) c.seed = *o.seed;
  if (o.repeat) c.repeat = *o.repeat;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.workload.empty()) {
    c.workload.generator = "file";
    c.workload.path = o.workload;
    c.sweep.reset();
  }
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative scheduling simulator, runtime bench and trace checker"};
  app.require_subcommand(1);

  Overrides sim_o, bench_o, gen_o;
  auto* sim = app.add_subcommand("sim", "Simulate a workload under each policy");
  add_common(sim, sim_o, true);
  auto* bench = app.add_subcommand("bench", "Run a workload on real threads (COOPSCHED_POLICY selects the backend)");
  add_common(bench, bench_o, true);
  std::string trace_path;
  auto* check = app.add_subcommand("check", "Check a trace file against the scheduling invariants");
  check->add_option("trace", trace_path, "Trace file")->required();
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Write the generated workload document");
  add_common(gen, gen_o, false);
  gen->add_option("-o,--out", gen_out, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cli::cmd_sim(resolve(sim_o, false), {sim_o.expect_stall}, std::cout);
    if (*bench) return cli::cmd_bench(resolve(bench_o, true), {bench_o.expect_stall}, std::cout);
    if (*check) return cli::cmd_check(trace_path, std::cout, std::cerr);
    if (*gen) return cli::cmd_gen(resolve(gen_o, false), gen_out, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kBadInput;
  }
  return cli::kOk;
}
