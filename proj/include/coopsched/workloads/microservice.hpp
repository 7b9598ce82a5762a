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

#include <array>
#include <random>

namespace coopsched::workloads {

// Open-loop inference service. Each request runs a gateway task that fans out
// to three model servers in parallel and waits for all of them. A server
// handles a request with one team of inner_threads workers that runs every
// batch, each batch being `phases` compute steps separated by team barriers.
struct MicroserviceSpec {
  double request_rate = 10.0;  // requests per second, Poisson
  std::uint32_t n_requests = 28;
  // Team size and total CPU work per request for each server. The defaults
  // scale the 28/8/8-core teams on 112 cores down to 28 cores and keep the
  // 5.4 : 1.8 : 1.2 single-request times.
  std::array<std::uint32_t, 3> inner_threads{7, 2, 2};
  std::uint32_t batches = 8;
  // Barrier-separated compute phases per batch (one per BLAS call).
  std::uint32_t phases = 50;
  std::array<Nanos, 3> inference_cost{Nanos(378'000'000), Nanos(36'000'000), Nanos(24'000'000)};
  Nanos gateway_cost{200'000};
  BarrierKind barrier = BarrierKind::BusyYield;
  std::uint32_t yield_every = 100;
  // FAIR share weights (nice 0 against nice 19).
  double gateway_weight = 1024.0;
  double server_weight = 15.0;

  void validate() const {
    if (!(request_rate > 0)) throw Error("microservice: request_rate must be > 0");
    for (auto t : inner_threads)
      if (t == 0) throw Error("microservice: inner_threads must be > 0");
    if (batches == 0) throw Error("microservice: batches must be > 0");
    if (phases == 0) throw Error("microservice: phases must be > 0");
    if (yield_every == 0) throw Error("microservice: yield_every must be > 0");
    for (auto c : inference_cost)
      if (c < Nanos::zero()) throw Error("microservice: inference_cost must be >= 0");
    if (gateway_cost < Nanos::zero()) throw Error("microservice: gateway_cost must be >= 0");
    if (!(gateway_weight > 0) || !(server_weight > 0))
      throw Error("microservice: weights must be > 0");
  }
};

inline constexpr std::array<const char*, 3> kServerNames = {"llama", "gpt2", "roberta"};

inline sim::Workload gen_microservice(const MicroserviceSpec& s, std::uint64_t seed) {
  using sim::Segment;
  s.validate();
  sim::Workload w;
  w.name = "microservice";
  auto gateway_domain = w.add_domain("gateway", s.gateway_weight);

  std::array<std::uint32_t, 3> servers{};
  for (std::size_t k = 0; k < 3; ++k) {
    auto d = w.add_domain(kServerNames[k], s.server_weight);
    const auto per_phase = Nanos(s.inference_cost[k].count() /
                                 static_cast<std::int64_t>(s.batches * s.phases * s.inner_threads[k]));
    sim::Program worker;
    worker.name = std::string(kServerNames[k]) + "_worker";
    for (std::uint32_t b = 0; b < s.batches * s.phases; ++b) {
      worker.segments.push_back(Segment::compute(per_phase));
      worker.segments.push_back(barrier_wait(s.barrier, sim::local(0)));
    }
    worker.segments.push_back(Segment::finish());
    auto worker_id = w.add_program(worker);

    sim::Program server;
    server.name = kServerNames[k];
    server.locals.push_back(barrier_decl(s.barrier, s.inner_threads[k], s.yield_every));
    for (std::uint32_t t = 0; t < s.inner_threads[k]; ++t) server.segments.push_back(Segment::spawn(worker_id));
    server.segments.push_back(Segment::join_all());
    server.segments.push_back(Segment::finish());
    servers[k] = w.add_program(server);
    (void)d;
  }

  sim::Program gateway;
  gateway.name = "gateway";
  gateway.segments.push_back(Segment::compute(s.gateway_cost));
  for (std::uint32_t k = 0; k < 3; ++k) gateway.segments.push_back(Segment::spawn(servers[k], k + 1));
  gateway.segments.push_back(Segment::join_all());
  gateway.segments.push_back(Segment::finish());
  auto gateway_id = w.add_program(gateway);

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(s.request_rate);
  double t = 0;
  for (std::uint32_t r = 0; r < s.n_requests; ++r) {
    if (r > 0) t += gap(rng);
    sim::TaskDecl d;
    d.program = gateway_id;
    d.domain = gateway_domain;
    d.arrival = Nanos(static_cast<std::int64_t>(std::llround(t * 1e9)));
    d.request = true;
    w.add_task(d);
  }
  return w;
}

inline MicroserviceSpec microservice_spec_from_json(const Json& j,
                                                    const std::string& where = "microservice") {
  sim::detail::only_keys(j, where, {"request_rate", "n_requests", "inner_threads", "batches", "phases",
                                    "inference_cost_ns", "gateway_cost_ns", "barrier",
                                    "yield_every", "gateway_weight", "server_weight"});
  MicroserviceSpec s;
  detail::read(j, where, "request_rate", s.request_rate);
  detail::read(j, where, "n_requests", s.n_requests);
  if (j.contains("inner_threads")) {
    auto v = sim::detail::get_as<std::vector<std::uint32_t>>(j["inner_threads"], where + ".inner_threads");
    if (v.size() != 3) throw Error(where + ".inner_threads: expected 3 values");
    for (std::size_t k = 0; k < 3; ++k) s.inner_threads[k] = v[k];
  }
  detail::read(j, where, "batches", s.batches);
  detail::read(j, where, "phases", s.phases);
  if (j.contains("inference_cost_ns")) {
    auto v = sim::detail::get_as<std::vector<std::int64_t>>(j["inference_cost_ns"],
                                                            where + ".inference_cost_ns");
    if (v.size() != 3) throw Error(where + ".inference_cost_ns: expected 3 values");
    for (std::size_t k = 0; k < 3; ++k) s.inference_cost[k] = Nanos(v[k]);
  }
  detail::read_ns(j, where, "gateway_cost_ns", s.gateway_cost);
  detail::read_kind(j, where, "barrier", s.barrier);
  detail::read(j, where, "yield_every", s.yield_every);
  detail::read(j, where, "gateway_weight", s.gateway_weight);
  detail::read(j, where, "server_weight", s.server_weight);
  s.validate();
  return s;
}

}  // namespace coopsched::workloads
